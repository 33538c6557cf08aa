//! JSON reports, CSV traces and the exit-code convention.

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::verdict::{Status, Trace};

/// Top-level JSON document of one command run.
#[derive(Debug, Clone, Serialize)]
pub struct Report<T: Serialize> {
    pub command: String,
    pub seed: u64,
    pub status: Status,
    pub result: T,
}

impl<T: Serialize> Report<T> {
    pub fn new(command: &str, seed: u64, status: Status, result: T) -> Self {
        Report { command: command.into(), seed, status, result }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Io(e.to_string()))
    }
}

/// FAILS dominates INCONCLUSIVE, which dominates HOLDS. No statuses means HOLDS.
pub fn combine(statuses: impl IntoIterator<Item = Status>) -> Status {
    statuses.into_iter().fold(Status::Holds, |acc, s| match (acc, s) {
        (Status::Fails, _) | (_, Status::Fails) => Status::Fails,
        (Status::Inconclusive, _) | (_, Status::Inconclusive) => Status::Inconclusive,
        _ => Status::Holds,
    })
}

pub fn exit_code(s: Status) -> i32 {
    match s {
        Status::Holds => 0,
        Status::Fails => 1,
        Status::Inconclusive => 2,
    }
}

/// One row per trace point: label, level, param, value, samples.
pub fn write_traces_csv<W: Write>(traces: &[Trace], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let io = |e: csv::Error| Error::Io(e.to_string());
    out.write_record(["label", "level", "param", "value", "samples"]).map_err(io)?;
    for t in traces {
        for p in &t.points {
            out.write_record([t.label.clone(), p.level.to_string(), format!("{:e}", p.param), p.value.to_string(), p.samples.to_string()])
                .map_err(io)?;
        }
    }
    out.flush().map_err(|e| Error::Io(e.to_string()))
}

pub fn traces_csv(traces: &[Trace]) -> Result<String> {
    let mut buf = Vec::new();
    write_traces_csv(traces, &mut buf)?;
    String::from_utf8(buf).map_err(|e| Error::Io(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extreal::ExtReal;

    #[test]
    fn status_precedence() {
        assert_eq!(combine([]), Status::Holds);
        assert_eq!(combine([Status::Holds, Status::Inconclusive]), Status::Inconclusive);
        assert_eq!(combine([Status::Inconclusive, Status::Fails, Status::Holds]), Status::Fails);
        assert_eq!(exit_code(Status::Inconclusive), 2);
    }

    #[test]
    fn csv_rows() {
        let mut t = Trace::new("lambda_circ");
        t.push(0, 0.1, ExtReal::Finite(-0.5), 21);
        t.push(1, 0.05, ExtReal::NegInf, 41);
        let s = traces_csv(&[t]).unwrap();
        assert_eq!(s, "label,level,param,value,samples\nlambda_circ,0,1e-1,-0.5,21\nlambda_circ,1,5e-2,-inf,41\n");
    }
}
