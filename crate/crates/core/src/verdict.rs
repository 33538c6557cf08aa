//! Three-valued outcomes with the evidence behind them.

use serde::Serialize;

use crate::extreal::ExtReal;
use crate::geometry::Point;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Status {
    Holds,
    Fails,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Witness {
    pub points: Vec<Point>,
    pub values: Vec<ExtReal>,
    pub note: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Trend {
    Increasing,
    Decreasing,
    Flat,
    Oscillating,
    Single,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceClass {
    Converged,
    DivergedDown,
    DivergedUp,
    Unsettled,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TracePoint {
    pub level: usize,
    /// coupling distance, radius or epsilon, depending on the trace
    pub param: f64,
    pub value: ExtReal,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trace {
    pub label: String,
    pub points: Vec<TracePoint>,
}

impl Trace {
    pub fn new(label: impl Into<String>) -> Self {
        Trace { label: label.into(), points: vec![] }
    }

    pub fn push(&mut self, level: usize, param: f64, value: ExtReal, samples: usize) {
        self.points.push(TracePoint { level, param, value, samples });
    }

    pub fn last(&self) -> Option<ExtReal> {
        self.points.last().map(|p| p.value)
    }

    pub fn values(&self) -> Vec<ExtReal> {
        self.points.iter().map(|p| p.value).collect()
    }

    pub fn trend(&self) -> Trend {
        trend_of(&self.values())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Resolution {
    pub level: usize,
    pub samples: usize,
    pub trend: Trend,
}

#[derive(Debug, Clone, PartialEq, Serialize, Default)]
pub struct Diagnostics {
    pub traces: Vec<Trace>,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub status: Status,
    pub witness: Option<Witness>,
    pub resolution: Option<Resolution>,
    pub diagnostics: Diagnostics,
}

impl Verdict {
    pub fn holds(diagnostics: Diagnostics) -> Self {
        Verdict { status: Status::Holds, witness: None, resolution: None, diagnostics }
    }

    pub fn fails(witness: Witness, diagnostics: Diagnostics) -> Self {
        Verdict { status: Status::Fails, witness: Some(witness), resolution: None, diagnostics }
    }

    pub fn inconclusive(resolution: Resolution, diagnostics: Diagnostics) -> Self {
        Verdict { status: Status::Inconclusive, witness: None, resolution: Some(resolution), diagnostics }
    }

    pub fn is_holds(&self) -> bool {
        self.status == Status::Holds
    }

    pub fn is_fails(&self) -> bool {
        self.status == Status::Fails
    }

    pub fn note(mut self, n: impl Into<String>) -> Self {
        self.diagnostics.notes.push(n.into());
        self
    }

    /// Downgrade to INCONCLUSIVE keeping the traces.
    pub fn downgrade(self, why: impl Into<String>) -> Self {
        if self.status == Status::Inconclusive {
            return self.note(why);
        }
        let res = self.diagnostics.traces.first().map_or(
            Resolution { level: 0, samples: 0, trend: Trend::Single },
            |t| Resolution {
                level: t.points.last().map_or(0, |p| p.level),
                samples: t.points.last().map_or(0, |p| p.samples),
                trend: t.trend(),
            },
        );
        let mut d = self.diagnostics;
        d.notes.push(why.into());
        Verdict::inconclusive(res, d)
    }
}

pub fn trend_of(vals: &[ExtReal]) -> Trend {
    if vals.len() < 2 {
        return Trend::Single;
    }
    let (mut up, mut down) = (false, false);
    for w in vals.windows(2) {
        if w[1] > w[0] {
            up = true;
        } else if w[1] < w[0] {
            down = true;
        }
    }
    match (up, down) {
        (true, false) => Trend::Increasing,
        (false, true) => Trend::Decreasing,
        (false, false) => Trend::Flat,
        (true, true) => {
            let n = vals.len();
            if vals[n - 1] > vals[n - 2] {
                Trend::Increasing
            } else if vals[n - 1] < vals[n - 2] {
                Trend::Decreasing
            } else {
                Trend::Oscillating
            }
        }
    }
}

/// Reads the limit off a trace: below -M is -inf, above M is +inf, two final values
/// within `tol` converge, anything else is unsettled (the last value is still returned).
pub fn classify_trace(trace: &Trace, tol: f64, m: f64) -> (ExtReal, TraceClass) {
    let vals = trace.values();
    let Some(&last) = vals.last() else {
        return (ExtReal::PosInf, TraceClass::Unsettled);
    };
    if last <= ExtReal::Finite(-m) {
        return (ExtReal::NegInf, TraceClass::DivergedDown);
    }
    if last >= ExtReal::Finite(m) {
        return (ExtReal::PosInf, TraceClass::DivergedUp);
    }
    if vals.len() >= 2 && last.approx_eq(vals[vals.len() - 2], tol) {
        return (last, TraceClass::Converged);
    }
    (last, TraceClass::Unsettled)
}

/// Verdict attached to a traced quantity: HOLDS (the limit was read) for converged or
/// diverged traces, INCONCLUSIVE otherwise.
pub fn trace_verdict(trace: Trace, class: TraceClass, one_sided: &str) -> Verdict {
    let trend = trace.trend();
    let (level, samples) = trace.points.last().map_or((0, 0), |p| (p.level, p.samples));
    let diag = Diagnostics { traces: vec![trace], notes: vec![one_sided.to_string()] };
    match class {
        TraceClass::Converged => Verdict::holds(diag).note("trace converged"),
        TraceClass::DivergedDown => Verdict::holds(diag).note("trace diverged to -inf"),
        TraceClass::DivergedUp => Verdict::holds(diag).note("trace diverged to +inf"),
        TraceClass::Unsettled => Verdict::inconclusive(Resolution { level, samples, trend }, diag),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trace(vals: &[f64]) -> Trace {
        let mut t = Trace::new("t");
        for (i, v) in vals.iter().enumerate() {
            t.push(i, 0.0, ExtReal::from(*v), 1);
        }
        t
    }

    #[test]
    fn classification() {
        assert_eq!(classify_trace(&trace(&[1.0, -2e6]), 1e-3, 1e6).1, TraceClass::DivergedDown);
        assert_eq!(classify_trace(&trace(&[1.0, 3e6]), 1e-3, 1e6).0, ExtReal::PosInf);
        assert_eq!(classify_trace(&trace(&[0.5, 0.1, 0.1005]), 1e-3, 1e6).1, TraceClass::Converged);
        assert_eq!(classify_trace(&trace(&[0.5, 0.1]), 1e-3, 1e6).1, TraceClass::Unsettled);
    }

    #[test]
    fn inconclusive_carries_resolution() {
        let v = trace_verdict(trace(&[3.0, 2.0, 1.0]), TraceClass::Unsettled, "upper estimate");
        assert_eq!(v.status, Status::Inconclusive);
        let r = v.resolution.unwrap();
        assert_eq!((r.level, r.trend), (2, Trend::Decreasing));
    }
}
