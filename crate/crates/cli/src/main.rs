use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use declab::decoupling::full_report;
use declab::ekeland::{check_ekeland, ekeland_on_cloud, penalized_search};
use declab::gallery::{case, cases, run_gallery};
use declab::multiplier::{chain_rule_verify, intersection_rule_verify, multiplier_search, sum_rule_verify};
use declab::problem::Problem;
use declab::report::{combine, exit_code, traces_csv, Report};
use declab::semicontinuity::{certify, certify_near, certify_pair_of_sets, certify_relative, certify_relative_near, Firmness, LscProperty};
use declab::sparse_control::{approx_stationarity_check, sharp_stationarity_check, solve_sparse_oc, stationary_duals, ControlInstance};
use declab::subdifferential::{is_normal, is_subgradient, SubgradientQuery};
use declab::verdict::Trace;
use declab::{SampleScheme, Status};

/// Exit status for input errors (unreadable files, parse errors, bad arguments).
const EXIT_ERROR: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "declab", version, about = "Decoupled infima, lsc certificates and fuzzy calculus checks")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Debug, Clone)]
struct Global {
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// global absolute tolerance
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// print the JSON report on stdout
    #[arg(long, global = true)]
    json: bool,
    /// print the traces as CSV on stdout
    #[arg(long, global = true)]
    csv: bool,
    #[arg(long, global = true)]
    levels: Option<usize>,
    #[arg(long, global = true)]
    eta0: Option<f64>,
    #[arg(long = "diverge-threshold", global = true)]
    diverge: Option<f64>,
    /// write the JSON report to a file
    #[arg(long, global = true)]
    report: Option<PathBuf>,
    /// write the traces as CSV to a file
    #[arg(long, global = true)]
    trace: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// The five decoupling quantities and the coupled infimum
    Decouple {
        #[command(flatten)]
        pair: PairArgs,
    },
    /// Certify one lsc property of a pair, of a function relative to a set, or of two sets
    Certify {
        #[arg(long)]
        problem: PathBuf,
        #[arg(long, value_enum)]
        property: Property,
        #[arg(long, default_value = "f1")]
        f1: String,
        #[arg(long, default_value = "f2")]
        f2: String,
        /// region name; defaults to U, the only region, or the whole space
        #[arg(long)]
        region: Option<String>,
        /// certify near this point instead of on a region
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        near: Option<Vec<f64>>,
        /// certify f1 relative to this set
        #[arg(long)]
        relative: Option<String>,
        /// certify the indicator pair of two sets (uniform or firm variants only)
        #[arg(long, num_args = 2, value_names = ["SET1", "SET2"])]
        pair: Option<Vec<String>>,
    },
    /// Frechet subgradient or normal membership test
    Subdiff {
        #[arg(long)]
        problem: PathBuf,
        #[arg(long, conflicts_with = "set")]
        function: Option<String>,
        #[arg(long)]
        set: Option<String>,
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        at: Vec<f64>,
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        xstar: Vec<f64>,
    },
    /// Ekeland point of a finite cloud, or the penalized decoupled search at a point
    Ekeland {
        /// CSV rows of coordinates followed by the value (inf allowed)
        #[arg(long, conflicts_with = "problem")]
        cloud: Option<PathBuf>,
        #[arg(long)]
        problem: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        at: Vec<f64>,
        #[arg(long)]
        eps: f64,
        #[arg(long, default_value_t = 0.4)]
        delta: f64,
        #[arg(long, default_value_t = 0.05)]
        eta: f64,
    },
    /// Fuzzy multiplier search at a minimum of f1 + f2
    Multiplier {
        #[command(flatten)]
        pt: PointArgs,
        #[arg(long)]
        eps: f64,
        #[arg(long)]
        delta: f64,
        #[arg(long)]
        eta: f64,
    },
    /// Fuzzy sum rule for a subgradient of f1 + f2
    Sumrule {
        #[command(flatten)]
        pt: PointArgs,
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        xstar: Vec<f64>,
        #[arg(long)]
        eps: f64,
    },
    /// Fuzzy intersection rule for a normal to the intersection of two sets
    Intersect {
        #[arg(long)]
        problem: PathBuf,
        #[arg(long, num_args = 2, value_names = ["SET1", "SET2"])]
        sets: Vec<String>,
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        at: Vec<f64>,
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        xstar: Vec<f64>,
        #[arg(long)]
        eps: f64,
    },
    /// Fuzzy chain rule for f composed with a smooth map
    Chain {
        #[arg(long)]
        problem: PathBuf,
        #[arg(long, default_value = "f1")]
        function: String,
        #[arg(long)]
        map: String,
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        at: Vec<f64>,
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        xstar: Vec<f64>,
        #[arg(long)]
        eps: f64,
    },
    /// Sparse control instances given as JSON
    Control {
        #[arg(value_enum)]
        action: ControlAction,
        #[arg(long)]
        instance: PathBuf,
        /// point to check; defaults to the computed optimum
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        x: Option<Vec<f64>>,
        #[arg(long, default_value_t = 1e-6)]
        eps: f64,
    },
    /// Worked examples with known answers
    Gallery {
        /// case id, id prefix such as E3, or a pattern with *
        filter: Option<String>,
        /// list the cases and their expected values without running them
        #[arg(long)]
        list: bool,
    },
}

#[derive(Args, Debug)]
struct PairArgs {
    #[arg(long)]
    problem: PathBuf,
    #[arg(long, default_value = "f1")]
    f1: String,
    #[arg(long, default_value = "f2")]
    f2: String,
    #[arg(long)]
    region: Option<String>,
}

#[derive(Args, Debug)]
struct PointArgs {
    #[arg(long)]
    problem: PathBuf,
    #[arg(long, default_value = "f1")]
    f1: String,
    #[arg(long, default_value = "f2")]
    f2: String,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    at: Vec<f64>,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Property {
    Uniform,
    Quasiuniform,
    FirmUniform,
    FirmQuasiuniform,
}

impl From<Property> for LscProperty {
    fn from(p: Property) -> Self {
        match p {
            Property::Uniform => LscProperty::Uniform,
            Property::Quasiuniform => LscProperty::Quasiuniform,
            Property::FirmUniform => LscProperty::FirmUniform,
            Property::FirmQuasiuniform => LscProperty::FirmQuasiuniform,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum ControlAction {
    Solve,
    Check,
}

struct Outcome {
    status: Status,
    result: Value,
    text: String,
    traces: Vec<Trace>,
}

fn outcome<T: Serialize>(status: Status, result: &T, text: String, traces: Vec<Trace>) -> Result<Outcome> {
    Ok(Outcome { status, result: serde_json::to_value(result)?, text, traces })
}

fn scheme(g: &Global, p: Option<&Problem>) -> Result<SampleScheme> {
    let mut s = match p {
        Some(p) => p.scheme()?,
        None => SampleScheme::default(),
    };
    if let Some(v) = g.seed {
        s.seed = v;
    }
    if let Some(v) = g.tol {
        s.tol = v;
    }
    if let Some(v) = g.levels {
        s.levels = v;
    }
    if let Some(v) = g.eta0 {
        s.eta0 = v;
    }
    if let Some(v) = g.diverge {
        s.diverge = v;
    }
    Ok(s)
}

fn load(path: &PathBuf) -> Result<Problem> {
    let src = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Problem::parse(&src).map_err(|e| anyhow!("{}: {e}", path.display()))
}

fn fmt_point(p: &[f64]) -> String {
    format!("({})", p.iter().map(|v| format!("{v}")).collect::<Vec<_>>().join(", "))
}

fn run(cli: &Cli) -> Result<Outcome> {
    let g = &cli.global;
    match &cli.cmd {
        Cmd::Decouple { pair } => {
            let p = load(&pair.problem)?;
            let s = scheme(g, Some(&p))?;
            let u = match &pair.region {
                Some(r) => p.region(r)?,
                None => p.default_region()?,
            };
            let r = full_report(&p.function(&pair.f1)?, &p.function(&pair.f2)?, &u, &s, s.trace_tol)?;
            let v = &r.verdicts;
            let status = combine([&v.lambda, &v.lambda_circ, &v.lambda_dag, &v.theta_circ, &v.theta_dag, &v.inf_sum].map(|v| v.status));
            let mut text = String::new();
            for (name, val, verdict) in [
                ("lambda", r.lambda, &v.lambda),
                ("lambda_circ", r.lambda_circ, &v.lambda_circ),
                ("lambda_dag", r.lambda_dag, &v.lambda_dag),
                ("theta_circ", r.theta_circ, &v.theta_circ),
                ("theta_dag", r.theta_dag, &v.theta_dag),
                ("inf_sum", r.inf_sum, &v.inf_sum),
            ] {
                text.push_str(&format!("{name:<12} {val:<24} {:?}\n", verdict.status));
            }
            for n in &r.invariant_notes {
                text.push_str(&format!("note: {n}\n"));
            }
            let traces = r.traces.clone();
            outcome(status, &r, text, traces)
        }
        Cmd::Certify { problem, property, f1, f2, region, near, relative, pair } => {
            let p = load(problem)?;
            let s = scheme(g, Some(&p))?;
            let prop = LscProperty::from(*property);
            let u = || match region {
                Some(r) => p.region(r),
                None => p.default_region(),
            };
            let cert = if let Some(sets) = pair {
                let firmness = match prop {
                    LscProperty::FirmUniform => Firmness::Uniform,
                    LscProperty::FirmQuasiuniform => Firmness::Quasiuniform,
                    _ => bail!("set pairs are certified for the firm properties only"),
                };
                if near.is_some() {
                    bail!("--near is not available for set pairs");
                }
                certify_pair_of_sets(&p.set(&sets[0])?, &p.set(&sets[1])?, &u()?, firmness, &s)?
            } else if let Some(set) = relative {
                let (f, omega) = (p.function(f1)?, p.set(set)?);
                match near {
                    Some(x) => certify_relative_near(&f, &omega, x, prop, &s)?,
                    None => certify_relative(&f, &omega, &u()?, prop, &s)?,
                }
            } else {
                let (a, b) = (p.function(f1)?, p.function(f2)?);
                match near {
                    Some(x) => certify_near(&a, &b, x, prop, &s)?,
                    None => certify(&a, &b, &u()?, prop, &s)?,
                }
            };
            let mut text = format!("{prop}: {:?}\n", cert.status());
            for row in &cert.epsilon_eta_table {
                text.push_str(&format!("  eps {:<6} eta {:<12} {:?}\n", row.eps, row.eta.map_or("-".into(), |e| format!("{e:.3e}")), row.status));
            }
            if let Some(w) = &cert.witness {
                text.push_str(&format!("witness x1 = {}, x2 = {}, eps = {}, deficit = {}\n", fmt_point(&w.x1), fmt_point(&w.x2), w.eps, w.deficit));
            }
            let traces = cert.verdict.diagnostics.traces.clone();
            outcome(cert.status(), &cert, text, traces)
        }
        Cmd::Subdiff { problem, function, set, at, xstar } => {
            let p = load(problem)?;
            let s = scheme(g, Some(&p))?;
            let v = match (function, set) {
                (_, Some(set)) => is_normal(&p.set(set)?, at, xstar, s.tol)?,
                (f, None) => {
                    let f = p.function(f.as_deref().unwrap_or("f1"))?;
                    is_subgradient(&SubgradientQuery::new(&f, at, xstar), s.tol)?
                }
            };
            let text = format!("{} at {}: {:?}\n", fmt_point(xstar), fmt_point(at), v.status);
            let traces = v.diagnostics.traces.clone();
            outcome(v.status, &v, text, traces)
        }
        Cmd::Ekeland { cloud, problem, at, eps, delta, eta } => {
            if let Some(path) = cloud {
                let (pts, vals) = read_cloud(path)?;
                let base = if at.is_empty() { pts.first().cloned().ok_or_else(|| anyhow!("empty cloud"))? } else { at.clone() };
                let r = ekeland_on_cloud(&pts, &vals, &base, *eps)?;
                let (i, ii) = check_ekeland(&pts, &vals, &base, *eps, &r.xhat);
                let status = if i && ii { Status::Holds } else { Status::Fails };
                let text = format!("xhat = {} value {} (descent {} , strict {})\n", fmt_point(&r.xhat), r.value, i, ii);
                outcome(status, &r, text, vec![])
            } else {
                let path = problem.as_ref().ok_or_else(|| anyhow!("give --cloud or --problem"))?;
                let p = load(path)?;
                let s = scheme(g, Some(&p))?;
                let r = penalized_search(&p.function("f1")?, &p.function("f2")?, at, *eps, *delta, *eta, &s)?;
                let status = combine(r.checks.iter().map(|(_, ok)| if *ok { Status::Holds } else { Status::Fails }).chain([r.slope_bound_check.status]));
                let mut text = format!("xhat1 = {}, xhat2 = {}, gamma = {}, slope {:.4e} (bound {})\n", fmt_point(&r.xhat1), fmt_point(&r.xhat2), r.gamma, r.slope, r.slope_bound);
                for (name, ok) in &r.checks {
                    text.push_str(&format!("  {name}: {}\n", if *ok { "ok" } else { "violated" }));
                }
                outcome(status, &r, text, vec![])
            }
        }
        Cmd::Multiplier { pt, eps, delta, eta } => {
            let p = load(&pt.problem)?;
            let s = scheme(g, Some(&p))?;
            let o = multiplier_search(&p.function(&pt.f1)?, &p.function(&pt.f2)?, &pt.at, *eps, *delta, *eta, &s)?;
            fuzzy_outcome(o)
        }
        Cmd::Sumrule { pt, xstar, eps } => {
            let p = load(&pt.problem)?;
            let s = scheme(g, Some(&p))?;
            let o = sum_rule_verify(&p.function(&pt.f1)?, &p.function(&pt.f2)?, &pt.at, xstar, *eps, &s)?;
            fuzzy_outcome(o)
        }
        Cmd::Intersect { problem, sets, at, xstar, eps } => {
            let p = load(problem)?;
            let s = scheme(g, Some(&p))?;
            let o = intersection_rule_verify(&p.set(&sets[0])?, &p.set(&sets[1])?, at, xstar, *eps, &s)?;
            fuzzy_outcome(o)
        }
        Cmd::Chain { problem, function, map, at, xstar, eps } => {
            let p = load(problem)?;
            let s = scheme(g, Some(&p))?;
            let m = p.map(map)?;
            let o = chain_rule_verify(&p.function_on(function, m.out_dim)?, &m, at, xstar, *eps, &s)?;
            let text = match o.witness() {
                Some(w) => format!("found: xhat = {}, yhat = {}, y* = {}, residual {:e}\n", fmt_point(&w.xhat), fmt_point(&w.yhat), fmt_point(&w.ystar), w.residual),
                None => format!("not found: {:?}\n", o.status()),
            };
            outcome(o.status(), &o, text, vec![])
        }
        Cmd::Control { action, instance, x, eps } => {
            let src = std::fs::read_to_string(instance).with_context(|| format!("reading {}", instance.display()))?;
            let inst: ControlInstance = serde_json::from_str(&src).with_context(|| format!("parsing {}", instance.display()))?;
            let prob = inst.to_problem()?;
            let tol = g.tol.unwrap_or(1e-9);
            match action {
                ControlAction::Solve => {
                    let sol = solve_sparse_oc(&prob)?;
                    let sharp = sharp_stationarity_check(&prob, &sol.xopt, tol)?;
                    let text = format!("x = {}\nobjective = {}\nstationarity: {:?}\n", fmt_point(&sol.xopt), sol.objective, sharp.status);
                    outcome(sharp.status, &json!({ "solution": sol, "stationarity": sharp }), text, vec![])
                }
                ControlAction::Check => {
                    let xbar = match x {
                        Some(x) => x.clone(),
                        None => solve_sparse_oc(&prob)?.xopt,
                    };
                    let sharp = sharp_stationarity_check(&prob, &xbar, tol)?;
                    let (d1, d2) = stationary_duals(&prob, &xbar);
                    let approx = approx_stationarity_check(&prob, &xbar, &xbar, &d1, &d2, *eps, Some(&xbar))?;
                    let status = combine([sharp.status, approx.status]);
                    let text = format!("sharp: {:?}\napproximate (eps = {eps}): {:?}\n", sharp.status, approx.status);
                    outcome(status, &json!({ "x": xbar, "sharp": sharp, "approximate": approx }), text, vec![])
                }
            }
        }
        Cmd::Gallery { filter, list } => {
            if *list {
                let selected: Vec<_> = match filter {
                    Some(f) if !f.contains('*') && cases().iter().all(|c| !declab::gallery::matches_filter(c.id, f)) => vec![case(f)?],
                    _ => cases().into_iter().filter(|c| filter.as_deref().is_none_or(|f| declab::gallery::matches_filter(c.id, f))).collect(),
                };
                let mut text = String::new();
                for c in &selected {
                    text.push_str(&format!("{}: {}\n", c.id, c.problem));
                    for e in &c.expected {
                        text.push_str(&format!("  {} = {} [{:?}] {}\n", e.quantity, e.expected, e.provenance, e.citation));
                    }
                }
                let defs: Vec<Value> = selected.iter().map(|c| json!({ "id": c.id, "problem": c.problem, "expected": c.expected })).collect();
                return outcome(Status::Holds, &defs, text, vec![]);
            }
            let s = scheme(g, None)?;
            let summary = run_gallery(filter.as_deref(), &s);
            let status = if summary.all_pass() { Status::Holds } else { Status::Fails };
            outcome(status, &summary, summary.table(), vec![])
        }
    }
}

fn fuzzy_outcome(o: declab::multiplier::FuzzyOutcome) -> Result<Outcome> {
    let text = match o.witness() {
        Some(w) => format!(
            "found ({}): x1 = {}, x2 = {}, x1* = {}, x2* = {}, residual {:e} < {:e}\n",
            w.rule,
            fmt_point(&w.x1),
            fmt_point(&w.x2),
            fmt_point(&w.v1),
            fmt_point(&w.v2),
            w.residual,
            w.bound
        ),
        None => format!("not found: {:?}\n", o.status()),
    };
    outcome(o.status(), &o, text, vec![])
}

fn read_cloud(path: &PathBuf) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).comment(Some(b'#')).trim(csv::Trim::All).from_path(path)?;
    let (mut pts, mut vals) = (vec![], vec![]);
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let nums: Vec<f64> = rec.iter().map(|t| t.parse::<f64>()).collect::<std::result::Result<_, _>>().with_context(|| format!("row {}", k + 1))?;
        if nums.len() < 2 {
            bail!("row {}: need coordinates and a value", k + 1);
        }
        vals.push(nums[nums.len() - 1]);
        pts.push(nums[..nums.len() - 1].to_vec());
    }
    Ok((pts, vals))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let out = match run(&cli) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(EXIT_ERROR);
        }
    };
    let g = &cli.global;
    let name = format!("{:?}", cli.cmd).split([' ', '{']).next().unwrap_or("").to_lowercase();
    let report = Report::new(&name, g.seed.unwrap_or(0), out.status, &out.result);
    let emit = || -> Result<()> {
        let json = report.to_json()?;
        if let Some(path) = &g.report {
            std::fs::write(path, &json).with_context(|| format!("writing {}", path.display()))?;
        }
        if let Some(path) = &g.trace {
            std::fs::write(path, traces_csv(&out.traces)?).with_context(|| format!("writing {}", path.display()))?;
        }
        if g.json {
            println!("{json}");
        }
        if g.csv {
            print!("{}", traces_csv(&out.traces)?);
        }
        if !g.json && !g.csv {
            print!("{}", out.text);
        }
        Ok(())
    };
    if let Err(e) = emit() {
        eprintln!("error: {e:#}");
        return ExitCode::from(EXIT_ERROR);
    }
    ExitCode::from(exit_code(out.status) as u8)
}
