//! Worked examples with known answers, and a runner comparing computed values to them.

use std::fmt;

use rayon::prelude::*;
use serde::Serialize;

use crate::decoupling::{diamond, full_report, theta_dag, DecouplingReport};
use crate::dual::{DualSet, GenPiece};
use crate::error::{Error, Result};
use crate::extreal::ExtReal;
use crate::multiplier::{intersection_rule_verify, multiplier_search, FuzzyOutcome, FuzzyWitness};
use crate::oracle::{FnOracle, SetOracle};
use crate::region::Region;
use crate::sampling::SampleScheme;
use crate::semicontinuity::{certify, certify_pair_of_sets, certify_relative, certify_relative_near, subtransversality_modulus, Firmness, LscProperty};
use crate::sparse_control::{box_set, support_measure_oracle, CellSpace};
use crate::verdict::Status;

fn on_parabola(x: f64, y: f64) -> bool {
    (y - x * x).abs() <= 1e-12 * (1.0 + y.abs())
}

/// -x on the epigraph of x^2, +inf below it.
pub fn parabola_linear() -> FnOracle {
    FnOracle::new(2, "-x on y >= x^2", |p| if p[1] >= p[0] * p[0] { -p[0] } else { f64::INFINITY }).with_subgrad(|p| {
        if p[1] < p[0] * p[0] {
            DualSet::empty()
        } else if on_parabola(p[0], p[1]) {
            DualSet::piece(GenPiece::point(vec![-1.0, 0.0]).ray(vec![2.0 * p[0], -1.0]))
        } else {
            DualSet::point(vec![-1.0, 0.0])
        }
    })
}

/// Indicator of the lower half-plane y <= 0.
pub fn lower_half_plane() -> FnOracle {
    FnOracle::indicator(&SetOracle::halfspace(vec![0.0, 1.0], 0.0))
}

/// 0 for x <= 0, 1 for x > 0.
pub fn step() -> FnOracle {
    FnOracle::new(1, "step", |x| if x[0] <= 0.0 { 0.0 } else { 1.0 })
}

/// delta/(delta - x) and delta/(x - delta) left of delta, +inf from delta on.
pub fn pole_pair(delta: f64) -> (FnOracle, FnOracle) {
    (
        FnOracle::new(1, "delta/(delta-x)", move |x| if x[0] < delta { delta / (delta - x[0]) } else { f64::INFINITY }),
        FnOracle::new(1, "delta/(x-delta)", move |x| if x[0] < delta { delta / (x[0] - delta) } else { f64::INFINITY }),
    )
}

/// 0 at the origin, 1/x on x > 0, +inf elsewhere; the partner is its mirror image.
pub fn mirrored_reciprocals() -> (FnOracle, FnOracle) {
    let g = |x: f64, y: f64| {
        if x == 0.0 && y == 0.0 {
            0.0
        } else if x > 0.0 {
            1.0 / x
        } else {
            f64::INFINITY
        }
    };
    (
        FnOracle::new(2, "1/x on x > 0", move |p| g(p[0], p[1])),
        FnOracle::new(2, "1/(-x) on x < 0", move |p| g(-p[0], p[1])),
    )
}

/// Indicator of x <= 0 and 1/x on x > 0: disjoint domains.
pub fn disjoint_domains() -> (FnOracle, FnOracle) {
    (
        FnOracle::new(1, "ind(x <= 0)", |x| if x[0] <= 0.0 { 0.0 } else { f64::INFINITY }),
        FnOracle::new(1, "1/x on x > 0", |x| if x[0] > 0.0 { 1.0 / x[0] } else { f64::INFINITY }),
    )
}

/// -1 above the axis, 0 on it, +inf below.
pub fn jump_above_axis() -> FnOracle {
    FnOracle::new(2, "-1 above, 0 on the axis", |p| {
        if p[1] > 0.0 {
            -1.0
        } else if p[1] == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    })
}

/// |x|^2 on R^n.
pub fn squared_norm(dim: usize) -> FnOracle {
    FnOracle::new(dim, "|x|^2", |x| x.iter().map(|t| t * t).sum()).with_subgrad(|x| DualSet::point(x.iter().map(|t| 2.0 * t).collect()))
}

/// Support measure on two unit cells and the box [-1, 1]^2.
pub fn support_measure_in_box() -> Result<(FnOracle, SetOracle)> {
    let space = CellSpace::uniform(2, 2.0)?;
    Ok((support_measure_oracle(&space), box_set(&[-1.0, -1.0], &[1.0, 1.0])?))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    /// stated in a worked example of the source text
    Worked,
    /// computed by hand from the definitions
    Derived,
    Trivial,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Expected {
    Value(f64),
    PosInf,
    NegInf,
    AtLeast(f64),
    AtMost(f64),
    Status(Status),
    /// an error whose message contains this text
    Error(String),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExpectedValue {
    pub quantity: &'static str,
    pub expected: Expected,
    pub tol: f64,
    pub provenance: Provenance,
    pub citation: &'static str,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Computed {
    Value(ExtReal),
    Status(Status),
    Error(String),
}

impl fmt::Display for Computed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Computed::Value(v) => write!(f, "{v}"),
            Computed::Status(s) => write!(f, "{s:?}"),
            Computed::Error(e) => write!(f, "error: {e}"),
        }
    }
}

impl fmt::Display for Expected {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expected::Value(v) => write!(f, "{v}"),
            Expected::PosInf => write!(f, "+inf"),
            Expected::NegInf => write!(f, "-inf"),
            Expected::AtLeast(v) => write!(f, ">= {v}"),
            Expected::AtMost(v) => write!(f, "<= {v}"),
            Expected::Status(s) => write!(f, "{s:?}"),
            Expected::Error(e) => write!(f, "error containing '{e}'"),
        }
    }
}

impl Expected {
    pub fn matches(&self, c: &Computed, tol: f64) -> bool {
        match (self, c) {
            (Expected::Value(v), Computed::Value(ExtReal::Finite(x))) => (x - v).abs() <= tol,
            (Expected::PosInf, Computed::Value(x)) => *x == ExtReal::PosInf,
            (Expected::NegInf, Computed::Value(x)) => *x == ExtReal::NegInf,
            (Expected::AtLeast(v), Computed::Value(x)) => x.to_f64() >= v - tol,
            (Expected::AtMost(v), Computed::Value(x)) => x.to_f64() <= v + tol,
            (Expected::Status(s), Computed::Status(t)) => s == t,
            (Expected::Error(e), Computed::Error(m)) => m.contains(e.as_str()),
            _ => false,
        }
    }
}

type Runner = fn(&SampleScheme) -> Vec<(&'static str, Computed)>;

#[derive(Clone)]
pub struct GalleryCase {
    pub id: &'static str,
    pub problem: &'static str,
    pub expected: Vec<ExpectedValue>,
    run: Runner,
}

impl fmt::Debug for GalleryCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GalleryCase").field("id", &self.id).field("problem", &self.problem).field("expected", &self.expected).finish()
    }
}

impl GalleryCase {
    /// Computed quantities by name; a quantity missing from the output counts as failed.
    pub fn compute(&self, scheme: &SampleScheme) -> Vec<(&'static str, Computed)> {
        (self.run)(scheme)
    }
}

const SAMPLED: f64 = 5e-2;
const EXACT: f64 = 1e-9;

fn ev(quantity: &'static str, expected: Expected, tol: f64, provenance: Provenance, citation: &'static str) -> ExpectedValue {
    ExpectedValue { quantity, expected, tol, provenance, citation }
}

fn val<T>(r: Result<T>, f: impl FnOnce(T) -> ExtReal) -> Computed {
    match r {
        Ok(t) => Computed::Value(f(t)),
        Err(e) => Computed::Error(e.to_string()),
    }
}

fn status<T>(r: Result<T>, f: impl FnOnce(T) -> Status) -> Computed {
    match r {
        Ok(t) => Computed::Status(f(t)),
        Err(e) => Computed::Error(e.to_string()),
    }
}

fn report_rows(r: Result<DecouplingReport>, names: &[&'static str]) -> Vec<(&'static str, Computed)> {
    match r {
        Ok(rep) => names.iter().map(|n| (*n, Computed::Value(rep.get(n).expect("known quantity")))).collect(),
        Err(e) => names.iter().map(|n| (*n, Computed::Error(e.to_string()))).collect(),
    }
}

const FIVE: [&str; 6] = ["lambda", "lambda_circ", "lambda_dag", "theta_circ", "theta_dag", "inf_sum"];

fn ball(c: &[f64], r: f64) -> Region {
    Region::open_ball(c.to_vec(), r).expect("valid ball")
}

fn run_e31(s: &SampleScheme) -> Vec<(&'static str, Computed)> {
    report_rows(full_report(&parabola_linear(), &lower_half_plane(), &ball(&[0.0, 0.0], 0.5), s, s.trace_tol), &FIVE)
}

fn run_e32(s: &SampleScheme) -> Vec<(&'static str, Computed)> {
    let (f1, f2, u) = (step(), FnOracle::constant(1, 0.0), Region::boxed(vec![0.0], vec![1.0]).expect("box"));
    let mut out = report_rows(full_report(&f1, &f2, &u, s, s.trace_tol), &FIVE);
    out.push(("diamond(0, 0.4)", val(diamond(&f1, &f2, &u, &[0.0], &[0.4], s), |d| d.value)));
    out.push(("diamond(0.2, 0.4)", val(diamond(&f1, &f2, &u, &[0.2], &[0.4], s), |d| d.value)));
    out
}

fn run_e33(s: &SampleScheme) -> Vec<(&'static str, Computed)> {
    let (f1, f2) = pole_pair(1.0);
    report_rows(full_report(&f1, &f2, &ball(&[0.0], 1.0), s, s.trace_tol), &["lambda", "lambda_circ", "lambda_dag", "theta_circ", "theta_dag"])
}

fn run_e34(s: &SampleScheme) -> Vec<(&'static str, Computed)> {
    let (f1, f2) = mirrored_reciprocals();
    let u = ball(&[0.0, 0.0], 1.0);
    let cert = certify(&f1, &f2, &u, LscProperty::FirmQuasiuniform, s);
    let mirror = val(cert.clone(), |c| match c.witness {
        Some(w) => ExtReal::Finite((w.x1[0] + w.x2[0]).abs() + (w.x1[1] - w.x2[1]).abs()),
        None => ExtReal::PosInf,
    });
    vec![
        ("theta_dag", val(theta_dag(&f1, &f2, &u, s), |r| r.0)),
        ("firm_quasiuniform", status(cert, |c| c.status())),
        ("witness mirror defect", mirror),
    ]
}

fn run_e35(s: &SampleScheme) -> Vec<(&'static str, Computed)> {
    let (f1, f2) = disjoint_domains();
    vec![("full_report", status(full_report(&f1, &f2, &ball(&[0.0], 1.0), s, s.trace_tol), |_| Status::Holds))]
}

fn run_e51(s: &SampleScheme) -> Vec<(&'static str, Computed)> {
    let (f, omega) = match support_measure_in_box() {
        Ok(p) => p,
        Err(e) => return vec![("firm_uniform near (0.5, 0)", Computed::Error(e.to_string()))],
    };
    let near = |x: &[f64]| status(certify_relative_near(&f, &omega, x, LscProperty::FirmUniform, s), |c| c.status());
    vec![("firm_uniform near (0.5, 0)", near(&[0.5, 0.0])), ("firm_uniform near (0, 0)", near(&[0.0, 0.0]))]
}

fn run_e52(s: &SampleScheme) -> Vec<(&'static str, Computed)> {
    let u = Region::Set(SetOracle::parabola_epigraph(1.0));
    let sw = s.clone().with_window(vec![-1.0, -0.5], vec![1.0, 1.5]);
    let omega = SetOracle::halfspace(vec![0.0, 1.0], 0.0);
    let f = jump_above_axis();
    vec![
        ("uniform", status(certify_relative(&f, &omega, &u, LscProperty::Uniform, &sw), |c| c.status())),
        ("firm_quasiuniform", status(certify_relative(&f, &omega, &u, LscProperty::FirmQuasiuniform, &sw), |c| c.status())),
    ]
}

fn run_e53(s: &SampleScheme) -> Vec<(&'static str, Computed)> {
    let o1 = SetOracle::parabola_epigraph(1.0);
    let o2 = SetOracle::halfspace(vec![0.0, 1.0], 0.0);
    vec![
        ("subtransversality", status(subtransversality_modulus(&o1, &o2, &[0.0, 0.0], 0.5, s), |m| m.verdict.status)),
        ("pair firm uniform", status(certify_pair_of_sets(&o1, &o2, &ball(&[0.0, 0.0], 0.5), Firmness::Uniform, s), |c| c.status())),
    ]
}

fn fuzzy_rows(o: Result<FuzzyOutcome>, form: impl Fn(&FuzzyWitness) -> f64) -> Vec<(&'static str, Computed)> {
    match o {
        Ok(FuzzyOutcome::Found(w)) => vec![
            ("residual", Computed::Value(ExtReal::Finite(w.residual))),
            ("radius", Computed::Value(ExtReal::Finite(w.radius(&[0.0, 0.0])))),
            ("form defect", Computed::Value(ExtReal::Finite(form(&w)))),
        ],
        Ok(FuzzyOutcome::NotFound(v)) => vec![("residual", Computed::Status(v.status))],
        Err(e) => vec![("residual", Computed::Error(e.to_string()))],
    }
}

/// Distance of (v1, v2) from the pair ((2 a x - c, -a), (0, a)) with a = -v1[1], x = x1[0].
fn parabola_form(w: &FuzzyWitness, c: f64) -> f64 {
    let a = -w.v1[1];
    let want = [2.0 * a * w.x1[0] - c, -a, 0.0, a];
    let got = [w.v1[0], w.v1[1], w.v2[0], w.v2[1]];
    let on_curves = (w.x1[1] - w.x1[0] * w.x1[0]).abs() + w.x2[1].abs();
    let neg = if a < 0.0 { -a } else { 0.0 };
    want.iter().zip(got).map(|(p, q)| (p - q).abs()).fold(on_curves + neg, f64::max)
}

fn run_s6(s: &SampleScheme) -> Vec<(&'static str, Computed)> {
    let o = multiplier_search(&parabola_linear(), &lower_half_plane(), &[0.0, 0.0], 0.1, 0.1, 0.1, s);
    fuzzy_rows(o, |w| parabola_form(w, 1.0))
}

fn run_s7(s: &SampleScheme) -> Vec<(&'static str, Computed)> {
    let o1 = SetOracle::parabola_epigraph(1.0);
    let o2 = SetOracle::halfspace(vec![0.0, 1.0], 0.0);
    let o = intersection_rule_verify(&o1, &o2, &[0.0, 0.0], &[1.0, 0.0], 0.25, s);
    fuzzy_rows(o, |w| parabola_form(w, 0.0))
}

fn run_quadratic(s: &SampleScheme) -> Vec<(&'static str, Computed)> {
    report_rows(full_report(&squared_norm(2), &lower_half_plane(), &ball(&[0.0, 0.0], 0.5), s, s.trace_tol), &FIVE)
}

/// All cases, ordered by id.
pub fn cases() -> Vec<GalleryCase> {
    use Provenance::*;
    let e31 = "the five decoupling quantities of the parabola pair all vanish";
    let e32 = "step function on [0, 1]: only the quasiuniform infimum is 1";
    let e33 = "pole pair: uniform infima diverge, quasiuniform ones vanish";
    let five = |c: &'static str| -> Vec<ExpectedValue> { FIVE.iter().map(|q| ev(q, Expected::Value(0.0), SAMPLED, Worked, c)).collect() };
    vec![
        GalleryCase {
            id: "E3.1",
            problem: "f1 = -x on y >= x^2 (else +inf), f2 = indicator of y <= 0, U = open ball of radius 0.5 at 0",
            expected: five(e31),
            run: run_e31,
        },
        GalleryCase {
            id: "E3.2",
            problem: "f1 = step (0 for x <= 0, 1 for x > 0), f2 = 0, U = [0, 1]",
            expected: vec![
                ev("lambda", Expected::Value(0.0), SAMPLED, Worked, e32),
                ev("lambda_circ", Expected::Value(0.0), SAMPLED, Worked, e32),
                ev("lambda_dag", Expected::Value(1.0), SAMPLED, Worked, e32),
                ev("theta_circ", Expected::Value(0.0), SAMPLED, Worked, e32),
                ev("theta_dag", Expected::Value(0.0), SAMPLED, Worked, e32),
                ev("inf_sum", Expected::Value(0.0), SAMPLED, Derived, "f1 + f2 vanishes at x = 0"),
                ev("diamond(0, 0.4)", Expected::Value(0.4), 1e-3, Worked, "coupling value x2 - x1 when x1 = 0"),
                ev("diamond(0.2, 0.4)", Expected::Value(0.1), 1e-3, Worked, "coupling value |x2 - x1|/2 when x1 > 0"),
            ],
            run: run_e32,
        },
        GalleryCase {
            id: "E3.3",
            problem: "f1 = 1/(1 - x), f2 = 1/(x - 1) left of 1, +inf from 1 on, U = (-1, 1)",
            expected: vec![
                ev("lambda", Expected::NegInf, 0.0, Worked, e33),
                ev("lambda_circ", Expected::NegInf, 0.0, Worked, e33),
                ev("lambda_dag", Expected::Value(0.0), SAMPLED, Worked, e33),
                ev("theta_circ", Expected::PosInf, 0.0, Worked, e33),
                ev("theta_dag", Expected::Value(0.0), SAMPLED, Worked, e33),
            ],
            run: run_e33,
        },
        GalleryCase {
            id: "E3.4",
            problem: "f1 = 1/x on x > 0, f2 = its mirror image, both 0 at the origin, U = unit ball",
            expected: vec![
                ev("theta_dag", Expected::AtLeast(1.0), SAMPLED, Worked, "mirrored reciprocals: firm quasiuniform quantity at least the radius"),
                ev("firm_quasiuniform", Expected::Status(Status::Fails), 0.0, Derived, "the firm quantity is positive, so the firm property fails"),
                ev("witness mirror defect", Expected::Value(0.0), EXACT, Derived, "failing pairs are mirror images (t, r), (-t, r)"),
            ],
            run: run_e34,
        },
        GalleryCase {
            id: "E3.5",
            problem: "f1 = indicator of x <= 0, f2 = 1/x on x > 0, U = (-1, 1)",
            expected: vec![ev(
                "full_report",
                Expected::Error("precondition failed".into()),
                0.0,
                Worked,
                "disjoint domains: the common-domain condition fails",
            )],
            run: run_e35,
        },
        GalleryCase {
            id: "E5.1",
            problem: "support measure on two unit cells relative to the box [-1, 1]^2",
            expected: vec![
                ev("firm_uniform near (0.5, 0)", Expected::Status(Status::Holds), 0.0, Worked, "support measure is firmly uniformly lsc relative to a box near any feasible point"),
                ev("firm_uniform near (0, 0)", Expected::Status(Status::Holds), 0.0, Worked, "support measure is firmly uniformly lsc relative to a box near any feasible point"),
            ],
            run: run_e51,
        },
        GalleryCase {
            id: "E5.2",
            problem: "f = -1 above the axis, 0 on it, +inf below; Omega = {y <= 0}; U = {y >= x^2}",
            expected: vec![
                ev("uniform", Expected::Status(Status::Fails), 0.0, Worked, "jump above the axis: not uniformly lsc relative to the half-plane"),
                ev("firm_quasiuniform", Expected::Status(Status::Holds), 0.0, Worked, "jump above the axis: firmly quasiuniformly lsc relative to the half-plane"),
            ],
            run: run_e52,
        },
        GalleryCase {
            id: "E5.3",
            problem: "Omega1 = {y >= x^2}, Omega2 = {y <= 0}, U = open ball of radius 0.5 at 0",
            expected: vec![
                ev("subtransversality", Expected::Status(Status::Fails), 0.0, Worked, "parabola and half-plane are not subtransversal at the origin"),
                ev("pair firm uniform", Expected::Status(Status::Holds), 0.0, Worked, "the indicator pair is firmly uniformly lsc"),
            ],
            run: run_e53,
        },
        GalleryCase {
            id: "Q",
            problem: "f1 = |x|^2, f2 = indicator of y <= 0, U = open ball of radius 0.5 at 0",
            expected: five("strictly convex sum with minimum 0 at the origin"),
            run: run_quadratic,
        },
        GalleryCase {
            id: "S6",
            problem: "parabola pair at the origin, multiplier search with eps = delta = eta = 0.1",
            expected: vec![
                ev("residual", Expected::Value(0.0), 0.0, Worked, "(0,0) = (2ax - 1, -a) + (0, a) with a = 1/(2x)"),
                ev("radius", Expected::AtMost(0.25), 0.0, Derived, "witness points within the search radius"),
                ev("form defect", Expected::Value(0.0), EXACT, Worked, "subgradients have the form (2ax - 1, -a) and (0, a)"),
            ],
            run: run_s6,
        },
        GalleryCase {
            id: "S7",
            problem: "parabola epigraph and half-plane at the origin, normal (1, 0), eps = 0.25",
            expected: vec![
                ev("residual", Expected::Value(0.0), 0.0, Worked, "(1,0) = (2ax, -a) + (0, a) with a = 1/(2x)"),
                ev("radius", Expected::AtMost(0.25), 0.0, Derived, "witness points within the search radius"),
                ev("form defect", Expected::Value(0.0), EXACT, Worked, "normals have the form (2ax, -a) and (0, a)"),
            ],
            run: run_s7,
        },
    ]
}

pub fn case(id: &str) -> Result<GalleryCase> {
    cases().into_iter().find(|c| c.id == id).ok_or_else(|| Error::UnknownCase(id.into()))
}

/// `E3` selects E3.1 .. E3.5; `*` matches any run of characters.
pub fn matches_filter(id: &str, filter: &str) -> bool {
    if filter.contains('*') {
        let parts: Vec<&str> = filter.split('*').collect();
        let mut rest = id;
        for (i, p) in parts.iter().enumerate() {
            if i == 0 {
                match rest.strip_prefix(p) {
                    Some(r) => rest = r,
                    None => return false,
                }
            } else if i == parts.len() - 1 {
                return rest.ends_with(p);
            } else {
                match rest.find(p) {
                    Some(k) => rest = &rest[k + p.len()..],
                    None => return false,
                }
            }
        }
        rest.is_empty()
    } else {
        id == filter || id.strip_prefix(filter).is_some_and(|r| r.starts_with('.'))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GalleryRow {
    pub case: &'static str,
    pub quantity: &'static str,
    pub expected: Expected,
    pub expected_text: String,
    pub computed: Option<Computed>,
    pub computed_text: String,
    pub tol: f64,
    pub pass: bool,
    pub provenance: Provenance,
    pub citation: &'static str,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GallerySummary {
    pub filter: Option<String>,
    pub seed: u64,
    pub rows: Vec<GalleryRow>,
    pub passed: usize,
    pub failed: usize,
}

impl GallerySummary {
    pub fn all_pass(&self) -> bool {
        self.failed == 0
    }

    pub fn table(&self) -> String {
        let mut s = format!("{:<6} {:<28} {:<24} {:<28} {}\n", "case", "quantity", "expected", "computed", "result");
        for r in &self.rows {
            s.push_str(&format!(
                "{:<6} {:<28} {:<24} {:<28} {}\n",
                r.case,
                r.quantity,
                r.expected_text,
                r.computed_text,
                if r.pass { "pass" } else { "FAIL" }
            ));
        }
        s.push_str(&format!("{} passed, {} failed\n", self.passed, self.failed));
        s
    }
}

/// Runs the selected cases in parallel and compares each expected value.
pub fn run_gallery(filter: Option<&str>, scheme: &SampleScheme) -> GallerySummary {
    let mut selected: Vec<GalleryCase> = cases().into_iter().filter(|c| filter.is_none_or(|f| matches_filter(c.id, f))).collect();
    selected.sort_by_key(|c| c.id);
    let computed: Vec<Vec<(&'static str, Computed)>> = selected.par_iter().map(|c| c.compute(scheme)).collect();
    let mut rows = vec![];
    for (c, got) in selected.iter().zip(computed) {
        for e in &c.expected {
            let hit = got.iter().find(|(q, _)| *q == e.quantity).map(|(_, v)| v.clone());
            let pass = hit.as_ref().is_some_and(|v| e.expected.matches(v, e.tol));
            rows.push(GalleryRow {
                case: c.id,
                quantity: e.quantity,
                expected: e.expected.clone(),
                expected_text: if e.tol > 0.0 { format!("{} ± {:e}", e.expected, e.tol) } else { e.expected.to_string() },
                computed_text: hit.as_ref().map_or("missing".into(), |v| v.to_string()),
                computed: hit,
                tol: e.tol,
                pass,
                provenance: e.provenance,
                citation: e.citation,
            });
        }
    }
    let passed = rows.iter().filter(|r| r.pass).count();
    GallerySummary { filter: filter.map(String::from), seed: scheme.seed, failed: rows.len() - passed, passed, rows }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn filters() {
        assert!(matches_filter("E3.2", "E3.2"));
        assert!(matches_filter("E3.2", "E3"));
        assert!(!matches_filter("E3.2", "E3.1"));
        assert!(matches_filter("E5.3", "E*.3"));
        assert!(matches_filter("S6", "*"));
        assert!(!matches_filter("E3.2", "E"));
    }

    #[test]
    fn unmatched_filter_is_empty_and_passes() {
        let s = run_gallery(Some("nothing"), &SampleScheme::default());
        assert!(s.rows.is_empty() && s.all_pass());
    }

    #[test]
    fn unknown_case() {
        assert_eq!(case("E9.9").unwrap_err(), Error::UnknownCase("E9.9".into()));
    }

    #[test]
    fn every_expected_value_has_a_citation() {
        for c in cases() {
            assert!(!c.expected.is_empty());
            assert!(c.expected.iter().all(|e| !e.citation.is_empty()), "{}", c.id);
        }
    }
}
