//! Certificates for the four uniform lower semicontinuity properties of a pair, their
//! function-vs-set versions, the pair-of-sets versions and a linear subtransversality
//! modulus.
//!
//! Every certificate runs the eps-eta characterization on a fixed eps grid: for each eps
//! the refinement schedule is scanned for an eta from which every sampled admissible
//! pair recouples. A pair "recouples" when some sampled x undercuts the decoupled sum
//! plus eps under the property's side conditions.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::decoupling::{theta_dag, CheckSpec, Ctx, LevelCheck, PassOut, WorstPair};
use crate::error::{Error, Result};
use crate::extreal::ExtReal;
use crate::geometry::{self, Point};
use crate::oracle::{FnOracle, SetOracle};
use crate::region::{ei_family_for, Region};
use crate::sampling::{domain_boundary_points, local_grid, SampleScheme, SpatialHash};
use crate::verdict::{Diagnostics, Resolution, Status, Trace, Verdict, Witness};

pub const EPS_GRID: [f64; 5] = [1.0, 0.3, 0.1, 0.03, 0.01];

/// Radii delta0 * 2^-i, i = 0..=4, for near-point certificates.
pub const NEAR_DELTA0: f64 = 0.5;
const NEAR_STEPS: usize = 5;
/// Theta-dagger over delta below this ratio counts as zero on a ball of radius delta.
const NEAR_THETA_RATIO: f64 = 0.05;
/// Growth threshold for the subtransversality ratio trace.
pub const SUBTRANSVERSAL_M: f64 = 1e3;
// alternating-projection iterates creep toward a missed meeting point; only points this
// close to both sets count as sampled intersection members
const EXACT_TOL: f64 = 1e-13;
const MEMBER_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Hash)]
#[serde(rename_all = "snake_case")]
pub enum LscProperty {
    Uniform,
    Quasiuniform,
    FirmUniform,
    FirmQuasiuniform,
}

impl LscProperty {
    pub const ALL: [LscProperty; 4] =
        [LscProperty::Uniform, LscProperty::Quasiuniform, LscProperty::FirmUniform, LscProperty::FirmQuasiuniform];

    pub fn name(self) -> &'static str {
        match self {
            LscProperty::Uniform => "uniform",
            LscProperty::Quasiuniform => "quasiuniform",
            LscProperty::FirmUniform => "firm_uniform",
            LscProperty::FirmQuasiuniform => "firm_quasiuniform",
        }
    }

    pub fn is_firm(self) -> bool {
        matches!(self, LscProperty::FirmUniform | LscProperty::FirmQuasiuniform)
    }

    pub fn is_quasi(self) -> bool {
        matches!(self, LscProperty::Quasiuniform | LscProperty::FirmQuasiuniform)
    }
}

impl fmt::Display for LscProperty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LscProperty {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let k = s.trim().to_ascii_lowercase().replace(['-', ' '], "_");
        LscProperty::ALL
            .into_iter()
            .find(|p| p.name() == k)
            .ok_or_else(|| Error::UnknownName(format!("property '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Firmness {
    Uniform,
    Quasiuniform,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CertMode {
    OnRegion,
    NearPoint(Point),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpsEtaRow {
    pub eps: f64,
    /// coarsest tested eta from which every finer level passed
    pub eta: Option<f64>,
    pub status: Status,
    /// failing pairs per level
    pub failing: Vec<usize>,
    pub pairs: Vec<usize>,
    /// worst deficit at the finest level (>= 0 means the pair does not recouple)
    pub deficit: Option<ExtReal>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LscWitness {
    pub x1: Point,
    pub x2: Point,
    pub eps: f64,
    pub deficit: ExtReal,
    /// f1(x1) + f2(x2), or f(x) in the relative case, or the intersection distance for sets
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LscCertificate {
    pub property: LscProperty,
    pub mode: CertMode,
    pub verdict: Verdict,
    pub epsilon_eta_table: Vec<EpsEtaRow>,
    pub witness: Option<LscWitness>,
}

impl LscCertificate {
    pub fn status(&self) -> Status {
        self.verdict.status
    }
}

fn worst_of(levels: &[LevelCheck]) -> Option<&WorstPair> {
    levels.last().and_then(|l| l.worst.as_ref())
}

/// Reads one eps row off the per-level checks.
fn eps_row(eps: f64, levels: &[LevelCheck], tol: f64) -> (EpsEtaRow, Option<WorstPair>) {
    let failing: Vec<usize> = levels.iter().map(|l| l.fails).collect();
    let pairs: Vec<usize> = levels.iter().map(|l| l.pairs).collect();
    let n = levels.len();
    let deficit = worst_of(levels).map(|w| ExtReal::from(w.deficit));
    let mut row = EpsEtaRow { eps, eta: None, status: Status::Inconclusive, failing, pairs, deficit };
    if n == 0 {
        return (row, None);
    }
    if levels[n - 1].fails == 0 {
        let k = (0..n).rev().take_while(|&k| levels[k].fails == 0).last().unwrap_or(n - 1);
        row.eta = Some(levels[k].eta);
        row.status = Status::Holds;
        return (row, None);
    }
    let tail = &levels[n.saturating_sub(3)..];
    let all_fail = tail.iter().all(|l| l.fails > 0);
    // a deficit that still shrinks by more than 10% per level may vanish under refinement
    let deficits: Vec<f64> = tail.iter().map(|l| l.worst.as_ref().map_or(0.0, |w| w.deficit)).collect();
    let d_last = deficits[deficits.len() - 1];
    let not_shrinking = d_last == f64::INFINITY || deficits.windows(2).all(|w| w[1] >= 0.9 * w[0]);
    if all_fail && d_last > tol && not_shrinking {
        row.status = Status::Fails;
    }
    (row, levels[n - 1].worst.clone())
}

/// Rows per eps, combining several passes (EI members): any FAILS wins, all HOLDS holds.
fn rows_over_passes(eps: &[f64], passes: &[Vec<Vec<LevelCheck>>], tol: f64) -> Vec<(EpsEtaRow, Option<WorstPair>)> {
    let mut out = Vec::with_capacity(eps.len());
    for (k, e) in eps.iter().enumerate() {
        let rows: Vec<(EpsEtaRow, Option<WorstPair>)> = passes.iter().map(|p| eps_row(*e, &p[k], tol)).collect();
        if rows.is_empty() {
            out.push((
                EpsEtaRow { eps: *e, eta: None, status: Status::Holds, failing: vec![], pairs: vec![], deficit: None },
                None,
            ));
            continue;
        }
        if let Some(i) = rows.iter().position(|r| r.0.status == Status::Fails) {
            out.push(rows[i].clone());
        } else if rows.iter().all(|r| r.0.status == Status::Holds) {
            let mut r = rows[0].0.clone();
            r.eta = rows.iter().filter_map(|r| r.0.eta).reduce(f64::min);
            for o in &rows[1..] {
                for (a, b) in r.failing.iter_mut().zip(&o.0.failing) {
                    *a += b;
                }
                for (a, b) in r.pairs.iter_mut().zip(&o.0.pairs) {
                    *a += b;
                }
            }
            out.push((r, None));
        } else {
            let i = rows.iter().position(|r| r.0.status == Status::Inconclusive).unwrap();
            out.push(rows[i].clone());
        }
    }
    out
}

fn assemble(
    property: LscProperty,
    mode: CertMode,
    rows: Vec<(EpsEtaRow, Option<WorstPair>)>,
    mut notes: Vec<String>,
    what: &str,
) -> LscCertificate {
    let traces: Vec<Trace> = rows
        .iter()
        .map(|(r, _)| {
            let mut t = Trace::new(format!("eps={}: {what} that do not recouple", r.eps));
            for (j, f) in r.failing.iter().enumerate() {
                t.push(j, r.eps, ExtReal::Finite(*f as f64), r.pairs[j]);
            }
            t
        })
        .collect();
    let table: Vec<EpsEtaRow> = rows.iter().map(|r| r.0.clone()).collect();
    let samples = table.iter().filter_map(|r| r.pairs.last()).sum();
    let level = table.first().map_or(0, |r| r.pairs.len().saturating_sub(1));
    if let Some((row, Some(w))) = rows.iter().find(|(r, _)| r.status == Status::Fails) {
        let wit = LscWitness {
            x1: w.x1.clone(),
            x2: w.x2.clone(),
            eps: row.eps,
            deficit: ExtReal::from(w.deficit),
            value: w.sum12,
        };
        notes.push(format!("no sampled point recouples the witness at eps = {}", row.eps));
        let verdict = Verdict::fails(
            Witness {
                points: vec![w.x1.clone(), w.x2.clone()],
                values: vec![ExtReal::from(w.sum12), ExtReal::from(w.deficit)],
                note: format!("{what} at distance {:.3e}, eps = {}", w.d12, row.eps),
            },
            Diagnostics { traces, notes },
        );
        return LscCertificate { property, mode, verdict, epsilon_eta_table: table, witness: Some(wit) };
    }
    let verdict = if table.iter().all(|r| r.status == Status::Holds) {
        Verdict::holds(Diagnostics { traces, notes })
    } else {
        let trend = traces
            .iter()
            .zip(&table)
            .find(|(_, r)| r.status != Status::Holds)
            .map_or(crate::verdict::Trend::Single, |(t, _)| t.trend());
        notes.push("the eta schedule ran out before every eps found a working eta".into());
        Verdict::inconclusive(Resolution { level, samples, trend }, Diagnostics { traces, notes })
    };
    LscCertificate { property, mode, verdict, epsilon_eta_table: table, witness: None }
}

fn check_spec(property: LscProperty, eps: &[f64]) -> CheckSpec {
    CheckSpec { eps: eps.to_vec(), firm: property.is_firm(), x_in_u: property != LscProperty::FirmQuasiuniform }
}

/// eps-eta certificate of `property` for the pair on U.
pub fn certify(f1: &FnOracle, f2: &FnOracle, u: &Region, property: LscProperty, scheme: &SampleScheme) -> Result<LscCertificate> {
    certify_with(f1, f2, u, property, scheme, &EPS_GRID, CertMode::OnRegion)
}

pub fn certify_with(
    f1: &FnOracle,
    f2: &FnOracle,
    u: &Region,
    property: LscProperty,
    scheme: &SampleScheme,
    eps: &[f64],
    mode: CertMode,
) -> Result<LscCertificate> {
    let ctx = Ctx::new(f1, f2, u, scheme)?;
    ctx.require_common()?;
    let mut notes = vec![];
    let passes: Vec<PassOut> = match ctx.check_passes(property.is_quasi(), check_spec(property, eps))? {
        Some(p) => p,
        None => {
            notes.push("U has empty interior: no essentially interior member, the property holds vacuously".into());
            vec![]
        }
    };
    if property == LscProperty::FirmQuasiuniform {
        notes.push("recoupling points are drawn from the common-domain cloud of U, the pair and its midpoint".into());
    }
    let checks: Vec<Vec<Vec<LevelCheck>>> = passes.into_iter().map(|p| p.checks).collect();
    let rows = rows_over_passes(eps, &checks, scheme.tol.max(1e-12));
    Ok(assemble(property, mode, rows, notes, "pairs"))
}

/// Re-runs the recoupling search for a FAILS witness on the finest base cloud of U.
/// True when no sampled point recouples it.
pub fn reverify_witness(f1: &FnOracle, f2: &FnOracle, u: &Region, cert: &LscCertificate, scheme: &SampleScheme) -> Result<bool> {
    let Some(w) = &cert.witness else { return Ok(false) };
    let level = scheme.levels - 1;
    let mut cloud = scheme.sample(u, level)?;
    let h = scheme.spacing(u, level)?.max(1e-12);
    let b1 = domain_boundary_points(f1, &cloud, h, u);
    let b2 = domain_boundary_points(f2, &cloud, h, u);
    cloud.extend(b1);
    cloud.extend(b2);
    let target = f1.value(&w.x1) + f2.value(&w.x2) + w.eps;
    let firm = cert.property.is_firm();
    let in_u = cert.property != LscProperty::FirmQuasiuniform;
    Ok(!cloud.iter().any(|x| {
        let s = f1.value(x) + f2.value(x);
        s.is_finite() && s < target && (!in_u || u.contains(x)) && (!firm || geometry::dist(x, &w.x1) < w.eps)
    }))
}

fn near_radii(delta0: f64) -> Vec<f64> {
    (0..NEAR_STEPS).map(|i| delta0 * 0.5f64.powi(i as i32)).collect()
}

/// Certificate near a base point: firm quasiuniform through theta-dagger on open balls,
/// the others on the two smallest closed balls.
pub fn certify_near(f1: &FnOracle, f2: &FnOracle, xbar: &[f64], property: LscProperty, scheme: &SampleScheme) -> Result<LscCertificate> {
    certify_near_with(f1, f2, xbar, property, scheme, NEAR_DELTA0)
}

pub fn certify_near_with(
    f1: &FnOracle,
    f2: &FnOracle,
    xbar: &[f64],
    property: LscProperty,
    scheme: &SampleScheme,
    delta0: f64,
) -> Result<LscCertificate> {
    if !f1.value(xbar).is_finite() || !f2.value(xbar).is_finite() {
        return Err(Error::InfiniteAtBase);
    }
    let radii = near_radii(delta0);
    let mode = CertMode::NearPoint(xbar.to_vec());
    if property == LscProperty::FirmQuasiuniform {
        let mut t = Trace::new("theta-dagger / delta on open balls");
        let mut holds_at = None;
        for (i, d) in radii.iter().enumerate() {
            let ball = Region::open_ball(xbar.to_vec(), *d)?;
            let (th, _) = theta_dag(f1, f2, &ball, scheme)?;
            let ratio = th.to_f64() / d;
            t.push(i, *d, ExtReal::from(ratio), 0);
            if ratio <= NEAR_THETA_RATIO && holds_at.is_none() {
                holds_at = Some(*d);
            }
        }
        let smallest = Region::open_ball(xbar.to_vec(), radii[NEAR_STEPS - 1])?;
        let mut cert = certify_with(f1, f2, &smallest, property, scheme, &EPS_GRID, mode)?;
        cert.verdict.diagnostics.traces.insert(0, t);
        match holds_at {
            Some(d) => {
                let note = format!("theta-dagger vanishes (relative to the radius) on the ball of radius {d}");
                if cert.verdict.status != Status::Holds {
                    let diag = std::mem::take(&mut cert.verdict.diagnostics);
                    cert.verdict = Verdict::holds(diag);
                    cert.witness = None;
                }
                cert.verdict = cert.verdict.note(note);
            }
            None => {
                if cert.verdict.status == Status::Holds {
                    cert.verdict = cert.verdict.downgrade("theta-dagger stays away from zero on every tested ball");
                }
            }
        }
        return Ok(cert);
    }
    let mut certs = vec![];
    for d in &radii[NEAR_STEPS - 2..] {
        let ball = Region::closed_ball(xbar.to_vec(), *d)?;
        certs.push(certify_with(f1, f2, &ball, property, scheme, &EPS_GRID, mode.clone())?);
    }
    Ok(strongest_consistent(certs))
}

/// Two certificates on shrinking balls: both HOLDS holds, the smallest FAILS fails.
fn strongest_consistent(mut certs: Vec<LscCertificate>) -> LscCertificate {
    let small = certs.pop().expect("two radii");
    let big = certs.pop().expect("two radii");
    if small.verdict.is_fails() {
        return small;
    }
    if small.verdict.is_holds() && big.verdict.is_holds() {
        return small.clone_with_note("holds on the two smallest tested radii");
    }
    if small.verdict.is_holds() {
        let mut c = small;
        c.verdict = c.verdict.downgrade("holds on the smallest radius only");
        return c;
    }
    small
}

impl LscCertificate {
    fn clone_with_note(mut self, n: &str) -> Self {
        self.verdict = self.verdict.note(n);
        self
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SufficientCondition {
    pub id: &'static str,
    pub certifies: Vec<LscProperty>,
    pub verdict: Verdict,
}

fn sampled_u(u: &Region, scheme: &SampleScheme, f1: &FnOracle, f2: &FnOracle) -> Result<Vec<Point>> {
    let level = scheme.levels.saturating_sub(1).min(6);
    let mut pts = scheme.sample(u, level)?;
    let h = scheme.spacing(u, level)?.max(1e-12);
    let b1 = domain_boundary_points(f1, &pts, h, u);
    let b2 = domain_boundary_points(f2, &pts, h, u);
    pts.extend(b1);
    pts.extend(b2);
    Ok(pts)
}

fn simple(status: Status, note: String, points: Vec<Point>) -> Verdict {
    let d = Diagnostics { traces: vec![], notes: vec![note.clone()] };
    match status {
        Status::Holds => Verdict::holds(d),
        Status::Fails => Verdict::fails(Witness { points, values: vec![], note }, d),
        Status::Inconclusive => Verdict::inconclusive(Resolution { level: 0, samples: 0, trend: crate::verdict::Trend::Single }, d),
    }
}

/// Geometric growth over the last three levels, or a value past the divergence threshold.
fn grows(t: &Trace, m: f64) -> bool {
    let v: Vec<f64> = t.values().iter().map(|x| x.to_f64()).collect();
    let n = v.len();
    if n == 0 {
        return false;
    }
    if v[n - 1] >= m {
        return true;
    }
    n >= 3 && v[n - 1] > 0.0 && v[n - 1] >= 1.5 * v[n - 2] && v[n - 2] >= 1.5 * v[n - 3] && v[n - 1] > 10.0 * (v[0].abs() + 1.0)
}

/// Numerical checks of the classical sufficient conditions. Compactness hypotheses are
/// recorded as trivially satisfied: every sampled set is finite.
pub fn sufficient_conditions(f1: &FnOracle, f2: &FnOracle, u: &Region, scheme: &SampleScheme) -> Result<Vec<SufficientCondition>> {
    let tol = scheme.trace_tol.max(scheme.tol);
    let pts = sampled_u(u, scheme, f1, f2)?;
    let pts: Vec<Point> = pts.into_iter().filter(|p| u.contains(p)).collect();
    let mut out = vec![];

    // constant partner
    {
        let on_dom: Vec<(usize, f64)> =
            pts.iter().enumerate().filter(|(_, p)| f1.value(p).is_finite()).map(|(i, p)| (i, f2.value(p))).collect();
        let v = match on_dom.first() {
            None => simple(Status::Inconclusive, "no sampled point of dom f1 in U".into(), vec![]),
            Some(&(i0, c)) => {
                if let Some(&(i, _)) = on_dom.iter().find(|(_, v)| !(*v - c).abs().le(&tol)) {
                    simple(Status::Fails, format!("f2 takes {} and {} on dom f1", c, f2.value(&pts[i])), vec![pts[i0].clone(), pts[i].clone()])
                } else if let Some(p) = pts.iter().find(|p| f2.value(p) < c - tol) {
                    simple(Status::Fails, format!("f2 drops below {c} off dom f1"), vec![p.clone()])
                } else {
                    simple(Status::Holds, format!("f2 = {c} on sampled dom f1, and not below elsewhere"), vec![])
                }
            }
        };
        out.push(SufficientCondition { id: "constant_partner", certifies: vec![LscProperty::FirmUniform], verdict: v });
    }

    // singleton partner domain
    {
        let dom2: Vec<&Point> = pts.iter().filter(|p| f2.value(p).is_finite()).collect();
        let v = match dom2.first() {
            None => simple(Status::Inconclusive, "no sampled point of dom f2 in U".into(), vec![]),
            Some(p0) => {
                if let Some(q) = dom2.iter().find(|q| geometry::dist(q, p0) > 0.0) {
                    simple(Status::Fails, "dom f2 meets U in two distinct sampled points".into(), vec![(*p0).clone(), (*q).clone()])
                } else if !f1.value(p0).is_finite() {
                    simple(Status::Fails, "the point of dom f2 lies outside dom f1".into(), vec![(*p0).clone()])
                } else {
                    let v0 = f1.value(p0);
                    let near = scheme.sample_near(p0, 1e-3 * u.scale(scheme.window.as_ref())?, 2)?;
                    match near.iter().find(|q| f1.value(q) < v0 - tol) {
                        Some(q) => simple(Status::Fails, "f1 jumps down next to the point".into(), vec![(*p0).clone(), q.clone()]),
                        None => simple(Status::Holds, "single sampled point of dom f2, f1 lsc there on samples".into(), vec![]),
                    }
                }
            }
        };
        out.push(SufficientCondition { id: "singleton_partner_domain", certifies: vec![LscProperty::FirmUniform], verdict: v });
    }

    // uniformly continuous partner: modulus of f2 on sampled pairs at each eta
    {
        let scale = u.scale(scheme.window.as_ref())?;
        let mut t = Trace::new("sampled modulus of continuity of f2 on U");
        let hash = SpatialHash::new(&pts, scheme.eta(scale, 0));
        let vals: Vec<f64> = pts.iter().map(|p| f2.value(p)).collect();
        let mut worst = None;
        for j in 0..scheme.levels.min(8) {
            let eta = scheme.eta(scale, j);
            let mut w = 0.0f64;
            for (i, p) in pts.iter().enumerate() {
                let cand = hash.candidates(p, eta).unwrap_or_else(|| (0..pts.len()).collect());
                for k in cand {
                    if k != i && geometry::dist(p, &pts[k]) < eta {
                        let d = if vals[i] == vals[k] { 0.0 } else { (vals[i] - vals[k]).abs() };
                        let d = if d.is_nan() { f64::INFINITY } else { d };
                        if d > w {
                            w = d;
                            worst = Some((p.clone(), pts[k].clone()));
                        }
                    }
                }
            }
            t.push(j, eta, ExtReal::from(w), pts.len());
        }
        let v: Vec<f64> = t.values().iter().map(|x| x.to_f64()).collect();
        let n = v.len();
        let last = v[n - 1];
        let status = if last.is_infinite() {
            Status::Fails
        } else if last <= tol || (n >= 3 && v[n - 1] <= 0.6 * v[n - 3]) {
            Status::Holds
        } else if n >= 3 && v[n - 1] >= 0.9 * v[n - 3] {
            Status::Fails
        } else {
            Status::Inconclusive
        };
        let mut verdict = simple(
            status,
            format!("modulus at the finest eta: {last:.3e}"),
            worst.map(|(a, b)| vec![a, b]).unwrap_or_default(),
        );
        verdict.diagnostics.traces.push(t);
        out.push(SufficientCondition { id: "uniformly_continuous_partner", certifies: vec![LscProperty::FirmUniform], verdict });
    }

    // boundedness conditions with trivially compact sublevel sets
    {
        let inf2 = pts.iter().map(|p| f2.value(p)).fold(f64::INFINITY, f64::min);
        let bounded_below = inf2 > -scheme.diverge;
        let v = if bounded_below {
            simple(Status::Holds, format!("sampled inf of f2 over U is {inf2:.6e}; sublevel compactness trivially satisfied (finite sampling)"), vec![])
        } else {
            simple(Status::Fails, format!("f2 reaches {inf2:.3e} on U"), vec![])
        };
        out.push(SufficientCondition {
            id: "bounded_below_partner",
            certifies: vec![LscProperty::Uniform, LscProperty::Quasiuniform],
            verdict: v,
        });
        let ctx = Ctx::new(f1, f2, u, scheme)?;
        if ctx.require_common().is_ok() {
            for (id, quasi, prop) in [
                ("bounded_decoupled_sums", false, LscProperty::FirmUniform),
                ("bounded_decoupled_sums_members", true, LscProperty::FirmQuasiuniform),
            ] {
                let spec = CheckSpec { eps: vec![], firm: false, x_in_u: true };
                let passes = ctx.check_passes(quasi, spec)?.unwrap_or_default();
                let mut verdict = if !bounded_below {
                    simple(Status::Fails, "f2 is not bounded below on U".into(), vec![])
                } else {
                    match passes.iter().find(|p| grows(&p.sum_sup, scheme.diverge)) {
                        Some(p) => simple(
                            Status::Fails,
                            format!("decoupled sums grow without bound along refinement ({})", p.sum_sup.label),
                            vec![],
                        ),
                        None => simple(Status::Holds, "limsup of decoupled sums stays bounded on samples".into(), vec![]),
                    }
                };
                verdict.diagnostics.traces.extend(passes.into_iter().map(|p| p.sum_sup));
                out.push(SufficientCondition { id, certifies: vec![prop], verdict });
            }
        }
    }
    Ok(out)
}

/// Ring search for the nearest point of `pts` to x, with the hash cell as starting radius.
fn nearest(pts: &[Point], hash: &SpatialHash, x: &[f64], r0: f64) -> Option<(usize, f64)> {
    if pts.is_empty() {
        return None;
    }
    let mut r = r0.max(1e-12);
    for _ in 0..60 {
        match hash.candidates(x, r) {
            Some(c) => {
                let best = c.into_iter().map(|i| (i, geometry::dist(&pts[i], x))).min_by(|a, b| a.1.total_cmp(&b.1));
                if let Some((i, d)) = best {
                    if d <= r {
                        return Some((i, d));
                    }
                }
                r *= 4.0;
            }
            None => break,
        }
    }
    pts.iter().enumerate().map(|(i, p)| (i, geometry::dist(p, x))).min_by(|a, b| a.1.total_cmp(&b.1))
}

/// Members of a set inside a region: cloud points in the set and projections of the
/// cloud onto it.
fn set_members(set: &SetOracle, cloud: &[Point], region: Option<&Region>) -> Vec<Point> {
    let mut out: Vec<Point> = vec![];
    for p in cloud {
        let cand = if set.contains(p) {
            Some(p.clone())
        } else if set.has_projection() {
            set.project(p)
        } else if set.dist(p) < MEMBER_TOL {
            Some(p.clone())
        } else {
            None
        };
        if let Some(c) = cand {
            if region.is_none_or(|r| r.contains(&c)) {
                out.push(c);
            }
        }
    }
    out.sort_by(|a, b| geometry::lex_cmp(a, b));
    out.dedup();
    out
}

fn thin(pts: &[Point], cap: usize) -> Vec<&Point> {
    if pts.len() <= cap {
        return pts.iter().collect();
    }
    let step = pts.len() as f64 / cap as f64;
    (0..cap).map(|k| &pts[(k as f64 * step) as usize]).collect()
}

/// Function-vs-set certificate with f2 the indicator of Omega, read through the
/// single-point characterizations: x near Omega must be matched by some u in Omega.
pub fn certify_relative(f: &FnOracle, omega: &SetOracle, u: &Region, property: LscProperty, scheme: &SampleScheme) -> Result<LscCertificate> {
    certify_relative_with(f, omega, u, property, scheme, &EPS_GRID, CertMode::OnRegion)
}

pub fn certify_relative_with(
    f: &FnOracle,
    omega: &SetOracle,
    u: &Region,
    property: LscProperty,
    scheme: &SampleScheme,
    eps: &[f64],
    mode: CertMode,
) -> Result<LscCertificate> {
    let dim = u.dim();
    for d in [f.dim, omega.dim] {
        if d != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: d });
        }
    }
    let scale = u.scale(scheme.window.as_ref())?;
    let mut seen_common = false;
    let mut notes = vec![];
    let x_regions: Vec<Region> = if property.is_quasi() {
        match ei_family_for(u, scheme.stages, scheme.window.as_ref()) {
            Ok(fam) => fam.members.into_iter().map(|m| m.region).collect(),
            Err(Error::EmptyInterior) => {
                notes.push("U has empty interior: the property holds vacuously".into());
                vec![]
            }
            Err(e) => return Err(e),
        }
    } else {
        vec![u.clone()]
    };
    let mut passes = vec![];
    for xr in &x_regions {
        let (checks, common) = relative_pass(f, omega, u, xr, property, scheme, scale, eps)?;
        seen_common |= common;
        passes.push(checks);
    }
    if !seen_common {
        // the precondition is about U, not the members
        let (_, common) = relative_pass(f, omega, u, u, LscProperty::Uniform, scheme, scale, &[])?;
        if !common {
            return Err(Error::PreconditionFailed("no sampled point of dom f in Omega and U".into()));
        }
    }
    notes.push("u candidates: sampled members of Omega, projections onto Omega".into());
    let rows = rows_over_passes(eps, &passes, scheme.tol.max(1e-12));
    Ok(assemble(property, mode, rows, notes, "points"))
}

#[allow(clippy::too_many_arguments)]
fn relative_pass(
    f: &FnOracle,
    omega: &SetOracle,
    u: &Region,
    xr: &Region,
    property: LscProperty,
    scheme: &SampleScheme,
    scale: f64,
    eps: &[f64],
) -> Result<(Vec<Vec<LevelCheck>>, bool)> {
    let dim = u.dim();
    let firm = property.is_firm();
    let quasi = property.is_quasi();
    let u_restricted = property != LscProperty::FirmQuasiuniform;
    let mut out: Vec<Vec<LevelCheck>> = vec![vec![]; eps.len()];
    let mut common = false;
    let mut prev: Vec<Point> = vec![];
    for j in 0..scheme.levels {
        let eta = scheme.eta(scale, j);
        let h = scheme.spacing(xr, j)?.max(1e-12);
        let mut xs = scheme.sample(xr, j)?;
        let b = domain_boundary_points(f, &xs, h, xr);
        xs.extend(b);
        let ucloud = if quasi { scheme.sample(u, j)? } else { xs.clone() };
        let members = set_members(omega, &ucloud, if u_restricted { Some(u) } else { None });
        let stencil = scheme.stencil(dim, eta);
        for m in thin(&members, 2000) {
            for off in &stencil[1..] {
                let x = geometry::add(m, off);
                if xr.contains(&x) {
                    xs.push(x);
                }
            }
        }
        for p in &prev {
            xs.extend(local_grid(p, 0.3 * eta, 2, xr));
        }
        let xs: Vec<Point> = xs.into_iter().filter(|x| xr.contains(x)).collect();
        let mvals: Vec<f64> = members.iter().map(|m| f.value(m)).collect();
        let in_u_members: Vec<usize> = (0..members.len()).filter(|&i| u.contains(&members[i])).collect();
        if in_u_members.iter().any(|&i| mvals[i].is_finite()) {
            common = true;
        }
        let min_u = in_u_members.iter().map(|&i| mvals[i]).fold(f64::INFINITY, f64::min);
        let hash = SpatialHash::new(&members, (2.0 * h).max(eta));
        let per: Vec<Vec<LevelCheck>> = xs
            .par_iter()
            .map(|x| {
                let mut lc = vec![LevelCheck::default(); eps.len()];
                let fx = f.value(x);
                if firm && !fx.is_finite() {
                    return lc;
                }
                let proj = omega.project(x);
                // distance to Omega (quasi) or to Omega within U
                let (d, partner) = if quasi {
                    (omega.dist(x), proj.clone())
                } else {
                    match &proj {
                        Some(p) if u.contains(p) => (geometry::dist(x, p), Some(p.clone())),
                        _ => match nearest(&members, &hash, x, eta) {
                            Some((i, d)) if u.contains(&members[i]) => (d, Some(members[i].clone())),
                            _ => (f64::INFINITY, None),
                        },
                    }
                };
                if !(d < eta) {
                    return lc;
                }
                let proj_ok = proj.as_ref().filter(|p| !u_restricted || u.contains(p));
                for (k, e) in eps.iter().enumerate() {
                    let target = fx + e;
                    let mut best = proj_ok.filter(|p| !firm || geometry::dist(p, x) < *e).map_or(f64::INFINITY, |p| f.value(p));
                    if best >= target {
                        if !firm {
                            best = best.min(min_u);
                        } else {
                            let cand = hash.candidates(x, *e).unwrap_or_else(|| (0..members.len()).collect());
                            for i in cand {
                                if geometry::dist(&members[i], x) < *e && (!u_restricted || u.contains(&members[i])) {
                                    best = best.min(mvals[i]);
                                    if best < target {
                                        break;
                                    }
                                }
                            }
                        }
                    }
                    if !fx.is_finite() && !best.is_finite() {
                        continue;
                    }
                    lc[k].pairs += 1;
                    let deficit = if best.is_finite() || fx.is_finite() { best - target } else { 0.0 };
                    if deficit >= 0.0 {
                        lc[k].fails += 1;
                        let x2 = partner.clone().unwrap_or_else(|| x.clone());
                        lc[k].worst = Some(WorstPair { deficit, d12: d, x1: x.clone(), x2, sum12: fx });
                    }
                }
                lc
            })
            .collect();
        let mut tot = vec![LevelCheck { eta, ..LevelCheck::default() }; eps.len()];
        for lc in per {
            for (k, c) in lc.into_iter().enumerate() {
                tot[k].absorb(c);
            }
        }
        prev = tot.iter().filter_map(|c| c.worst.as_ref().map(|w| w.x1.clone())).take(2).collect();
        for (k, c) in tot.into_iter().enumerate() {
            out[k].push(c);
        }
    }
    Ok((out, common))
}

/// Relative certificate near a base point on the two smallest closed balls.
pub fn certify_relative_near(f: &FnOracle, omega: &SetOracle, xbar: &[f64], property: LscProperty, scheme: &SampleScheme) -> Result<LscCertificate> {
    if !f.value(xbar).is_finite() || !omega.contains(xbar) {
        return Err(Error::InfiniteAtBase);
    }
    let radii = near_radii(NEAR_DELTA0);
    let mode = CertMode::NearPoint(xbar.to_vec());
    let mut certs = vec![];
    for d in &radii[NEAR_STEPS - 2..] {
        let ball = Region::closed_ball(xbar.to_vec(), *d)?;
        certs.push(certify_relative_with(f, omega, &ball, property, scheme, &EPS_GRID, mode.clone())?);
    }
    Ok(strongest_consistent(certs))
}

/// Dykstra's alternating projections; for convex sets the limit is the projection of x
/// onto the intersection. Accepted only if it lies in both sets within 1e-9.
pub fn dykstra(o1: &SetOracle, o2: &SetOracle, x: &[f64], iters: usize) -> Option<Point> {
    if !o1.has_projection() || !o2.has_projection() {
        return None;
    }
    let n = x.len();
    let (mut p, mut q) = (vec![0.0; n], vec![0.0; n]);
    let mut z = x.to_vec();
    for _ in 0..iters {
        let y = o1.project(&geometry::add(&z, &p))?;
        p = geometry::sub(&geometry::add(&z, &p), &y);
        let z_new = o2.project(&geometry::add(&y, &q))?;
        q = geometry::sub(&geometry::add(&y, &q), &z_new);
        let moved = geometry::dist(&z, &z_new);
        z = z_new;
        if moved <= 1e-15 * (1.0 + geometry::norm(&z)) {
            break;
        }
    }
    (o1.dist(&z) <= MEMBER_TOL && o2.dist(&z) <= MEMBER_TOL).then_some(z)
}

/// Upper estimate of dist(x, O1 ∩ O2 [∩ U]) from Dykstra and sampled intersection members.
fn intersection_dist(o1: &SetOracle, o2: &SetOracle, x: &[f64], u: Option<&Region>, both: &[Point], both_hash: &SpatialHash, r0: f64) -> (f64, Option<Point>) {
    let mut best = (f64::INFINITY, None);
    if let Some(z) = dykstra(o1, o2, x, 300) {
        // a limit sitting on the boundary of U up to rounding is not taken as a member
        if u.is_none_or(|r| r.dist_to_complement(&z) > MEMBER_TOL) {
            best = (geometry::dist(x, &z), Some(z));
        }
    }
    if let Some((i, d)) = nearest(both, both_hash, x, r0) {
        if d < best.0 {
            best = (d, Some(both[i].clone()));
        }
    }
    best
}

/// Firm certificate for the pair of indicators of O1 and O2: the limsup of the distance to
/// the intersection over points of O1 approaching O2 must vanish.
pub fn certify_pair_of_sets(o1: &SetOracle, o2: &SetOracle, u: &Region, firmness: Firmness, scheme: &SampleScheme) -> Result<LscCertificate> {
    let dim = u.dim();
    for d in [o1.dim, o2.dim] {
        if d != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: d });
        }
    }
    let scale = u.scale(scheme.window.as_ref())?;
    let quasi = firmness == Firmness::Quasiuniform;
    let property = if quasi { LscProperty::FirmQuasiuniform } else { LscProperty::FirmUniform };
    let mut notes = vec![];
    if !o1.has_projection() || !o2.has_projection() {
        notes.push("a projection oracle is missing: intersection distances come from sampled membership only".into());
    }
    let regions: Vec<Region> = if quasi {
        match ei_family_for(u, scheme.stages, scheme.window.as_ref()) {
            Ok(fam) => fam.members.into_iter().map(|m| m.region).collect(),
            Err(Error::EmptyInterior) => vec![],
            Err(e) => return Err(e),
        }
    } else {
        vec![u.clone()]
    };
    let eps = EPS_GRID;
    let mut passes = vec![];
    let mut sup_traces = vec![];
    let mut nonempty = false;
    for xr in &regions {
        let mut out: Vec<Vec<LevelCheck>> = vec![vec![]; eps.len()];
        let mut sup_t = Trace::new(format!("sup of the distance to the intersection ({})", xr.describe()));
        let mut prev: Vec<Point> = vec![];
        for j in 0..scheme.levels {
            let eta = scheme.eta(scale, j);
            let h = scheme.spacing(u, j)?.max(1e-12);
            let mut cloud = scheme.sample(u, j)?;
            for p in &prev {
                cloud.extend(local_grid(p, 0.3 * eta, 2, &Region::Whole { dim }));
            }
            let m2 = set_members(o2, &cloud, if quasi { None } else { Some(u) });
            // points of O1 close to O2: the cloud and O2's members, projected onto O1
            let mut seeds = cloud.clone();
            seeds.extend(m2.iter().cloned());
            let mut xs = set_members(o1, &seeds, Some(xr));
            let stencil = scheme.stencil(dim, eta);
            let mut extra = vec![];
            for m in thin(&m2, 1000) {
                for off in &stencil[1..] {
                    extra.push(geometry::add(m, off));
                }
            }
            xs.extend(set_members(o1, &extra, Some(xr)));
            // alternating projections from sampled points approach wherever the sets meet or
            // come closest, possibly outside U
            if o1.has_projection() && o2.has_projection() {
                for p in thin(&cloud, 400) {
                    let mut z = o1.project(p).unwrap();
                    for _ in 0..60 {
                        if xr.contains(&z) {
                            xs.push(z.clone());
                        }
                        let next = o1.project(&o2.project(&z).unwrap()).unwrap();
                        if geometry::dist(&next, &z) <= 1e-15 {
                            break;
                        }
                        z = next;
                    }
                }
            }
            xs.sort_by(|a, b| geometry::lex_cmp(a, b));
            xs.dedup();
            let mut both: Vec<Point> = xs.iter().chain(m2.iter()).filter(|p| o1.dist(p) <= EXACT_TOL && o2.dist(p) <= EXACT_TOL).cloned().collect();
            if !quasi {
                both.retain(|p| u.dist_to_complement(p) > MEMBER_TOL);
            }
            let hash2 = SpatialHash::new(&m2, (2.0 * h).max(eta));
            let hashb = SpatialHash::new(&both, (2.0 * h).max(eta));
            let rows: Vec<Option<(f64, f64, Point, Point)>> = xs
                .par_iter()
                .map(|x| {
                    let (d2, partner) = if quasi {
                        (o2.dist(x), o2.project(x).unwrap_or_else(|| x.clone()))
                    } else {
                        match o2.project(x) {
                            Some(p) if u.contains(&p) => (geometry::dist(x, &p), p),
                            _ => match nearest(&m2, &hash2, x, eta) {
                                Some((i, d)) => (d, m2[i].clone()),
                                None => (f64::INFINITY, x.clone()),
                            },
                        }
                    };
                    if !(d2 < eta) {
                        return None;
                    }
                    let (di, _) = intersection_dist(o1, o2, x, if quasi { None } else { Some(u) }, &both, &hashb, eta);
                    Some((di, d2, x.clone(), partner))
                })
                .collect();
            let mut tot = vec![LevelCheck { eta, ..LevelCheck::default() }; eps.len()];
            let mut sup = 0.0f64;
            let mut argsup = None;
            for (di, d2, x, partner) in rows.into_iter().flatten() {
                if di.is_finite() {
                    nonempty = true;
                }
                if di > sup || argsup.is_none() {
                    sup = sup.max(di);
                    argsup = Some(x.clone());
                }
                for (k, e) in eps.iter().enumerate() {
                    tot[k].pairs += 1;
                    let deficit = di - e;
                    if deficit >= 0.0 {
                        tot[k].fails += 1;
                        let w = WorstPair { deficit, d12: d2, x1: x.clone(), x2: partner.clone(), sum12: di };
                        tot[k].worst = pick_worse(tot[k].worst.take(), Some(w));
                    }
                }
            }
            nonempty |= !both.is_empty();
            sup_t.push(j, eta, ExtReal::from(sup), xs.len());
            prev = argsup.into_iter().collect();
            for (k, c) in tot.into_iter().enumerate() {
                out[k].push(c);
            }
        }
        passes.push(out);
        sup_traces.push(sup_t);
    }
    if !regions.is_empty() && !nonempty {
        return Err(Error::PreconditionFailed("no sampled point of the intersection within U".into()));
    }
    let mut rows = rows_over_passes(&eps, &passes, scheme.tol.max(1e-12));
    // a sup trace decaying geometrically toward zero certifies the remaining eps
    let decays = |t: &Trace| {
        let v: Vec<f64> = t.values().iter().map(|x| x.to_f64()).collect();
        let n = v.len();
        n >= 5 && (n - 5..n - 1).all(|i| v[i + 1] <= 0.9 * v[i] || v[i + 1] <= scheme.tol)
    };
    if sup_traces.iter().all(decays) {
        let mut used = false;
        for (r, w) in rows.iter_mut() {
            if r.status == Status::Inconclusive {
                r.status = Status::Holds;
                *w = None;
                used = true;
            }
        }
        if used {
            notes.push("sup of the distance to the intersection decays geometrically along refinement: its limit is 0".into());
        }
    }
    let mut cert = assemble(property, CertMode::OnRegion, rows, notes, "points of O1 near O2");
    cert.verdict.diagnostics.traces.extend(sup_traces);
    Ok(cert)
}

fn pick_worse(a: Option<WorstPair>, b: Option<WorstPair>) -> Option<WorstPair> {
    match (a, b) {
        (Some(a), Some(b)) => Some(if a.beats(&b) { a } else { b }),
        (a, None) => a,
        (None, b) => b,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SubtransversalityEstimate {
    pub alpha: ExtReal,
    pub verdict: Verdict,
    /// point realizing the largest sampled ratio at the finest level
    pub argmax: Option<Point>,
}

/// Largest sampled ratio dist(x, O1 ∩ O2) / max{dist(x, O1), dist(x, O2)} over B_delta(xbar).
pub fn subtransversality_modulus(o1: &SetOracle, o2: &SetOracle, xbar: &[f64], delta: f64, scheme: &SampleScheme) -> Result<SubtransversalityEstimate> {
    if o1.dist(xbar) > MEMBER_TOL || o2.dist(xbar) > MEMBER_TOL {
        return Err(Error::BaseNotInIntersection);
    }
    let tau = 1e-14 * (1.0 + delta);
    let mut t = Trace::new("sampled subtransversality ratio");
    let mut argmax = None;
    for j in 0..scheme.levels {
        let pts = scheme.sample_near(xbar, delta, j)?;
        let mut both: Vec<Point> = pts.iter().filter(|p| o1.dist(p) <= EXACT_TOL && o2.dist(p) <= EXACT_TOL).cloned().collect();
        both.push(xbar.to_vec());
        let hash = SpatialHash::new(&both, delta / 8.0);
        let ratios: Vec<f64> = pts
            .par_iter()
            .map(|x| {
                let den = o1.dist(x).max(o2.dist(x));
                let (num, _) = intersection_dist(o1, o2, x, None, &both, &hash, delta / 8.0);
                if num < tau && den < tau {
                    0.0
                } else if den < tau {
                    f64::INFINITY
                } else {
                    num / den
                }
            })
            .collect();
        let (i, r) = ratios.iter().cloned().enumerate().fold((0, 0.0), |b, (i, r)| if r > b.1 { (i, r) } else { b });
        argmax = Some(pts[i].clone());
        t.push(j, delta, ExtReal::from(r), pts.len());
    }
    let vals: Vec<f64> = t.values().iter().map(|x| x.to_f64()).collect();
    let n = vals.len();
    let last = vals[n - 1];
    let prev = if n >= 2 { vals[n - 2] } else { last };
    let diag = Diagnostics { traces: vec![t.clone()], notes: vec![] };
    if last > SUBTRANSVERSAL_M && last > 2.0 * vals[0] {
        let w = Witness {
            points: argmax.clone().into_iter().collect(),
            values: vec![ExtReal::from(last)],
            note: format!("ratio trace grew past {SUBTRANSVERSAL_M} under refinement"),
        };
        return Ok(SubtransversalityEstimate { alpha: ExtReal::PosInf, verdict: Verdict::fails(w, diag), argmax });
    }
    let converged = (last - prev).abs() <= scheme.trace_tol * (1.0 + last.abs());
    let verdict = if converged {
        Verdict::holds(diag).note("ratio trace settled: finite modulus")
    } else {
        Verdict::inconclusive(Resolution { level: n - 1, samples: t.points[n - 1].samples, trend: t.trend() }, diag)
    };
    Ok(SubtransversalityEstimate { alpha: ExtReal::from(last), verdict, argmax })
}

/// Ratio at a single point, for checking sampled values against closed forms.
pub fn subtransversality_ratio(o1: &SetOracle, o2: &SetOracle, x: &[f64], xbar: &[f64]) -> f64 {
    let both = vec![xbar.to_vec()];
    let hash = SpatialHash::new(&both, 1.0);
    let den = o1.dist(x).max(o2.dist(x));
    let (num, _) = intersection_dist(o1, o2, x, None, &both, &hash, 1.0);
    num / den
}
