//! Fuzzy multiplier, sum, intersection and chain rules checked on sampled points near
//! the reference point. Residuals are exact distances to sums of finitely generated
//! dual sets, so unbounded multipliers never need to be enumerated.

use rayon::prelude::*;
use serde::Serialize;

use crate::dual::{dist_to_sum, DualSet};
use crate::error::{Error, Result};
use crate::extreal::ExtReal;
use crate::geometry::{self, Point};
use crate::oracle::{FnOracle, SetOracle, SmoothMap};
use crate::region::Region;
use crate::sampling::{domain_boundary_points, SampleScheme, SpatialHash};
use crate::subdifferential::{is_subgradient, SubgradientQuery};
use crate::verdict::{Diagnostics, Resolution, Status, Trend, Verdict, Witness};

/// Refinement levels tried before giving up; each level only adds candidates.
const MAX_LEVELS: usize = 6;
/// Candidate cap per side and level, kept nearest to the reference point first.
const MAX_CANDIDATES: usize = 1500;
/// Tolerance for membership tests of the subgradient passed in by the caller.
const MEMBERSHIP_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FuzzyWitness {
    pub x1: Point,
    pub x2: Point,
    pub values: [f64; 2],
    pub v1: Point,
    pub v2: Point,
    pub target: Point,
    /// ||target - (v1 + v2)||
    pub residual: f64,
    /// the advertised bound the residual is below
    pub bound: f64,
    pub eps: f64,
    pub delta: f64,
    pub eta: f64,
    pub rule: &'static str,
}

impl FuzzyWitness {
    /// max ||x_i - xbar||
    pub fn radius(&self, xbar: &[f64]) -> f64 {
        geometry::dist(&self.x1, xbar).max(geometry::dist(&self.x2, xbar))
    }
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum FuzzyOutcome {
    Found(FuzzyWitness),
    /// no sampled pair met the bound; the verdict carries the closest pair
    NotFound(Verdict),
}

impl FuzzyOutcome {
    pub fn witness(&self) -> Option<&FuzzyWitness> {
        match self {
            FuzzyOutcome::Found(w) => Some(w),
            FuzzyOutcome::NotFound(_) => None,
        }
    }

    pub fn status(&self) -> Status {
        match self {
            FuzzyOutcome::Found(_) => Status::Holds,
            FuzzyOutcome::NotFound(v) => v.status,
        }
    }
}

#[derive(Clone, Copy)]
struct PairRules {
    eps: f64,
    delta: f64,
    /// None: the two points are not coupled (intersection rule)
    eta: Option<f64>,
    /// compare values against the reference values
    value_gap: bool,
    bound: f64,
}

struct Side {
    pts: Vec<Point>,
    vals: Vec<f64>,
    duals: Vec<DualSet>,
}

fn side(f: &FnOracle, mut pts: Vec<Point>, xbar: &[f64], radius: f64, fbar: f64, rules: &PairRules) -> Side {
    pts.retain(|p| geometry::dist(p, xbar) < radius);
    pts.push(xbar.to_vec());
    pts.sort_by(|a, b| geometry::dist(a, xbar).total_cmp(&geometry::dist(b, xbar)).then_with(|| geometry::lex_cmp(a, b)));
    pts.dedup();
    let rows: Vec<Option<(Point, f64, DualSet)>> = pts
        .into_par_iter()
        .map(|p| {
            let v = f.value(&p);
            if !v.is_finite() || (rules.value_gap && !((v - fbar).abs() < rules.eps)) {
                return None;
            }
            let s = f.subgrad(&p)?;
            (!s.is_empty()).then_some((p, v, s))
        })
        .collect();
    let mut out = Side { pts: vec![], vals: vec![], duals: vec![] };
    for (p, v, s) in rows.into_iter().flatten() {
        // points sharing a dual set add nothing beyond the one nearest to xbar, except when
        // the pair rules couple the two points
        if rules.eta.is_none() && out.duals.contains(&s) {
            continue;
        }
        out.pts.push(p);
        out.vals.push(v);
        out.duals.push(s);
        if out.pts.len() >= MAX_CANDIDATES {
            break;
        }
    }
    out
}

fn candidates(f: &FnOracle, xbar: &[f64], radius: f64, level: usize, scheme: &SampleScheme) -> Result<Vec<Point>> {
    let mut pts = scheme.sample_near(xbar, radius, level)?;
    let ball = Region::OpenBall { center: xbar.to_vec(), radius };
    let h = scheme.spacing(&ball, level)?;
    let edge = domain_boundary_points(f, &pts, h, &ball);
    pts.extend(edge);
    Ok(pts)
}

/// Best (residual, v1, v2, j) for each x1, then the first x1 in order below the bound.
fn pair_search(a: &Side, b: &Side, target: &[f64], base: f64, rules: &PairRules) -> Result<(Option<(usize, usize, Point, Point, f64)>, Option<(usize, usize, f64)>)> {
    let hash = rules.eta.map(|eta| SpatialHash::new(&b.pts, eta.max(1e-12)));
    let best: Vec<Option<(f64, usize, Point, Point)>> = (0..a.pts.len())
        .into_par_iter()
        .map(|i| {
            let x1 = &a.pts[i];
            let cand: Vec<usize> = match (&hash, rules.eta) {
                (Some(h), Some(eta)) => {
                    let mut c = h.candidates(x1, eta).unwrap_or_else(|| (0..b.pts.len()).collect());
                    c.sort_unstable();
                    c.retain(|&j| geometry::dist(x1, &b.pts[j]) < eta && a.vals[i] + b.vals[j] < base + eta);
                    c
                }
                _ => (0..b.pts.len()).collect(),
            };
            let mut best: Option<(f64, usize, Point, Point)> = None;
            for j in cand {
                let Ok(s) = dist_to_sum(target, &a.duals[i], &b.duals[j]) else { continue };
                let r = residual(target, &s.v1, &s.v2);
                if best.as_ref().is_none_or(|bb| r < bb.0) {
                    best = Some((r, j, s.v1, s.v2));
                }
            }
            best
        })
        .collect();
    let mut closest: Option<(usize, usize, f64)> = None;
    for (i, b) in best.into_iter().enumerate() {
        if let Some((r, j, v1, v2)) = b {
            if r < rules.bound {
                return Ok((Some((i, j, v1, v2, r)), None));
            }
            if closest.is_none_or(|c| r < c.2) {
                closest = Some((i, j, r));
            }
        }
    }
    Ok((None, closest))
}

fn residual(target: &[f64], v1: &[f64], v2: &[f64]) -> f64 {
    let s: Point = target.iter().zip(v1).zip(v2).map(|((t, a), b)| t - (a + b)).collect();
    geometry::norm(&s)
}

#[allow(clippy::too_many_arguments)]
fn fuzzy_search(
    f1: &FnOracle,
    f2: &FnOracle,
    xbar: &[f64],
    target: &[f64],
    rules: PairRules,
    rule: &'static str,
    scheme: &SampleScheme,
) -> Result<FuzzyOutcome> {
    let dim = xbar.len();
    for (f, name) in [(f1, "f1"), (f2, "f2")] {
        if f.dim != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: f.dim });
        }
        if !f.has_subgrad() {
            return Err(Error::NoSubgradOracle(name.into()));
        }
    }
    let (b1, b2) = (f1.value(xbar), f2.value(xbar));
    if !(b1.is_finite() && b2.is_finite()) {
        return Err(Error::InfiniteAtBase);
    }
    let radius = rules.delta.min(rules.eps);
    let levels = scheme.levels.clamp(1, MAX_LEVELS);
    let mut closest = None;
    let mut samples = 0;
    for level in 0..levels {
        let a = side(f1, candidates(f1, xbar, radius, level, scheme)?, xbar, radius, b1, &rules);
        let b = side(f2, candidates(f2, xbar, radius, level, scheme)?, xbar, radius, b2, &rules);
        samples = a.pts.len() + b.pts.len();
        let (hit, near) = pair_search(&a, &b, target, b1 + b2, &rules)?;
        if let Some((i, j, v1, v2, r)) = hit {
            return Ok(FuzzyOutcome::Found(FuzzyWitness {
                x1: a.pts[i].clone(),
                x2: b.pts[j].clone(),
                values: [a.vals[i], b.vals[j]],
                v1,
                v2,
                target: target.to_vec(),
                residual: r,
                bound: rules.bound,
                eps: rules.eps,
                delta: rules.delta,
                eta: rules.eta.unwrap_or(f64::INFINITY),
                rule,
            }));
        }
        if let Some((i, j, r)) = near {
            closest = Some((a.pts[i].clone(), b.pts[j].clone(), a.vals[i], b.vals[j], r));
        }
    }
    let diag = Diagnostics { traces: vec![], notes: vec![format!("no sampled pair reached residual < {:.3e}", rules.bound)] };
    let res = Resolution { level: levels - 1, samples, trend: Trend::Single };
    let mut v = match closest {
        Some((x1, x2, v1, v2, r)) => Verdict::fails(
            Witness { points: vec![x1, x2], values: vec![ExtReal::from(v1), ExtReal::from(v2)], note: format!("closest residual {r:.6e}") },
            diag,
        ),
        None => Verdict::fails(Witness { points: vec![], values: vec![], note: "no admissible pair".into() }, diag),
    };
    v.resolution = Some(res);
    Ok(FuzzyOutcome::NotFound(v.note("failure at sampling resolution only")))
}

/// Pairs x1, x2 in B_delta(xbar), closer than eta, with decoupled value below
/// (f1+f2)(xbar) + eta and values within eps of the reference values, such that
/// dist(0, df1(x1) + df2(x2)) < min(eps, 2 eps/delta). Searched outward from xbar.
pub fn multiplier_search(
    f1: &FnOracle,
    f2: &FnOracle,
    xbar: &[f64],
    eps: f64,
    delta: f64,
    eta: f64,
    scheme: &SampleScheme,
) -> Result<FuzzyOutcome> {
    if !(eps > 0.0 && delta > 0.0 && eta > 0.0) {
        return Err(Error::PreconditionFailed("eps, delta and eta must be positive".into()));
    }
    let rules = PairRules { eps, delta, eta: Some(eta), value_gap: true, bound: eps.min(2.0 * eps / delta) };
    fuzzy_search(f1, f2, xbar, &vec![0.0; xbar.len()], rules, "multiplier", scheme)
}

/// Fuzzy sum rule for x* in d(f1+f2)(xbar): tilts f2 by x*, searches with
/// eps' = eps/(1+||x*||), and shifts the second dual back.
pub fn sum_rule_verify(f1: &FnOracle, f2: &FnOracle, xbar: &[f64], xstar: &[f64], eps: f64, scheme: &SampleScheme) -> Result<FuzzyOutcome> {
    if xstar.len() != xbar.len() {
        return Err(Error::DimensionMismatch { expected: xbar.len(), got: xstar.len() });
    }
    if !f1.has_subgrad() {
        return Err(Error::NoSubgradOracle("f1".into()));
    }
    if !f2.has_subgrad() {
        return Err(Error::NoSubgradOracle("f2".into()));
    }
    let member = is_subgradient(&SubgradientQuery::new(&f1.plus(f2), xbar, xstar), MEMBERSHIP_TOL)?;
    if member.is_fails() {
        return Err(Error::NotASubgradient);
    }
    let eps_t = tilted_eps(eps, xstar);
    let out = multiplier_search(f1, &f2.tilt(xstar), xbar, eps_t, eps_t, eps_t, scheme)?;
    Ok(match out {
        FuzzyOutcome::Found(mut w) => {
            w.v2 = geometry::add(&w.v2, xstar);
            w.values[1] = f2.value(&w.x2);
            w.target = xstar.to_vec();
            w.residual = residual(&w.target, &w.v1, &w.v2);
            w.eps = eps;
            w.rule = "sum";
            FuzzyOutcome::Found(w)
        }
        FuzzyOutcome::NotFound(v) => FuzzyOutcome::NotFound(v.note("hypothesis recorded: finite dimension")),
    })
}

/// The tightened radius used by the sum rule.
pub fn tilted_eps(eps: f64, xstar: &[f64]) -> f64 {
    eps / (1.0 + geometry::norm(xstar))
}

fn intersection_of(o1: &SetOracle, o2: &SetOracle) -> SetOracle {
    let (a, b, c, d) = (o1.clone(), o2.clone(), o1.clone(), o2.clone());
    SetOracle::new(o1.dim, format!("{} & {}", o1.label, o2.label), move |x| a.contains(x) && b.contains(x), move |x| {
        c.dist(x).max(d.dist(x))
    })
}

/// Fuzzy intersection rule: x1 in O1, x2 in O2, both within eps of xbar, with
/// dist(x*, N1(x1) + N2(x2)) < eps.
pub fn intersection_rule_verify(o1: &SetOracle, o2: &SetOracle, xbar: &[f64], xstar: &[f64], eps: f64, scheme: &SampleScheme) -> Result<FuzzyOutcome> {
    if !(o1.contains(xbar) && o2.contains(xbar)) {
        return Err(Error::BaseNotInIntersection);
    }
    for (o, name) in [(o1, "O1"), (o2, "O2")] {
        if !o.has_normal_cone() {
            return Err(Error::NoNormalConeOracle(name.into()));
        }
    }
    if xstar.len() != xbar.len() {
        return Err(Error::DimensionMismatch { expected: xbar.len(), got: xstar.len() });
    }
    let inter = FnOracle::indicator(&intersection_of(o1, o2));
    if is_subgradient(&SubgradientQuery::new(&inter, xbar, xstar), MEMBERSHIP_TOL)?.is_fails() {
        return Err(Error::NotASubgradient);
    }
    let (f1, f2) = (FnOracle::indicator(o1), FnOracle::indicator(o2));
    let rules = PairRules { eps, delta: eps, eta: None, value_gap: false, bound: eps };
    let dim = xbar.len();
    let levels = scheme.levels.clamp(1, MAX_LEVELS);
    let mut closest = None;
    let mut samples = 0;
    for level in 0..levels {
        let mut sides = vec![];
        for (o, f) in [(o1, &f1), (o2, &f2)] {
            let mut pts = candidates(f, xbar, eps, level, scheme)?;
            if o.has_projection() {
                let proj: Vec<Point> = pts.iter().filter_map(|p| o.project(p)).filter(|p| o.contains(p)).collect();
                pts.extend(proj);
            }
            sides.push(side(f, pts, xbar, eps, 0.0, &rules));
        }
        samples = sides[0].pts.len() + sides[1].pts.len();
        let (hit, near) = pair_search(&sides[0], &sides[1], xstar, 0.0, &rules)?;
        let (a, b) = (&sides[0], &sides[1]);
        if let Some((i, j, v1, v2, r)) = hit {
            return Ok(FuzzyOutcome::Found(FuzzyWitness {
                x1: a.pts[i].clone(),
                x2: b.pts[j].clone(),
                values: [0.0, 0.0],
                v1,
                v2,
                target: xstar.to_vec(),
                residual: r,
                bound: eps,
                eps,
                delta: eps,
                eta: f64::INFINITY,
                rule: "intersection",
            }));
        }
        if let Some((i, j, r)) = near {
            closest = Some((a.pts[i].clone(), b.pts[j].clone(), r));
        }
    }
    let diag = Diagnostics { traces: vec![], notes: vec![format!("no sampled pair reached residual < {eps:.3e} in dimension {dim}")] };
    let w = match closest {
        Some((x1, x2, r)) => Witness { points: vec![x1, x2], values: vec![ExtReal::Finite(0.0); 2], note: format!("closest residual {r:.6e}") },
        None => Witness { points: vec![], values: vec![], note: "no admissible pair".into() },
    };
    let mut v = Verdict::fails(w, diag);
    v.resolution = Some(Resolution { level: levels - 1, samples, trend: Trend::Single });
    Ok(FuzzyOutcome::NotFound(v))
}

/// Recomputes distances, values, value gaps and the residual from the oracles and checks
/// them against the stored fields, together with dual membership.
pub fn reverify(w: &FuzzyWitness, f1: &FnOracle, f2: &FnOracle, xbar: &[f64]) -> bool {
    let vals_ok = f1.value(&w.x1) == w.values[0] && f2.value(&w.x2) == w.values[1];
    let res_ok = residual(&w.target, &w.v1, &w.v2) == w.residual && w.residual < w.bound;
    let radius_ok = w.radius(xbar) < w.delta.min(w.eps);
    let gap_ok = w.rule == "intersection"
        || ((w.values[0] - f1.value(xbar)).abs() < w.eps && (w.values[1] - f2.value(xbar)).abs() < w.eps);
    let couple_ok = !w.eta.is_finite() || geometry::dist(&w.x1, &w.x2) < w.eta;
    let tol = |v: &[f64]| 1e-9 * (1.0 + geometry::norm(v));
    let dual_ok = f1.subgrad(&w.x1).is_some_and(|s| s.contains(&w.v1, tol(&w.v1)))
        && f2.subgrad(&w.x2).is_some_and(|s| s.contains(&w.v2, tol(&w.v2)));
    vals_ok && res_ok && radius_ok && gap_ok && couple_ok && dual_ok
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainWitness {
    pub xhat: Point,
    pub yhat: Point,
    /// y* in df(yhat) + eps B
    pub ystar: Point,
    /// J(xhat)^T y*
    pub v: Point,
    pub residual: f64,
    pub eps: f64,
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum ChainOutcome {
    Found(ChainWitness),
    NotFound(Verdict),
}

impl ChainOutcome {
    pub fn witness(&self) -> Option<&ChainWitness> {
        match self {
            ChainOutcome::Found(w) => Some(w),
            ChainOutcome::NotFound(_) => None,
        }
    }

    pub fn status(&self) -> Status {
        match self {
            ChainOutcome::Found(_) => Status::Holds,
            ChainOutcome::NotFound(v) => v.status,
        }
    }
}

fn mat_t_vec(j: &[Vec<f64>], y: &[f64]) -> Point {
    let n = j.first().map_or(0, |r| r.len());
    let mut out = vec![0.0; n];
    for (row, yi) in j.iter().zip(y) {
        for (o, a) in out.iter_mut().zip(row) {
            *o += a * yi;
        }
    }
    out
}

/// Smallest ||r - J^T b|| over ||b|| <= eps, approximated by the scaled least-squares step.
fn relax(j: &[Vec<f64>], r: &[f64], eps: f64) -> Point {
    let m = j.len();
    let jr: Vec<f64> = j.iter().map(|row| geometry::dot(row, r)).collect();
    let mut aug = vec![vec![0.0; m + 1]; m];
    for a in 0..m {
        for b in 0..m {
            aug[a][b] = geometry::dot(&j[a], &j[b]);
        }
        aug[a][a] += 1e-14;
        aug[a][m] = jr[a];
    }
    let b = crate::dual::solve_linear(aug).unwrap_or_else(|| vec![0.0; m]);
    let nb = geometry::norm(&b);
    if nb > eps {
        b.iter().map(|v| v * eps / nb).collect()
    } else {
        b
    }
}

/// Fuzzy chain rule for a smooth inner map: xhat near xbar, yhat near F(xbar) with
/// |f(yhat) - f(F(xbar))| < eps, and y* in df(yhat) + eps B with ||x* - J(xhat)^T y*|| <= eps.
pub fn chain_rule_verify(f: &FnOracle, map: &SmoothMap, xbar: &[f64], xstar: &[f64], eps: f64, scheme: &SampleScheme) -> Result<ChainOutcome> {
    if map.in_dim != xbar.len() {
        return Err(Error::DimensionMismatch { expected: map.in_dim, got: xbar.len() });
    }
    if f.dim != map.out_dim {
        return Err(Error::DimensionMismatch { expected: map.out_dim, got: f.dim });
    }
    if map.jacobian(xbar).is_none() {
        return Err(Error::JacobianUnavailable);
    }
    if !f.has_subgrad() {
        return Err(Error::NoSubgradOracle("f".into()));
    }
    let ybar = map.apply(xbar);
    let fy = f.value(&ybar);
    if !fy.is_finite() {
        return Err(Error::InfiniteAtBase);
    }
    let (f2, m2) = (f.clone(), map.clone());
    let comp = FnOracle::new(xbar.len(), format!("{} o {}", f.label, map.label), move |x| f2.value(&m2.apply(x)));
    if is_subgradient(&SubgradientQuery::new(&comp, xbar, xstar), MEMBERSHIP_TOL)?.is_fails() {
        return Err(Error::NotASubgradient);
    }
    let rules = PairRules { eps, delta: eps, eta: None, value_gap: true, bound: eps };
    let levels = scheme.levels.clamp(1, MAX_LEVELS);
    let mut closest: Option<(Point, Point, f64)> = None;
    for level in 0..levels {
        let mut xs = scheme.sample_near(xbar, eps, level)?;
        xs.push(xbar.to_vec());
        xs.retain(|x| geometry::dist(x, xbar) < eps && map.jacobian(x).is_some());
        xs.sort_by(|a, b| geometry::dist(a, xbar).total_cmp(&geometry::dist(b, xbar)).then_with(|| geometry::lex_cmp(a, b)));
        xs.dedup();
        xs.truncate(200);
        let mut ys = candidates(f, &ybar, eps, level, scheme)?;
        ys.extend(xs.iter().map(|x| map.apply(x)));
        let ys = side(f, ys, &ybar, eps, fy, &rules);
        let rows: Vec<Option<(f64, usize, Point, Point)>> = xs
            .par_iter()
            .map(|x| {
                let jac = map.jacobian(x)?;
                let mut best: Option<(f64, usize, Point, Point)> = None;
                for (k, s) in ys.duals.iter().enumerate() {
                    // exact element of df(yhat) first, then the eps B relaxation if it helps
                    let Ok(y0) = nearest_preimage(s, &jac, xstar) else { continue };
                    let v0 = mat_t_vec(&jac, &y0);
                    let y1 = geometry::add(&y0, &relax(&jac, &geometry::sub(xstar, &v0), eps));
                    let v1 = mat_t_vec(&jac, &y1);
                    let (d0, d1) = (geometry::dist(xstar, &v0), geometry::dist(xstar, &v1));
                    let (d, ystar, v) = if d1 < d0 { (d1, y1, v1) } else { (d0, y0, v0) };
                    if best.as_ref().is_none_or(|bb| d < bb.0) {
                        best = Some((d, k, ystar, v));
                    }
                }
                best
            })
            .collect();
        for (i, row) in rows.into_iter().enumerate() {
            let Some((d, k, ystar, v)) = row else { continue };
            if d <= eps {
                return Ok(ChainOutcome::Found(ChainWitness { xhat: xs[i].clone(), yhat: ys.pts[k].clone(), ystar, v, residual: d, eps }));
            }
            if closest.as_ref().is_none_or(|c| d < c.2) {
                closest = Some((xs[i].clone(), ys.pts[k].clone(), d));
            }
        }
    }
    let diag = Diagnostics { traces: vec![], notes: vec![format!("no sampled pair reached residual <= {eps:.3e}")] };
    let w = match closest {
        Some((x, y, d)) => Witness { points: vec![x, y], values: vec![], note: format!("closest residual {d:.6e}") },
        None => Witness { points: vec![], values: vec![], note: "no admissible pair".into() },
    };
    let mut v = Verdict::fails(w, diag);
    v.resolution = Some(Resolution { level: levels - 1, samples: 0, trend: Trend::Single });
    Ok(ChainOutcome::NotFound(v))
}

fn transpose(j: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = j.first().map_or(0, |r| r.len());
    (0..n).map(|c| j.iter().map(|row| row[c]).collect()).collect()
}

/// Element y0 of `s` whose image J^T y0 is nearest to `target`.
fn nearest_preimage(s: &DualSet, jac: &[Vec<f64>], target: &[f64]) -> Result<Point> {
    let jt = transpose(jac);
    let mut best: Option<(f64, Point)> = None;
    for p in &s.pieces {
        let img = p.linear_image(&jt);
        let (d, alpha) = crate::dual::nearest_params(&img, target);
        if best.as_ref().is_none_or(|b| d < b.0) {
            best = Some((d, p.eval(&alpha)));
        }
    }
    best.map(|b| b.1).ok_or(Error::EmptySet)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn abs1() -> FnOracle {
        FnOracle::new(1, "|x|", |x| x[0].abs()).with_subgrad(|x| {
            if x[0] == 0.0 {
                DualSet::intervals(&[-1.0], &[1.0])
            } else {
                DualSet::point(vec![x[0].signum()])
            }
        })
    }

    fn linear1(c: f64) -> FnOracle {
        FnOracle::new(1, "cx", move |x| c * x[0]).with_subgrad(move |_| DualSet::point(vec![c]))
    }

    fn half_square() -> FnOracle {
        FnOracle::new(1, "x^2/2", |x| 0.5 * x[0] * x[0]).with_subgrad(|x| DualSet::point(vec![x[0]]))
    }

    fn scheme() -> SampleScheme {
        SampleScheme::default().with_levels(3)
    }

    #[test]
    fn smooth_minimum_gives_the_base_point() {
        let out = multiplier_search(&half_square(), &FnOracle::constant(1, 0.0), &[0.0], 0.1, 0.1, 0.1, &scheme()).unwrap();
        let w = out.witness().unwrap();
        assert_eq!((w.x1.clone(), w.x2.clone(), w.residual), (vec![0.0], vec![0.0], 0.0));
    }

    #[test]
    fn convex_kink_absorbs_the_linear_part() {
        let (f1, f2) = (abs1(), linear1(-1.0));
        let out = multiplier_search(&f1, &f2, &[0.0], 0.01, 0.01, 0.01, &scheme()).unwrap();
        let w = out.witness().unwrap();
        assert_eq!(w.residual, 0.0);
        assert_eq!((w.v1.clone(), w.v2.clone()), (vec![1.0], vec![-1.0]));
        assert!(reverify(w, &f1, &f2, &[0.0]));
    }

    #[test]
    fn sum_rule_splits_the_target() {
        let out = sum_rule_verify(&abs1(), &abs1(), &[0.0], &[1.5], 0.1, &scheme()).unwrap();
        let w = out.witness().unwrap();
        assert_eq!(w.x1, vec![0.0]);
        assert!(w.residual < 1e-15);
        assert!((w.v1[0] + w.v2[0] - 1.5).abs() < 1e-15);
        assert!(reverify(w, &abs1(), &abs1(), &[0.0]));
    }

    #[test]
    fn sum_rule_rejects_a_non_subgradient() {
        let e = sum_rule_verify(&abs1(), &abs1(), &[0.0], &[3.0], 0.1, &scheme()).unwrap_err();
        assert!(matches!(e, Error::NotASubgradient));
    }

    #[test]
    fn missing_oracle_is_an_error() {
        let f = FnOracle::new(1, "bare", |x| x[0]);
        assert!(matches!(multiplier_search(&f, &abs1(), &[0.0], 0.1, 0.1, 0.1, &scheme()), Err(Error::NoSubgradOracle(_))));
    }

    #[test]
    fn smooth_chain() {
        let f = half_square();
        let map = SmoothMap::new(1, 1, "x^2", |x| vec![x[0] * x[0]]).with_jacobian(|x| Some(vec![vec![2.0 * x[0]]]));
        let out = chain_rule_verify(&f, &map, &[1.0], &[2.0], 0.1, &scheme()).unwrap();
        let ChainOutcome::Found(w) = out else { panic!() };
        assert_eq!(w.xhat, vec![1.0]);
        assert!(w.residual < 1e-12);
    }

    #[test]
    fn linear_inner_map_chain() {
        let map = SmoothMap::linear(vec![vec![2.0]]);
        let out = chain_rule_verify(&abs1(), &map, &[0.0], &[1.0], 0.1, &scheme()).unwrap();
        let ChainOutcome::Found(w) = out else { panic!() };
        assert_eq!(w.residual, 0.0);
        assert_eq!(w.ystar, vec![0.5]);
    }

    #[test]
    fn crossing_lines_intersection() {
        let o1 = SetOracle::line(vec![0.0, 0.0], vec![1.0, 1.0]);
        let o2 = SetOracle::line(vec![0.0, 0.0], vec![1.0, -1.0]);
        let out = intersection_rule_verify(&o1, &o2, &[0.0, 0.0], &[0.3, -0.7], 0.1, &scheme()).unwrap();
        let w = out.witness().unwrap();
        assert_eq!(w.x1, vec![0.0, 0.0]);
        assert!(w.residual < 1e-15);
    }

    #[test]
    fn same_half_plane_boundary_normal() {
        let o = SetOracle::halfspace(vec![0.0, 1.0], 0.0);
        let out = intersection_rule_verify(&o, &o, &[0.0, 0.0], &[0.0, 2.0], 0.1, &scheme()).unwrap();
        let w = out.witness().unwrap();
        assert_eq!((w.x1.clone(), w.x2.clone(), w.residual), (vec![0.0, 0.0], vec![0.0, 0.0], 0.0));
    }

    #[test]
    fn unreachable_target_reports_failure() {
        // the normal cones of two horizontal lines never produce a horizontal vector
        let o = SetOracle::line(vec![0.0, 0.0], vec![1.0, 0.0]);
        let e = intersection_rule_verify(&o, &o, &[0.0, 0.0], &[1.0, 0.0], 0.1, &scheme());
        assert!(matches!(e, Err(Error::NotASubgradient)) || e.unwrap().status() == Status::Fails);
    }
}
