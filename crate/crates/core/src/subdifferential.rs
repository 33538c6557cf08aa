//! Frechet subgradient membership by difference quotients, structured normal cones,
//! and coderivatives of smooth maps.

use serde::Serialize;

use crate::dual::{DualSet, GenPiece};
use crate::error::{Error, Result};
use crate::extreal::ExtReal;
use crate::geometry::{self, Point};
use crate::oracle::{FnOracle, SetOracle, SmoothMap};
use crate::sampling::sphere_directions;
use crate::verdict::{Diagnostics, Resolution, Trace, Verdict, Witness};

pub use crate::dual::dist_to_sum;

#[derive(Debug, Clone)]
pub struct SubgradientQuery {
    pub f: FnOracle,
    pub x: Point,
    pub xstar: Point,
    /// radii r0 * 2^-j for j = 0..levels
    pub r0: f64,
    pub levels: usize,
}

impl SubgradientQuery {
    pub fn new(f: &FnOracle, x: &[f64], xstar: &[f64]) -> Self {
        SubgradientQuery { f: f.clone(), x: x.to_vec(), xstar: xstar.to_vec(), r0: 0.1, levels: 6 }
    }

    fn directions(&self) -> Vec<Point> {
        let dim = self.x.len();
        let mut d = sphere_directions(dim, 64);
        if dim >= 3 {
            d.extend(sphere_directions(dim, 32 * dim));
        }
        d
    }
}

/// Smallest sampled quotient (f(x+rd) - f(x) - <x*, rd>) / r at one radius, with its direction.
fn min_quotient(q: &SubgradientQuery, fx: f64, dirs: &[Point], r: f64) -> (f64, usize) {
    let mut best = (f64::INFINITY, 0);
    for (k, d) in dirs.iter().enumerate() {
        let y = geometry::axpy(r, d, &q.x);
        let fy = q.f.value(&y);
        if fy == f64::INFINITY {
            continue;
        }
        let step = geometry::dist(&y, &q.x);
        if step == 0.0 {
            continue;
        }
        let v = (fy - fx - geometry::dot(&q.xstar, &geometry::sub(&y, &q.x))) / step;
        if v < best.0 {
            best = (v, k);
        }
    }
    best
}

/// HOLDS when the finest quotient, or its Richardson extrapolation, is >= -tol;
/// FAILS when the two finest levels and the extrapolation all stay below -c.
pub fn is_subgradient(q: &SubgradientQuery, tol: f64) -> Result<Verdict> {
    if q.xstar.len() != q.x.len() {
        return Err(Error::DimensionMismatch { expected: q.x.len(), got: q.xstar.len() });
    }
    let fx = q.f.value(&q.x);
    if !fx.is_finite() {
        return Err(Error::InfiniteAtBase);
    }
    let dirs = q.directions();
    let mut trace = Trace::new("min difference quotient");
    let mut mins = Vec::new();
    for j in 0..=q.levels {
        let r = q.r0 * 0.5f64.powi(j as i32);
        let (v, k) = min_quotient(q, fx, &dirs, r);
        trace.push(j, r, ExtReal::from(v), dirs.len());
        mins.push((v, k, r));
    }
    let n = mins.len();
    let (last, k_last, r_last) = mins[n - 1];
    let prev = if n >= 2 { mins[n - 2].0 } else { last };
    let extrap = if last.is_finite() && prev.is_finite() { 2.0 * last - prev } else { last };
    let c = 1e-4f64.max(10.0 * tol);
    let diag = Diagnostics { traces: vec![trace.clone()], notes: vec!["sampled lower estimate of the Frechet liminf".into()] };
    if last >= -tol || extrap >= -tol {
        return Ok(Verdict::holds(diag));
    }
    if last < -c && prev < -c && extrap < -c {
        let d = &dirs[k_last];
        let y = geometry::axpy(r_last, d, &q.x);
        let w = Witness {
            points: vec![q.x.clone(), y.clone()],
            values: vec![ExtReal::from(fx), q.f.eval(&y)],
            note: format!("quotient {last:.6} along direction {d:?} at radius {r_last:e}"),
        };
        return Ok(Verdict::fails(w, diag));
    }
    Ok(Verdict::inconclusive(Resolution { level: q.levels, samples: dirs.len(), trend: trace.trend() }, diag))
}

/// Frechet normal-cone membership: the subgradient test for the indicator.
pub fn is_normal(set: &SetOracle, x: &[f64], xstar: &[f64], tol: f64) -> Result<Verdict> {
    if !set.contains(x) {
        return Err(Error::BaseNotInIntersection);
    }
    is_subgradient(&SubgradientQuery::new(&FnOracle::indicator(set), x, xstar), tol)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SignPattern {
    Zero,
    NonPositive,
    NonNegative,
    Free,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StructuredCone {
    Box { signs: Vec<SignPattern> },
    /// ray spanned by the normal when the constraint is active, {0} otherwise
    Halfspace { normal: Point, active: bool },
    /// normal cone to the epigraph of a smooth function at a graph point: rays of (grad, -1)
    EpigraphSmooth { grad: Point },
    Generators { dim: usize, gens: Vec<Point> },
}

impl StructuredCone {
    pub fn dim(&self) -> usize {
        match self {
            StructuredCone::Box { signs } => signs.len(),
            StructuredCone::Halfspace { normal, .. } => normal.len(),
            StructuredCone::EpigraphSmooth { grad } => grad.len() + 1,
            StructuredCone::Generators { dim, .. } => *dim,
        }
    }

    /// Conic generators; a free axis contributes both signs.
    pub fn generators(&self) -> Vec<Point> {
        let n = self.dim();
        let e = |i: usize, s: f64| {
            let mut v = vec![0.0; n];
            v[i] = s;
            v
        };
        match self {
            StructuredCone::Box { signs } => {
                let mut out = Vec::new();
                for (i, s) in signs.iter().enumerate() {
                    match s {
                        SignPattern::Zero => {}
                        SignPattern::NonPositive => out.push(e(i, -1.0)),
                        SignPattern::NonNegative => out.push(e(i, 1.0)),
                        SignPattern::Free => {
                            out.push(e(i, 1.0));
                            out.push(e(i, -1.0));
                        }
                    }
                }
                out
            }
            StructuredCone::Halfspace { normal, active } => {
                if *active {
                    vec![normal.clone()]
                } else {
                    vec![]
                }
            }
            StructuredCone::EpigraphSmooth { grad } => {
                let mut v = grad.clone();
                v.push(-1.0);
                vec![v]
            }
            StructuredCone::Generators { gens, .. } => gens.clone(),
        }
    }

    pub fn to_dual_set(&self) -> DualSet {
        let n = self.dim();
        match self {
            StructuredCone::Box { signs } => {
                let mut p = GenPiece::point(vec![0.0; n]);
                for (i, s) in signs.iter().enumerate() {
                    let mut g = vec![0.0; n];
                    g[i] = 1.0;
                    p = match s {
                        SignPattern::Zero => continue,
                        SignPattern::NonPositive => p.with_gen(g, f64::NEG_INFINITY, 0.0),
                        SignPattern::NonNegative => p.with_gen(g, 0.0, f64::INFINITY),
                        SignPattern::Free => p.with_gen(g, f64::NEG_INFINITY, f64::INFINITY),
                    };
                }
                DualSet::piece(p)
            }
            _ => DualSet::cone(n, self.generators()),
        }
    }

    pub fn contains(&self, v: &[f64], tol: f64) -> bool {
        self.to_dual_set().contains(v, tol)
    }
}

/// Sign pattern of the normal cone to [lo, hi] at x.
pub fn box_normal_cone(lo: &[f64], hi: &[f64], x: &[f64], tol: f64) -> Result<StructuredCone> {
    if lo.len() != x.len() || hi.len() != x.len() {
        return Err(Error::DimensionMismatch { expected: lo.len(), got: x.len() });
    }
    let mut signs = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        if x[i] < lo[i] - tol || x[i] > hi[i] + tol {
            return Err(Error::NotInBox);
        }
        let at_lo = x[i] <= lo[i] + tol;
        let at_hi = x[i] >= hi[i] - tol;
        signs.push(match (at_lo, at_hi) {
            (true, true) => SignPattern::Free,
            (true, false) => SignPattern::NonPositive,
            (false, true) => SignPattern::NonNegative,
            (false, false) => SignPattern::Zero,
        });
    }
    Ok(StructuredCone::Box { signs })
}

/// J(x)^T y*.
pub fn coderivative_smooth(f: &SmoothMap, x: &[f64], ystar: &[f64]) -> Result<Point> {
    let j = f.jacobian(x).ok_or(Error::JacobianUnavailable)?;
    if j.len() != ystar.len() {
        return Err(Error::DimensionMismatch { expected: j.len(), got: ystar.len() });
    }
    let mut out = vec![0.0; x.len()];
    for (row, y) in j.iter().zip(ystar) {
        for (o, a) in out.iter_mut().zip(row) {
            *o += a * y;
        }
    }
    Ok(out)
}

/// Central-difference Jacobian, rows = outputs.
pub fn finite_difference_jacobian(f: &SmoothMap, x: &[f64], h: f64) -> Vec<Vec<f64>> {
    let m = f.out_dim;
    let mut j = vec![vec![0.0; x.len()]; m];
    for k in 0..x.len() {
        let mut a = x.to_vec();
        let mut b = x.to_vec();
        a[k] += h;
        b[k] -= h;
        let (fa, fb) = (f.apply(&a), f.apply(&b));
        for i in 0..m {
            j[i][k] = (fa[i] - fb[i]) / (2.0 * h);
        }
    }
    j
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::verdict::Status;

    fn abs1() -> FnOracle {
        FnOracle::new(1, "|x|", |x| x[0].abs())
    }

    #[test]
    fn abs_has_half_as_subgradient() {
        let v = is_subgradient(&SubgradientQuery::new(&abs1(), &[0.0], &[0.5]), 1e-6).unwrap();
        assert_eq!(v.status, Status::Holds);
    }

    #[test]
    fn concave_kink_has_none() {
        let f = FnOracle::new(1, "-|x|", |x| -x[0].abs());
        let v = is_subgradient(&SubgradientQuery::new(&f, &[0.0], &[0.0]), 1e-6).unwrap();
        assert_eq!(v.status, Status::Fails);
        let w = v.witness.unwrap();
        assert_eq!(w.points[1][0].abs(), 0.1 * 0.5f64.powi(6));
    }

    #[test]
    fn smooth_gradient_passes_via_extrapolation() {
        let f = FnOracle::new(1, "-x^2", |x| -x[0] * x[0]);
        let v = is_subgradient(&SubgradientQuery::new(&f, &[0.0], &[0.0]), 1e-6).unwrap();
        assert_eq!(v.status, Status::Holds);
        let g = FnOracle::new(1, "x", |x| x[0]);
        let v = is_subgradient(&SubgradientQuery::new(&g, &[0.0], &[0.0]), 1e-6).unwrap();
        assert_eq!(v.status, Status::Fails);
    }

    #[test]
    fn parabola_epigraph_subgradient() {
        let phi1 = FnOracle::new(2, "phi1", |p| if p[1] >= p[0] * p[0] { -p[0] } else { f64::INFINITY });
        let (t, a) = (0.25, 2.0);
        let q = SubgradientQuery::new(&phi1, &[t, t * t], &[2.0 * a * t - 1.0, -a]);
        assert_eq!(is_subgradient(&q, 1e-6).unwrap().status, Status::Holds);
        let bad = SubgradientQuery::new(&phi1, &[t, t * t], &[1.0, 0.0]);
        assert_eq!(is_subgradient(&bad, 1e-6).unwrap().status, Status::Fails);
    }

    #[test]
    fn infinite_base_is_an_error() {
        let f = FnOracle::new(1, "ind", |x| if x[0] > 0.0 { 0.0 } else { f64::INFINITY });
        assert_eq!(is_subgradient(&SubgradientQuery::new(&f, &[0.0], &[0.0]), 1e-6).unwrap_err(), Error::InfiniteAtBase);
    }

    #[test]
    fn box_cones() {
        let c = box_normal_cone(&[-1.0], &[1.0], &[0.0], 1e-12).unwrap();
        assert_eq!(c, StructuredCone::Box { signs: vec![SignPattern::Zero] });
        assert!(c.contains(&[0.0], 1e-12) && !c.contains(&[0.1], 1e-12));
        let c = box_normal_cone(&[-1.0], &[1.0], &[1.0], 1e-12).unwrap();
        assert!(c.contains(&[3.0], 1e-12) && !c.contains(&[-1.0], 1e-9));
        let c = box_normal_cone(&[-1.0, -1.0], &[1.0, 1.0], &[1.0, -1.0], 1e-12).unwrap();
        assert_eq!(c.generators(), vec![vec![1.0, 0.0], vec![0.0, -1.0]]);
        assert_eq!(box_normal_cone(&[-1.0], &[1.0], &[2.0], 1e-12).unwrap_err(), Error::NotInBox);
        let pinned = box_normal_cone(&[0.5], &[0.5], &[0.5], 1e-12).unwrap();
        assert!(pinned.contains(&[-4.0], 1e-12) && pinned.contains(&[4.0], 1e-12));
    }

    #[test]
    fn box_corner_generators_are_normal() {
        // brute force: <g, y - x> <= 0 over a grid of box points
        let (lo, hi) = (vec![-1.0, -1.0], vec![1.0, 1.0]);
        let x = vec![1.0, -1.0];
        let c = box_normal_cone(&lo, &hi, &x, 1e-12).unwrap();
        for g in c.generators() {
            for i in 0..=20 {
                for j in 0..=20 {
                    let y = [-1.0 + 0.1 * i as f64, -1.0 + 0.1 * j as f64];
                    assert!(geometry::dot(&g, &geometry::sub(&y, &x)) <= 1e-12);
                }
            }
        }
    }

    #[test]
    fn coderivatives() {
        let f = SmoothMap::new(1, 2, "(x, x^2)", |x| vec![x[0], x[0] * x[0]])
            .with_jacobian(|x| Some(vec![vec![1.0], vec![2.0 * x[0]]]));
        assert_eq!(coderivative_smooth(&f, &[0.5], &[1.0, 1.0]).unwrap(), vec![2.0]);
        let fd = finite_difference_jacobian(&f, &[0.5], 1e-6);
        assert!((fd[1][0] - 1.0).abs() < 1e-8);
        let lin = SmoothMap::linear(vec![vec![1.0, 2.0], vec![3.0, 4.0]]);
        assert_eq!(coderivative_smooth(&lin, &[0.0, 0.0], &[1.0, -1.0]).unwrap(), vec![-2.0, -2.0]);
    }
}
