//! Ekeland's principle on finite clouds, the decoupled penalized search built on it, and
//! classifiers for quasiuniform minimality and stationarity.

use rayon::prelude::*;
use serde::Serialize;

use crate::decoupling::lambda_dag;
use crate::error::{Error, Result};
use crate::extreal::ExtReal;
use crate::geometry::{self, Point};
use crate::oracle::FnOracle;
use crate::region::Region;
use crate::sampling::{domain_boundary_points, SampleScheme};
use crate::subdifferential::{is_subgradient, SubgradientQuery};
use crate::verdict::{Diagnostics, Resolution, Status, Trace, Trend, Verdict, Witness};

/// Agreement tolerance for sampled infima (matches the sampled-value tolerance of the suite).
pub const SAMPLED_TOL: f64 = 5e-2;
const STATIONARY_EPS: [f64; 3] = [1.0, 0.3, 0.1];
const STATIONARY_DELTA0: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EkelandResult {
    pub xhat: Point,
    pub index: usize,
    pub value: f64,
    /// f(base) - f(xhat) - eps d(xhat, base), nonnegative
    pub descent_margin: f64,
    pub eps: f64,
    pub base: Point,
    pub moves: usize,
}

/// Condition (ii) fails at `cur` because of `x`: f(x) + eps d(x, cur) <= f(cur).
fn violates(vals: &[f64], d: f64, x: usize, cur: usize, eps: f64) -> bool {
    d > 0.0 && vals[x].is_finite() && !(vals[cur] < vals[x] + eps * d)
}

/// Iterated strict improvement under a given metric: from the base, move to the
/// least-valued point violating condition (ii) (ties: lexicographic), until none is left.
pub fn ekeland_on_cloud_metric<P: Sync, D: Fn(&P, &P) -> f64 + Sync>(
    points: &[P],
    values: &[f64],
    base: usize,
    eps: f64,
    metric: D,
    order: impl Fn(&P, &P) -> std::cmp::Ordering,
) -> Result<(usize, usize)> {
    if !values.iter().any(|v| v.is_finite()) {
        return Err(Error::AllInfinite);
    }
    if base >= points.len() {
        return Err(Error::BaseNotInCloud);
    }
    if !values[base].is_finite() {
        return Err(Error::InfiniteAtBase);
    }
    let mut cur = base;
    let mut moves = 0;
    loop {
        let cand: Vec<usize> = (0..points.len())
            .into_par_iter()
            .filter(|&i| i != cur && violates(values, metric(&points[i], &points[cur]), i, cur, eps))
            .collect();
        let Some(next) = cand.into_iter().min_by(|&a, &b| values[a].total_cmp(&values[b]).then(order(&points[a], &points[b]))) else {
            return Ok((cur, moves));
        };
        cur = next;
        moves += 1;
    }
}

/// Exact Ekeland point on a finite cloud with the Euclidean metric.
pub fn ekeland_on_cloud(points: &[Point], values: &[f64], base: &[f64], eps: f64) -> Result<EkelandResult> {
    if points.len() != values.len() {
        return Err(Error::DimensionMismatch { expected: points.len(), got: values.len() });
    }
    if !values.iter().any(|v| v.is_finite()) {
        return Err(Error::AllInfinite);
    }
    let b = points.iter().position(|p| p.as_slice() == base).ok_or(Error::BaseNotInCloud)?;
    let (i, moves) = ekeland_on_cloud_metric(points, values, b, eps, |a, c| geometry::dist(a, c), |a, c| geometry::lex_cmp(a, c))?;
    Ok(EkelandResult {
        xhat: points[i].clone(),
        index: i,
        value: values[i],
        descent_margin: values[b] - values[i] - eps * geometry::dist(&points[i], base),
        eps,
        base: base.to_vec(),
        moves,
    })
}

/// Both conditions checked exactly against every cloud point.
pub fn check_ekeland(points: &[Point], values: &[f64], base: &[f64], eps: f64, xhat: &[f64]) -> (bool, bool) {
    let fb = points.iter().zip(values).find(|(p, _)| p.as_slice() == base).map_or(f64::NAN, |(_, v)| *v);
    let fh = points.iter().zip(values).find(|(p, _)| p.as_slice() == xhat).map_or(f64::NAN, |(_, v)| *v);
    let first = fh + eps * geometry::dist(xhat, base) <= fb;
    let second = points.iter().zip(values).all(|(p, v)| p.as_slice() == xhat || fh < v + eps * geometry::dist(p, xhat));
    (first, second)
}

/// f1(u1) + f2(u2) + gamma d(u1, u2) + alpha d((u1, u2), (anchor, anchor))^2
#[derive(Debug, Clone)]
pub struct PenalizedDecoupled {
    pub f1: FnOracle,
    pub f2: FnOracle,
    pub gamma: f64,
    pub alpha: f64,
    pub anchor: Point,
}

impl PenalizedDecoupled {
    pub fn coupled(&self, u1: &[f64], u2: &[f64]) -> f64 {
        let s = self.f1.value(u1) + self.f2.value(u2);
        if s.is_finite() {
            s + self.gamma * geometry::dist(u1, u2)
        } else {
            f64::INFINITY
        }
    }

    pub fn value(&self, u1: &[f64], u2: &[f64]) -> f64 {
        let d = geometry::product_dist(u1, u2, &self.anchor, &self.anchor);
        self.coupled(u1, u2) + self.alpha * d * d
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PenalizedResult {
    pub gamma: f64,
    pub alpha: f64,
    pub rho: f64,
    pub eps_prime: f64,
    pub xi: f64,
    pub c: f64,
    pub lambda_dag: ExtReal,
    pub xhat1: Point,
    pub xhat2: Point,
    pub value: f64,
    pub base_value: f64,
    /// largest sampled descent slope of the coupled function away from the found pair
    pub slope: f64,
    pub slope_bound: f64,
    pub checks: Vec<(String, bool)>,
    pub slope_bound_check: Verdict,
}

fn ball_cloud(f1: &FnOracle, f2: &FnOracle, center: &[f64], r: f64, scheme: &SampleScheme) -> Result<Vec<Point>> {
    let ball = Region::closed_ball(center.to_vec(), r)?;
    let mut pts = scheme.sample(&ball, 0)?;
    let h = scheme.spacing(&ball, 0)?.max(1e-12);
    let b1 = domain_boundary_points(f1, &pts, h, &ball);
    let b2 = domain_boundary_points(f2, &pts, h, &ball);
    pts.extend(b1);
    pts.extend(b2);
    pts.push(center.to_vec());
    pts.sort_by(|a, b| geometry::lex_cmp(a, b));
    pts.dedup();
    Ok(pts)
}

/// Penalized decoupled search: certify the eps-minimum, fix rho, alpha, xi, find the coupling
/// weight gamma on samples, then run Ekeland on the sampled product ball.
pub fn penalized_search(f1: &FnOracle, f2: &FnOracle, xbar: &[f64], eps: f64, delta: f64, eta: f64, scheme: &SampleScheme) -> Result<PenalizedResult> {
    let v = f1.value(xbar) + f2.value(xbar);
    if !v.is_finite() {
        return Err(Error::InfiniteAtBase);
    }
    let open = Region::open_ball(xbar.to_vec(), delta)?;
    let probe = scheme.sample(&open, 2.min(scheme.levels - 1))?;
    for f in [f1, f2] {
        let m = probe.iter().map(|p| f.value(p)).fold(f64::INFINITY, f64::min);
        if m <= -scheme.diverge {
            return Err(Error::NotBoundedBelow(m));
        }
    }
    let (ld, _) = lambda_dag(f1, f2, &open, scheme)?;
    let margin = ld.to_f64() + eps - v;
    if !(margin > 0.0) {
        return Err(Error::QuasiuniformEpsMinNotCertified(margin));
    }
    // any eps' in (v - lambda_dag, eps) keeps the point an eps'-minimum
    let eps_prime = ((v - ld.to_f64()).max(0.0) + eps) / 2.0;
    let rho = (delta * eps_prime / eps + delta) / 2.0;
    let alpha = eps_prime / (rho * rho);
    let xi = 2.0 * (eps / delta - eps_prime / rho);

    let big = ball_cloud(f1, f2, xbar, delta * (1.0 - 1e-9), scheme)?;
    let (m1, m2) = (
        big.iter().map(|p| f1.value(p)).fold(f64::INFINITY, f64::min),
        big.iter().map(|p| f2.value(p)).fold(f64::INFINITY, f64::min),
    );
    let c = v - (m1 + m2) + 1.0;

    let cloud = ball_cloud(f1, f2, xbar, rho, scheme)?;
    let v1: Vec<f64> = cloud.iter().map(|p| f1.value(p)).collect();
    let v2: Vec<f64> = cloud.iter().map(|p| f2.value(p)).collect();
    let n = cloud.len();
    let implication = |gamma: f64| {
        let r = c / gamma;
        (0..n).into_par_iter().all(|i| {
            (0..n).all(|k| {
                let s = v1[i] + v2[k];
                !s.is_finite() || geometry::dist(&cloud[i], &cloud[k]) >= r || v < s + eps_prime
            })
        })
    };
    let gamma0 = 2.0 * c / eta;
    let mut gamma = gamma0;
    while !implication(gamma) {
        gamma *= 2.0;
        if gamma > gamma0 * 2f64.powi(19) {
            return Err(Error::GammaSearchFailed(gamma0 * 2f64.powi(19)));
        }
    }

    let pen = PenalizedDecoupled { f1: f1.clone(), f2: f2.clone(), gamma, alpha, anchor: xbar.to_vec() };
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (0..n).map(move |k| (i, k))).filter(|&(i, k)| (v1[i] + v2[k]).is_finite()).collect();
    let vals: Vec<f64> = pairs.par_iter().map(|&(i, k)| pen.value(&cloud[i], &cloud[k])).collect();
    let ib = cloud.iter().position(|p| p.as_slice() == xbar).expect("center is in the cloud");
    let base = pairs.iter().position(|&p| p == (ib, ib)).ok_or(Error::BaseNotInCloud)?;
    let (h, _) = ekeland_on_cloud_metric(
        &pairs,
        &vals,
        base,
        xi,
        |a, b| geometry::product_dist(&cloud[a.0], &cloud[a.1], &cloud[b.0], &cloud[b.1]),
        |a, b| geometry::lex_cmp(&cloud[a.0], &cloud[b.0]).then(geometry::lex_cmp(&cloud[a.1], &cloud[b.1])),
    )?;
    let (x1, x2) = (cloud[pairs[h].0].clone(), cloud[pairs[h].1].clone());
    let value = pen.coupled(&x1, &x2);
    let slope = pairs
        .par_iter()
        .enumerate()
        .filter(|(i, _)| *i != h)
        .map(|(_, &(i, k))| {
            let d = geometry::product_dist(&cloud[i], &cloud[k], &x1, &x2);
            if d == 0.0 {
                return f64::NEG_INFINITY;
            }
            (value - pen.coupled(&cloud[i], &cloud[k])) / d
        })
        .reduce(|| f64::NEG_INFINITY, f64::max);
    let slope_bound = 2.0 * eps / delta;
    let checks = vec![
        ("distance to (xbar, xbar) below rho".to_string(), geometry::product_dist(&x1, &x2, xbar, xbar) < rho),
        ("coupling distance below eta".to_string(), geometry::dist(&x1, &x2) < eta),
        ("coupled value at most the value at xbar".to_string(), value <= v),
        (format!("sampled slope below {slope_bound}"), slope < slope_bound),
    ];
    let mut t = Trace::new("sampled slope of the coupled function");
    t.push(0, rho, ExtReal::from(slope), pairs.len());
    let diag = Diagnostics {
        traces: vec![t],
        notes: vec!["the sampled slope is a lower bound for the supremum over the closed ball".into()],
    };
    let slope_bound_check = if checks.iter().all(|c| c.1) {
        Verdict::holds(diag)
    } else {
        let failed: Vec<String> = checks.iter().filter(|c| !c.1).map(|c| c.0.clone()).collect();
        Verdict::fails(
            Witness { points: vec![x1.clone(), x2.clone()], values: vec![ExtReal::from(value), ExtReal::from(slope)], note: failed.join("; ") },
            diag,
        )
    };
    Ok(PenalizedResult {
        gamma,
        alpha,
        rho,
        eps_prime,
        xi,
        c,
        lambda_dag: ld,
        xhat1: x1,
        xhat2: x2,
        value,
        base_value: v,
        slope,
        slope_bound,
        checks,
        slope_bound_check,
    })
}

/// Quasiuniform eps-minimality of xbar on B_delta(xbar); eps = 0 tests the local
/// quasiuniform minimum (equality with the member infimum, within the sampled tolerance).
pub fn classify_min(f1: &FnOracle, f2: &FnOracle, xbar: &[f64], eps: f64, delta: f64, scheme: &SampleScheme) -> Result<Verdict> {
    classify_min_on(f1, f2, xbar, eps, &Region::open_ball(xbar.to_vec(), delta)?, scheme)
}

/// Same test on an arbitrary neighbourhood U of xbar.
pub fn classify_min_on(f1: &FnOracle, f2: &FnOracle, xbar: &[f64], eps: f64, u: &Region, scheme: &SampleScheme) -> Result<Verdict> {
    let v = f1.value(xbar) + f2.value(xbar);
    if !v.is_finite() {
        return Err(Error::InfiniteAtBase);
    }
    let (ld, lv) = lambda_dag(f1, f2, u, scheme)?;
    Ok(min_verdict(v, ld, lv, eps))
}

fn min_verdict(v: f64, ld: ExtReal, lv: Verdict, eps: f64) -> Verdict {
    let mut diag = lv.diagnostics;
    let margin = ld.to_f64() + eps - v;
    diag.notes.push(format!("value {v:.6e}, member infimum {}, margin {margin:.3e}", ld));
    let holds = if eps == 0.0 { margin >= -SAMPLED_TOL } else { margin > 0.0 };
    if holds {
        Verdict::holds(diag)
    } else if eps == 0.0 || margin < 0.0 {
        Verdict::fails(Witness { points: vec![], values: vec![ExtReal::from(v), ld], note: "the value exceeds the member infimum plus eps".into() }, diag)
    } else {
        Verdict::inconclusive(Resolution { level: 0, samples: 0, trend: Trend::Single }, diag)
    }
}

/// Quasiuniform stationarity: for each eps in a grid, eps*delta-minimality on the two
/// smallest tested balls. A plain Frechet stationarity test of the sum is attached.
pub fn classify_stationary(f1: &FnOracle, f2: &FnOracle, xbar: &[f64], scheme: &SampleScheme) -> Result<Verdict> {
    let v = f1.value(xbar) + f2.value(xbar);
    if !v.is_finite() {
        return Err(Error::InfiniteAtBase);
    }
    let deltas = [STATIONARY_DELTA0 / 8.0, STATIONARY_DELTA0 / 16.0];
    let mut lds = vec![];
    for d in deltas {
        lds.push(lambda_dag(f1, f2, &Region::open_ball(xbar.to_vec(), d)?, scheme)?);
    }
    let mut t = Trace::new("margin (member infimum + eps delta - value) / delta");
    let mut statuses = vec![];
    let mut k = 0;
    for eps in STATIONARY_EPS {
        let mut st = vec![];
        for (d, (ld, lv)) in deltas.iter().zip(&lds) {
            let ver = min_verdict(v, *ld, lv.clone(), eps * d);
            t.push(k, eps, ExtReal::from((ld.to_f64() + eps * d - v) / d), 0);
            k += 1;
            st.push(ver.status);
        }
        statuses.push(if st.iter().all(|s| *s == Status::Holds) {
            Status::Holds
        } else if st.iter().all(|s| *s == Status::Fails) {
            Status::Fails
        } else {
            Status::Inconclusive
        });
    }
    let sum = f1.plus(f2);
    let frechet = is_subgradient(&SubgradientQuery::new(&sum, xbar, &vec![0.0; xbar.len()]), 1e-9)?;
    let mut diag = Diagnostics { traces: vec![t], notes: vec![format!("plain stationarity (0 a Frechet subgradient of the sum): {:?}", frechet.status)] };
    diag.traces.extend(frechet.diagnostics.traces);
    Ok(if let Some(i) = statuses.iter().position(|s| *s == Status::Fails) {
        Verdict::fails(
            Witness { points: vec![xbar.to_vec()], values: vec![], note: format!("not an eps delta-minimum for eps = {}", STATIONARY_EPS[i]) },
            diag,
        )
    } else if statuses.iter().all(|s| *s == Status::Holds) {
        Verdict::holds(diag)
    } else {
        Verdict::inconclusive(Resolution { level: 0, samples: 0, trend: Trend::Single }, diag)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_point_cloud() {
        let pts = vec![vec![0.0], vec![1.0], vec![2.0]];
        let r = ekeland_on_cloud(&pts, &[3.0, 1.0, 0.0], &[0.0], 0.5).unwrap();
        assert_eq!(r.xhat, vec![2.0]);
        assert_eq!(check_ekeland(&pts, &[3.0, 1.0, 0.0], &[0.0], 0.5, &r.xhat), (true, true));
    }

    #[test]
    fn constant_values_stay_at_base() {
        let pts = vec![vec![0.0, 1.0], vec![1.0, 1.0], vec![2.0, -1.0]];
        let r = ekeland_on_cloud(&pts, &[4.0; 3], &[1.0, 1.0], 0.1).unwrap();
        assert_eq!(r.xhat, vec![1.0, 1.0]);
        assert_eq!(r.moves, 0);
    }

    #[test]
    fn single_point() {
        let r = ekeland_on_cloud(&[vec![5.0]], &[1.0], &[5.0], 1.0).unwrap();
        assert_eq!(r.xhat, vec![5.0]);
    }

    #[test]
    fn errors() {
        let pts = vec![vec![0.0], vec![1.0]];
        assert_eq!(ekeland_on_cloud(&pts, &[f64::INFINITY; 2], &[0.0], 1.0).unwrap_err(), Error::AllInfinite);
        assert_eq!(ekeland_on_cloud(&pts, &[1.0, 2.0], &[3.0], 1.0).unwrap_err(), Error::BaseNotInCloud);
        assert_eq!(ekeland_on_cloud(&pts, &[f64::INFINITY, 2.0], &[0.0], 1.0).unwrap_err(), Error::InfiniteAtBase);
    }

    #[test]
    fn linear_function_is_not_a_quasiuniform_min() {
        let f = FnOracle::new(1, "x", |x| x[0]);
        let z = FnOracle::constant(1, 0.0);
        let s = SampleScheme::default().with_levels(6);
        assert!(classify_min(&f, &z, &[0.0], 0.05, 0.5, &s).unwrap().is_fails());
        assert!(classify_stationary(&f, &z, &[0.0], &s).unwrap().is_fails());
    }

    #[test]
    fn squared_norm_is_stationary() {
        let f = FnOracle::new(1, "x^2", |x| x[0] * x[0]);
        let z = FnOracle::constant(1, 0.0);
        let s = SampleScheme::default().with_levels(6);
        assert!(classify_stationary(&f, &z, &[0.0], &s).unwrap().is_holds());
        assert!(classify_min(&f, &z, &[0.0], 0.0, 0.5, &s).unwrap().is_holds());
    }

    #[test]
    fn half_squares_at_the_minimum() {
        let h = FnOracle::new(2, "|x|^2/2", |x| 0.5 * geometry::dot(x, x));
        let s = SampleScheme::default().with_levels(5);
        let r = penalized_search(&h, &h, &[0.0, 0.0], 0.1, 0.4, 0.05, &s).unwrap();
        assert_eq!(r.xhat1, vec![0.0, 0.0]);
        assert_eq!(r.xhat2, vec![0.0, 0.0]);
        assert!(r.slope_bound_check.is_holds());
    }
}
