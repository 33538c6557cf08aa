//! Discretized sparse optimal control: the support-measure penalty on a weighted cell
//! space, box constraints, stationarity checks and an exact separable solver.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dual::DualSet;
use crate::error::{Error, Result};
use crate::extreal::ExtReal;
use crate::geometry::Point;
use crate::oracle::{FnOracle, SetOracle};
use crate::verdict::{Diagnostics, Resolution, Trace, Verdict, Witness};

/// Cells of positive measure; the inner product is sum w_i x_i y_i.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSpace {
    pub weights: Vec<f64>,
}

impl CellSpace {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() || weights.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
            return Err(Error::PreconditionFailed("cell weights must be positive and finite".into()));
        }
        Ok(CellSpace { weights })
    }

    /// m equal cells of total measure `total`.
    pub fn uniform(m: usize, total: f64) -> Result<Self> {
        CellSpace::new(vec![total / m as f64; m])
    }

    pub fn m(&self) -> usize {
        self.weights.len()
    }

    pub fn measure(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn inner(&self, x: &[f64], y: &[f64]) -> f64 {
        self.weights.iter().zip(x).zip(y).map(|((w, a), b)| w * a * b).sum()
    }

    pub fn norm(&self, x: &[f64]) -> f64 {
        self.inner(x, x).sqrt()
    }

    fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.m() {
            return Err(Error::DimensionMismatch { expected: self.m(), got: x.len() });
        }
        Ok(())
    }
}

/// 1e-12 times the largest magnitude: floating zeros are never exact.
pub fn default_zero_tol(x: &[f64]) -> f64 {
    1e-12 * x.iter().fold(0.0f64, |a, v| a.max(v.abs()))
}

fn supported(v: f64, tol: f64) -> bool {
    v.abs() > tol
}

/// Measure of {x != 0} with the default threshold.
pub fn support_measure(space: &CellSpace, x: &[f64]) -> f64 {
    support_measure_tol(space, x, default_zero_tol(x))
}

pub fn support_measure_tol(space: &CellSpace, x: &[f64], zero_tol: f64) -> f64 {
    space.weights.iter().zip(x).filter(|(_, v)| supported(**v, zero_tol)).map(|(w, _)| w).sum()
}

/// The support measure as an oracle on R^m. Subgradients follow the support pattern:
/// zero on supported cells, free on the others.
pub fn support_measure_oracle(space: &CellSpace) -> FnOracle {
    let (s1, m) = (space.clone(), space.m());
    FnOracle::new(m, "support measure", move |x| support_measure(&s1, x))
        .with_subgrad(move |x| {
            let tol = default_zero_tol(x);
            let (lo, hi): (Vec<f64>, Vec<f64>) = x
                .iter()
                .map(|v| if supported(*v, tol) { (0.0, 0.0) } else { (f64::NEG_INFINITY, f64::INFINITY) })
                .unzip();
            DualSet::intervals(&lo, &hi)
        })
        .with_lower_bound(ExtReal::Finite(0.0))
}

fn check_bounds(xa: &[f64], xb: &[f64]) -> Result<()> {
    if xa.len() != xb.len() || xa.iter().zip(xb).any(|(a, b)| !(*a <= 0.0 && 0.0 <= *b)) {
        return Err(Error::InvalidBounds);
    }
    Ok(())
}

/// Cellwise clamp onto [xa, xb], the nearest point of the box in the weighted norm.
pub fn project_box(x: &[f64], xa: &[f64], xb: &[f64]) -> Result<Point> {
    check_bounds(xa, xb)?;
    if x.len() != xa.len() {
        return Err(Error::DimensionMismatch { expected: xa.len(), got: x.len() });
    }
    Ok(x.iter().zip(xa).zip(xb).map(|((v, a), b)| v.clamp(*a, *b)).collect())
}

pub fn box_set(xa: &[f64], xb: &[f64]) -> Result<SetOracle> {
    check_bounds(xa, xb)?;
    Ok(SetOracle::boxed(xa.to_vec(), xb.to_vec()))
}

/// Ratio trace lambda({0 < |x| <= t}) / t^2 along a decreasing t schedule.
/// HOLDS when the ratio decays toward zero, FAILS when it stays bounded away from zero.
pub fn slowly_decreasing(profile: &dyn Fn(f64) -> f64, t_schedule: &[f64]) -> Verdict {
    let mut t = Trace::new("lambda({0 < |x| <= t}) / t^2");
    for (k, &s) in t_schedule.iter().enumerate() {
        t.push(k, s, ExtReal::from(profile(s) / (s * s)), 1);
    }
    let v: Vec<f64> = t.values().iter().map(|x| x.to_f64()).collect();
    let n = v.len();
    let diag = |t: Trace, note: &str| Diagnostics { traces: vec![t], notes: vec![note.to_string()] };
    if n == 0 {
        return Verdict::inconclusive(Resolution { level: 0, samples: 0, trend: crate::verdict::Trend::Single }, diag(t, "empty schedule"));
    }
    let last = v[n - 1];
    if last == 0.0 || (n >= 3 && v[n - 3..].windows(2).all(|w| w[1] <= 0.75 * w[0])) {
        return Verdict::holds(diag(t, "ratio decays to zero"));
    }
    if n >= 3 && v[n - 3..].windows(2).all(|w| w[1] >= 0.95 * w[0]) && last > 0.0 {
        let s = t_schedule[n - 1];
        let w = Witness { points: vec![vec![s]], values: vec![ExtReal::from(last)], note: "ratio bounded away from zero".into() };
        return Verdict::fails(w, diag(t, "ratio does not decay"));
    }
    let trend = t.trend();
    Verdict::inconclusive(Resolution { level: n - 1, samples: n, trend }, diag(t, "ratio neither decays nor stays put"))
}

/// A finite cell vector always passes: below its smallest nonzero magnitude the level
/// set is empty.
pub fn slowly_decreasing_cells(space: &CellSpace, x: &[f64]) -> Verdict {
    let tol = default_zero_tol(x);
    let tmin = x.iter().map(|v| v.abs()).filter(|v| *v > tol).fold(f64::INFINITY, f64::min);
    let start = if tmin.is_finite() { tmin } else { 1.0 };
    let schedule: Vec<f64> = (1..=8).map(|k| start * 0.5f64.powi(k)).collect();
    let w = space.weights.clone();
    let xs = x.to_vec();
    let profile = move |t: f64| w.iter().zip(&xs).filter(|(_, v)| v.abs() > tol && v.abs() <= t).map(|(w, _)| w).sum::<f64>();
    slowly_decreasing(&profile, &schedule)
}

/// {x* != 0} inside {x = 0}, cellwise with threshold `zero_tol`.
pub fn sparse_subdiff_check(x: &[f64], xstar: &[f64], zero_tol: f64) -> Result<Verdict> {
    if x.len() != xstar.len() {
        return Err(Error::DimensionMismatch { expected: x.len(), got: xstar.len() });
    }
    let bad: Vec<usize> = (0..x.len()).filter(|&i| supported(xstar[i], zero_tol) && supported(x[i], zero_tol)).collect();
    let diag = Diagnostics { traces: vec![], notes: vec!["finite cell vectors are slowly decreasing".into()] };
    Ok(match bad.first() {
        None => Verdict::holds(diag),
        Some(&i) => Verdict::fails(
            Witness { points: vec![vec![i as f64]], values: vec![ExtReal::from(x[i]), ExtReal::from(xstar[i])], note: format!("cell {i} carries both x and x*") },
            diag,
        ),
    })
}

/// f(x) = 1/2 sum w_i sigma (x_i - z_i)^2 + 1/2 sigma0 sum w_i x_i^2.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadraticTarget {
    pub sigma: f64,
    pub sigma0: f64,
    pub z: Vec<f64>,
}

type ValueFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
type GradFn = Arc<dyn Fn(&[f64]) -> Point + Send + Sync>;

#[derive(Clone)]
pub enum Objective {
    Quadratic(QuadraticTarget),
    /// value and cellwise gradient (the representative under the weighted inner product)
    Smooth { label: String, value: ValueFn, grad: GradFn },
}

impl std::fmt::Debug for Objective {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Objective::Quadratic(q) => write!(f, "Quadratic({q:?})"),
            Objective::Smooth { label, .. } => write!(f, "Smooth({label})"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct OCProblem {
    pub space: CellSpace,
    pub objective: Objective,
    pub xa: Point,
    pub xb: Point,
    /// None: 1e-12 times the largest magnitude of the vector at hand
    pub zero_tol: Option<f64>,
}

/// JSON form of a separable quadratic instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlInstance {
    pub weights: Vec<f64>,
    pub xa: Vec<f64>,
    pub xb: Vec<f64>,
    pub sigma: f64,
    #[serde(default)]
    pub sigma0: f64,
    pub z: Vec<f64>,
}

impl ControlInstance {
    pub fn to_problem(&self) -> Result<OCProblem> {
        OCProblem::quadratic(
            CellSpace::new(self.weights.clone())?,
            self.xa.clone(),
            self.xb.clone(),
            QuadraticTarget { sigma: self.sigma, sigma0: self.sigma0, z: self.z.clone() },
        )
    }
}

impl OCProblem {
    pub fn new(space: CellSpace, objective: Objective, xa: Point, xb: Point) -> Result<Self> {
        check_bounds(&xa, &xb)?;
        space.check(&xa)?;
        if xa.iter().zip(&xb).any(|(a, b)| !(*a < 0.0 && 0.0 < *b)) {
            return Err(Error::InvalidBounds);
        }
        if let Objective::Quadratic(q) = &objective {
            space.check(&q.z)?;
            if !(q.sigma >= 0.0 && q.sigma0 >= 0.0 && q.sigma + q.sigma0 > 0.0) {
                return Err(Error::PreconditionFailed("need sigma, sigma0 >= 0 with a positive sum".into()));
            }
        }
        Ok(OCProblem { space, objective, xa, xb, zero_tol: None })
    }

    pub fn quadratic(space: CellSpace, xa: Point, xb: Point, q: QuadraticTarget) -> Result<Self> {
        OCProblem::new(space, Objective::Quadratic(q), xa, xb)
    }

    pub fn zero_tol(&self, x: &[f64]) -> f64 {
        self.zero_tol.unwrap_or_else(|| default_zero_tol(x))
    }

    pub fn smooth_value(&self, x: &[f64]) -> f64 {
        match &self.objective {
            Objective::Quadratic(q) => {
                0.5 * self
                    .space
                    .weights
                    .iter()
                    .zip(x)
                    .zip(&q.z)
                    .map(|((w, v), z)| w * (q.sigma * (v - z).powi(2) + q.sigma0 * v * v))
                    .sum::<f64>()
            }
            Objective::Smooth { value, .. } => value(x),
        }
    }

    pub fn gradient(&self, x: &[f64]) -> Point {
        match &self.objective {
            Objective::Quadratic(q) => x.iter().zip(&q.z).map(|(v, z)| q.sigma * (v - z) + q.sigma0 * v).collect(),
            Objective::Smooth { grad, .. } => grad(x),
        }
    }

    /// f(x) + support measure of x.
    pub fn objective(&self, x: &[f64]) -> f64 {
        self.smooth_value(x) + support_measure_tol(&self.space, x, self.zero_tol(x))
    }

    pub fn in_box(&self, x: &[f64]) -> bool {
        x.len() == self.xa.len() && x.iter().zip(&self.xa).zip(&self.xb).all(|((v, a), b)| a <= v && v <= b)
    }

    /// Cellwise smooth cost of value v in cell i; separable instances only.
    pub fn cell_cost(&self, i: usize, v: f64) -> Result<f64> {
        let Objective::Quadratic(q) = &self.objective else { return Err(Error::NonSeparableObjective) };
        Ok(0.5 * self.space.weights[i] * (q.sigma * (v - q.z[i]).powi(2) + q.sigma0 * v * v))
    }
}

fn at(v: f64, bound: f64) -> bool {
    (v - bound).abs() <= 1e-12 * (1.0 + bound.abs())
}

/// The four conditions of the approximate system: residual ||f'(x2) + x1* + x2*|| < eps,
/// |phi(x1) - phi(xbar)| < eps with x1, x2 within eps of xbar when xbar is given, the support
/// pattern of x1*, and the sign pattern of x2* on the box.
#[allow(clippy::too_many_arguments)]
pub fn approx_stationarity_check(
    prob: &OCProblem,
    x1: &[f64],
    x2: &[f64],
    x1star: &[f64],
    x2star: &[f64],
    eps: f64,
    xbar: Option<&[f64]>,
) -> Result<Verdict> {
    for v in [x1, x2, x1star, x2star] {
        prob.space.check(v)?;
    }
    if !prob.in_box(x2) {
        return Err(Error::NotInBox);
    }
    let g = prob.gradient(x2);
    let r: Point = g.iter().zip(x1star).zip(x2star).map(|((a, b), c)| a + b + c).collect();
    let res = prob.space.norm(&r);
    let mut fails: Vec<String> = vec![];
    if !(res < eps) {
        fails.push(format!("residual {res:.3e} >= eps"));
    }
    if let Some(xb) = xbar {
        prob.space.check(xb)?;
        let gap = (support_measure_tol(&prob.space, x1, prob.zero_tol(x1)) - support_measure_tol(&prob.space, xb, prob.zero_tol(xb))).abs();
        if !(gap < eps) {
            fails.push(format!("support measure gap {gap:.3e} >= eps"));
        }
        for (name, x) in [("x1", x1), ("x2", x2)] {
            let d = prob.space.norm(&crate::geometry::sub(x, xb));
            if !(d < eps) {
                fails.push(format!("{name} is {d:.3e} away from xbar"));
            }
        }
    }
    let tol1 = prob.zero_tol(x1).max(prob.zero_tol(x1star));
    if sparse_subdiff_check(x1, x1star, tol1)?.is_fails() {
        fails.push("x1* is supported where x1 is".into());
    }
    let stol = prob.zero_tol(x2star);
    for i in 0..x2.len() {
        let (lower_free, upper_free) = (!at(x2[i], prob.xa[i]), !at(x2[i], prob.xb[i]));
        if lower_free && x2star[i] < -stol {
            fails.push(format!("x2* < 0 on cell {i} above the lower bound"));
        }
        if upper_free && x2star[i] > stol {
            fails.push(format!("x2* > 0 on cell {i} below the upper bound"));
        }
    }
    let diag = Diagnostics { traces: vec![], notes: vec![format!("residual {res:.6e}"), "x1 is slowly decreasing (finite cells)".into()] };
    Ok(if fails.is_empty() {
        Verdict::holds(diag)
    } else {
        Verdict::fails(Witness { points: vec![x1.to_vec(), x2.to_vec()], values: vec![ExtReal::from(res)], note: fails.join("; ") }, diag)
    })
}

/// Sharp conditions at xbar: f' vanishes on supported interior cells, f' >= 0 where
/// xbar sits at xa and f' <= 0 where it sits at xb; cells at zero are free.
pub fn sharp_stationarity_check(prob: &OCProblem, xbar: &[f64], tol: f64) -> Result<Verdict> {
    prob.space.check(xbar)?;
    if !prob.in_box(xbar) {
        return Err(Error::NotInBox);
    }
    let g = prob.gradient(xbar);
    let zt = prob.zero_tol(xbar);
    let mut bad = None;
    for i in 0..xbar.len() {
        let ok = if at(xbar[i], prob.xa[i]) {
            g[i] >= -tol
        } else if at(xbar[i], prob.xb[i]) {
            g[i] <= tol
        } else if supported(xbar[i], zt) {
            g[i].abs() <= tol
        } else {
            true
        };
        if !ok {
            bad = Some(i);
            break;
        }
    }
    let diag = Diagnostics::default();
    Ok(match bad {
        None => Verdict::holds(diag),
        Some(i) => Verdict::fails(
            Witness { points: vec![vec![i as f64]], values: vec![ExtReal::from(xbar[i]), ExtReal::from(g[i])], note: format!("cell {i}: gradient {:.3e}", g[i]) },
            diag,
        ),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OCSolution {
    pub xopt: Point,
    pub objective: f64,
}

/// Exact minimizer of a separable quadratic instance: per cell, the clamped unconstrained
/// minimizer paying its cell weight against staying at zero; ties go to zero.
pub fn solve_sparse_oc(prob: &OCProblem) -> Result<OCSolution> {
    let Objective::Quadratic(q) = &prob.objective else { return Err(Error::NonSeparableObjective) };
    let m = prob.space.m();
    let xopt: Point = (0..m)
        .into_par_iter()
        .map(|i| {
            let c = (q.sigma * q.z[i] / (q.sigma + q.sigma0)).clamp(prob.xa[i], prob.xb[i]);
            let zero = prob.cell_cost(i, 0.0).unwrap();
            let nonzero = prob.cell_cost(i, c).unwrap() + prob.space.weights[i];
            if c != 0.0 && nonzero < zero {
                c
            } else {
                0.0
            }
        })
        .collect();
    let objective = prob.objective(&xopt);
    Ok(OCSolution { xopt, objective })
}

/// Duals certifying the approximate system at a sharp-stationary point with x1 = x2 = x:
/// the gradient is carried by x1* on zero cells and by x2* on active bounds.
pub fn stationary_duals(prob: &OCProblem, x: &[f64]) -> (Point, Point) {
    let g = prob.gradient(x);
    let zt = prob.zero_tol(x);
    let mut x1s = vec![0.0; x.len()];
    let mut x2s = vec![0.0; x.len()];
    for i in 0..x.len() {
        if !supported(x[i], zt) {
            x1s[i] = -g[i];
        } else if at(x[i], prob.xa[i]) || at(x[i], prob.xb[i]) {
            x2s[i] = -g[i];
        }
    }
    (x1s, x2s)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_cell(z: f64) -> OCProblem {
        OCProblem::quadratic(CellSpace::new(vec![1.0]).unwrap(), vec![-1.0], vec![1.0], QuadraticTarget { sigma: 1.0, sigma0: 0.0, z: vec![z] }).unwrap()
    }

    #[test]
    fn support_measure_counts_quarter_cells() {
        let s = CellSpace::uniform(4, 1.0).unwrap();
        assert_eq!(support_measure(&s, &[1.0, 0.0, -2.0, 0.0]), 0.5);
        assert_eq!(support_measure(&s, &[0.0; 4]), 0.0);
        assert_eq!(support_measure_tol(&s, &[1e-13, -1e-14, 0.0, 0.0], 1e-12), 0.0);
    }

    #[test]
    fn clamp_projection() {
        assert_eq!(project_box(&[2.0, -3.0], &[-1.0, -1.0], &[1.0, 1.0]).unwrap(), vec![1.0, -1.0]);
        assert_eq!(project_box(&[0.5, -0.2], &[-1.0, -1.0], &[1.0, 1.0]).unwrap(), vec![0.5, -0.2]);
        assert!(matches!(project_box(&[0.0], &[0.5], &[1.0]), Err(Error::InvalidBounds)));
    }

    #[test]
    fn slowly_decreasing_profiles() {
        let ts: Vec<f64> = (1..=10).map(|k| 0.5f64.powi(k)).collect();
        assert!(slowly_decreasing(&|t: f64| t.powi(4), &ts).is_holds());
        assert!(slowly_decreasing(&|t: f64| t, &ts).is_fails());
        let s = CellSpace::uniform(3, 1.0).unwrap();
        assert!(slowly_decreasing_cells(&s, &[0.3, 0.0, -2.0]).is_holds());
    }

    #[test]
    fn support_pattern() {
        assert!(sparse_subdiff_check(&[1.0, 0.0], &[0.0, 3.0], 1e-12).unwrap().is_holds());
        assert!(sparse_subdiff_check(&[1.0, 0.0], &[1.0, 0.0], 1e-12).unwrap().is_fails());
        assert!(sparse_subdiff_check(&[1.0, -4.0], &[0.0, 0.0], 1e-12).unwrap().is_holds());
    }

    #[test]
    fn one_cell_solver_examples() {
        assert_eq!(solve_sparse_oc(&one_cell(3.0)).unwrap(), OCSolution { xopt: vec![1.0], objective: 3.0 });
        let s = solve_sparse_oc(&one_cell(1.2)).unwrap();
        assert_eq!(s.xopt, vec![0.0]);
        assert!((s.objective - 0.72).abs() < 1e-15);
        assert_eq!(solve_sparse_oc(&one_cell(0.0)).unwrap().xopt, vec![0.0]);
    }

    #[test]
    fn sharp_conditions() {
        let p = one_cell(3.0);
        assert!(sharp_stationarity_check(&p, &[0.0], 1e-12).unwrap().is_holds());
        assert!(sharp_stationarity_check(&p, &[1.0], 1e-12).unwrap().is_holds());
        let v = sharp_stationarity_check(&p, &[0.5], 1e-12).unwrap();
        assert!(v.is_fails());
        assert!(matches!(sharp_stationarity_check(&p, &[2.0], 1e-12), Err(Error::NotInBox)));
    }

    #[test]
    fn approximate_system() {
        let p = one_cell(3.0);
        let g0 = p.gradient(&[0.0]);
        assert!(approx_stationarity_check(&p, &[0.0], &[0.0], &[-g0[0]], &[0.0], 1e-6, None).unwrap().is_holds());
        // at the upper bound x2* must be nonnegative
        let g1 = p.gradient(&[1.0]);
        assert!(approx_stationarity_check(&p, &[1.0], &[1.0], &[0.0], &[-g1[0]], 1e-6, None).unwrap().is_holds());
        assert!(approx_stationarity_check(&p, &[1.0], &[1.0], &[0.0], &[-0.5], 1e-6, None).unwrap().is_fails());
    }

    #[test]
    fn nonseparable_objective_is_rejected() {
        let obj = Objective::Smooth { label: "sum^2".into(), value: Arc::new(|x| x.iter().sum::<f64>().powi(2)), grad: Arc::new(|x| vec![2.0 * x.iter().sum::<f64>(); x.len()]) };
        let p = OCProblem::new(CellSpace::uniform(2, 1.0).unwrap(), obj, vec![-1.0; 2], vec![1.0; 2]).unwrap();
        assert!(matches!(solve_sparse_oc(&p), Err(Error::NonSeparableObjective)));
    }

    #[test]
    fn oracle_subgradients_follow_the_pattern() {
        let f = support_measure_oracle(&CellSpace::uniform(2, 1.0).unwrap());
        let s = f.subgrad(&[0.3, 0.0]).unwrap();
        assert!(s.contains(&[0.0, 7.0], 0.0));
        assert!(!s.contains(&[1.0, 0.0], 1e-9));
    }
}
