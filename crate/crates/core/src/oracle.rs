//! Function, set and smooth-map oracles.

use std::fmt;
use std::sync::Arc;

use crate::dual::DualSet;
use crate::extreal::ExtReal;
use crate::geometry::{self, Point};

type EvalFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
type SubgradFn = Arc<dyn Fn(&[f64]) -> DualSet + Send + Sync>;

/// An extended-real function on R^dim. The domain is where the value is finite.
#[derive(Clone)]
pub struct FnOracle {
    pub dim: usize,
    pub label: String,
    eval: EvalFn,
    subgrad: Option<SubgradFn>,
    pub lower_bound_hint: Option<ExtReal>,
}

impl fmt::Debug for FnOracle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FnOracle({}, dim={})", self.label, self.dim)
    }
}

impl FnOracle {
    /// `eval` returns +inf outside the domain; NaN is read as +inf.
    pub fn new(dim: usize, label: impl Into<String>, eval: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        FnOracle { dim, label: label.into(), eval: Arc::new(eval), subgrad: None, lower_bound_hint: None }
    }

    pub fn with_subgrad(mut self, sg: impl Fn(&[f64]) -> DualSet + Send + Sync + 'static) -> Self {
        self.subgrad = Some(Arc::new(sg));
        self
    }

    pub fn with_lower_bound(mut self, b: ExtReal) -> Self {
        self.lower_bound_hint = Some(b);
        self
    }

    pub fn constant(dim: usize, c: f64) -> Self {
        FnOracle::new(dim, format!("const {c}"), move |_| c).with_subgrad(move |_| DualSet::point(vec![0.0; dim]))
    }

    /// Indicator of a set: 0 on the set, +inf elsewhere; subgradients are the set's normal cone.
    pub fn indicator(set: &SetOracle) -> Self {
        let s = set.clone();
        let s2 = set.clone();
        let f = FnOracle::new(set.dim, format!("indicator({})", set.label), move |x| {
            if s.contains(x) {
                0.0
            } else {
                f64::INFINITY
            }
        });
        if set.has_normal_cone() {
            f.with_subgrad(move |x| s2.normal_cone(x).unwrap_or_else(DualSet::empty))
        } else {
            f
        }
    }

    /// Raw value with +inf outside the domain (never NaN).
    #[inline]
    pub fn value(&self, x: &[f64]) -> f64 {
        let v = (self.eval)(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    }

    pub fn eval(&self, x: &[f64]) -> ExtReal {
        ExtReal::from(self.value(x))
    }

    pub fn has_subgrad(&self) -> bool {
        self.subgrad.is_some()
    }

    pub fn subgrad(&self, x: &[f64]) -> Option<DualSet> {
        self.subgrad.as_ref().map(|s| s(x))
    }

    /// Pointwise sum; subgradient oracle is the sum of the two when both exist
    /// (only valid where one summand is smooth, which callers must ensure).
    pub fn plus(&self, other: &FnOracle) -> FnOracle {
        let (a, b) = (self.clone(), other.clone());
        let f = FnOracle::new(self.dim, format!("{}+{}", self.label, other.label), move |x| {
            let (u, v) = (a.value(x), b.value(x));
            if u == f64::INFINITY || v == f64::INFINITY {
                f64::INFINITY
            } else {
                u + v
            }
        });
        match (&self.subgrad, &other.subgrad) {
            (Some(s1), Some(s2)) => {
                let (s1, s2) = (s1.clone(), s2.clone());
                f.with_subgrad(move |x| {
                    let (d1, d2) = (s1(x), s2(x));
                    let mut out = DualSet::empty();
                    for p in &d1.pieces {
                        for q in &d2.pieces {
                            let mut r = crate::dual::GenPiece::point(geometry::add(&p.center, &q.center));
                            for (k, g) in p.gens.iter().enumerate() {
                                r = r.with_gen(g.clone(), p.lo[k], p.hi[k]);
                            }
                            for (k, g) in q.gens.iter().enumerate() {
                                r = r.with_gen(g.clone(), q.lo[k], q.hi[k]);
                            }
                            out.pieces.push(r);
                        }
                    }
                    out
                })
            }
            _ => f,
        }
    }

    /// x -> f(x) - <v, x>, with subgradients shifted by -v.
    pub fn tilt(&self, v: &[f64]) -> FnOracle {
        let a = self.clone();
        let w = v.to_vec();
        let w2: Point = v.iter().map(|t| -t).collect();
        let f = FnOracle::new(self.dim, format!("{}-<v,.>", self.label), move |x| a.value(x) - geometry::dot(&w, x));
        match &self.subgrad {
            Some(s) => {
                let s = s.clone();
                f.with_subgrad(move |x| s(x).shift(&w2))
            }
            None => f,
        }
    }

    /// x -> f(x) + c * ||x||; drops the subgradient oracle.
    pub fn plus_norm(&self, c: f64) -> FnOracle {
        let a = self.clone();
        FnOracle::new(self.dim, format!("{}+{c}|x|", self.label), move |x| a.value(x) + c * geometry::norm(x))
    }
}

type DistFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
type ProjFn = Arc<dyn Fn(&[f64]) -> Point + Send + Sync>;
type ContainsFn = Arc<dyn Fn(&[f64]) -> bool + Send + Sync>;
type ConeFn = Arc<dyn Fn(&[f64]) -> Option<DualSet> + Send + Sync>;

/// A set through membership, distance and (optionally) projection.
#[derive(Clone)]
pub struct SetOracle {
    pub dim: usize,
    pub label: String,
    contains: ContainsFn,
    dist: DistFn,
    project: Option<ProjFn>,
    interior_dist: Option<DistFn>,
    normal_cone: Option<ConeFn>,
}

impl fmt::Debug for SetOracle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SetOracle({}, dim={})", self.label, self.dim)
    }
}

impl SetOracle {
    pub fn new(
        dim: usize,
        label: impl Into<String>,
        contains: impl Fn(&[f64]) -> bool + Send + Sync + 'static,
        dist: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        SetOracle {
            dim,
            label: label.into(),
            contains: Arc::new(contains),
            dist: Arc::new(dist),
            project: None,
            interior_dist: None,
            normal_cone: None,
        }
    }

    pub fn with_projection(mut self, p: impl Fn(&[f64]) -> Point + Send + Sync + 'static) -> Self {
        self.project = Some(Arc::new(p));
        self
    }

    /// Distance from an inner point to the complement.
    pub fn with_interior_dist(mut self, d: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        self.interior_dist = Some(Arc::new(d));
        self
    }

    pub fn with_normal_cone(mut self, n: impl Fn(&[f64]) -> Option<DualSet> + Send + Sync + 'static) -> Self {
        self.normal_cone = Some(Arc::new(n));
        self
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        (self.contains)(x)
    }

    pub fn dist(&self, x: &[f64]) -> f64 {
        if self.contains(x) {
            0.0
        } else {
            (self.dist)(x)
        }
    }

    pub fn has_projection(&self) -> bool {
        self.project.is_some()
    }

    pub fn project(&self, x: &[f64]) -> Option<Point> {
        if self.contains(x) {
            return Some(x.to_vec());
        }
        self.project.as_ref().map(|p| p(x))
    }

    pub fn interior_dist(&self, x: &[f64]) -> Option<f64> {
        if !self.contains(x) {
            return Some(0.0);
        }
        self.interior_dist.as_ref().map(|d| d(x))
    }

    pub fn has_interior_dist(&self) -> bool {
        self.interior_dist.is_some()
    }

    pub fn has_normal_cone(&self) -> bool {
        self.normal_cone.is_some()
    }

    /// None outside the set or without a cone oracle.
    pub fn normal_cone(&self, x: &[f64]) -> Option<DualSet> {
        if !self.contains(x) {
            return None;
        }
        self.normal_cone.as_ref().and_then(|n| n(x))
    }

    /// {x : <a, x> <= b}
    pub fn halfspace(a: Point, b: f64) -> Self {
        let n = geometry::norm(&a);
        assert!(n > 0.0, "halfspace normal must be nonzero");
        let dim = a.len();
        let (a1, a2, a3, a4, a5) = (a.clone(), a.clone(), a.clone(), a.clone(), a.clone());
        SetOracle::new(
            dim,
            format!("halfspace({a:?};{b})"),
            move |x| geometry::dot(&a1, x) <= b,
            move |x| ((geometry::dot(&a2, x) - b) / n).max(0.0),
        )
        .with_projection(move |x| {
            let e = (geometry::dot(&a3, x) - b).max(0.0) / (n * n);
            geometry::axpy(-e, &a3, x)
        })
        .with_interior_dist(move |x| ((b - geometry::dot(&a4, x)) / n).max(0.0))
        .with_normal_cone(move |x| {
            let gap = b - geometry::dot(&a5, x);
            if gap <= 1e-12 * (1.0 + b.abs()) {
                Some(DualSet::cone(a5.len(), vec![a5.clone()]))
            } else {
                Some(DualSet::point(vec![0.0; a5.len()]))
            }
        })
    }

    /// Closed axis box.
    pub fn boxed(lo: Point, hi: Point) -> Self {
        let (l1, h1, l2, h2, l3, h3, l4, h4) =
            (lo.clone(), hi.clone(), lo.clone(), hi.clone(), lo.clone(), hi.clone(), lo.clone(), hi.clone());
        SetOracle::new(
            lo.len(),
            format!("box({lo:?};{hi:?})"),
            move |x| x.iter().zip(&l1).zip(&h1).all(|((v, l), h)| *v >= *l && *v <= *h),
            move |x| {
                x.iter().zip(&l2).zip(&h2).map(|((v, l), h)| (l - v).max(v - h).max(0.0).powi(2)).sum::<f64>().sqrt()
            },
        )
        .with_projection(move |x| x.iter().zip(&l3).zip(&h3).map(|((v, l), h)| v.clamp(*l, *h)).collect())
        .with_interior_dist(move |x| {
            x.iter().zip(&l4).zip(&h4).map(|((v, l), h)| (v - l).min(h - v)).fold(f64::INFINITY, f64::min).max(0.0)
        })
        .with_normal_cone(move |x| {
            let cone = crate::subdifferential::box_normal_cone(&lo, &hi, x, 1e-12).ok()?;
            Some(cone.to_dual_set())
        })
    }

    /// Closed Euclidean ball.
    pub fn ball(c: Point, r: f64) -> Self {
        let (c1, c2, c3, c4, c5) = (c.clone(), c.clone(), c.clone(), c.clone(), c.clone());
        SetOracle::new(
            c.len(),
            format!("ball({c:?};{r})"),
            move |x| geometry::dist(x, &c1) <= r,
            move |x| (geometry::dist(x, &c2) - r).max(0.0),
        )
        .with_projection(move |x| {
            let d = geometry::dist(x, &c3);
            if d <= r {
                x.to_vec()
            } else {
                geometry::lerp(&c3, x, r / d)
            }
        })
        .with_interior_dist(move |x| (r - geometry::dist(x, &c4)).max(0.0))
        .with_normal_cone(move |x| {
            let d = geometry::dist(x, &c5);
            if d >= r * (1.0 - 1e-12) {
                Some(DualSet::cone(c5.len(), vec![geometry::sub(x, &c5)]))
            } else {
                Some(DualSet::point(vec![0.0; c5.len()]))
            }
        })
    }

    /// {(x, y) : y >= a x^2} in R^2, a > 0.
    pub fn parabola_epigraph(a: f64) -> Self {
        assert!(a > 0.0);
        let near = move |x: &[f64]| geometry::nearest_on_parabola(a, x[0], x[1]);
        SetOracle::new(
            2,
            format!("epigraph({a}*x^2)"),
            move |x| x[1] >= a * x[0] * x[0],
            move |x| {
                let (t, s) = near(x);
                ((t - x[0]).powi(2) + (s - x[1]).powi(2)).sqrt()
            },
        )
        .with_projection(move |x| {
            let (t, s) = near(x);
            vec![t, s]
        })
        .with_interior_dist(move |x| {
            let (t, s) = near(x);
            ((t - x[0]).powi(2) + (s - x[1]).powi(2)).sqrt()
        })
        .with_normal_cone(move |x| {
            let g = a * x[0] * x[0];
            if x[1] - g <= 1e-12 * (1.0 + g.abs()) {
                Some(DualSet::cone(2, vec![vec![2.0 * a * x[0], -1.0]]))
            } else {
                Some(DualSet::point(vec![0.0, 0.0]))
            }
        })
    }

    /// Line through `p` with direction `d`.
    pub fn line(p: Point, d: Point) -> Self {
        let dn = geometry::norm(&d);
        assert!(dn > 0.0);
        let u: Point = d.iter().map(|v| v / dn).collect();
        let proj = {
            let (p, u) = (p.clone(), u.clone());
            move |x: &[f64]| -> Point {
                let t = geometry::dot(&geometry::sub(x, &p), &u);
                geometry::axpy(t, &u, &p)
            }
        };
        let (pr1, pr2, pr3) = (proj.clone(), proj.clone(), proj.clone());
        let dim = p.len();
        let u2 = u.clone();
        SetOracle::new(
            dim,
            format!("line({p:?};{d:?})"),
            move |x| geometry::dist(x, &pr1(x)) <= 1e-12 * (1.0 + geometry::norm(x)),
            move |x| geometry::dist(x, &pr2(x)),
        )
        .with_projection(move |x| pr3(x))
        .with_normal_cone(move |_| {
            // orthogonal complement of the direction
            let n = u2.len();
            let mut basis: Vec<Point> = Vec::new();
            for i in 0..n {
                let mut e = vec![0.0; n];
                e[i] = 1.0;
                let mut v = geometry::axpy(-u2[i], &u2, &e);
                for b in &basis {
                    let c = geometry::dot(&v, b);
                    v = geometry::axpy(-c, b, &v);
                }
                let nv = geometry::norm(&v);
                if nv > 1e-9 {
                    basis.push(v.iter().map(|t| t / nv).collect());
                }
            }
            let mut piece = crate::dual::GenPiece::point(vec![0.0; n]);
            for b in basis {
                piece = piece.line(b);
            }
            Some(DualSet::piece(piece))
        })
    }

    /// Union of two sets; projection picks the nearer candidate.
    pub fn union(a: &SetOracle, b: &SetOracle) -> Self {
        let (a1, b1, a2, b2) = (a.clone(), b.clone(), a.clone(), b.clone());
        let mut s = SetOracle::new(
            a.dim,
            format!("union({},{})", a.label, b.label),
            move |x| a1.contains(x) || b1.contains(x),
            move |x| a2.dist(x).min(b2.dist(x)),
        );
        if a.has_projection() && b.has_projection() {
            let (a3, b3) = (a.clone(), b.clone());
            s = s.with_projection(move |x| {
                let (pa, pb) = (a3.project(x).unwrap(), b3.project(x).unwrap());
                if geometry::dist(x, &pa) <= geometry::dist(x, &pb) {
                    pa
                } else {
                    pb
                }
            });
        }
        if a.has_normal_cone() && b.has_normal_cone() {
            let (a4, b4) = (a.clone(), b.clone());
            // the normal cone of a union at a point lying in both is the intersection of
            // the cones; only the single-membership case is supported exactly
            s = s.with_normal_cone(move |x| match (a4.contains(x), b4.contains(x)) {
                (true, false) => a4.normal_cone(x),
                (false, true) => b4.normal_cone(x),
                _ => None,
            });
        }
        s
    }

    pub fn singleton(p: Point) -> Self {
        let (p1, p2, p3) = (p.clone(), p.clone(), p.clone());
        let dim = p.len();
        SetOracle::new(dim, format!("point({p:?})"), move |x| x == p1.as_slice(), move |x| geometry::dist(x, &p2))
            .with_projection(move |_| p3.clone())
            .with_normal_cone(move |_| Some(DualSet::intervals(&vec![f64::NEG_INFINITY; dim], &vec![f64::INFINITY; dim])))
    }
}

type MapFn = Arc<dyn Fn(&[f64]) -> Point + Send + Sync>;
type JacFn = Arc<dyn Fn(&[f64]) -> Option<Vec<Vec<f64>>> + Send + Sync>;

/// A smooth map R^n -> R^m with an optional Jacobian (rows = outputs).
#[derive(Clone)]
pub struct SmoothMap {
    pub in_dim: usize,
    pub out_dim: usize,
    pub label: String,
    eval: MapFn,
    jacobian: Option<JacFn>,
}

impl fmt::Debug for SmoothMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SmoothMap({}, {}->{})", self.label, self.in_dim, self.out_dim)
    }
}

impl SmoothMap {
    pub fn new(
        in_dim: usize,
        out_dim: usize,
        label: impl Into<String>,
        eval: impl Fn(&[f64]) -> Point + Send + Sync + 'static,
    ) -> Self {
        SmoothMap { in_dim, out_dim, label: label.into(), eval: Arc::new(eval), jacobian: None }
    }

    pub fn with_jacobian(mut self, j: impl Fn(&[f64]) -> Option<Vec<Vec<f64>>> + Send + Sync + 'static) -> Self {
        self.jacobian = Some(Arc::new(j));
        self
    }

    /// x -> A x for a row-major matrix.
    pub fn linear(a: Vec<Vec<f64>>) -> Self {
        let (a1, a2) = (a.clone(), a.clone());
        let (m, n) = (a.len(), a.first().map_or(0, |r| r.len()));
        SmoothMap::new(n, m, "linear", move |x| a1.iter().map(|r| geometry::dot(r, x)).collect())
            .with_jacobian(move |_| Some(a2.clone()))
    }

    pub fn apply(&self, x: &[f64]) -> Point {
        (self.eval)(x)
    }

    pub fn jacobian(&self, x: &[f64]) -> Option<Vec<Vec<f64>>> {
        self.jacobian.as_ref().and_then(|j| j(x))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn projections_realize_distance() {
        let sets = [
            SetOracle::halfspace(vec![1.0, 2.0], 0.5),
            SetOracle::boxed(vec![-1.0, 0.0], vec![1.0, 0.5]),
            SetOracle::ball(vec![0.2, -0.1], 0.7),
            SetOracle::parabola_epigraph(1.0),
            SetOracle::line(vec![0.0, 0.0], vec![1.0, 1.0]),
        ];
        let pts = [[2.0, 1.0], [-0.3, -2.0], [0.5, 0.1], [0.0, 0.0], [-1.2, 3.0]];
        for s in &sets {
            for p in &pts {
                let q = s.project(p).unwrap();
                assert!(s.contains(&q) || s.dist(&q) < 1e-9, "{} {:?}", s.label, p);
                assert!((geometry::dist(p, &q) - s.dist(p)).abs() < 1e-9);
            }
            for a in &pts {
                for b in &pts {
                    assert!((s.dist(a) - s.dist(b)).abs() <= geometry::dist(a, b) + 1e-12);
                }
            }
        }
    }

    #[test]
    fn indicator_takes_zero_on_set() {
        let s = SetOracle::halfspace(vec![0.0, 1.0], 0.0);
        let f = FnOracle::indicator(&s);
        assert_eq!(f.value(&[3.0, -1.0]), 0.0);
        assert_eq!(f.value(&[3.0, 1.0]), f64::INFINITY);
        assert!(f.subgrad(&[1.0, 0.0]).unwrap().contains(&[0.0, 5.0], 1e-12));
    }

    #[test]
    fn tilt_shifts_values_and_subgradients() {
        let f = FnOracle::new(1, "abs", |x| x[0].abs()).with_subgrad(|x| {
            if x[0] == 0.0 {
                DualSet::intervals(&[-1.0], &[1.0])
            } else {
                DualSet::point(vec![x[0].signum()])
            }
        });
        let g = f.tilt(&[1.5]);
        assert_eq!(g.value(&[2.0]), 2.0 - 3.0);
        assert!(g.subgrad(&[0.0]).unwrap().contains(&[-2.5], 1e-12));
        assert!(!g.subgrad(&[0.0]).unwrap().contains(&[0.0], 1e-12));
    }
}
