//! Finitely generated descriptions of dual sets (subdifferentials, normal cones).
//!
//! A piece is `{ c + sum_k a_k g_k : lo_k <= a_k <= hi_k }` with possibly infinite
//! bounds, so points, finite generator cones, lines, boxes and affine-in-parameter
//! families such as `{(2at - 1, -a) : a >= 0}` are all representable. A [`DualSet`]
//! is a finite union of pieces.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{dist, Point};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GenPiece {
    pub center: Point,
    pub gens: Vec<Point>,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl GenPiece {
    pub fn point(c: Point) -> Self {
        GenPiece { center: c, gens: vec![], lo: vec![], hi: vec![] }
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn with_gen(mut self, g: Point, lo: f64, hi: f64) -> Self {
        self.gens.push(g);
        self.lo.push(lo);
        self.hi.push(hi);
        self
    }

    pub fn ray(self, g: Point) -> Self {
        self.with_gen(g, 0.0, f64::INFINITY)
    }

    pub fn line(self, g: Point) -> Self {
        self.with_gen(g, f64::NEG_INFINITY, f64::INFINITY)
    }

    pub fn eval(&self, alpha: &[f64]) -> Point {
        let mut v = self.center.clone();
        for (g, a) in self.gens.iter().zip(alpha) {
            if *a != 0.0 {
                for (vi, gi) in v.iter_mut().zip(g) {
                    *vi += a * gi;
                }
            }
        }
        v
    }

    pub fn contains(&self, v: &[f64], tol: f64) -> bool {
        nearest_in_piece(self, v).0 <= tol
    }

    fn concat(&self, other: &GenPiece) -> GenPiece {
        let mut p = GenPiece::point(self.center.iter().zip(&other.center).map(|(a, b)| a + b).collect());
        for (k, g) in self.gens.iter().enumerate() {
            p = p.with_gen(g.clone(), self.lo[k], self.hi[k]);
        }
        for (k, g) in other.gens.iter().enumerate() {
            p = p.with_gen(g.clone(), other.lo[k], other.hi[k]);
        }
        p
    }

    /// Image under a linear map given as a row-major matrix `m` (rows x cols, cols = dim).
    pub fn linear_image(&self, m: &[Vec<f64>]) -> GenPiece {
        let apply = |v: &[f64]| -> Point { m.iter().map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum()).collect() };
        GenPiece {
            center: apply(&self.center),
            gens: self.gens.iter().map(|g| apply(g)).collect(),
            lo: self.lo.clone(),
            hi: self.hi.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DualSet {
    pub pieces: Vec<GenPiece>,
}

impl DualSet {
    pub fn empty() -> Self {
        DualSet { pieces: vec![] }
    }

    pub fn point(v: Point) -> Self {
        DualSet { pieces: vec![GenPiece::point(v)] }
    }

    pub fn finite(vs: Vec<Point>) -> Self {
        DualSet { pieces: vs.into_iter().map(GenPiece::point).collect() }
    }

    pub fn piece(p: GenPiece) -> Self {
        DualSet { pieces: vec![p] }
    }

    /// The cone generated by `gens` (nonnegative combinations).
    pub fn cone(dim: usize, gens: Vec<Point>) -> Self {
        let mut p = GenPiece::point(vec![0.0; dim]);
        for g in gens {
            p = p.ray(g);
        }
        DualSet::piece(p)
    }

    /// Product of intervals `[lo_i, hi_i]` (infinite ends allowed).
    pub fn intervals(lo: &[f64], hi: &[f64]) -> Self {
        let n = lo.len();
        let mut p = GenPiece::point(vec![0.0; n]);
        for i in 0..n {
            let mut e = vec![0.0; n];
            e[i] = 1.0;
            p = p.with_gen(e, lo[i], hi[i]);
        }
        DualSet::piece(p)
    }

    pub fn is_empty(&self) -> bool {
        self.pieces.is_empty()
    }

    pub fn dim(&self) -> Option<usize> {
        self.pieces.first().map(|p| p.dim())
    }

    pub fn shift(&self, v: &[f64]) -> DualSet {
        DualSet {
            pieces: self
                .pieces
                .iter()
                .map(|p| {
                    let mut q = p.clone();
                    for (c, s) in q.center.iter_mut().zip(v) {
                        *c += s;
                    }
                    q
                })
                .collect(),
        }
    }

    pub fn union(mut self, other: DualSet) -> DualSet {
        self.pieces.extend(other.pieces);
        self
    }

    pub fn linear_image(&self, m: &[Vec<f64>]) -> DualSet {
        DualSet { pieces: self.pieces.iter().map(|p| p.linear_image(m)).collect() }
    }

    pub fn contains(&self, v: &[f64], tol: f64) -> bool {
        self.pieces.iter().any(|p| p.contains(v, tol))
    }

    /// Distance from `v` and a nearest element.
    pub fn nearest(&self, v: &[f64]) -> Result<Nearest> {
        let mut best: Option<Nearest> = None;
        for p in &self.pieces {
            let (d, alpha, exact) = nearest_in_piece(p, v);
            if best.as_ref().is_none_or(|b| d < b.dist) {
                best = Some(Nearest { dist: d, element: p.eval(&alpha), exact });
            }
        }
        best.ok_or(Error::EmptySet)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Nearest {
    pub dist: f64,
    pub element: Point,
    /// false when the generator count forced the iterative fallback
    pub exact: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SumNearest {
    pub dist: f64,
    pub v1: Point,
    pub v2: Point,
    pub exact: bool,
}

/// dist(target, A + B) together with the split of the nearest element.
pub fn dist_to_sum(target: &[f64], a: &DualSet, b: &DualSet) -> Result<SumNearest> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySet);
    }
    let mut best: Option<SumNearest> = None;
    for pa in &a.pieces {
        for pb in &b.pieces {
            let joint = pa.concat(pb);
            let (_, mut alpha, exact) = nearest_in_piece(&joint, target);
            let k = pa.gens.len();
            let split = |a: &[f64]| sum_residual(target, &pa.eval(&a[..k]), &pb.eval(&a[k..]));
            let mut d = split(&alpha);
            if d > 0.0 && d <= 1e-12 * (1.0 + crate::geometry::norm(target)) {
                polish(&joint, &mut alpha, &mut d, split);
            }
            if best.as_ref().is_none_or(|b| d < b.dist) {
                best = Some(SumNearest { dist: d, v1: pa.eval(&alpha[..k]), v2: pb.eval(&alpha[k..]), exact });
            }
        }
    }
    Ok(best.unwrap())
}

fn sum_residual(target: &[f64], v1: &[f64], v2: &[f64]) -> f64 {
    let r: Point = target.iter().zip(v1).zip(v2).map(|((t, a), b)| t - (a + b)).collect();
    crate::geometry::norm(&r)
}

fn nudge(x: f64, steps: i32) -> f64 {
    (0..steps.unsigned_abs()).fold(x, |y, _| if steps > 0 { y.next_up() } else { y.next_down() })
}

/// Moves one or two coefficients by up to 4 ulps each when rounding alone keeps the
/// residual off zero.
fn polish(p: &GenPiece, alpha: &mut [f64], d: &mut f64, resid: impl Fn(&[f64]) -> f64) {
    let k = alpha.len();
    let ok = |i: usize, x: f64| x >= p.lo[i] && x <= p.hi[i];
    for _ in 0..3 {
        let start = *d;
        for i in 0..k {
            for si in -4..=4 {
                let ai = nudge(alpha[i], si);
                if !ok(i, ai) {
                    continue;
                }
                for j in (0..k).filter(|&j| j != i || k == 1) {
                    for sj in -4..=4 {
                        let mut a = alpha.to_vec();
                        a[i] = ai;
                        if j != i {
                            a[j] = nudge(alpha[j], sj);
                            if !ok(j, a[j]) {
                                continue;
                            }
                        }
                        let r = resid(&a);
                        if r < *d {
                            *d = r;
                            alpha.copy_from_slice(&a);
                            if r == 0.0 {
                                return;
                            }
                        }
                    }
                }
            }
        }
        if *d >= start {
            return;
        }
    }
}

const MAX_ENUMERATED: usize = 7;

/// Distance from `v` to a piece and the parameters of the nearest element.
pub(crate) fn nearest_params(p: &GenPiece, v: &[f64]) -> (f64, Vec<f64>) {
    let (d, a, _) = nearest_in_piece(p, v);
    (d, a)
}

/// Minimizes ||c + G a - v|| over the parameter box. Exact (active-set enumeration)
/// for up to `MAX_ENUMERATED` generators, projected gradient beyond that.
fn nearest_in_piece(p: &GenPiece, v: &[f64]) -> (f64, Vec<f64>, bool) {
    let k = p.gens.len();
    let r0: Point = v.iter().zip(&p.center).map(|(a, b)| a - b).collect();
    if k == 0 {
        return (crate::geometry::norm(&r0), vec![], true);
    }
    if k > MAX_ENUMERATED {
        let alpha = projected_gradient(p, &r0);
        return (dist(&p.eval(&alpha), v), alpha, false);
    }
    // states: 0 = at lo, 1 = at hi, 2 = at zero, 3 = free
    let mut best = (f64::INFINITY, vec![0.0; k]);
    let total = 4usize.pow(k as u32);
    'outer: for code in 0..total {
        let mut c = code;
        let mut alpha = vec![0.0; k];
        let mut free = Vec::new();
        for i in 0..k {
            let s = c % 4;
            c /= 4;
            match s {
                0 if p.lo[i].is_finite() => alpha[i] = p.lo[i],
                1 if p.hi[i].is_finite() && p.hi[i] != p.lo[i] => alpha[i] = p.hi[i],
                2 if p.lo[i] < 0.0 && p.hi[i] > 0.0 => alpha[i] = 0.0,
                3 if p.lo[i] < p.hi[i] => free.push(i),
                _ => continue 'outer,
            }
        }
        if !free.is_empty() {
            let mut rhs = r0.clone();
            for i in 0..k {
                if !free.contains(&i) && alpha[i] != 0.0 {
                    for (r, g) in rhs.iter_mut().zip(&p.gens[i]) {
                        *r -= alpha[i] * g;
                    }
                }
            }
            let Some(sol) = free_solve(p, &free, &rhs) else { continue };
            for (a, &i) in free.iter().enumerate() {
                let x = sol[a];
                let slack = 1e-12 * (1.0 + x.abs());
                if x < p.lo[i] - slack || x > p.hi[i] + slack {
                    continue 'outer;
                }
                alpha[i] = x.clamp(p.lo[i], p.hi[i]);
            }
        }
        let d = dist(&p.eval(&alpha), v);
        if d < best.0 {
            best = (d, alpha);
        }
    }
    (best.0, best.1, true)
}

/// Least-squares coefficients of `rhs` on the free generators. A square system is solved
/// directly, otherwise through the normal equations plus one refinement step.
fn free_solve(p: &GenPiece, free: &[usize], rhs: &[f64]) -> Option<Vec<f64>> {
    let nf = free.len();
    let n = rhs.len();
    if nf == n {
        let m: Vec<Vec<f64>> = (0..n)
            .map(|r| {
                let mut row: Vec<f64> = free.iter().map(|&i| p.gens[i][r]).collect();
                row.push(rhs[r]);
                row
            })
            .collect();
        if let Some(sol) = solve_linear(m) {
            return Some(sol);
        }
    }
    let normal = |r: &[f64]| -> Option<Vec<f64>> {
        let mut m = vec![vec![0.0; nf + 1]; nf];
        for (a, &i) in free.iter().enumerate() {
            for (b, &j) in free.iter().enumerate() {
                m[a][b] = crate::geometry::dot(&p.gens[i], &p.gens[j]);
            }
            m[a][nf] = crate::geometry::dot(&p.gens[i], r);
        }
        solve_linear(m)
    };
    let mut sol = normal(rhs)?;
    let mut res = rhs.to_vec();
    for (a, &i) in free.iter().enumerate() {
        for (r, g) in res.iter_mut().zip(&p.gens[i]) {
            *r -= sol[a] * g;
        }
    }
    if let Some(corr) = normal(&res) {
        for (s, c) in sol.iter_mut().zip(corr) {
            *s += c;
        }
    }
    Some(sol)
}

fn projected_gradient(p: &GenPiece, r0: &[f64]) -> Vec<f64> {
    let k = p.gens.len();
    let lip: f64 = p.gens.iter().map(|g| crate::geometry::dot(g, g)).sum::<f64>().max(1e-300);
    let mut alpha: Vec<f64> = (0..k).map(|i| 0.0f64.clamp(p.lo[i], p.hi[i])).collect();
    for _ in 0..20_000 {
        let res: Point = {
            let e = p.eval(&alpha);
            e.iter().zip(&p.center).zip(r0).map(|((e, c), r)| (e - c) - r).collect()
        };
        let mut moved = 0.0f64;
        for i in 0..k {
            let g = crate::geometry::dot(&p.gens[i], &res);
            let next = (alpha[i] - g / lip).clamp(p.lo[i], p.hi[i]);
            moved = moved.max((next - alpha[i]).abs());
            alpha[i] = next;
        }
        if moved < 1e-15 {
            break;
        }
    }
    alpha
}

/// Gaussian elimination with partial pivoting on an augmented matrix.
pub(crate) fn solve_linear(mut m: Vec<Vec<f64>>) -> Option<Vec<f64>> {
    let n = m.len();
    let scale = m.iter().flat_map(|r| r[..n].iter()).fold(0.0f64, |a, v| a.max(v.abs())).max(1e-300);
    for col in 0..n {
        let piv = (col..n).max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))?;
        if m[piv][col].abs() <= 1e-12 * scale {
            return None;
        }
        m.swap(col, piv);
        for row in 0..n {
            if row != col {
                let f = m[row][col] / m[col][col];
                if f != 0.0 {
                    for c in col..=n {
                        m[row][c] -= f * m[col][c];
                    }
                }
            }
        }
    }
    Some((0..n).map(|i| m[i][n] / m[i][i]).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vertical_line_sum_misses_horizontal_target() {
        let a = DualSet::cone(2, vec![vec![0.0, -1.0]]);
        let b = DualSet::cone(2, vec![vec![0.0, 1.0]]);
        let r = dist_to_sum(&[1.0, 0.0], &a, &b).unwrap();
        assert!((r.dist - 1.0).abs() < 1e-15);
    }

    #[test]
    fn tilted_cone_sum_hits_target_exactly() {
        let x = 0.25;
        let a = DualSet::cone(2, vec![vec![2.0 * x, -1.0]]);
        let b = DualSet::cone(2, vec![vec![0.0, 1.0]]);
        let r = dist_to_sum(&[1.0, 0.0], &a, &b).unwrap();
        assert!(r.dist < 1e-15);
        assert!((r.v1[0] - 1.0).abs() < 1e-15 && (r.v1[1] + 2.0).abs() < 1e-15);
        assert!((r.v2[1] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn interval_and_point() {
        let a = DualSet::intervals(&[-1.0], &[1.0]);
        let n = a.nearest(&[3.0]).unwrap();
        assert_eq!(n.dist, 2.0);
        assert_eq!(n.element, vec![1.0]);
        assert!(dist_to_sum(&[0.0], &DualSet::empty(), &a).is_err());
    }

    #[test]
    fn dependent_lines_still_exact() {
        // two parallel lines plus a ray: rank-deficient free sets are skipped
        let p = GenPiece::point(vec![1.0, 1.0]).line(vec![1.0, 0.0]).line(vec![2.0, 0.0]).ray(vec![0.0, 1.0]);
        let s = DualSet::piece(p);
        let n = s.nearest(&[5.0, -3.0]).unwrap();
        assert!((n.dist - 4.0).abs() < 1e-12);
    }

    #[test]
    fn many_generators_fall_back() {
        let gens: Vec<Point> = (0..9).map(|i| vec![(i as f64).cos(), (i as f64).sin()]).collect();
        let s = DualSet::cone(2, gens);
        let n = s.nearest(&[0.3, 0.4]).unwrap();
        assert!(!n.exact);
        assert!(n.dist < 1e-6);
    }
}
