//! Deterministic point clouds refining a region, plus the coupling-distance schedule.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::geometry::{self, Point};
use crate::oracle::FnOracle;
use crate::region::Region;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleMode {
    Grid,
    LowDiscrepancy,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SampleScheme {
    pub mode: SampleMode,
    pub seed: u64,
    /// refinement levels L
    pub levels: usize,
    /// coupling distance at level 0, relative to the region's half-width
    pub eta0: f64,
    /// grid points per axis at level 0 (made odd so the center is a node)
    pub base_points: usize,
    /// per-level growth of points per axis
    pub growth: f64,
    /// cap on grid/sequence points per cloud
    pub max_points: usize,
    /// number of essentially interior members
    pub stages: usize,
    /// bounding window for whole-space and set regions
    pub window: Option<(Point, Point)>,
    /// boundary layers at relative depths 10^-1 .. 10^-depth
    pub boundary_depth: usize,
    /// trace convergence tolerance
    pub trace_tol: f64,
    /// divergence threshold M
    pub diverge: f64,
    /// global absolute tolerance
    pub tol: f64,
    /// add local refinement around the previous level's extremal pair
    pub refine: bool,
}

impl Default for SampleScheme {
    fn default() -> Self {
        SampleScheme {
            mode: SampleMode::Grid,
            seed: 0,
            levels: 10,
            eta0: 0.1,
            base_points: 21,
            growth: 1.25,
            max_points: 40_000,
            stages: 8,
            window: None,
            boundary_depth: 12,
            trace_tol: 1e-3,
            diverge: 1e6,
            tol: 1e-9,
            refine: true,
        }
    }
}

impl SampleScheme {
    pub fn with_levels(mut self, levels: usize) -> Self {
        self.levels = levels.max(1);
        self
    }

    pub fn with_window(mut self, lo: Point, hi: Point) -> Self {
        self.window = Some((lo, hi));
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_stages(mut self, stages: usize) -> Self {
        self.stages = stages.max(1);
        self
    }

    /// Odd, strictly increasing in the level (before the dimension cap).
    pub fn points_per_axis(&self, level: usize) -> usize {
        let mut n = self.base_points.max(3) | 1;
        for j in 1..=level {
            let next = ((self.base_points as f64) * self.growth.powi(j as i32)).round() as usize | 1;
            n = next.max(n + 2);
        }
        n
    }

    fn capped_per_axis(&self, level: usize, dim: usize) -> usize {
        let n = self.points_per_axis(level);
        let cap = (self.max_points as f64).powf(1.0 / dim as f64).floor() as usize;
        let cap = if cap.is_multiple_of(2) { cap.saturating_sub(1) } else { cap };
        n.min(cap.max(3))
    }

    /// eta_j = eta0 * scale * 2^-j
    pub fn eta(&self, scale: f64, level: usize) -> f64 {
        self.eta0 * scale * 0.5f64.powi(level as i32)
    }

    /// Grid spacing (or equivalent fill distance) on the region's bounding box.
    pub fn spacing(&self, region: &Region, level: usize) -> Result<f64> {
        let (lo, hi) = region.bbox(self.window.as_ref())?;
        let n = self.capped_per_axis(level, lo.len());
        let w = lo.iter().zip(&hi).map(|(l, h)| h - l).fold(0.0, f64::max);
        Ok(if w > 0.0 { w / (n - 1) as f64 } else { 0.0 })
    }

    /// The level-j point set of a region: grid or shifted Halton points inside the
    /// region, the bounding-box center when it belongs to the region, and boundary layers.
    pub fn sample(&self, region: &Region, level: usize) -> Result<Vec<Point>> {
        let (lo, hi) = region.bbox(self.window.as_ref())?;
        let dim = lo.len();
        let n = self.capped_per_axis(level, dim);
        let mut pts: Vec<Point> = Vec::new();
        match self.mode {
            SampleMode::Grid => {
                let total = n.pow(dim as u32);
                let mut idx = vec![0usize; dim];
                for _ in 0..total {
                    let p: Point = (0..dim)
                        .map(|k| if n == 1 { lo[k] } else { lo[k] + (hi[k] - lo[k]) * idx[k] as f64 / (n - 1) as f64 })
                        .collect();
                    if region.contains(&p) {
                        pts.push(p);
                    }
                    for k in 0..dim {
                        idx[k] += 1;
                        if idx[k] < n {
                            break;
                        }
                        idx[k] = 0;
                    }
                }
            }
            SampleMode::LowDiscrepancy => {
                let count = n.pow(dim as u32).min(self.max_points);
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ (level as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
                let shift: Vec<f64> = (0..dim).map(|_| rng.random::<f64>()).collect();
                for i in 1..=count {
                    let p: Point = (0..dim)
                        .map(|k| {
                            let u = (radical_inverse(i as u64, PRIMES[k % PRIMES.len()]) + shift[k]).fract();
                            lo[k] + (hi[k] - lo[k]) * u
                        })
                        .collect();
                    if region.contains(&p) {
                        pts.push(p);
                    }
                }
                let c: Point = lo.iter().zip(&hi).map(|(l, h)| (l + h) / 2.0).collect();
                if region.contains(&c) {
                    pts.push(c);
                }
            }
        }
        pts.extend(self.boundary_layers(region, level)?);
        Ok(pts)
    }

    fn boundary_layers(&self, region: &Region, level: usize) -> Result<Vec<Point>> {
        let depth = self.boundary_depth;
        let mut out = Vec::new();
        match region {
            Region::OpenBall { center, radius } | Region::ClosedBall { center, radius } => {
                let dirs = sphere_directions(center.len(), 16 * (level + 2));
                for u in &dirs {
                    for k in 1..=depth {
                        let r = radius * (1.0 - 10f64.powi(-(k as i32)));
                        out.push(geometry::axpy(r, u, center));
                    }
                    if matches!(region, Region::ClosedBall { .. }) {
                        out.push(geometry::axpy(*radius, u, center));
                    }
                }
            }
            Region::Box { lo, hi } => {
                let dim = lo.len();
                let m = (self.capped_per_axis(level, dim) / 4).max(2) | 1;
                let m = if dim > 3 { 3 } else { m };
                for axis in 0..dim {
                    let others: Vec<usize> = (0..dim).filter(|&k| k != axis).collect();
                    let total = m.pow(others.len() as u32);
                    let hw = (hi[axis] - lo[axis]) / 2.0;
                    for t in 0..total {
                        let mut base = vec![0.0; dim];
                        let mut c = t;
                        for &k in &others {
                            let i = c % m;
                            c /= m;
                            base[k] = lo[k] + (hi[k] - lo[k]) * i as f64 / (m - 1) as f64;
                        }
                        for k in 1..=depth {
                            let d = hw * 10f64.powi(-(k as i32));
                            let mut a = base.clone();
                            a[axis] = lo[axis] + d;
                            out.push(a);
                            let mut b = base.clone();
                            b[axis] = hi[axis] - d;
                            out.push(b);
                        }
                    }
                }
            }
            _ => {}
        }
        Ok(out.into_iter().filter(|p| region.contains(p)).collect())
    }

    /// Offsets for the coupling partner of x1: 0 and eta * c * u for magnitudes c < 1.
    pub fn stencil(&self, dim: usize, eta: f64) -> Vec<Point> {
        let mut out = vec![vec![0.0; dim]];
        let dirs = sphere_directions(dim, 8);
        for &c in &[0.25, 0.5, 0.75, 0.97] {
            for u in &dirs {
                out.push(u.iter().map(|v| v * c * eta).collect());
            }
        }
        out
    }

    /// Points of B_delta(center): grid, polar samples at graded radii, and the graded
    /// tensor grid {0, +-delta 2^-k}^n, which reaches deep toward the center.
    pub fn sample_near(&self, center: &[f64], delta: f64, level: usize) -> Result<Vec<Point>> {
        let ball = Region::OpenBall { center: center.to_vec(), radius: delta };
        let mut pts = self.sample(&ball, level)?;
        let dim = center.len();
        let kmax = 4 + 4 * level;
        let dirs = sphere_directions(dim, 16 * (level + 2));
        for k in 1..=kmax {
            let r = delta * 0.5f64.powi(k as i32);
            for u in &dirs {
                pts.push(geometry::axpy(r, u, center));
            }
        }
        if dim <= 3 {
            let mut axis = vec![0.0];
            for k in 1..=kmax {
                let v = delta * 0.5f64.powi(k as i32);
                axis.push(v);
                axis.push(-v);
            }
            let m = axis.len();
            let total = m.pow(dim as u32);
            for t in 0..total {
                let mut c = t;
                let p: Point = (0..dim)
                    .map(|k| {
                        let i = c % m;
                        c /= m;
                        center[k] + axis[i]
                    })
                    .collect();
                if geometry::dist(&p, center) < delta {
                    pts.push(p);
                }
            }
        }
        Ok(pts)
    }
}

const PRIMES: [u64; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

/// Deterministic unit directions: +-1 in 1-D, `m` evenly spaced angles in 2-D,
/// axes plus diagonals (and a Fibonacci sphere) in higher dimensions.
pub fn sphere_directions(dim: usize, m: usize) -> Vec<Point> {
    match dim {
        0 => vec![],
        1 => vec![vec![1.0], vec![-1.0]],
        2 => (0..m.max(4))
            .map(|k| {
                let a = 2.0 * std::f64::consts::PI * k as f64 / m.max(4) as f64;
                vec![a.cos(), a.sin()]
            })
            .collect(),
        _ => {
            let mut out = Vec::new();
            for k in 0..dim {
                for s in [1.0, -1.0] {
                    let mut e = vec![0.0; dim];
                    e[k] = s;
                    out.push(e);
                }
            }
            if dim <= 4 {
                let c = 1.0 / (dim as f64).sqrt();
                for mask in 0..(1usize << dim) {
                    out.push((0..dim).map(|k| if mask >> k & 1 == 1 { -c } else { c }).collect());
                }
            }
            if dim == 3 {
                let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
                for i in 0..m {
                    let z = 1.0 - 2.0 * (i as f64 + 0.5) / m as f64;
                    let r = (1.0 - z * z).sqrt();
                    let t = golden * i as f64;
                    out.push(vec![r * t.cos(), r * t.sin(), z]);
                }
            }
            out
        }
    }
}

/// Points of `pts` in dom f with an axis neighbour at distance `h` outside dom f are
/// bisected toward that neighbour; the last in-domain point is returned. These points
/// sit on the domain boundary up to rounding.
pub fn domain_boundary_points(f: &FnOracle, pts: &[Point], h: f64, region: &Region) -> Vec<Point> {
    use rayon::prelude::*;
    if !(h > 0.0) {
        return vec![];
    }
    let dim = f.dim;
    pts.par_iter()
        .flat_map_iter(|p| {
            let mut found = Vec::new();
            if f.value(p).is_finite() {
                for k in 0..dim {
                    for s in [1.0, -1.0] {
                        let mut q = p.clone();
                        q[k] += s * h;
                        if !region.contains(&q) || f.value(&q).is_finite() {
                            continue;
                        }
                        let (mut a, mut b) = (0.0f64, 1.0f64);
                        for _ in 0..64 {
                            let mid = 0.5 * (a + b);
                            if mid <= a || mid >= b {
                                break;
                            }
                            let mut m = p.clone();
                            m[k] += s * h * mid;
                            if f.value(&m).is_finite() {
                                a = mid;
                            } else {
                                b = mid;
                            }
                        }
                        let mut m = p.clone();
                        m[k] += s * h * a;
                        if a > 0.0 && f.value(&m).is_finite() {
                            found.push(m);
                        }
                    }
                }
            }
            found
        })
        .collect()
}

/// Small grid of spacing `h` with `k` nodes each side of `center`, clipped to the region.
pub fn local_grid(center: &[f64], h: f64, k: usize, region: &Region) -> Vec<Point> {
    let dim = center.len();
    let m = 2 * k + 1;
    let total = m.pow(dim as u32);
    let mut out = Vec::with_capacity(total);
    for t in 0..total {
        let mut c = t;
        let p: Point = (0..dim)
            .map(|d| {
                let i = c % m;
                c /= m;
                center[d] + h * (i as f64 - k as f64)
            })
            .collect();
        if region.contains(&p) {
            out.push(p);
        }
    }
    out
}

/// Uniform hash grid for radius queries.
pub struct SpatialHash {
    cell: f64,
    dim: usize,
    map: HashMap<Vec<i64>, Vec<usize>>,
}

impl SpatialHash {
    pub fn new(pts: &[Point], cell: f64) -> Self {
        let dim = pts.first().map_or(0, |p| p.len());
        let cell = if cell > 0.0 && cell.is_finite() { cell } else { 1.0 };
        let mut map: HashMap<Vec<i64>, Vec<usize>> = HashMap::new();
        for (i, p) in pts.iter().enumerate() {
            map.entry(Self::key_of(p, cell)).or_default().push(i);
        }
        SpatialHash { cell, dim, map }
    }

    fn key_of(p: &[f64], cell: f64) -> Vec<i64> {
        p.iter().map(|v| (v / cell).floor() as i64).collect()
    }

    pub fn cell_count(&self) -> usize {
        self.map.len()
    }

    /// Indices of points within the cells meeting the box [x - r, x + r]; callers filter
    /// by exact distance. Returns None when the query would visit more cells than exist.
    pub fn candidates(&self, x: &[f64], r: f64) -> Option<Vec<usize>> {
        let lo: Vec<i64> = x.iter().map(|v| ((v - r) / self.cell).floor() as i64).collect();
        let hi: Vec<i64> = x.iter().map(|v| ((v + r) / self.cell).floor() as i64).collect();
        let mut visits: f64 = 1.0;
        for k in 0..self.dim {
            visits *= (hi[k] - lo[k] + 1) as f64;
        }
        if visits > 4.0 * self.map.len() as f64 + 16.0 {
            return None;
        }
        let mut out = Vec::new();
        let mut key = lo.clone();
        loop {
            if let Some(v) = self.map.get(&key) {
                out.extend_from_slice(v);
            }
            let mut k = 0;
            loop {
                if k == self.dim {
                    return Some(out);
                }
                key[k] += 1;
                if key[k] <= hi[k] {
                    break;
                }
                key[k] = lo[k];
                k += 1;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_refining() {
        let s = SampleScheme::default();
        let r = Region::open_ball(vec![0.0, 0.0], 1.0).unwrap();
        assert_eq!(s.sample(&r, 2).unwrap(), s.sample(&r, 2).unwrap());
        for j in 0..5 {
            assert!(s.spacing(&r, j + 1).unwrap() < s.spacing(&r, j).unwrap());
        }
        let ld = SampleScheme { mode: SampleMode::LowDiscrepancy, seed: 7, ..SampleScheme::default() };
        assert_eq!(ld.sample(&r, 1).unwrap(), ld.sample(&r, 1).unwrap());
        let other = SampleScheme { seed: 8, ..ld.clone() };
        assert_ne!(ld.sample(&r, 1).unwrap(), other.sample(&r, 1).unwrap());
    }

    #[test]
    fn samples_lie_in_region_and_include_center() {
        let s = SampleScheme::default();
        let r = Region::open_ball(vec![0.0], 1.0).unwrap();
        let pts = s.sample(&r, 0).unwrap();
        assert!(pts.iter().all(|p| p[0].abs() < 1.0));
        assert!(pts.iter().any(|p| p[0] == 0.0));
        // boundary layer reaches 1e-12 of the edge
        assert!(pts.iter().any(|p| 1.0 - p[0] < 1e-11));
    }

    #[test]
    fn hash_finds_neighbours() {
        let pts: Vec<Point> = (0..100).map(|i| vec![i as f64 * 0.01, 0.0]).collect();
        let h = SpatialHash::new(&pts, 0.05);
        let c = h.candidates(&[0.5, 0.0], 0.035).unwrap();
        let near: Vec<usize> = c.into_iter().filter(|&i| geometry::dist(&pts[i], &[0.5, 0.0]) < 0.035).collect();
        assert_eq!(near.len(), 7);
    }

    #[test]
    fn boundary_bisection_hits_the_edge() {
        let f = FnOracle::new(1, "step", |x| if x[0] <= 0.3 { 0.0 } else { f64::INFINITY });
        let r = Region::Whole { dim: 1 };
        let pts = domain_boundary_points(&f, &[vec![0.25]], 0.1, &r);
        assert_eq!(pts.len(), 1);
        assert!((pts[0][0] - 0.3).abs() < 1e-15);
    }
}
