//! Small vector helpers and closed-form projections.

pub type Point = Vec<f64>;

pub fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn sub(a: &[f64], b: &[f64]) -> Point {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn add(a: &[f64], b: &[f64]) -> Point {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn axpy(a: f64, x: &[f64], y: &[f64]) -> Point {
    x.iter().zip(y).map(|(u, v)| a * u + v).collect()
}

pub fn lerp(a: &[f64], b: &[f64], t: f64) -> Point {
    a.iter().zip(b).map(|(x, y)| x + t * (y - x)).collect()
}

/// Distance on the product space X x X: the larger of the two block distances.
pub fn product_dist(a1: &[f64], a2: &[f64], b1: &[f64], b2: &[f64]) -> f64 {
    dist(a1, b1).max(dist(a2, b2))
}

/// Lexicographic comparison used for deterministic tie-breaking.
pub fn lex_cmp(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            std::cmp::Ordering::Equal => continue,
            o => return o,
        }
    }
    a.len().cmp(&b.len())
}

/// Real roots of c3 t^3 + c1 t + c0 = 0 with c3 != 0 (depressed cubic).
pub fn depressed_cubic_roots(c3: f64, c1: f64, c0: f64) -> Vec<f64> {
    let p = c1 / c3;
    let q = c0 / c3;
    let disc = (q / 2.0).powi(2) + (p / 3.0).powi(3);
    let mut roots = if disc > 0.0 {
        let s = disc.sqrt();
        vec![(-q / 2.0 + s).cbrt() + (-q / 2.0 - s).cbrt()]
    } else if p == 0.0 {
        vec![0.0]
    } else {
        let r = (-p / 3.0).sqrt();
        let arg = (3.0 * q / (2.0 * p) * (-3.0 / p).sqrt()).clamp(-1.0, 1.0);
        let phi = arg.acos() / 3.0;
        (0..3)
            .map(|k| 2.0 * r * (phi - 2.0 * std::f64::consts::PI * k as f64 / 3.0).cos())
            .collect()
    };
    for t in roots.iter_mut() {
        for _ in 0..4 {
            let f = c3 * *t * *t * *t + c1 * *t + c0;
            let df = 3.0 * c3 * *t * *t + c1;
            if df == 0.0 {
                break;
            }
            let step = f / df;
            if !step.is_finite() {
                break;
            }
            *t -= step;
        }
    }
    roots
}

/// Nearest point to (px, py) on the curve y = a x^2 (a != 0).
pub fn nearest_on_parabola(a: f64, px: f64, py: f64) -> (f64, f64) {
    // stationarity of (t-px)^2 + (a t^2 - py)^2: 2a^2 t^3 + (1 - 2 a py) t - px = 0
    let roots = depressed_cubic_roots(2.0 * a * a, 1.0 - 2.0 * a * py, -px);
    let mut best = (f64::INFINITY, 0.0);
    for t in roots {
        let d = (t - px).powi(2) + (a * t * t - py).powi(2);
        if d < best.0 {
            best = (d, t);
        }
    }
    let t = best.1;
    (t, a * t * t)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_parabola(a: f64, px: f64, py: f64) -> f64 {
        let mut best = f64::INFINITY;
        let n = 400_000;
        for i in 0..=n {
            let t = -4.0 + 8.0 * i as f64 / n as f64;
            best = best.min(((t - px).powi(2) + (a * t * t - py).powi(2)).sqrt());
        }
        best
    }

    #[test]
    fn parabola_projection_matches_dense_scan() {
        for &(px, py) in &[(1.0, 0.0), (0.3, -1.0), (0.0, 2.0), (-1.5, 0.2), (2.0, 3.9), (0.01, 0.5)] {
            let (tx, ty) = nearest_on_parabola(1.0, px, py);
            let d = ((tx - px).powi(2) + (ty - py).powi(2)).sqrt();
            assert!((d - brute_parabola(1.0, px, py)).abs() < 1e-4, "{px} {py}");
        }
    }

    #[test]
    fn cubic_roots_solve() {
        for &(a, c, d) in &[(1.0, -3.0, 1.0), (2.0, 1.0, -1.0), (1.0, 0.0, -8.0)] {
            for t in depressed_cubic_roots(a, c, d) {
                assert!((a * t * t * t + c * t + d).abs() < 1e-10);
            }
        }
    }
}
