// Acceptance run: one line per criterion. Brute-force oracles live here, independent of
// the library code paths they check.

use std::time::Instant;

use declab::decoupling::{diamond, full_report, DecouplingReport};
use declab::ekeland::{ekeland_on_cloud, penalized_search};
use declab::gallery::{self, lower_half_plane, mirrored_reciprocals, parabola_linear, pole_pair, squared_norm, step, Computed};
use declab::semicontinuity::{certify, certify_pair_of_sets, reverify_witness, subtransversality_modulus, subtransversality_ratio, Firmness, LscProperty};
use declab::sparse_control::{
    approx_stationarity_check, project_box, sharp_stationarity_check, solve_sparse_oc, stationary_duals, CellSpace, OCProblem, QuadraticTarget,
};
use declab::{ExtReal, FnOracle, Region, SampleScheme, SetOracle, Status};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SAMPLED: f64 = 5e-2;

/// Criteria whose stated numbers cannot be met; see `c5` for the arithmetic.
const KNOWN_RED: &[u32] = &[5];

struct Outcome {
    pass: bool,
    detail: String,
}

fn ok(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn ball(c: &[f64], r: f64) -> Region {
    Region::open_ball(c.to_vec(), r).unwrap()
}

fn fin(v: ExtReal) -> f64 {
    v.to_f64()
}

fn near(v: ExtReal, want: f64, tol: f64) -> bool {
    matches!(v, ExtReal::Finite(x) if (x - want).abs() <= tol)
}

const FIVE: [&str; 6] = ["lambda", "lambda_circ", "lambda_dag", "theta_circ", "theta_dag", "inf_sum"];

fn c1(s: &SampleScheme) -> Outcome {
    let t = Instant::now();
    let rep = full_report(&parabola_linear(), &lower_half_plane(), &ball(&[0.0, 0.0], 0.5), s, s.trace_tol).unwrap();
    let secs = t.elapsed().as_secs_f64();
    let bad: Vec<String> = FIVE.iter().filter(|q| !near(rep.get(q).unwrap(), 0.0, SAMPLED)).map(|q| format!("{q}={}", rep.get(q).unwrap())).collect();
    ok(bad.is_empty() && secs < 10.0, format!("parabola pair: all six within 5e-2 of 0 {:?}, {secs:.2}s", bad))
}

/// Step on [0, 1] with f2 = 0: inf over a dense grid of max{|x - x1|, |x - x2|, step(x) - step(x1)}.
fn diamond_grid(x1: f64, x2: f64) -> f64 {
    let st = |x: f64| if x <= 0.0 { 0.0 } else { 1.0 };
    let n = 200_000;
    (0..=n)
        .map(|k| k as f64 / n as f64)
        .chain([x1, x2, (x1 + x2) / 2.0])
        .map(|x| (x - x1).abs().max((x - x2).abs()).max(st(x) - st(x1)))
        .fold(f64::INFINITY, f64::min)
}

fn c2(s: &SampleScheme) -> Outcome {
    let (f1, f2, u) = (step(), FnOracle::constant(1, 0.0), Region::boxed(vec![0.0], vec![1.0]).unwrap());
    let rep = full_report(&f1, &f2, &u, s, s.trace_tol).unwrap();
    let want = [("lambda", 0.0), ("lambda_circ", 0.0), ("theta_circ", 0.0), ("theta_dag", 0.0), ("lambda_dag", 1.0)];
    let mut bad: Vec<String> = want.iter().filter(|(q, w)| !near(rep.get(q).unwrap(), *w, SAMPLED)).map(|(q, _)| format!("{q}={}", rep.get(q).unwrap())).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for i in 0..100 {
        let x1 = if i < 50 { 0.0 } else { rng.random_range(1e-3..1.0) };
        let x2: f64 = rng.random_range(0.0..1.0);
        let closed = if x1 == 0.0 { x2 - x1 } else { (x2 - x1).abs() / 2.0 };
        let grid = diamond_grid(x1, x2);
        let got = fin(diamond(&f1, &f2, &u, &[x1], &[x2], s).unwrap().value);
        let err = (got - closed).abs().max((grid - closed).abs());
        worst = worst.max(err);
        if err > 1e-3 {
            bad.push(format!("diamond({x1:.4}, {x2:.4}) = {got} vs {closed}"));
        }
    }
    ok(bad.is_empty(), format!("step on [0,1]: quantities match, worst diamond error {worst:.2e} over 100 pairs {bad:?}"))
}

fn trace_extreme(rep: &DecouplingReport, label: &str, below: bool) -> f64 {
    let vals = rep.traces.iter().filter(|t| t.label == label).flat_map(|t| t.values()).map(fin);
    if below {
        vals.fold(f64::INFINITY, f64::min)
    } else {
        vals.fold(f64::NEG_INFINITY, f64::max)
    }
}

fn c3(s: &SampleScheme) -> Outcome {
    let (f1, f2) = pole_pair(1.0);
    let rep = full_report(&f1, &f2, &ball(&[0.0], 1.0), s, s.trace_tol).unwrap();
    let low = trace_extreme(&rep, "U liminf", true);
    let high = trace_extreme(&rep, "U limsup diamond", false);
    let pass = rep.lambda_circ == ExtReal::NegInf
        && rep.theta_circ == ExtReal::PosInf
        && low < -1e6
        && high > 1e6
        && near(rep.lambda_dag, 0.0, SAMPLED)
        && near(rep.theta_dag, 0.0, SAMPLED);
    ok(
        pass,
        format!(
            "pole pair: lambda_circ={} (trace min {low:.3e}), theta_circ={} (trace max {high:.3e}), lambda_dag={}, theta_dag={}",
            rep.lambda_circ, rep.theta_circ, rep.lambda_dag, rep.theta_dag
        ),
    )
}

fn c4(s: &SampleScheme) -> Outcome {
    let (f1, f2) = mirrored_reciprocals();
    let u = ball(&[0.0, 0.0], 1.0);
    let td = fin(declab::decoupling::theta_dag(&f1, &f2, &u, s).unwrap().0);
    let cert = certify(&f1, &f2, &u, LscProperty::FirmQuasiuniform, s).unwrap();
    let Some(w) = cert.witness.clone() else { return ok(false, "no witness") };
    let mirrored = w.x1[0] == -w.x2[0] && w.x1[1] == w.x2[1];
    let re = reverify_witness(&f1, &f2, &u, &cert, s).unwrap();
    ok(
        td >= 0.95 && cert.status() == Status::Fails && mirrored && re,
        format!("mirrored reciprocals: theta_dag={td:.4}, certificate {:?}, witness {:?} / {:?}, reverified {re}", cert.status(), w.x1, w.x2),
    )
}

/// dist to {y >= x^2} by a dense scan of the boundary curve near the point, then the ratio
/// |x| / max{d1, d2} (the intersection is the origin alone).
fn parabola_ratio_grid(x: f64, y: f64) -> f64 {
    let d1 = if y >= x * x {
        0.0
    } else {
        let n = 400_000;
        (0..=n)
            .map(|k| x - 0.5 + k as f64 / n as f64)
            .map(|t| ((t - x).powi(2) + (t * t - y).powi(2)).sqrt())
            .fold(f64::INFINITY, f64::min)
    };
    let d2 = y.max(0.0);
    (x * x + y * y).sqrt() / d1.max(d2)
}

fn c5(s: &SampleScheme) -> Outcome {
    let o1 = SetOracle::parabola_epigraph(1.0);
    let o2 = SetOracle::halfspace(vec![0.0, 1.0], 0.0);
    let m = subtransversality_modulus(&o1, &o2, &[0.0, 0.0], 0.5, s).unwrap();
    let pair = certify_pair_of_sets(&o1, &o2, &ball(&[0.0, 0.0], 0.5), Firmness::Uniform, s).unwrap();
    let k = 64.0;
    let (x, y) = (1.0 / k, 1.0 / (k * k));
    let lib = subtransversality_ratio(&o1, &o2, &[x, y], &[0.0, 0.0]);
    let grid = parabola_ratio_grid(x, y);
    let closed = (1.0 + 1.0 / (k * k)).sqrt() * k;
    let agree = (lib - grid).abs() <= 1e-9 * grid && (lib - closed).abs() <= 1e-9 * closed;
    let verdicts = m.verdict.status == Status::Fails && pair.status() == Status::Holds;
    ok(
        verdicts && agree && lib > 1e3,
        format!(
            "modulus {:?}, pair {:?}; ratio at (1/64, 1/64^2): library {lib:.6}, grid {grid:.6}, closed form k*sqrt(1+1/k^2) = {closed:.6}, \
             so the claimed 1e3 is not reached by k = 64 (it takes k > 1000)",
            m.verdict.status,
            pair.status()
        ),
    )
}

fn c6(s: &SampleScheme) -> Outcome {
    let mut details = vec![];
    let mut pass = true;
    for id in ["S6", "S7"] {
        let case = gallery::case(id).unwrap();
        let got = case.compute(s);
        for e in &case.expected {
            let c = got.iter().find(|(q, _)| *q == e.quantity).map(|(_, c)| c.clone());
            let good = c.as_ref().is_some_and(|c| e.expected.matches(c, e.tol));
            pass &= good;
            let shown = c.map_or("missing".to_string(), |c| match c {
                Computed::Value(v) => format!("{v}"),
                other => format!("{other}"),
            });
            details.push(format!("{id} {}={shown}", e.quantity));
        }
    }
    ok(pass, details.join(", "))
}

fn c7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut bad = 0;
    let mut moves = 0;
    for _ in 0..1000 {
        let n = rng.random_range(1..=200usize);
        let d = rng.random_range(1..=3usize);
        let pts: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let b = rng.random_range(0..n);
        let vals: Vec<f64> = (0..n)
            .map(|i| if i != b && rng.random_bool(0.05) { f64::INFINITY } else { rng.random_range(-2.0..2.0) })
            .collect();
        let eps = rng.random_range(0.01..3.0);
        let r = ekeland_on_cloud(&pts, &vals, &pts[b], eps).unwrap();
        moves += r.moves;
        // all-points oracle
        let h = r.index;
        let dist = |a: &[f64], c: &[f64]| a.iter().zip(c).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt();
        let first = vals[h] + eps * dist(&pts[h], &pts[b]) <= vals[b];
        let second = (0..n).all(|i| i == h || vals[h] < vals[i] + eps * dist(&pts[i], &pts[h]));
        if !(first && second) {
            bad += 1;
        }
    }
    ok(bad == 0, format!("1000 clouds: {bad} violations of (i)/(ii), {moves} moves in total"))
}

/// The decoupled penalty at the returned pair, recomputed from scratch.
fn check_penalized(f1: &FnOracle, f2: &FnOracle, xbar: &[f64], s: &SampleScheme) -> Result<(), String> {
    let r = penalized_search(f1, f2, xbar, 0.1, 0.4, 0.05, s).map_err(|e| e.to_string())?;
    let d = |a: &[f64], c: &[f64]| a.iter().zip(c).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt();
    let prod = (d(&r.xhat1, xbar).powi(2) + d(&r.xhat2, xbar).powi(2)).sqrt();
    let coupled = f1.value(&r.xhat1) + f2.value(&r.xhat2) + r.gamma * d(&r.xhat1, &r.xhat2);
    let base = f1.value(xbar) + f2.value(xbar);
    let mut why = vec![];
    if !(prod < r.rho) {
        why.push(format!("product distance {prod} >= rho {}", r.rho));
    }
    if !(d(&r.xhat1, &r.xhat2) < 0.05) {
        why.push("coupling distance >= eta".into());
    }
    if !(coupled <= base) {
        why.push(format!("coupled value {coupled} > {base}"));
    }
    if !(r.slope <= 0.5) {
        why.push(format!("slope {}", r.slope));
    }
    if why.is_empty() {
        Ok(())
    } else {
        Err(why.join("; "))
    }
}

fn c8(s: &SampleScheme) -> Outcome {
    let mut bad = vec![];
    if let Err(e) = check_penalized(&parabola_linear(), &lower_half_plane(), &[0.0, 0.0], s) {
        bad.push(format!("parabola pair: {e}"));
    }
    if let Err(e) = check_penalized(&squared_norm(2), &FnOracle::constant(2, 0.0), &[0.0, 0.0], s) {
        bad.push(format!("quadratic: {e}"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for i in 0..20 {
        let c: Vec<f64> = (0..2).map(|_| rng.random_range(-1.0..1.0)).collect();
        let th: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        let a = vec![th.cos(), th.sin()];
        let b: f64 = rng.random_range(-0.5..0.5);
        let cc = c.clone();
        let f1 = FnOracle::new(2, "|x - c|^2", move |x| (x[0] - cc[0]).powi(2) + (x[1] - cc[1]).powi(2));
        let h = SetOracle::halfspace(a.clone(), b);
        let f2 = FnOracle::indicator(&h);
        let over = (a[0] * c[0] + a[1] * c[1] - b).max(0.0) + 1e-12;
        let xbar = vec![c[0] - over * a[0], c[1] - over * a[1]];
        if let Err(e) = check_penalized(&f1, &f2, &xbar, s) {
            bad.push(format!("instance {i}: {e}"));
        }
    }
    ok(bad.is_empty(), format!("2 gallery minima and 20 random instances {bad:?}"))
}

fn violations(rep: &DecouplingReport, tol: f64) -> Vec<String> {
    rep.invariant_slacks().into_iter().filter(|(_, s)| *s < -tol).map(|(n, s)| format!("{n} by {:.3e}", -s)).collect()
}

fn c9(s: &SampleScheme) -> Outcome {
    let mut bad = vec![];
    let (p1, p2) = pole_pair(1.0);
    let (m1, m2) = mirrored_reciprocals();
    let pairs: Vec<(&str, FnOracle, FnOracle, Region)> = vec![
        ("parabola", parabola_linear(), lower_half_plane(), ball(&[0.0, 0.0], 0.5)),
        ("step", step(), FnOracle::constant(1, 0.0), Region::boxed(vec![0.0], vec![1.0]).unwrap()),
        ("pole", p1, p2, ball(&[0.0], 1.0)),
        ("mirrored", m1, m2, ball(&[0.0, 0.0], 1.0)),
        ("quadratic", squared_norm(2), lower_half_plane(), ball(&[0.0, 0.0], 0.5)),
    ];
    for (name, f1, f2, u) in &pairs {
        let rep = full_report(f1, f2, u, s, s.trace_tol).unwrap();
        for v in violations(&rep, SAMPLED) {
            bad.push(format!("{name}: {v}"));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let light = s.clone().with_levels(6);
    for i in 0..50 {
        let mk = |rng: &mut ChaCha8Rng| {
            let k: f64 = rng.random_range(-0.8..0.8);
            let p: [f64; 6] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
            let (a1, a2) = (p[0].abs() * 2.0, p[3].abs() * 2.0);
            FnOracle::new(1, "piecewise quadratic", move |x| {
                let t = x[0];
                if t <= k {
                    a1 * (t - p[1]).powi(2) + p[2]
                } else {
                    a2 * (t - p[4]).powi(2) + p[5]
                }
            })
        };
        let (f1, f2) = (mk(&mut rng), mk(&mut rng));
        let rep = full_report(&f1, &f2, &ball(&[0.0], 1.0), &light, light.trace_tol).unwrap();
        for v in violations(&rep, SAMPLED) {
            bad.push(format!("random {i}: {v}"));
        }
    }
    ok(bad.is_empty(), format!("ordering chain and gap inequalities on 5 gallery pairs and 50 random pairs {bad:?}"))
}

fn brute_force_oc(w: &[f64], xa: &[f64], xb: &[f64], q: &QuadraticTarget) -> f64 {
    let m = w.len();
    let cost = |i: usize, v: f64| 0.5 * w[i] * (q.sigma * (v - q.z[i]).powi(2) + q.sigma0 * v * v);
    (0..1u32 << m)
        .map(|pat| {
            (0..m)
                .map(|i| {
                    if pat >> i & 1 == 1 {
                        let v = (q.sigma * q.z[i] / (q.sigma + q.sigma0)).clamp(xa[i], xb[i]);
                        cost(i, v) + if v != 0.0 { w[i] } else { 0.0 }
                    } else {
                        cost(i, 0.0)
                    }
                })
                .sum::<f64>()
        })
        .fold(f64::INFINITY, f64::min)
}

/// Nearest point of [a, b] to x by ternary search on the squared distance.
fn ternary_nearest(x: f64, a: f64, b: f64) -> f64 {
    let (mut lo, mut hi) = (a, b);
    for _ in 0..200 {
        let m1 = lo + (hi - lo) / 3.0;
        let m2 = hi - (hi - lo) / 3.0;
        if (m1 - x).powi(2) <= (m2 - x).powi(2) {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    (lo + hi) / 2.0
}

fn c10() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut bad = vec![];
    let mut worst = 0.0f64;
    for i in 0..200 {
        let m = rng.random_range(1..=12usize);
        let w: Vec<f64> = (0..m).map(|_| rng.random_range(0.01..1.0)).collect();
        let xa: Vec<f64> = (0..m).map(|_| -rng.random_range(0.1..2.0)).collect();
        let xb: Vec<f64> = (0..m).map(|_| rng.random_range(0.1..2.0)).collect();
        let q = QuadraticTarget {
            sigma: rng.random_range(0.1..5.0),
            sigma0: if rng.random_bool(0.3) { 0.0 } else { rng.random_range(0.0..1.0) },
            z: (0..m).map(|_| rng.random_range(-3.0..3.0)).collect(),
        };
        let prob = OCProblem::quadratic(CellSpace::new(w.clone()).unwrap(), xa.clone(), xb.clone(), q.clone()).unwrap();
        let sol = solve_sparse_oc(&prob).unwrap();
        let best = brute_force_oc(&w, &xa, &xb, &q);
        let err = (sol.objective - best).abs();
        worst = worst.max(err);
        if err > 1e-10 {
            bad.push(format!("instance {i}: objective {} vs {best}", sol.objective));
        }
        if !sharp_stationarity_check(&prob, &sol.xopt, 1e-9).unwrap().is_holds() {
            bad.push(format!("instance {i}: sharp conditions"));
        }
        let (x1s, x2s) = stationary_duals(&prob, &sol.xopt);
        if !approx_stationarity_check(&prob, &sol.xopt, &sol.xopt, &x1s, &x2s, 1e-6, Some(&sol.xopt)).unwrap().is_holds() {
            bad.push(format!("instance {i}: approximate system"));
        }
        let x: Vec<f64> = (0..m).map(|_| rng.random_range(-4.0..4.0)).collect();
        let p = project_box(&x, &xa, &xb).unwrap();
        for k in 0..m {
            let e = (p[k] - ternary_nearest(x[k], xa[k], xb[k])).abs();
            if e > 1e-10 {
                bad.push(format!("instance {i}: projection cell {k} off by {e:.2e}"));
            }
        }
    }
    ok(bad.is_empty(), format!("200 instances, worst objective gap {worst:.2e} {bad:?}"))
}

fn c11(s: &SampleScheme) -> Outcome {
    let (p1, p2) = pole_pair(1.0);
    let (m1, m2) = mirrored_reciprocals();
    let pairs: Vec<(&str, FnOracle, FnOracle, Region)> = vec![
        ("parabola", parabola_linear(), lower_half_plane(), ball(&[0.0, 0.0], 0.5)),
        ("step", step(), FnOracle::constant(1, 0.0), Region::boxed(vec![0.0], vec![1.0]).unwrap()),
        ("pole", p1, p2, ball(&[0.0], 1.0)),
        ("mirrored", m1, m2, ball(&[0.0, 0.0], 1.0)),
        ("quadratic", squared_norm(2), lower_half_plane(), ball(&[0.0, 0.0], 0.5)),
    ];
    let mut certified = vec![];
    let mut flipped = vec![];
    for (name, f1, f2, u) in &pairs {
        for p in [LscProperty::FirmUniform, LscProperty::FirmQuasiuniform] {
            if certify(f1, f2, u, p, s).unwrap().status() != Status::Holds {
                continue;
            }
            certified.push(format!("{name} {p}"));
            let after = certify(f1, &f2.plus_norm(0.5), u, p, s).unwrap().status();
            if after == Status::Fails {
                flipped.push(format!("{name} {p}"));
            }
        }
    }
    ok(!certified.is_empty() && flipped.is_empty(), format!("certified {certified:?}, flipped to FAILS {flipped:?}"))
}

fn main() {
    let s = SampleScheme::default();
    let criteria: Vec<(u32, Box<dyn Fn() -> Outcome>)> = vec![
        (1, Box::new(|| c1(&s))),
        (2, Box::new(|| c2(&s))),
        (3, Box::new(|| c3(&s))),
        (4, Box::new(|| c4(&s))),
        (5, Box::new(|| c5(&s))),
        (6, Box::new(|| c6(&s))),
        (7, Box::new(c7)),
        (8, Box::new(|| c8(&s))),
        (9, Box::new(|| c9(&s))),
        (10, Box::new(c10)),
        (11, Box::new(|| c11(&s))),
    ];
    let only: Option<u32> = std::env::args().skip(1).find_map(|a| a.parse().ok());
    let mut unexpected = vec![];
    for (id, run) in &criteria {
        if only.is_some_and(|o| o != *id) {
            continue;
        }
        let t = Instant::now();
        let o = run();
        let tag = match (o.pass, KNOWN_RED.contains(id)) {
            (true, _) => "PASS",
            (false, true) => "FAIL (known)",
            (false, false) => "FAIL",
        };
        println!("criterion {id:>2}: {tag} [{:.1}s] {}", t.elapsed().as_secs_f64(), o.detail);
        if !o.pass && !KNOWN_RED.contains(id) {
            unexpected.push(*id);
        }
    }
    if !unexpected.is_empty() {
        eprintln!("unexpected failures: {unexpected:?}");
        std::process::exit(1);
    }
}
