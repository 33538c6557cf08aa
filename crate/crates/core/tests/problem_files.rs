use std::path::PathBuf;

use declab::problem::Problem;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn problems_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../problems")
}

const MIXED: &str = "\
dim = 2
[params]
a = 0.75
k = -2
[set]
H = halfspace((1, -1), 0.5)
B = box((-1, -1), (1, 0.5))
L = line((0, 0), (1, 2))
S = union(H, B)
[function]
g = sqrt(abs(x*y)) + exp(-x^2) * cos(3*y) - log(1 + y^2) + min(x, y) * max(a, sin(x))
h = norm(x, y) / 3 + k*x if x >= 0 and y < x^2 else 1/(x - y) if x < y else inf
c = indicator(S)
[region]
U = closed_ball((0, 0), 1.5)
";

fn assert_same_values(src: &str, name: &str) {
    let p = Problem::parse(src).unwrap_or_else(|e| panic!("{name}: {e}"));
    let text = p.to_text();
    let q = Problem::parse(&text).unwrap_or_else(|e| panic!("{name} reprinted: {e}\n{text}"));
    assert_eq!(p, q, "{name}");
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for f in p.function_names() {
        let (a, b) = (p.function(f).unwrap(), q.function(f).unwrap());
        for _ in 0..1000 {
            let x: Vec<f64> = (0..p.dim).map(|_| rng.random_range(-2.0..2.0)).collect();
            let (u, v) = (a.value(&x), b.value(&x));
            assert!(u.to_bits() == v.to_bits() || (u.is_nan() && v.is_nan()), "{name}/{f} at {x:?}: {u} vs {v}");
        }
    }
}

#[test]
fn shipped_problems_round_trip_exactly() {
    let mut seen = 0;
    for entry in std::fs::read_dir(problems_dir()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "prob") {
            assert_same_values(&std::fs::read_to_string(&path).unwrap(), &path.display().to_string());
            seen += 1;
        }
    }
    assert!(seen >= 4);
}

#[test]
fn mixed_expressions_round_trip_exactly() {
    assert_same_values(MIXED, "mixed");
}
