use declab::decoupling::diamond;
use declab::ekeland::ekeland_on_cloud;
use declab::gallery::{lower_half_plane, parabola_linear, step};
use declab::geometry::{dist, dot};
use declab::multiplier::{multiplier_search, reverify, FuzzyOutcome};
use declab::semicontinuity::{certify, certify_pair_of_sets, subtransversality_modulus, Firmness, LscProperty};
use declab::sparse_control::{project_box, support_measure, CellSpace};
use declab::subdifferential::{box_normal_cone, coderivative_smooth, finite_difference_jacobian, is_subgradient, SubgradientQuery};
use declab::*;
use proptest::prelude::*;

fn ext() -> impl Strategy<Value = ExtReal> {
    prop_oneof![
        Just(ExtReal::PosInf),
        Just(ExtReal::NegInf),
        (-1e6f64..1e6).prop_map(ExtReal::Finite),
    ]
}

fn pt(d: usize, r: f64) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-r..r, d)
}

fn sets() -> Vec<(&'static str, SetOracle)> {
    vec![
        ("halfspace", SetOracle::halfspace(vec![0.6, -0.8], 0.3)),
        ("ball", SetOracle::ball(vec![0.2, -0.1], 0.7)),
        ("box", SetOracle::boxed(vec![-0.5, -1.0], vec![0.5, 0.25])),
        ("parabola", SetOracle::parabola_epigraph(1.0)),
        ("line", SetOracle::line(vec![0.0, 0.5], vec![1.0, 2.0])),
    ]
}

proptest! {
    #[test]
    fn extreal_sum_commutes_and_rejects_opposite_infinities(a in ext(), b in ext()) {
        let ab = a.checked_add(b);
        let ba = b.checked_add(a);
        prop_assert_eq!(ab.is_ok(), ba.is_ok());
        let opposite = matches!((a, b), (ExtReal::PosInf, ExtReal::NegInf) | (ExtReal::NegInf, ExtReal::PosInf));
        prop_assert_eq!(ab.is_err(), opposite);
        if let (Ok(x), Ok(y)) = (ab, ba) {
            prop_assert_eq!(x, y);
        }
        prop_assert!(a.min(b) <= a.max(b));
        prop_assert_eq!(a.min(b), if a <= b { a } else { b });
        prop_assert_eq!(-(-a), a);
    }

    #[test]
    fn sampling_is_deterministic_and_stays_in_region(seed in 0u64..1000, level in 0usize..3, r in 0.1f64..2.0) {
        for mode in [SampleMode::Grid, SampleMode::LowDiscrepancy] {
            let s = SampleScheme { mode, seed, ..SampleScheme::default() };
            let u = Region::open_ball(vec![0.3, -0.2], r).unwrap();
            let a = s.sample(&u, level).unwrap();
            prop_assert_eq!(&a, &s.sample(&u, level).unwrap());
            prop_assert!(a.iter().all(|p| u.contains(p)));
        }
    }

    #[test]
    fn interior_members_are_nested_and_keep_their_gap(r in 0.1f64..3.0, x in pt(2, 3.0), boxed in any::<bool>()) {
        let u = if boxed { Region::boxed(vec![-r, -1.0], vec![r, 2.0]).unwrap() } else { Region::open_ball(vec![0.0, 0.0], r).unwrap() };
        let fam = ei_family_for(&u, 8, None).unwrap();
        for (i, m) in fam.members.iter().enumerate() {
            if m.region.contains(&x) {
                prop_assert!(u.dist_to_complement(&x) >= m.gap * (1.0 - 1e-12));
                if let Some(next) = fam.members.get(i + 1) {
                    prop_assert!(next.region.contains(&x));
                }
            }
        }
    }

    #[test]
    fn set_distances_are_1_lipschitz_and_realized_by_projections(x in pt(2, 3.0), y in pt(2, 3.0)) {
        for (name, s) in sets() {
            let (dx, dy) = (s.dist(&x), s.dist(&y));
            prop_assert!((dx - dy).abs() <= dist(&x, &y) + 1e-9, "{}", name);
            if let Some(p) = s.project(&x) {
                prop_assert!(s.dist(&p) <= 1e-9, "{}", name);
                prop_assert!((dist(&x, &p) - dx).abs() <= 1e-9 * (1.0 + dx), "{}", name);
            }
        }
    }

    #[test]
    fn box_projection_is_idempotent_nonexpansive_and_sparsifying(x in pt(6, 4.0), y in pt(6, 4.0), w in prop::collection::vec(0.01f64..1.0, 6)) {
        let lo = [-1.0, -0.5, -2.0, -0.1, -1.0, -3.0];
        let hi = [1.0, 0.5, 0.3, 2.0, 0.1, 3.0];
        let (px, py) = (project_box(&x, &lo, &hi).unwrap(), project_box(&y, &lo, &hi).unwrap());
        prop_assert_eq!(&project_box(&px, &lo, &hi).unwrap(), &px);
        prop_assert!(dist(&px, &py) <= dist(&x, &y) + 1e-12);
        let space = CellSpace::new(w).unwrap();
        prop_assert!(support_measure(&space, &px) <= support_measure(&space, &x));
    }

    #[test]
    fn ekeland_never_increases_the_value(vals in prop::collection::vec(-5.0f64..5.0, 1..60), eps in 0.01f64..2.0, seed in 0u64..100) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let pts: Vec<Vec<f64>> = vals.iter().map(|_| vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]).collect();
        let b = seed as usize % pts.len();
        let r = ekeland_on_cloud(&pts, &vals, &pts[b], eps).unwrap();
        prop_assert!(r.value <= vals[b]);
        prop_assert!(r.descent_margin >= 0.0);
    }

    #[test]
    fn normal_cone_generators_of_a_box_are_normal(x in pt(3, 1.5)) {
        let (lo, hi) = ([-1.0, 0.0, -0.5], [1.0, 0.0, 0.5]);
        let xc: Vec<f64> = x.iter().zip(lo.iter().zip(&hi)).map(|(v, (l, h))| v.clamp(*l, *h)).collect();
        let cone = box_normal_cone(&lo, &hi, &xc, 1e-12).unwrap();
        for g in cone.generators() {
            for corner in 0..8 {
                let y: Vec<f64> = (0..3).map(|i| if corner >> i & 1 == 1 { hi[i] } else { lo[i] }).collect();
                let d: Vec<f64> = y.iter().zip(&xc).map(|(a, b)| a - b).collect();
                prop_assert!(dot(&g, &d) <= 1e-12);
            }
        }
    }

    #[test]
    fn coderivative_matches_finite_differences(x in pt(2, 1.0), ys in pt(2, 2.0), a in -2.0f64..2.0) {
        let f = SmoothMap::new(2, 2, "quadratic map", move |p| vec![p[0] * p[1] + a * p[0], p[0] * p[0] - p[1].sin()])
            .with_jacobian(move |p| Some(vec![vec![p[1] + a, p[0]], vec![2.0 * p[0], -p[1].cos()]]));
        let c = coderivative_smooth(&f, &x, &ys).unwrap();
        let j = finite_difference_jacobian(&f, &x, 1e-5);
        for k in 0..2 {
            let fd = j[0][k] * ys[0] + j[1][k] * ys[1];
            prop_assert!((c[k] - fd).abs() <= 1e-6, "{} vs {}", c[k], fd);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn tilting_shifts_subgradients(xs in pt(2, 2.0), v in pt(2, 1.0)) {
        let n = xs.iter().map(|t| t * t).sum::<f64>().sqrt();
        prop_assume!((n - 1.0).abs() > 0.1);
        let f = FnOracle::new(2, "|x|", |x| (x[0] * x[0] + x[1] * x[1]).sqrt());
        let g = f.tilt(&v);
        let x = [0.0, 0.0];
        prop_assert!((g.value(&[0.3, 0.4]) - (0.5 - 0.3 * v[0] - 0.4 * v[1])).abs() <= 1e-12);
        let plain = is_subgradient(&SubgradientQuery::new(&f, &x, &xs), 1e-9).unwrap().status;
        let shifted: Vec<f64> = xs.iter().zip(&v).map(|(a, b)| a - b).collect();
        let tilted = is_subgradient(&SubgradientQuery::new(&g, &x, &shifted), 1e-9).unwrap().status;
        prop_assert_eq!(plain, tilted);
        prop_assert_eq!(plain, if n < 1.0 { Status::Holds } else { Status::Fails });
    }

    #[test]
    fn diamond_is_nonnegative(x1 in 0.0f64..1.0, x2 in 0.0f64..1.0) {
        let u = Region::boxed(vec![0.0], vec![1.0]).unwrap();
        let s = SampleScheme::default().with_levels(4);
        let d = diamond(&step(), &FnOracle::constant(1, 0.0), &u, &[x1], &[x2], &s).unwrap();
        prop_assert!(d.value >= ExtReal::Finite(0.0));
        prop_assert!(d.value.to_f64() <= (x1 - x2).abs() + 1e-12);
    }

    #[test]
    fn fuzzy_witnesses_reverify(eps in 0.05f64..0.5, delta in 0.05f64..0.5, eta in 0.02f64..0.3) {
        let (f1, f2) = (parabola_linear(), lower_half_plane());
        let out = multiplier_search(&f1, &f2, &[0.0, 0.0], eps, delta, eta, &SampleScheme::default()).unwrap();
        if let FuzzyOutcome::Found(w) = out {
            prop_assert!(reverify(&w, &f1, &f2, &[0.0, 0.0]));
            prop_assert!(w.residual < w.bound);
        } else {
            prop_assert!(false, "no witness for eps {} delta {} eta {}", eps, delta, eta);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn firm_uniform_never_holds_where_quasiuniform_fails(p in prop::array::uniform6(-1.0f64..1.0), k in -0.5f64..0.5) {
        let f1 = FnOracle::new(1, "piecewise", move |x| if x[0] <= k { (p[0] * 2.0).abs() * (x[0] - p[1]).powi(2) } else { p[2] + x[0] });
        let f2 = FnOracle::new(1, "quadratic", move |x| p[3].abs() * (x[0] - p[4]).powi(2) + p[5]);
        let u = Region::open_ball(vec![0.0], 1.0).unwrap();
        let s = SampleScheme::default().with_levels(6);
        let fu = certify(&f1, &f2, &u, LscProperty::FirmUniform, &s).unwrap().status();
        let q = certify(&f1, &f2, &u, LscProperty::Quasiuniform, &s).unwrap().status();
        prop_assert!(!(fu == Status::Holds && q == Status::Fails));
    }

    #[test]
    fn transversal_line_pairs_are_certified(t in 0.3f64..2.8) {
        let l1 = SetOracle::line(vec![0.0, 0.0], vec![1.0, 0.0]);
        let l2 = SetOracle::line(vec![0.0, 0.0], vec![t.cos(), t.sin()]);
        let s = SampleScheme::default().with_levels(6);
        let m = subtransversality_modulus(&l1, &l2, &[0.0, 0.0], 0.5, &s).unwrap();
        prop_assume!(m.alpha.is_finite() && m.verdict.status == Status::Holds);
        let c = certify_pair_of_sets(&l1, &l2, &Region::open_ball(vec![0.0, 0.0], 0.5).unwrap(), Firmness::Uniform, &s).unwrap();
        prop_assert_eq!(c.status(), Status::Holds);
    }
}
