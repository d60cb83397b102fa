//! Property tests for the cross-module invariants.

use fthyp::cocycle::{hyperbolic_split, lyapunov_qr, norm_product_defect, NormKind, SquareMatrix, DEFAULT_TAU};
use fthyp::dynamics::{make_system, Direction, SurfaceSystem, SystemSpec};
use fthyp::entropy::{bowen_ball_member, is_separated, max_separated, power_inclusion_check, SeparationMethod};
use fthyp::hypersets::{membership, shannon_h, HypParams};
use fthyp::{Mat2, Point2, Vec2};
use proptest::prelude::*;

fn systems() -> Vec<SurfaceSystem> {
    [SystemSpec::cat(), SystemSpec::perturbed_cat(0.01), SystemSpec::perturbed_cat(0.05), SystemSpec::identity()]
        .iter()
        .map(|s| make_system(s).unwrap())
        .collect()
}

fn torus_point() -> impl Strategy<Value = Point2> {
    (0.0..1.0f64, 0.0..1.0f64).prop_map(|(x, y)| Point2::new(x, y))
}

fn small_matrix() -> impl Strategy<Value = Mat2> {
    (-10.0..10.0f64, -10.0..10.0f64, -10.0..10.0f64, -10.0..10.0f64)
        .prop_map(|(a, b, c, d)| Mat2::new(a, b, c, d))
        .prop_filter("condition <= 1e6", |m| m.sigma_min() > 0.0 && m.norm() / m.sigma_min() <= 1e6)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn forward_then_backward_is_identity(p in torus_point(), which in 0usize..3) {
        let sys = &systems()[which];
        let q = sys.step(sys.step(p, Direction::Forward).unwrap(), Direction::Backward).unwrap();
        prop_assert!(sys.distance(p, q) <= 1e-10);
    }

    #[test]
    fn jacobian_matches_finite_differences(p in torus_point(), which in 0usize..3) {
        let sys = &systems()[which];
        let h = 1e-6;
        let j = sys.jacobian(p);
        for (col, dir) in [(j.col1(), Vec2::new(h, 0.0)), (j.col2(), Vec2::new(0.0, h))] {
            let fd = (sys.forward_lift(p + dir) - sys.forward_lift(p - dir)) * (0.5 / h);
            prop_assert!((fd.x - col.x).abs() <= 1e-5 && (fd.y - col.y).abs() <= 1e-5, "{fd:?} vs {col:?}");
        }
    }

    #[test]
    fn derivative_bounds_dominate(p in torus_point(), which in 0usize..3) {
        let sys = &systems()[which];
        let b = sys.bounds();
        prop_assert!(sys.jacobian(p).norm() <= b.norm_dt * (1.0 + 1e-9));
        prop_assert!(sys.jacobian_inv(p).unwrap().norm() <= b.norm_dt_inv * (1.0 + 1e-9));
    }

    #[test]
    fn split_minimizes_over_directions(m in small_matrix()) {
        let s = hyperbolic_split(&m, DEFAULT_TAU);
        prop_assume!(s.is_ok());
        let s = s.unwrap();
        let at_e = m.apply(s.e).norm();
        let brute = (0..3600)
            .map(|i| (i as f64 * 0.1).to_radians())
            .map(|t| m.apply(Vec2::new(t.cos(), t.sin())).norm())
            .fold(f64::INFINITY, f64::min);
        prop_assert!(at_e <= brute * (1.0 + 1e-12));
        // sampling resolution: half a 0.1° step in angle
        let res = (0.05f64.to_radians()).sin() * s.sigma_max;
        prop_assert!(brute - at_e <= res + 1e-12 * s.sigma_max);
    }

    #[test]
    fn two_by_two_defects_agree(a in small_matrix(), b in small_matrix()) {
        let d = norm_product_defect(&SquareMatrix::Two(a), &SquareMatrix::Two(b), NormKind::Operator).unwrap();
        prop_assert!((d.lhs - d.rhs).abs() <= 1e-9 * d.lhs.max(d.rhs));
    }

    #[test]
    fn exponents_sum_to_mean_log_det(p in torus_point(), delta in 0.0..0.1f64) {
        let sys = make_system(&SystemSpec::perturbed_cat(delta)).unwrap();
        let e = lyapunov_qr(&sys, p, 200).unwrap();
        let mut q = p;
        let mut sum = 0.0;
        for _ in 0..200 {
            sum += sys.jacobian(q).det().abs().ln();
            q = sys.step(q, Direction::Forward).unwrap();
        }
        prop_assert!((e.chi_plus + e.chi_minus - sum / 200.0).abs() <= 1e-8);
    }

    #[test]
    fn membership_is_monotone_in_c(p in torus_point(), extra in 0.0..2.0f64) {
        let sys = make_system(&SystemSpec::perturbed_cat(0.01)).unwrap();
        let hp = HypParams::new(0.95, -0.95, 0.1, 1.1).unwrap();
        let hq = HypParams::new(0.95, -0.95, 0.1, 1.1 + extra).unwrap();
        let a = membership(&sys, p, 8, &hp).unwrap();
        let b = membership(&sys, p, 8, &hq).unwrap();
        prop_assert!(!a.member || b.member);
        for (x, y) in a.margins.iter().zip(&b.margins) {
            prop_assert!(y.min() >= x.min() - 1e-12);
        }
    }

    #[test]
    fn entropy_function_symmetry(t in 1.0001..50.0f64) {
        let h = shannon_h(t).unwrap();
        prop_assert!((h - shannon_h(t / (t - 1.0)).unwrap()).abs() <= 1e-12);
        prop_assert!(h <= shannon_h(2.0).unwrap() + 1e-15);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn bowen_balls_are_nested(x in torus_point(), dx in -0.01..0.01f64, dy in -0.01..0.01f64, n in 1usize..12, which in 0usize..4) {
        let sys = &systems()[which];
        let y = sys.canonical(x + Vec2::new(dx, dy));
        prop_assert!(!bowen_ball_member(sys, x, y, n + 1, 0.01) || bowen_ball_member(sys, x, y, n, 0.01));
    }

    #[test]
    fn greedy_is_within_a_factor_two_of_exact(
        pts in prop::collection::vec((0.0..0.2f64, 0.0..0.2f64), 2..=20),
        n in 1usize..4,
        delta in 0.02..0.1f64,
        which in 0usize..3,
    ) {
        let sys = &systems()[which];
        let c: Vec<Point2> = pts.iter().map(|&(a, b)| Point2::new(0.3 + a, 0.4 + b)).collect();
        let g = max_separated(sys, &c, n, delta, SeparationMethod::Greedy).unwrap();
        let e = max_separated(sys, &c, n, delta, SeparationMethod::ExactSmall).unwrap();
        prop_assert!(g.count <= e.count);
        prop_assert!(2 * g.count >= e.count, "greedy {} exact {}", g.count, e.count);
        prop_assert!(is_separated(sys, &g.points, n, delta));
        prop_assert!(is_separated(sys, &e.points, n, delta));
    }

    #[test]
    fn separated_count_is_monotone(
        pts in prop::collection::vec((0.0..0.2f64, 0.0..0.2f64), 2..=16),
        n in 1usize..4,
        delta in 0.02..0.1f64,
    ) {
        let sys = &systems()[1];
        let c: Vec<Point2> = pts.iter().map(|&(a, b)| Point2::new(0.3 + a, 0.4 + b)).collect();
        let count = |n, d| max_separated(sys, &c, n, d, SeparationMethod::ExactSmall).unwrap().count;
        prop_assert!(count(n, 1.5 * delta) <= count(n, delta));
        prop_assert!(count(n + 1, delta) >= count(n, delta));
    }

    #[test]
    fn power_inclusion_has_no_violations(x in torus_point(), n in 1usize..5, k in 1usize..4, which in 0usize..4) {
        let sys = &systems()[which];
        let sample: Vec<Point2> = (0..400).map(|i| x + Vec2::new((i % 20) as f64 * 1e-3 - 0.01, (i / 20) as f64 * 1e-3 - 0.01)).collect();
        let r = power_inclusion_check(sys, x, n, k, 0.01, &sample).unwrap();
        prop_assert_eq!(r.violations, 0);
    }
}
