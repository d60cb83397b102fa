use super::*;
use crate::dynamics::{make_system, SystemSpec};
use crate::rectangles::{build_chart, check_regularity};
use proptest::prelude::*;
use std::sync::OnceLock;

fn cat_params() -> CoverParams {
    CoverParams::new(HypParams::new(0.9624, -0.9624, 0.1, 1.1).unwrap())
}

fn cat() -> SurfaceSystem {
    make_system(&SystemSpec::cat()).unwrap()
}

fn lambda() -> f64 {
    (3.0 + 5f64.sqrt()) / 2.0
}

#[test]
fn subdivision_counts() {
    assert_eq!(subdivision_per_axis(1, 0.5), 6);
    assert_eq!(subdivision_per_axis(1, 1.0), 3);
    assert_eq!(subdivision_per_axis(1, 0.1), 28);
    let s = cat();
    let c = build_chart(&s, Point2::new(0.2, 0.3), 4, 0.01, 0.002, 8, DEFAULT_TAU).unwrap();
    assert_eq!(subdivide(&c, 1, 0.5, 10_000).unwrap().len(), 36);
    assert_eq!(subdivide(&c, 1, 1.0, 10_000).unwrap().len(), 9);
    assert!(matches!(subdivide(&c, 1, 0.5, 35), Err(Error::SizeCap(_))));
}

#[test]
fn cat_subdivision_tiles_middle_ninth() {
    let s = cat();
    let c = build_chart(&s, Point2::new(0.2, 0.3), 4, 0.01, 0.002, 8, DEFAULT_TAU).unwrap();
    let m = 6;
    let subs = subdivide(&c, 1, 0.5, 10_000).unwrap();
    let scale = 0.01;
    for b in 0..m {
        for a in 0..m {
            let sub = &subs[b * m + a];
            for (u, v) in [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (1.0, 1.0)] {
                let t = 4.0 / 9.0 + (a as f64 + u) / (9.0 * m as f64);
                let w = 4.0 / 9.0 + (b as f64 + v) / (9.0 * m as f64);
                let corner = sub.eval(4.0 / 9.0 + u / 9.0, 4.0 / 9.0 + v / 9.0);
                assert!((corner - c.eval(t, w)).norm() < 1e-12 * scale);
            }
            // affine: derivative is the parent's scaled by 1/m
            let d = sub.derivative(0.3, 0.8);
            let dp = c.derivative(0.5, 0.5);
            assert!((d.col1() * m as f64 - dp.col1()).norm() < 1e-9 * dp.col1().norm());
            assert!((d.col2() * m as f64 - dp.col2()).norm() < 1e-9 * dp.col2().norm());
        }
    }
}

fn strip_chart(extent: f64) -> (SurfaceSystem, Point2, AdmissibleChart) {
    let s = cat();
    let x = Point2::new(0.37, 0.52);
    let n = 3;
    let l_f = extent * 0.01 / lambda().powi(n as i32);
    let c = build_chart(&s, x, n, l_f, l_f, 8, DEFAULT_TAU).unwrap();
    (s, x, c)
}

#[test]
fn cut_strip_of_extent_four() {
    let (s, x, c) = strip_chart(4.0);
    let CutOutcome::Kept { chart, record } = cut(&s, x, &c, 0.01, 0.1).unwrap() else { panic!("skipped") };
    assert!((record.b - record.a - 0.75).abs() < 1e-6, "{record:?}");
    assert!(record.image_length >= 0.5 * 0.9 && record.image_length <= 3.1, "{record:?}");
    assert!((record.image_length - 3.0).abs() < 1e-5);
    // length-3 images exceed 2 + 3K; the flag reports it rather than failing the cut
    assert!((record.image_norm - 3.0).abs() < 1e-4);
    assert!(!record.norm_within_slack);
    assert!(chart.l_f < c.l_f);
}

#[test]
fn cut_leaves_small_image_alone() {
    let (s, x, c) = strip_chart(2.0);
    let CutOutcome::Kept { record, .. } = cut(&s, x, &c, 0.01, 0.1).unwrap() else { panic!("skipped") };
    assert_eq!((record.a, record.b), (0.0, 1.0));
    assert!((record.image_length - 2.0).abs() < 1e-6);
}

#[test]
fn cut_skips_distant_chart() {
    let (s, x, c) = strip_chart(2.0);
    let far = Point2::new(x.x + 0.05, x.y);
    assert!(matches!(cut(&s, far, &c, 0.01, 0.1).unwrap(), CutOutcome::Skipped { .. }));
}

#[test]
fn identity_gives_empty_family() {
    let s = make_system(&SystemSpec::identity()).unwrap();
    let mut p = cat_params();
    p.sample_res = 64;
    let x = Point2::new(0.5, 0.5);
    let f = build_cover(&s, x, 10, &p).unwrap();
    assert!(f.charts.is_empty());
    assert_eq!(f.levels[0].targets, 0);
    let v = verify_cover(&s, &f, x, &p, 64 * 64).unwrap();
    assert_eq!(v.target_points, 0);
    assert_eq!(v.coverage_fraction, 1.0);
    assert_eq!(v.contraction_violations, 0);
}

#[test]
fn cat_targets_shrink_by_lambda() {
    let s = cat();
    let p = cat_params();
    let t = sample_targets(&s, Point2::new(0.3, 0.6), &p.hyp, 0.01, 512, 12).unwrap();
    let counts: Vec<usize> = (8..=12).map(|m| t.count(m)).collect();
    assert_eq!(counts, vec![121, 45, 17, 5, 1]);
    for w in counts.windows(2) {
        assert!(w[1] <= w[0]);
    }
}

fn small_cat_cover() -> &'static (SurfaceSystem, CoverParams, CoverFamily) {
    static F: OnceLock<(SurfaceSystem, CoverParams, CoverFamily)> = OnceLock::new();
    F.get_or_init(|| {
        let s = cat();
        let mut p = cat_params();
        p.sample_res = 256;
        let f = build_cover(&s, Point2::new(0.3, 0.6), 9, &p).unwrap();
        (s, p, f)
    })
}

#[test]
fn cat_cover_is_certified_and_affine() {
    let (s, p, f) = small_cat_cover();
    assert!(!f.charts.is_empty());
    assert!(f.k_seq.ks.iter().all(|&k| k == 1));
    for l in &f.levels[1..] {
        assert!(l.growth_factor <= l.growth_bound);
    }
    for c in &f.charts {
        let r = check_regularity(s, &c.chart).unwrap();
        for fac in [r.fiber_e, r.fiber_f, r.partial_e, r.partial_f, r.image_lengths] {
            assert!((fac.value - 1.0).abs() < 1e-6, "{r:?}");
        }
    }
    let v = verify_cover(s, f, Point2::new(0.3, 0.6), p, 256 * 256).unwrap();
    assert_eq!(v.coverage_fraction, 1.0);
    assert_eq!(v.contraction_violations, 0);
    assert!(v.cardinality_ok && v.conforming);
}

#[test]
fn deleting_a_chart_loses_coverage() {
    let (s, p, f) = small_cat_cover();
    let g = f.without(0);
    let v = verify_cover(s, &g, Point2::new(0.3, 0.6), p, 256 * 256).unwrap();
    assert!(v.coverage_fraction < 1.0);
    assert_eq!(g.stats.count, f.stats.count - 1);
}

#[test]
fn zero_defect_bound_reduces_to_linear_term() {
    let (s, _, f) = small_cat_cover();
    let chi = lambda().ln();
    let p = CoverParams::new(HypParams::new(chi, -chi, 0.1, 1.1).unwrap());
    let v = verify_cover(s, f, Point2::new(0.3, 0.6), &p, 64 * 64).unwrap();
    let expected = p.a_const * f.n as f64 + p.d_const;
    assert!((v.bound_iii - expected).abs() < 1e-9);
    let (_, p, f) = small_cat_cover();
    assert!(f.stats.bound_iii > expected);
    let vii = p.d_const + p.a_const * f.n as f64 + 2.0 * f.k_seq.sum() as f64;
    assert!((f.stats.bound_vii - vii).abs() < 1e-12);
}

#[test]
fn params_roundtrip() {
    let p = cat_params();
    let j = serde_json::to_string(&p).unwrap();
    assert!(j.contains("\"K_tol\"") && j.contains("\"D_const\""));
    let q: CoverParams = serde_json::from_str(&j).unwrap();
    assert_eq!(p, q);
    assert!((p.a_const - (20f64.ln() + 2.0 * (1.0 + std::f64::consts::E / 0.1).ln())).abs() < 1e-15);
}

fn perturbed_chart() -> &'static (SurfaceSystem, AdmissibleChart) {
    static C: OnceLock<(SurfaceSystem, AdmissibleChart)> = OnceLock::new();
    C.get_or_init(|| {
        let s = make_system(&SystemSpec::perturbed_cat(0.01)).unwrap();
        let c = build_chart(&s, Point2::new(0.3, 0.6), 6, 0.002, 2e-4, 8, DEFAULT_TAU).unwrap();
        (s, c)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn subchart_middle_ninths_cover_parent_middle_ninth(t in 4.0/9.0..5.0/9.0, u in 4.0/9.0..5.0/9.0, k in 1u64..3) {
        let (_, c) = perturbed_chart();
        let m = subdivision_per_axis(k, 1.0);
        let p = c.eval(t, u);
        let hit = subdivide(c, k, 1.0, 10_000).unwrap().iter().any(|sub| {
            sub.locate(p).map(|q| in_box(q, 4.0 / 9.0, 5.0 / 9.0, 1e-9)).unwrap_or(false)
        });
        prop_assert!(hit, "m = {m}");
    }

    #[test]
    fn survival_is_monotone_in_level(seed in 0u64..1000) {
        let s = cat();
        let x = Point2::new((seed as f64 * 0.618).fract(), (seed as f64 * 0.414).fract());
        let t = sample_targets(&s, x, &cat_params().hyp, 0.01, 32, 6).unwrap();
        for m in 1..6 {
            prop_assert!(t.count(m + 1) <= t.count(m));
        }
    }
}
