//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit on any failure.

use fthyp::cli::CoverRunParams;
use fthyp::cocycle::{
    finite_time_fields, gl3_counterexample, holangle_series, lyapunov_qr, norm_identity_suite, norm_product_defect,
    NormKind, SquareMatrix, DEFAULT_TAU,
};
use fthyp::cover::{build_cover, verify_cover};
use fthyp::dynamics::{make_system, SurfaceSystem, SystemSpec};
use fthyp::entropy::{full_space_rate, newhouse_estimate, power_inclusion_check, sex_bound_report, SexProbe};
use fthyp::hypersets::counting_suite;
use fthyp::rectangles::{build_chart, check_predicates, check_regularity, saturate, SaturateOptions, DEFAULT_GRID};
use fthyp::{Point2, Result, Vec2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::process::ExitCode;
use std::time::{Duration, Instant};

struct Outcome {
    pass: bool,
    detail: String,
}

fn ok(pass: bool, detail: String) -> Result<Outcome> {
    Ok(Outcome { pass, detail })
}

fn log_lambda() -> f64 {
    ((3.0 + 5f64.sqrt()) / 2.0).ln()
}

fn cat() -> SurfaceSystem {
    make_system(&SystemSpec::cat()).unwrap()
}

fn perturbed(delta: f64) -> SurfaceSystem {
    make_system(&SystemSpec::perturbed_cat(delta)).unwrap()
}

fn norm_identity() -> Result<Outcome> {
    let s = norm_identity_suite(10_000, 1e6, 0, 1e-9)?;
    ok(s.violations == 0, format!("{} pairs, max rel error {:.2e}, {} violations", s.pairs, s.max_rel_error, s.violations))
}

fn gl3() -> Result<Outcome> {
    let x = 1e3;
    let (a, b) = gl3_counterexample(x);
    let asym = (a * b).norm() / (6f64.sqrt() * x);
    let d = norm_product_defect(&SquareMatrix::Three(a), &SquareMatrix::Three(b), NormKind::Frobenius)?;
    let ratio = d.lhs.max(d.rhs) / d.lhs.min(d.rhs);
    ok((0.99..=1.01).contains(&asym) && ratio >= 100.0, format!("|AB|_F/(sqrt6 x) = {asym:.6}, ratio gap {ratio:.1}"))
}

fn cat_lyapunov() -> Result<Outcome> {
    let e = lyapunov_qr(&cat(), Point2::new(0.3, 0.6), 100)?;
    let err = (e.chi_plus - log_lambda()).abs();
    let sum = (e.chi_plus + e.chi_minus).abs();
    ok(err <= 1e-8 && sum <= 1e-8, format!("chi+ = {:.12}, |error| {err:.2e}, |chi+ + chi-| {sum:.2e}", e.chi_plus))
}

fn cat_fields() -> Result<Outcome> {
    let phi = (1.0 + 5f64.sqrt()) / 2.0;
    let stable = Vec2::new(1.0, -phi) * (1.0 / (1.0 + phi * phi).sqrt());
    let mut worst = 0.0f64;
    for x in [Point2::new(0.3, 0.6), Point2::new(0.1, 0.9), Point2::new(0.77, 0.05)] {
        let f = finite_time_fields(&cat(), x, 40, DEFAULT_TAU)?;
        let e = f.e_n;
        let angle = (e.x * stable.y - e.y * stable.x).abs().asin();
        worst = worst.max(angle);
    }
    ok(worst <= 1e-9, format!("max angle to stable eigendirection {worst:.2e} rad"))
}

fn counting() -> Result<Outcome> {
    let c = counting_suite(24)?;
    ok(
        c.mismatches == 0 && c.bound_violations == 0,
        format!("{} (n, S) rows, {} mismatches, {} bound violations", c.rows.len(), c.mismatches, c.bound_violations),
    )
}

fn holangle() -> Result<Outcome> {
    let sys = perturbed(0.01);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let (mut checks, mut bad) = (0, 0);
    for _ in 0..100 {
        let x = Point2::new(rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0));
        for r in holangle_series(&sys, x, 5..=20, DEFAULT_TAU)? {
            checks += 1;
            if !r.ok {
                bad += 1;
            }
        }
    }
    ok(bad == 0, format!("{checks} checks, {bad} violations"))
}

fn rectangles() -> Result<Outcome> {
    let sys = perturbed(0.01);
    let limit = 1.01f64.powi(3);
    let (mut passing, mut worst) = (0, 1.0f64);
    for x in [Point2::new(0.3, 0.6), Point2::new(0.71, 0.44), Point2::new(0.55, 0.25), Point2::new(0.12, 0.83)] {
        let mut c = build_chart(&sys, x, 6, 0.002, 2e-4, DEFAULT_GRID, DEFAULT_TAU)?;
        c.k_tol = 0.01;
        if !check_predicates(&sys, &c, &[6])?.all_pass() {
            continue;
        }
        passing += 1;
        worst = worst.max(check_regularity(&sys, &c)?.worst());
    }
    let cat = cat();
    let mut cat_dev = 0.0f64;
    for x in [Point2::new(0.55, 0.25), Point2::new(0.3, 0.6)] {
        let c = build_chart(&cat, x, 6, 0.002, 2e-4, DEFAULT_GRID, DEFAULT_TAU)?;
        for (_, f) in check_regularity(&cat, &c)?.factors() {
            cat_dev = cat_dev.max((f.value - 1.0).abs());
        }
    }
    ok(
        passing > 0 && worst <= limit && cat_dev <= 1e-12,
        format!("{passing} perturbed charts pass H/F/G, worst factor {worst:.6} (limit {limit:.6}); cat |factor - 1| {cat_dev:.1e}"),
    )
}

fn saturation() -> Result<Outcome> {
    let sys = perturbed(0.01);
    let (mut margin, mut ratio) = (0.0f64, 1.0f64);
    for x in [Point2::new(0.71, 0.44), Point2::new(0.3, 0.6)] {
        let c = build_chart(&sys, x, 8, 0.005, 5e-6, DEFAULT_GRID, DEFAULT_TAU)?;
        let r = saturate(&sys, &c, &SaturateOptions::default())?.report;
        margin = margin.max(r.containment_margin);
        ratio = ratio.max(r.length_ratio_e).max(r.length_ratio_f);
    }
    ok(margin <= 0.02 && ratio <= 1.02, format!("containment overhang {margin:.2e} (<= 0.02), length ratio {ratio:.6} (<= 1.02)"))
}

fn entropy() -> Result<Outcome> {
    let cat = cat();
    let full = full_space_rate(&cat, 256, 12, 0.05)?;
    let rel = (full.rate - log_lambda()).abs() / log_lambda();
    let x = Point2::new(0.3, 0.6);
    let local = newhouse_estimate(&cat, x, 0.01, 0.002, &[14], 1024)?[0];
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let sample: Vec<Point2> = (0..10_000).map(|_| x + Vec2::new(rng.gen_range(-0.01..0.01), rng.gen_range(-0.01..0.01))).collect();
    let pi = power_inclusion_check(&cat, x, 3, 2, 0.01, &sample)?;
    ok(
        rel <= 0.15 && local.rate <= 0.05 && pi.violations == 0,
        format!(
            "full-space rate {:.4} (rel err {:.3}); local rate at eps 0.01, n {} = {:.4} (<= 0.05); power inclusion {} violations",
            full.rate, rel, local.n, local.rate, pi.violations
        ),
    )
}

fn cover() -> Result<Outcome> {
    let cat = cat();
    let x = Point2::new(0.3, 0.6);
    let rp = CoverRunParams { x, n_final: 12, ..CoverRunParams::default() };
    let p = rp.resolve(&cat)?;
    let f = build_cover(&cat, x, 12, &p)?;
    let mut affine = 0.0f64;
    for c in &f.charts {
        let d0 = c.chart.derivative(0.5, 0.5);
        for (t, s) in [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (1.0, 1.0), (0.25, 0.75)] {
            let d = c.chart.derivative(t, s);
            let dev = ((d.col1() - d0.col1()).norm() / d0.col1().norm()).max((d.col2() - d0.col2()).norm() / d0.col2().norm());
            affine = affine.max(dev);
        }
    }
    let v = verify_cover(&cat, &f, x, &p, 512 * 512)?;
    let cat_ok = affine <= 1e-9 && v.coverage_fraction == 1.0 && v.contraction_violations == 0 && v.log_count <= v.bound_vii;

    let sys = perturbed(0.005);
    let y = Point2::new(0.71, 0.44);
    let rp = CoverRunParams { x: y, n_final: 10, ..CoverRunParams::default() };
    let q = rp.resolve(&sys)?;
    let g = build_cover(&sys, y, 10, &q)?;
    let w = verify_cover(&sys, &g, y, &q, 512 * 512)?;
    let pert_ok = w.coverage_fraction == 1.0 && w.contraction_violations == 0;
    ok(
        cat_ok && pert_ok,
        format!(
            "cat: {} charts, affine dev {affine:.1e}, coverage {}, contraction viol {}, log count {:.3} <= {:.3}; perturbed: {} charts, coverage {}, contraction viol {}",
            f.charts.len(),
            v.coverage_fraction,
            v.contraction_violations,
            v.log_count,
            v.bound_vii,
            g.charts.len(),
            w.coverage_fraction,
            w.contraction_violations
        ),
    )
}

fn headline() -> Result<Outcome> {
    let r = sex_bound_report(&cat(), &SexProbe::default())?;
    let l = log_lambda();
    let h_ok = (r.h_top_estimate - l).abs() <= 0.15 * l;
    let r_ok = (r.r_estimate - l).abs() <= 0.02 * l;
    // bound tolerance inherited from the two component tolerances
    let b_ok = (r.sex_bound - 3.0 * l).abs() <= 0.15 * l + 2.0 * 0.02 * l;
    ok(h_ok && r_ok && b_ok, format!("h_top {:.4}, R {:.4}, bound {:.4} (3 log lambda = {:.4})", r.h_top_estimate, r.r_estimate, r.sex_bound, 3.0 * l))
}

type Criterion = (u32, &'static str, u64, fn() -> Result<Outcome>);

fn main() -> ExitCode {
    let criteria: [Criterion; 11] = [
        (1, "2x2 norm identity", 5, norm_identity),
        (2, "3x3 counterexample", 1, gl3),
        (3, "cat-map Lyapunov", 1, cat_lyapunov),
        (4, "finite-time fields", 1, cat_fields),
        (5, "exact counting", 10, counting),
        (6, "angle bound", 30, holangle),
        (7, "rectangle calculus", 60, rectangles),
        (8, "saturation", 60, saturation),
        (9, "entropy machinery", 120, entropy),
        (10, "cover pipeline", 600, cover),
        (11, "headline bound report", 60, headline),
    ];
    let filter: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failures = 0;
    for (id, name, budget, f) in criteria {
        if !filter.is_empty() && !filter.contains(&id) {
            continue;
        }
        let t = Instant::now();
        let r = f();
        let dt = t.elapsed();
        let in_time = dt <= Duration::from_secs(budget);
        let (pass, detail) = match r {
            Ok(o) => (o.pass && in_time, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failures += 1;
        }
        let time_note = if in_time { String::new() } else { format!(", over {budget} s budget") };
        println!("{} {id:>2} {name}: {detail} [{:.2} s{time_note}]", if pass { "PASS" } else { "FAIL" }, dt.as_secs_f64());
    }
    println!("{failures} failing");
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
