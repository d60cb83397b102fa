//! Saturates a chart to the next level and reports the containment numbers.
use fthyp::cocycle::DEFAULT_TAU;
use fthyp::dynamics::{make_system, SystemSpec};
use fthyp::rectangles::{build_chart, saturate, SaturateOptions};
use fthyp::Point2;

fn main() -> fthyp::Result<()> {
    let sys = make_system(&SystemSpec::perturbed_cat(0.01))?;
    let mut chart = build_chart(&sys, Point2::new(0.3, 0.6), 6, 0.002, 2e-4, 16, DEFAULT_TAU)?;
    chart.k_tol = 0.01;
    let s = saturate(&sys, &chart, &SaturateOptions::default())?;
    let r = &s.report;
    println!("level {} -> {}", chart.n, r.n);
    println!("containment margin {:.3e} (allowed {:.3e})", r.containment_margin, r.allowed_margin);
    println!("covers middle third: {}", r.covers_middle_third);
    println!("length ratios e {:.4} f {:.4}", r.length_ratio_e, r.length_ratio_f);
    println!("chart change norms {:.4} / {:.4}", r.chart_change_norm, r.inverse_change_norm);
    Ok(())
}
