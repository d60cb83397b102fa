//! Builds an admissible chart and runs the predicate and regularity checks.
use fthyp::cocycle::DEFAULT_TAU;
use fthyp::dynamics::{make_system, SystemSpec};
use fthyp::rectangles::{build_chart, check_predicates, check_regularity, tangent_alignment};
use fthyp::Point2;

fn main() -> fthyp::Result<()> {
    let sys = make_system(&SystemSpec::perturbed_cat(0.01))?;
    let mut chart = build_chart(&sys, Point2::new(0.3, 0.6), 6, 0.002, 2e-4, 16, DEFAULT_TAU)?;
    chart.k_tol = 0.01;
    println!("commutation defect {:.2e}", chart.commutation_defect);
    let p = check_predicates(&sys, &chart, &[6])?;
    println!("H_n {}  F_n {}  G_n {}", p.h.pass, p.f.pass, p.g.pass);
    let r = check_regularity(&sys, &chart)?;
    for (name, f) in r.factors() {
        println!("  {name:<18} {:.6}  {}", f.value, if f.pass { "pass" } else { "FAIL" });
    }
    let (ae, af) = tangent_alignment(&sys, &chart)?;
    println!("alignment with fields: {ae:.2e}, {af:.2e} rad");
    Ok(())
}
