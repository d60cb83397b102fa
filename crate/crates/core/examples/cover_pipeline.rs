//! Builds a cover of a Bowen ball by admissible charts and verifies it.
use fthyp::cover::{build_cover, verify_cover, CoverParams};
use fthyp::dynamics::{make_system, SystemSpec};
use fthyp::hypersets::HypParams;
use fthyp::Point2;

fn main() -> fthyp::Result<()> {
    let sys = make_system(&SystemSpec::cat())?;
    let x = Point2::new(0.3, 0.6);
    let chi = ((3.0 + 5f64.sqrt()) / 2.0).ln();
    let mut p = CoverParams::new(HypParams::new(chi, -chi, 0.1, 1.1)?);
    p.sample_res = 256;
    let family = build_cover(&sys, x, 10, &p)?;
    println!(" n  targets  parents  saturated  count");
    for l in &family.levels {
        println!("{:>2}  {:>7}  {:>7}  {:>9}  {:>5}", l.n, l.targets, l.parents, l.saturated, l.count);
    }
    let v = verify_cover(&sys, &family, x, &p, 256 * 256)?;
    println!("coverage {:.4}, contraction violations {}", v.coverage_fraction, v.contraction_violations);
    println!("log count {:.4} <= bound {:.4}: {}", v.log_count, v.bound_vii, v.cardinality_ok);
    Ok(())
}
