//! Entropy headline numbers: h_top estimate, R estimate and their combination.
use fthyp::dynamics::{make_system, SystemSpec};
use fthyp::entropy::{sex_bound_report, SexProbe};

fn main() -> fthyp::Result<()> {
    for (name, spec) in [("cat", SystemSpec::cat()), ("perturbed 0.01", SystemSpec::perturbed_cat(0.01)), ("identity", SystemSpec::identity())] {
        let sys = make_system(&spec)?;
        let r = sex_bound_report(&sys, &SexProbe { grid_res: 128, n: 10, ..SexProbe::default() })?;
        println!("{name:<15} h_top {:.4}  R {:.4}  bound {:.4}", r.h_top_estimate, r.r_estimate, r.sex_bound);
    }
    Ok(())
}
