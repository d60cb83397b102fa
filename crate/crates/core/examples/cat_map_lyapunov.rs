//! Lyapunov exponents of the cat map and a perturbed cat map.
use fthyp::cocycle::{lyapunov_qr, lyapunov_svd_endpoint};
use fthyp::dynamics::{make_system, SystemSpec};
use fthyp::Point2;

fn main() -> fthyp::Result<()> {
    let x = Point2::new(0.3, 0.6);
    let cat = make_system(&SystemSpec::cat())?;
    let qr = lyapunov_qr(&cat, x, 100)?;
    let svd = lyapunov_svd_endpoint(&cat, x, 30)?;
    let exact = ((3.0 + 5f64.sqrt()) / 2.0).ln();
    println!("cat       chi+ = {:.12}  (log lambda = {exact:.12})", qr.chi_plus);
    println!("cat svd   chi+ = {:.12} at n = 30", svd.chi_plus);
    for delta in [0.005, 0.01, 0.05] {
        let s = make_system(&SystemSpec::perturbed_cat(delta))?;
        let e = lyapunov_qr(&s, x, 2000)?;
        println!("delta {delta:<5}  chi+ = {:.6}  chi- = {:.6}", e.chi_plus, e.chi_minus);
    }
    Ok(())
}
