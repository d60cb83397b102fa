//! Singular-value split of a matrix and of `D_xTⁿ`.
use fthyp::cocycle::{cocycle_product, hyperbolic_split, DEFAULT_TAU};
use fthyp::dynamics::{make_system, SystemSpec};
use fthyp::{Mat2, Point2};

fn main() -> fthyp::Result<()> {
    let m = Mat2::new(2.0, 1.0, 1.0, 1.0);
    let s = hyperbolic_split(&m, DEFAULT_TAU)?;
    println!("A = [[2,1],[1,1]]: sigma = ({:.9}, {:.9})", s.sigma_max, s.sigma_min);
    println!("  contracted e = ({:+.9}, {:+.9})", s.e.x, s.e.y);
    println!("  expanded   f = ({:+.9}, {:+.9})", s.f.x, s.f.y);

    let sys = make_system(&SystemSpec::perturbed_cat(0.01))?;
    let x = Point2::new(0.3, 0.6);
    for n in [1, 5, 20] {
        let s = hyperbolic_split(&cocycle_product(&sys, x, n)?.to_matrix(), DEFAULT_TAU)?;
        println!("n = {n:>2}: log sigma_max / n = {:.6}, e = ({:+.6}, {:+.6})", s.sigma_max.ln() / n as f64, s.e.x, s.e.y);
    }
    Ok(())
}
