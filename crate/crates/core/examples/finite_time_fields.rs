//! Finite-time stable and unstable directions and how they settle as `n` grows.
use fthyp::cocycle::{finite_time_fields, holangle_series, DEFAULT_TAU};
use fthyp::dynamics::{make_system, SystemSpec};
use fthyp::Point2;

fn main() -> fthyp::Result<()> {
    let sys = make_system(&SystemSpec::perturbed_cat(0.01))?;
    let x = Point2::new(0.3, 0.6);
    for n in [2, 4, 8, 16] {
        let f = finite_time_fields(&sys, x, n, DEFAULT_TAU)?;
        println!("n = {n:>2}  e_n = ({:+.10}, {:+.10})  f_n = ({:+.10}, {:+.10})", f.e_n.x, f.e_n.y, f.f_n.x, f.f_n.y);
    }
    println!("\n n   tan angle(e_n, e_n+1)   bound");
    for r in holangle_series(&sys, x, 5..=12, DEFAULT_TAU)? {
        println!("{:>2}   {:.3e}              {:.3e}  {}", r.n, r.lhs, r.rhs, if r.ok { "ok" } else { "VIOLATED" });
    }
    Ok(())
}
