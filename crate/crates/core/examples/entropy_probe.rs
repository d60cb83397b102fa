//! Bowen balls, separated sets and the entropy rate estimators.
use fthyp::dynamics::{make_system, SystemSpec};
use fthyp::entropy::{bowen_ball_member, full_space_rate, newhouse_estimate, power_inclusion_check};
use fthyp::{Point2, Vec2};

fn main() -> fthyp::Result<()> {
    let cat = make_system(&SystemSpec::cat())?;
    let x = Point2::new(0.3, 0.6);
    let y = x + Vec2::new(1e-4, 0.0);
    for n in [4, 5, 6] {
        println!("x + (1e-4, 0) in B(x, {n}, 0.01): {}", bowen_ball_member(&cat, x, y, n, 0.01));
    }

    let full = full_space_rate(&cat, 128, 8, 0.05)?;
    println!("full space: {} separated of {} at n = {}, rate {:.4}", full.count, full.members, full.n, full.rate);
    for r in newhouse_estimate(&cat, x, 0.01, 0.002, &[4, 8, 12], 512)? {
        println!("local n = {:>2}: {:>4} separated of {:>6}, rate {:.4}", r.n, r.count, r.members, r.rate);
    }

    let sample: Vec<Point2> = (0..400).map(|i| x + Vec2::new((i % 20) as f64 * 1e-3 - 0.01, (i / 20) as f64 * 1e-3 - 0.01)).collect();
    let p = power_inclusion_check(&cat, x, 3, 2, 0.01, &sample)?;
    println!("power inclusion: {} of {} in B_T(x, 6, eps), {} violations", p.in_t_ball, p.sampled, p.violations);
    Ok(())
}
