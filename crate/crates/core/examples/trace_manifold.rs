//! Traces finite-time stable and unstable curves through a point.
use fthyp::cocycle::DEFAULT_TAU;
use fthyp::dynamics::{make_system, SystemSpec};
use fthyp::rectangles::{trace_manifold, LeafKind};
use fthyp::Point2;

fn main() -> fthyp::Result<()> {
    let sys = make_system(&SystemSpec::perturbed_cat(0.01))?;
    let x = Point2::new(0.3, 0.6);
    for kind in [LeafKind::Stable, LeafKind::Unstable] {
        let c = trace_manifold(&sys, x, 10, kind, 0.05, DEFAULT_TAU)?;
        let r = c.record();
        let v = &r.vertices;
        println!(
            "{kind:?}: {} vertices, arclength {:.6}, ends ({:.6}, {:.6}) .. ({:.6}, {:.6}), max turning {:.2e}",
            v.len(),
            r.arclength,
            v[0].x,
            v[0].y,
            v[v.len() - 1].x,
            v[v.len() - 1].y,
            c.max_turning_angle()
        );
    }
    Ok(())
}
