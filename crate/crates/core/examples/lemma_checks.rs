//! Norm identity on random 2×2 pairs, its failure in 3×3, and exact counting.
use fthyp::cocycle::{gl3_counterexample, norm_identity_suite, norm_product_defect, NormKind, SquareMatrix};
use fthyp::hypersets::counting_suite;

fn main() -> fthyp::Result<()> {
    let s = norm_identity_suite(2000, 1e6, 7, 1e-9)?;
    println!("2x2: {} pairs, max relative error {:.2e}, {} violations", s.pairs, s.max_rel_error, s.violations);

    let (a, b) = gl3_counterexample(1e3);
    let d = norm_product_defect(&SquareMatrix::Three(a), &SquareMatrix::Three(b), NormKind::Frobenius)?;
    println!("3x3 at x = 1e3, Frobenius: |AB|/(|A||B|) = {:.6}, |B^-1 A^-1|/(|A^-1||B^-1|) = {:.6}", d.lhs, d.rhs);

    let c = counting_suite(16)?;
    println!("counting: {} rows, {} mismatches, {} bound violations", c.rows.len(), c.mismatches, c.bound_violations);
    Ok(())
}
