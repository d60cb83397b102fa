//! Norms and singular directions of products of Jacobians along orbits.
//!
//! Products are never formed explicitly. [`CocycleProduct`] keeps
//! `P = Q · e^L · N` with `Q` a rotation, `N` upper triangular with unit max
//! entry and `L` a log scale, so `‖D_xTⁿ‖ ≈ e^{0.96 n}` stays representable for
//! any horizon.

use crate::dynamics::{Direction, OrbitData, SurfaceSystem};
use crate::error::{Error, Result};
use crate::linalg::{Mat2, Point2, Vec2};
use nalgebra::Matrix3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub const DEFAULT_TAU: f64 = 1e-6;

/// Singular data of an invertible 2×2 matrix.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HyperbolicSplit {
    pub sigma_max: f64,
    pub sigma_min: f64,
    /// Most contracted unit direction.
    pub e: Vec2,
    /// Most expanded unit direction.
    pub f: Vec2,
}

pub fn hyperbolic_split(a: &Mat2, tau: f64) -> Result<HyperbolicSplit> {
    if !a.is_finite() {
        return Err(Error::InvalidParameter("non-finite matrix".into()));
    }
    let det = a.det();
    if det == 0.0 {
        return Err(Error::Singular);
    }
    let s = a.svd();
    if s.sigma_min == 0.0 {
        return Err(Error::Singular);
    }
    let ratio = s.sigma_max / s.sigma_min;
    if ratio < 1.0 + tau {
        return Err(Error::Degenerate { n: 1, ratio });
    }
    Ok(HyperbolicSplit {
        sigma_max: s.sigma_max,
        sigma_min: s.sigma_min,
        e: s.right_min.canonical_sign(),
        f: s.right_max.canonical_sign(),
    })
}

/// Log-scaled factored product of 2×2 matrices, multiplied on the left.
#[derive(Clone, Debug, PartialEq)]
pub struct CocycleProduct {
    q: Mat2,
    tri: Mat2,
    log_scale: f64,
    log_abs_det: f64,
    steps: usize,
}

impl Default for CocycleProduct {
    fn default() -> Self {
        Self::identity()
    }
}

impl CocycleProduct {
    pub fn identity() -> Self {
        CocycleProduct { q: Mat2::IDENTITY, tri: Mat2::IDENTITY, log_scale: 0.0, log_abs_det: 0.0, steps: 0 }
    }

    pub fn from_factors(factors: &[Mat2]) -> Result<Self> {
        let mut p = Self::identity();
        for a in factors {
            p.push(a)?;
        }
        Ok(p)
    }

    /// `P ← A·P`.
    pub fn push(&mut self, a: &Mat2) -> Result<()> {
        let det = a.det();
        if det == 0.0 || !det.is_finite() {
            return Err(Error::Singular);
        }
        let m = *a * self.q;
        let c1 = m.col1();
        let c2 = m.col2();
        let r11 = c1.norm();
        if r11 == 0.0 {
            return Err(Error::Singular);
        }
        let q1 = c1.scale(1.0 / r11);
        let q2 = q1.perp();
        let r = Mat2::new(r11, q1.dot(c2), 0.0, q2.dot(c2));
        let t = r * self.tri;
        let s = t.max_abs();
        self.tri = t.scale(1.0 / s);
        self.log_scale += s.ln();
        self.q = Mat2::from_cols(q1, q2);
        self.log_abs_det += det.abs().ln();
        self.steps += 1;
        Ok(())
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn log_abs_det(&self) -> f64 {
        self.log_abs_det
    }

    /// `ln ‖P‖`.
    pub fn log_norm(&self) -> f64 {
        self.log_scale + self.tri.norm().ln()
    }

    /// `ln σ_min(P) = −ln ‖P⁻¹‖`.
    pub fn log_sigma_min(&self) -> f64 {
        self.log_abs_det - self.log_norm()
    }

    /// `ln ‖P⁻¹‖`.
    pub fn log_norm_inv(&self) -> f64 {
        -self.log_sigma_min()
    }

    /// Right singular vectors (`e`, `f`) and their normalized images, canonical signs.
    pub fn directions(&self) -> (Vec2, Vec2, Vec2, Vec2) {
        let s = self.tri.svd();
        let e = s.right_min.canonical_sign();
        let f = s.right_max.canonical_sign();
        let e_img = (self.q * s.left_min).canonical_sign();
        let f_img = (self.q * s.left_max).canonical_sign();
        (e, f, e_img, f_img)
    }

    pub fn is_degenerate(&self, tau: f64) -> bool {
        self.log_norm() - self.log_sigma_min() < (1.0 + tau).ln()
    }

    /// Dense product; may overflow for long products.
    pub fn to_matrix(&self) -> Mat2 {
        self.q * self.tri.scale(self.log_scale.exp())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldSample {
    pub x: Point2,
    pub n: usize,
    pub e_n: Vec2,
    pub f_n: Vec2,
    pub e_img: Vec2,
    pub f_img: Vec2,
    /// `‖D_xTⁿ‖`.
    pub norm_n: f64,
    /// `‖D_{Tⁿx}T⁻ⁿ‖`.
    pub norm_inv_n: f64,
    pub log_norm_n: f64,
    pub log_norm_inv_n: f64,
}

/// Factored product `D_xTⁿ` along the forward orbit of `x`.
pub fn cocycle_product(sys: &SurfaceSystem, x: Point2, n: usize) -> Result<CocycleProduct> {
    CocycleProduct::from_factors(&sys.forward_jacobians(x, n)?)
}

pub fn fields_from_product(x: Point2, n: usize, p: &CocycleProduct, tau: f64) -> Result<FieldSample> {
    let ln1 = p.log_norm();
    let ln2 = p.log_sigma_min();
    if ln1 - ln2 < (1.0 + tau).ln() {
        return Err(Error::Degenerate { n, ratio: (ln1 - ln2).exp() });
    }
    let (e_n, f_n, e_img, f_img) = p.directions();
    Ok(FieldSample {
        x,
        n,
        e_n,
        f_n,
        e_img,
        f_img,
        norm_n: ln1.exp(),
        norm_inv_n: (-ln2).exp(),
        log_norm_n: ln1,
        log_norm_inv_n: -ln2,
    })
}

/// Most contracted/expanded directions of `D_xTⁿ` and of its image.
pub fn finite_time_fields(sys: &SurfaceSystem, x: Point2, n: usize, tau: f64) -> Result<FieldSample> {
    if n == 0 {
        return Err(Error::InvalidParameter("finite-time fields need n >= 1".into()));
    }
    let p = cocycle_product(sys, x, n)?;
    fields_from_product(sys.canonical(x), n, &p, tau)
}

/// Unit field `e_n` (stable) or `f_n` (unstable) at a lifted point.
pub fn field_direction(sys: &SurfaceSystem, p: Point2, n: usize, stable: bool, tau: f64) -> Result<Vec2> {
    let s = finite_time_fields(sys, p, n, tau)?;
    Ok(if stable { s.e_n } else { s.f_n })
}

/// `(1/n) Σ log⁺ ‖D_{T^l x}T‖`.
pub fn birkhoff_lambda_plus(orbit: &OrbitData) -> f64 {
    lambda_plus_of(&orbit.jacobians)
}

pub fn lambda_plus_of(jacobians: &[Mat2]) -> f64 {
    if jacobians.is_empty() {
        return 0.0;
    }
    jacobians.iter().map(|j| j.norm().ln().max(0.0)).sum::<f64>() / jacobians.len() as f64
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LyapunovMethod {
    Qr,
    SvdEndpoint,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LyapunovEstimate {
    pub chi_plus: f64,
    pub chi_minus: f64,
    pub n: usize,
    pub method: LyapunovMethod,
}

/// Exponents `(1/n) ln σ₁(D_xTⁿ)`, `(1/n) ln σ₂(D_xTⁿ)` read from the factored product.
pub fn lyapunov_qr(sys: &SurfaceSystem, x: Point2, n: usize) -> Result<LyapunovEstimate> {
    if n == 0 {
        return Err(Error::InvalidParameter("lyapunov needs n >= 1".into()));
    }
    let p = cocycle_product(sys, x, n)?;
    let nf = n as f64;
    Ok(LyapunovEstimate {
        chi_plus: p.log_norm() / nf,
        chi_minus: p.log_sigma_min() / nf,
        n,
        method: LyapunovMethod::Qr,
    })
}

/// Same quantities from the dense product; only meaningful while it does not overflow.
pub fn lyapunov_svd_endpoint(sys: &SurfaceSystem, x: Point2, n: usize) -> Result<LyapunovEstimate> {
    if n == 0 {
        return Err(Error::InvalidParameter("lyapunov needs n >= 1".into()));
    }
    let mut m = Mat2::IDENTITY;
    for j in sys.forward_jacobians(x, n)? {
        m = j * m;
    }
    let s = m.svd();
    let nf = n as f64;
    Ok(LyapunovEstimate {
        chi_plus: s.sigma_max.ln() / nf,
        chi_minus: s.sigma_min.ln() / nf,
        n,
        method: LyapunovMethod::SvdEndpoint,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormKind {
    Operator,
    Frobenius,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SquareMatrix {
    Two(Mat2),
    Three(Matrix3<f64>),
}

impl SquareMatrix {
    fn norm(&self, kind: NormKind) -> f64 {
        match (self, kind) {
            (SquareMatrix::Two(m), NormKind::Operator) => m.norm(),
            (SquareMatrix::Two(m), NormKind::Frobenius) => m.frobenius(),
            (SquareMatrix::Three(m), NormKind::Operator) => m.singular_values().max(),
            (SquareMatrix::Three(m), NormKind::Frobenius) => m.norm(),
        }
    }

    fn inverse(&self) -> Option<SquareMatrix> {
        match self {
            SquareMatrix::Two(m) => m.inverse().map(SquareMatrix::Two),
            SquareMatrix::Three(m) => m.try_inverse().map(SquareMatrix::Three),
        }
    }

    fn mul(&self, o: &SquareMatrix) -> Option<SquareMatrix> {
        match (self, o) {
            (SquareMatrix::Two(a), SquareMatrix::Two(b)) => Some(SquareMatrix::Two(*a * *b)),
            (SquareMatrix::Three(a), SquareMatrix::Three(b)) => Some(SquareMatrix::Three(a * b)),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormDefect {
    /// `‖AB‖ / (‖A‖‖B‖)`.
    pub lhs: f64,
    /// `‖B⁻¹A⁻¹‖ / (‖A⁻¹‖‖B⁻¹‖)`.
    pub rhs: f64,
}

pub fn norm_product_defect(a: &SquareMatrix, b: &SquareMatrix, kind: NormKind) -> Result<NormDefect> {
    let ab = a.mul(b).ok_or_else(|| Error::InvalidParameter("dimension mismatch".into()))?;
    let ai = a.inverse().ok_or(Error::Singular)?;
    let bi = b.inverse().ok_or(Error::Singular)?;
    let biai = bi.mul(&ai).expect("same dimension");
    Ok(NormDefect {
        lhs: ab.norm(kind) / (a.norm(kind) * b.norm(kind)),
        rhs: biai.norm(kind) / (ai.norm(kind) * bi.norm(kind)),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormIdentitySuite {
    pub pairs: usize,
    pub max_condition: f64,
    pub tol: f64,
    /// Largest `|lhs − rhs| / max(lhs, rhs)`.
    pub max_rel_error: f64,
    pub violations: usize,
}

/// Seeded random 2×2 pairs with entries in `[−1, 1]` and condition numbers at most `max_cond`.
pub fn random_gl2_pairs(count: usize, max_cond: f64, seed: u64) -> Vec<(Mat2, Mat2)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = || loop {
        let m = Mat2::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let s = m.svd();
        if s.sigma_min > 0.0 && s.sigma_max / s.sigma_min <= max_cond {
            return m;
        }
    };
    (0..count).map(|_| (draw(), draw())).collect()
}

/// `‖AB‖/(‖A‖‖B‖) = ‖B⁻¹A⁻¹‖/(‖A⁻¹‖‖B⁻¹‖)` in operator norm over random pairs.
pub fn norm_identity_suite(count: usize, max_cond: f64, seed: u64, tol: f64) -> Result<NormIdentitySuite> {
    let mut worst = 0.0f64;
    let mut violations = 0;
    for (a, b) in random_gl2_pairs(count, max_cond, seed) {
        let d = norm_product_defect(&SquareMatrix::Two(a), &SquareMatrix::Two(b), NormKind::Operator)?;
        let rel = (d.lhs - d.rhs).abs() / d.lhs.max(d.rhs);
        worst = worst.max(rel);
        if rel > tol {
            violations += 1;
        }
    }
    Ok(NormIdentitySuite { pairs: count, max_condition: max_cond, tol, max_rel_error: worst, violations })
}

/// The 3×3 pair whose norm defects are not symmetric.
pub fn gl3_counterexample(x: f64) -> (Matrix3<f64>, Matrix3<f64>) {
    let a = Matrix3::new(1.0, 0.0, 0.0, 0.0, x, -1.0, 0.0, x, 1.0);
    let b = Matrix3::new(x, x, 0.0, 1.0, -1.0, 0.0, 0.0, 0.0, 1.0);
    (a, b)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HolangleRecord {
    pub n: usize,
    /// `tan ∠(e_n, e_{n+1})`.
    pub lhs: f64,
    pub rhs: f64,
    pub ok: bool,
}

pub const HOLANGLE_TOL: f64 = 1e-6;

/// Angle between consecutive finite-time stable directions against its bound.
///
/// With `e_n = cos θ e_{n+1} + sin θ f_{n+1}` one has
/// `‖P_{n+1}e_n‖² = cos²θ σ₂'² + sin²θ σ₁'²`, so `tan²θ = (a² − b²)/(1 − a²)`
/// where `a = ‖P_{n+1}e_n‖/σ₁'` and `b = σ₂'/σ₁'`. Everything is evaluated in
/// log space, which keeps the tiny angles at large `n` exact.
pub fn holangle_check(sys: &SurfaceSystem, x: Point2, n: usize, tau: f64) -> Result<HolangleRecord> {
    if n == 0 {
        return Err(Error::InvalidParameter("holangle needs n >= 1".into()));
    }
    let jac = sys.forward_jacobians(x, n + 1)?;
    let pn = CocycleProduct::from_factors(&jac[..n])?;
    let mut pn1 = pn.clone();
    pn1.push(&jac[n])?;
    let sn = fields_from_product(x, n, &pn, tau)?;
    fields_from_product(x, n + 1, &pn1, tau)?;
    holangle_from(n, &pn, &pn1, &sn, &jac[n])
}

fn holangle_from(
    n: usize,
    pn: &CocycleProduct,
    pn1: &CocycleProduct,
    sn: &FieldSample,
    step: &Mat2,
) -> Result<HolangleRecord> {
    let ln1 = pn1.log_norm();
    let a = (pn.log_sigma_min() + step.apply(sn.e_img).norm().ln() - ln1).exp();
    let b = (pn1.log_sigma_min() - ln1).exp();
    let tan2 = ((a - b) * (a + b) / ((1.0 - a) * (1.0 + a))).max(0.0);
    let lhs = tan2.sqrt();
    let step_inv = step.inverse().ok_or(Error::Singular)?;
    let rhs = 2.0 * (step.norm().ln() + step_inv.norm().ln() - pn.log_norm() - pn.log_norm_inv()).exp();
    Ok(HolangleRecord { n, lhs, rhs, ok: lhs <= rhs * (1.0 + HOLANGLE_TOL) })
}

/// Angle records for every `n` in `n_range`, sharing one orbit.
pub fn holangle_series(
    sys: &SurfaceSystem,
    x: Point2,
    n_range: std::ops::RangeInclusive<usize>,
    tau: f64,
) -> Result<Vec<HolangleRecord>> {
    let n_max = *n_range.end();
    let jac = sys.forward_jacobians(x, n_max + 1)?;
    let mut p = CocycleProduct::identity();
    let mut out = Vec::new();
    for (k, a) in jac.iter().enumerate().take(n_max) {
        p.push(a)?;
        let n = k + 1;
        if n_range.contains(&n) {
            let mut p1 = p.clone();
            p1.push(&jac[n])?;
            let sn = fields_from_product(x, n, &p, tau)?;
            fields_from_product(x, n + 1, &p1, tau)?;
            out.push(holangle_from(n, &p, &p1, &sn, &jac[n])?);
        }
    }
    Ok(out)
}

/// Norms `ln ‖D_xT^k‖` and `ln ‖D_{T^k x}T^{−k}‖` for `k = 0..=n`.
pub fn log_norm_series(sys: &SurfaceSystem, x: Point2, n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut p = CocycleProduct::identity();
    let mut fwd = vec![0.0];
    let mut inv = vec![0.0];
    for a in sys.forward_jacobians(x, n)? {
        p.push(&a)?;
        fwd.push(p.log_norm());
        inv.push(p.log_norm_inv());
    }
    Ok((fwd, inv))
}

/// Backward orbit product `D_xT⁻ⁿ`.
pub fn backward_product(sys: &SurfaceSystem, x: Point2, n: usize) -> Result<CocycleProduct> {
    let o = sys.orbit(x, n, Direction::Backward)?;
    CocycleProduct::from_factors(&o.jacobians)
}
