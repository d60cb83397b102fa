//! Builtin surface diffeomorphisms.
//!
//! Torus maps work on the universal cover: `forward_lift` is the lift of `T` to
//! the plane and `canonical` reduces a lifted point to `[0,1)²`. All local
//! constructions (manifolds, charts, rescaled maps) stay in lifted coordinates;
//! orbits used for derivative data are canonicalized at every step so that
//! coordinates never grow.

use crate::error::{Error, Result};
use crate::linalg::{Mat2, Point2, Vec2};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

const NEWTON_TOL: f64 = 1e-12;
const NEWTON_MAX_ITER: usize = 50;

/// A builtin system together with its parameters.
///
/// JSON form: `{"kind":"affine_torus","matrix":[[2,1],[1,1]]}`,
/// `{"kind":"perturbed_cat","delta":0.01}`, `{"kind":"standard_map","k":0.5}`,
/// `{"kind":"henon","a":1.4,"b":0.3,"box":[-2,2,-2,2]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SystemSpec {
    /// `p ↦ M p + shift (mod 1)` for an integer matrix with determinant ±1.
    AffineTorus {
        matrix: [[i64; 2]; 2],
        #[serde(default)]
        shift: [f64; 2],
    },
    /// `(u, v) ↦ (2u + v + δ sin 2πu, u + v) (mod 1)`.
    PerturbedCat { delta: f64 },
    /// Chirikov standard map on the torus in coordinates `(θ, p)`:
    /// `p' = p + (k/2π) sin 2πθ`, `θ' = θ + p'`.
    StandardMap { k: f64 },
    /// `(x, y) ↦ (1 − a x² + y, b x)` restricted to a trapping box `[xmin, xmax, ymin, ymax]`.
    Henon {
        a: f64,
        b: f64,
        #[serde(rename = "box", default = "default_henon_box")]
        bbox: [f64; 4],
    },
}

fn default_henon_box() -> [f64; 4] {
    [-2.0, 2.0, -2.0, 2.0]
}

impl SystemSpec {
    pub fn cat() -> Self {
        SystemSpec::AffineTorus { matrix: [[2, 1], [1, 1]], shift: [0.0, 0.0] }
    }

    pub fn identity() -> Self {
        SystemSpec::AffineTorus { matrix: [[1, 0], [0, 1]], shift: [0.0, 0.0] }
    }

    pub fn perturbed_cat(delta: f64) -> Self {
        SystemSpec::PerturbedCat { delta }
    }

    pub fn domain(&self) -> Domain {
        match self {
            SystemSpec::Henon { .. } => Domain::PlaneWithBox,
            _ => Domain::Torus,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    Torus,
    PlaneWithBox,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Forward,
    Backward,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Analytic,
    Sampled,
}

/// Global bounds on the first and second derivatives of `T` and `T⁻¹`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DerivativeBounds {
    pub norm_dt: f64,
    pub norm_dt_inv: f64,
    pub norm_d2t: f64,
    pub norm_d2t_inv: f64,
    pub provenance: Provenance,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrbitData {
    /// `x, Tx, …, Tⁿx` (or the backward orbit).
    pub points: Vec<Point2>,
    /// Derivative of the step map at `points[l]`, for `l < n`.
    pub jacobians: Vec<Mat2>,
    pub n: usize,
}

#[derive(Clone, Debug)]
enum Kind {
    Affine { m: Mat2, m_inv: Mat2, shift: Vec2 },
    PerturbedCat { delta: f64 },
    Standard { k: f64 },
    Henon { a: f64, b: f64, bbox: [f64; 4] },
}

/// An invertible smooth map of the torus or of a plane box.
#[derive(Clone, Debug)]
pub struct SurfaceSystem {
    spec: SystemSpec,
    kind: Kind,
    bounds: DerivativeBounds,
}

pub fn make_system(spec: &SystemSpec) -> Result<SurfaceSystem> {
    SurfaceSystem::new(spec)
}

impl SurfaceSystem {
    pub fn new(spec: &SystemSpec) -> Result<Self> {
        let kind = match *spec {
            SystemSpec::AffineTorus { matrix, shift } => {
                let det = matrix[0][0] * matrix[1][1] - matrix[0][1] * matrix[1][0];
                if det.abs() != 1 {
                    return Err(Error::InvalidSystem(format!(
                        "affine torus matrix must be unimodular, determinant is {det}"
                    )));
                }
                if !shift[0].is_finite() || !shift[1].is_finite() {
                    return Err(Error::InvalidSystem("non-finite shift".into()));
                }
                let m = Mat2::new(
                    matrix[0][0] as f64,
                    matrix[0][1] as f64,
                    matrix[1][0] as f64,
                    matrix[1][1] as f64,
                );
                let d = det as f64;
                let m_inv = Mat2::new(m.a22 / d, -m.a12 / d, -m.a21 / d, m.a11 / d);
                Kind::Affine { m, m_inv, shift: Vec2::from(shift) }
            }
            SystemSpec::PerturbedCat { delta } => {
                if !delta.is_finite() {
                    return Err(Error::InvalidSystem("non-finite delta".into()));
                }
                Kind::PerturbedCat { delta }
            }
            SystemSpec::StandardMap { k } => {
                if !k.is_finite() {
                    return Err(Error::InvalidSystem("non-finite coupling".into()));
                }
                Kind::Standard { k }
            }
            SystemSpec::Henon { a, b, bbox } => {
                if !(a.is_finite() && b.is_finite()) || b == 0.0 {
                    return Err(Error::InvalidSystem("Hénon map needs finite a and nonzero b".into()));
                }
                if !(bbox[0] < bbox[1] && bbox[2] < bbox[3]) {
                    return Err(Error::InvalidSystem("empty trapping box".into()));
                }
                Kind::Henon { a, b, bbox }
            }
        };
        let placeholder = DerivativeBounds {
            norm_dt: 0.0,
            norm_dt_inv: 0.0,
            norm_d2t: 0.0,
            norm_d2t_inv: 0.0,
            provenance: Provenance::Analytic,
        };
        let mut sys = SurfaceSystem { spec: spec.clone(), kind, bounds: placeholder };
        sys.check_jacobian_sign()?;
        sys.bounds = sys.analytic_bounds();
        Ok(sys)
    }

    pub fn spec(&self) -> &SystemSpec {
        &self.spec
    }

    pub fn bounds(&self) -> &DerivativeBounds {
        &self.bounds
    }

    pub fn domain(&self) -> Domain {
        self.spec.domain()
    }

    pub fn is_torus(&self) -> bool {
        self.domain() == Domain::Torus
    }

    /// Sampled determinant must keep one sign (the map stays a diffeomorphism).
    fn check_jacobian_sign(&self) -> Result<()> {
        let (lo, hi) = self.sample_window();
        let res = 64;
        let mut min_det = f64::INFINITY;
        let mut max_det = f64::NEG_INFINITY;
        for i in 0..res {
            for j in 0..res {
                let p = Vec2::new(
                    lo.x + (hi.x - lo.x) * (i as f64 + 0.5) / res as f64,
                    lo.y + (hi.y - lo.y) * (j as f64 + 0.5) / res as f64,
                );
                let d = self.jacobian(p).det();
                min_det = min_det.min(d);
                max_det = max_det.max(d);
            }
        }
        if min_det * max_det <= 0.0 || min_det.abs().min(max_det.abs()) < 1e-12 {
            return Err(Error::InvalidSystem(format!(
                "Jacobian determinant changes sign or vanishes on the sample grid (range [{min_det}, {max_det}])"
            )));
        }
        Ok(())
    }

    fn sample_window(&self) -> (Vec2, Vec2) {
        match self.kind {
            Kind::Henon { bbox, .. } => (Vec2::new(bbox[0], bbox[2]), Vec2::new(bbox[1], bbox[3])),
            _ => (Vec2::ZERO, Vec2::new(1.0, 1.0)),
        }
    }

    fn analytic_bounds(&self) -> DerivativeBounds {
        let (norm_dt, norm_dt_inv, norm_d2t, norm_d2t_inv) = match self.kind {
            Kind::Affine { m, m_inv, .. } => (m.norm(), m_inv.norm(), 0.0, 0.0),
            Kind::PerturbedCat { delta } => {
                let d = delta.abs();
                let a_max = 2.0 + 2.0 * PI * d;
                let a_min = 2.0 - 2.0 * PI * d;
                let top = Mat2::new(a_max, 1.0, 1.0, 1.0).norm();
                let weakest = Mat2::new(a_min, 1.0, 1.0, 1.0);
                let inv = weakest.inverse().map(|m| m.norm()).unwrap_or(f64::INFINITY);
                let d2 = 4.0 * PI * PI * d;
                let lower = 1.0 - 2.0 * PI * d;
                let d2_inv = 2.0 * 2f64.sqrt() * d2 / (lower * lower * lower);
                (top, inv, d2, d2_inv)
            }
            Kind::Standard { k } => {
                let plus = Mat2::new(1.0 + k, 1.0, k, 1.0).norm();
                let minus = Mat2::new(1.0 - k, 1.0, -k, 1.0).norm();
                let n = plus.max(minus);
                (n, n, 2.0 * PI * k.abs() * 2f64.sqrt(), 4.0 * PI * k.abs())
            }
            Kind::Henon { a, b, bbox } => {
                let xm = bbox[0].abs().max(bbox[1].abs());
                let n = Mat2::new(2.0 * a.abs() * xm, 1.0, b, 0.0).norm();
                (n, n / b.abs(), 2.0 * a.abs(), 2.0 * a.abs() / (b * b))
            }
        };
        DerivativeBounds { norm_dt, norm_dt_inv, norm_d2t, norm_d2t_inv, provenance: Provenance::Analytic }
    }

    /// Bounds from a 256×256 sample grid, inflated by 5%.
    pub fn sampled_bounds(&self) -> DerivativeBounds {
        let (lo, hi) = self.sample_window();
        let res = 256;
        let h = 1e-5;
        let dirs: Vec<Vec2> = (0..8)
            .map(|i| {
                let a = PI * i as f64 / 8.0;
                Vec2::new(a.cos(), a.sin())
            })
            .collect();
        let mut b = [0.0f64; 4];
        for i in 0..res {
            for j in 0..res {
                let p = Vec2::new(
                    lo.x + (hi.x - lo.x) * (i as f64 + 0.5) / res as f64,
                    lo.y + (hi.y - lo.y) * (j as f64 + 0.5) / res as f64,
                );
                let jac = self.jacobian(p);
                b[0] = b[0].max(jac.norm());
                if let Some(inv) = jac.inverse() {
                    b[1] = b[1].max(inv.norm());
                }
                for &d in &dirs {
                    let dj = (self.jacobian(p + d * h) - self.jacobian(p - d * h)).scale(0.5 / h);
                    b[2] = b[2].max(dj.norm());
                    if let (Some(a), Some(c)) = (self.jacobian_inv(p + d * h), self.jacobian_inv(p - d * h)) {
                        b[3] = b[3].max((a - c).scale(0.5 / h).norm());
                    }
                }
            }
        }
        DerivativeBounds {
            norm_dt: b[0] * 1.05,
            norm_dt_inv: b[1] * 1.05,
            norm_d2t: b[2] * 1.05,
            norm_d2t_inv: b[3] * 1.05,
            provenance: Provenance::Sampled,
        }
    }

    /// Lift of `T` to the plane (no reduction modulo 1).
    pub fn forward_lift(&self, p: Point2) -> Point2 {
        match self.kind {
            Kind::Affine { m, shift, .. } => m * p + shift,
            Kind::PerturbedCat { delta } => {
                Vec2::new(2.0 * p.x + p.y + delta * (2.0 * PI * p.x).sin(), p.x + p.y)
            }
            Kind::Standard { k } => {
                let pn = p.y + k / (2.0 * PI) * (2.0 * PI * p.x).sin();
                Vec2::new(p.x + pn, pn)
            }
            Kind::Henon { a, b, .. } => Vec2::new(1.0 - a * p.x * p.x + p.y, b * p.x),
        }
    }

    /// Lift of `T⁻¹` to the plane.
    pub fn backward_lift(&self, p: Point2) -> Result<Point2> {
        match self.kind {
            Kind::Affine { m_inv, shift, .. } => Ok(m_inv * (p - shift)),
            Kind::PerturbedCat { delta } => {
                // u + δ sin 2πu = w with w = u' − v', then v = v' − u
                let w = p.x - p.y;
                let mut u = w;
                let mut residual = f64::INFINITY;
                for _ in 0..NEWTON_MAX_ITER {
                    let g = u + delta * (2.0 * PI * u).sin() - w;
                    residual = g.abs();
                    let dg = 1.0 + 2.0 * PI * delta * (2.0 * PI * u).cos();
                    let step = g / dg;
                    u -= step;
                    if step.abs() <= NEWTON_TOL * (1.0 + u.abs()) {
                        return Ok(Vec2::new(u, p.y - u));
                    }
                }
                Err(Error::InverseNotConverged { iterations: NEWTON_MAX_ITER, residual })
            }
            Kind::Standard { k } => {
                let theta = p.x - p.y;
                Ok(Vec2::new(theta, p.y - k / (2.0 * PI) * (2.0 * PI * theta).sin()))
            }
            Kind::Henon { a, b, .. } => {
                let x = p.y / b;
                Ok(Vec2::new(x, p.x - 1.0 + a * x * x))
            }
        }
    }

    /// `D_p T`.
    pub fn jacobian(&self, p: Point2) -> Mat2 {
        match self.kind {
            Kind::Affine { m, .. } => m,
            Kind::PerturbedCat { delta } => {
                Mat2::new(2.0 + 2.0 * PI * delta * (2.0 * PI * p.x).cos(), 1.0, 1.0, 1.0)
            }
            Kind::Standard { k } => {
                let c = k * (2.0 * PI * p.x).cos();
                Mat2::new(1.0 + c, 1.0, c, 1.0)
            }
            Kind::Henon { a, b, .. } => Mat2::new(-2.0 * a * p.x, 1.0, b, 0.0),
        }
    }

    /// `D_p T⁻¹ = (D_{T⁻¹p} T)⁻¹`.
    pub fn jacobian_inv(&self, p: Point2) -> Option<Mat2> {
        let q = self.backward_lift(p).ok()?;
        self.jacobian(q).inverse()
    }

    /// Reduce to the fundamental domain (torus) or return unchanged (plane).
    pub fn canonical(&self, p: Point2) -> Point2 {
        if self.is_torus() {
            Vec2::new(wrap_unit(p.x), wrap_unit(p.y))
        } else {
            p
        }
    }

    fn check_box(&self, p: Point2) -> Result<()> {
        if let Kind::Henon { bbox, .. } = self.kind {
            if !(p.x >= bbox[0] && p.x <= bbox[1] && p.y >= bbox[2] && p.y <= bbox[3]) {
                return Err(Error::Escape { u: p.x, v: p.y });
            }
        }
        Ok(())
    }

    pub fn step(&self, p: Point2, dir: Direction) -> Result<Point2> {
        let q = match dir {
            Direction::Forward => self.forward_lift(p),
            Direction::Backward => self.backward_lift(p)?,
        };
        let q = self.canonical(q);
        self.check_box(q)?;
        Ok(q)
    }

    /// Derivative of the step map in the given direction at `p`.
    pub fn step_jacobian(&self, p: Point2, dir: Direction) -> Result<Mat2> {
        match dir {
            Direction::Forward => Ok(self.jacobian(p)),
            Direction::Backward => self.jacobian_inv(p).ok_or(Error::Singular),
        }
    }

    pub fn orbit(&self, x: Point2, n: usize, dir: Direction) -> Result<OrbitData> {
        let mut points = Vec::with_capacity(n + 1);
        let mut jacobians = Vec::with_capacity(n);
        let mut p = self.canonical(x);
        self.check_box(p)?;
        points.push(p);
        for _ in 0..n {
            jacobians.push(self.step_jacobian(p, dir)?);
            p = self.step(p, dir)?;
            points.push(p);
        }
        Ok(OrbitData { points, jacobians, n })
    }

    /// Forward Jacobians `D_{T^l x}T` for `l < n`, without storing the points.
    pub fn forward_jacobians(&self, x: Point2, n: usize) -> Result<Vec<Mat2>> {
        let mut out = Vec::with_capacity(n);
        let mut p = self.canonical(x);
        self.check_box(p)?;
        for _ in 0..n {
            out.push(self.jacobian(p));
            p = self.step(p, Direction::Forward)?;
        }
        Ok(out)
    }

    /// Displacement from `p` to the nearest lift of `q`.
    pub fn displacement(&self, p: Point2, q: Point2) -> Vec2 {
        let d = q - p;
        if self.is_torus() {
            Vec2::new(d.x - d.x.round(), d.y - d.y.round())
        } else {
            d
        }
    }

    /// Nearest-lift Euclidean distance on the torus, Euclidean on the plane.
    pub fn distance(&self, p: Point2, q: Point2) -> f64 {
        self.displacement(p, q).norm()
    }

    /// Radius of the flat charts used by rescaled local maps.
    pub fn chart_radius(&self) -> f64 {
        let g = self.bounds.norm_dt.max(1.0);
        if self.is_torus() {
            0.5 / g
        } else {
            1.0 / g
        }
    }

    /// `T(p + d) − T(p)` on the lift, free of cancellation for small `d`.
    pub fn forward_delta(&self, p: Point2, d: Vec2) -> Vec2 {
        match self.kind {
            Kind::Affine { m, .. } => m * d,
            Kind::PerturbedCat { delta } => {
                let ds = sin_diff(p.x, d.x);
                Vec2::new(2.0 * d.x + d.y + delta * ds, d.x + d.y)
            }
            Kind::Standard { k } => {
                let dp = d.y + k / (2.0 * PI) * sin_diff(p.x, d.x);
                Vec2::new(d.x + dp, dp)
            }
            Kind::Henon { a, b, .. } => Vec2::new(-a * d.x * (2.0 * p.x + d.x) + d.y, b * d.x),
        }
    }

    /// Canonical orbit `p_k` of `origin` and offsets of `T^k(origin + d)` from `p_k`, `k = 0..=n`.
    pub fn propagate_offsets(&self, origin: Point2, offsets: &[Vec2], n: usize) -> (Vec<Point2>, Vec<Vec<Vec2>>) {
        let mut orbit = Vec::with_capacity(n + 1);
        let mut all = Vec::with_capacity(n + 1);
        let mut p = self.canonical(origin);
        let mut cur = offsets.to_vec();
        for _ in 0..n {
            orbit.push(p);
            let next: Vec<Vec2> = cur.iter().map(|&d| self.forward_delta(p, d)).collect();
            all.push(std::mem::replace(&mut cur, next));
            p = self.canonical(self.forward_lift(p));
        }
        orbit.push(p);
        all.push(cur);
        (orbit, all)
    }

    /// `T^n` on the lift, for chart computations.
    pub fn forward_lift_n(&self, p: Point2, n: usize) -> Point2 {
        let mut q = p;
        for _ in 0..n {
            q = self.forward_lift(q);
        }
        q
    }
}

/// `sin 2π(u + d) − sin 2πu = 2 cos 2π(u + d/2) sin πd`.
fn sin_diff(u: f64, d: f64) -> f64 {
    2.0 * (2.0 * PI * (u + 0.5 * d)).cos() * (PI * d).sin()
}

fn wrap_unit(a: f64) -> f64 {
    let r = a - a.floor();
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

/// The local map `v ↦ ε⁻¹(T(T^{n−1}x + εv) − Tⁿx)` on the disk of radius 2.
#[derive(Clone, Debug)]
pub struct RescaledLocalMap<'a> {
    sys: &'a SurfaceSystem,
    base: Point2,
    image: Point2,
    eps: f64,
}

pub fn rescaled_local_map(sys: &SurfaceSystem, x: Point2, n: usize, eps: f64) -> Result<RescaledLocalMap<'_>> {
    if n == 0 {
        return Err(Error::InvalidParameter("rescaled local map needs n >= 1".into()));
    }
    if !(eps > 0.0) || eps >= 0.5 * sys.chart_radius() {
        return Err(Error::InvalidParameter(format!(
            "eps = {eps} too large for chart of radius {}",
            sys.chart_radius()
        )));
    }
    let mut base = sys.canonical(x);
    for _ in 0..n - 1 {
        base = sys.step(base, Direction::Forward)?;
    }
    let image = sys.forward_lift(base);
    Ok(RescaledLocalMap { sys, base, image, eps })
}

impl RescaledLocalMap<'_> {
    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn eval(&self, v: Vec2) -> Vec2 {
        (self.sys.forward_lift(self.base + v * self.eps) - self.image).scale(1.0 / self.eps)
    }

    pub fn jacobian(&self, v: Vec2) -> Mat2 {
        self.sys.jacobian(self.base + v * self.eps)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cat_forward_example() {
        let sys = make_system(&SystemSpec::cat()).unwrap();
        let q = sys.step(Vec2::new(0.1, 0.2), Direction::Forward).unwrap();
        assert!((q - Vec2::new(0.4, 0.3)).norm() < 1e-15);
        let p = sys.step(q, Direction::Backward).unwrap();
        assert!(sys.distance(p, Vec2::new(0.1, 0.2)) < 1e-15);
    }

    #[test]
    fn non_unimodular_rejected() {
        let spec = SystemSpec::AffineTorus { matrix: [[2, 0], [0, 1]], shift: [0.0, 0.0] };
        assert!(matches!(make_system(&spec), Err(Error::InvalidSystem(_))));
    }

    #[test]
    fn large_perturbation_rejected() {
        assert!(make_system(&SystemSpec::perturbed_cat(0.2)).is_err());
        assert!(make_system(&SystemSpec::perturbed_cat(0.1)).is_ok());
    }

    #[test]
    fn henon_escape() {
        let sys = make_system(&SystemSpec::Henon { a: 1.4, b: 0.3, bbox: [-2.0, 2.0, -2.0, 2.0] }).unwrap();
        assert!(sys.step(Vec2::new(0.1, 0.1), Direction::Forward).is_ok());
        assert!(matches!(sys.step(Vec2::new(1.9, 1.9), Direction::Forward), Err(Error::Escape { .. })));
    }

    #[test]
    fn wrap_is_half_open() {
        assert_eq!(wrap_unit(1.0), 0.0);
        assert_eq!(wrap_unit(-1e-20), 0.0);
        assert!((wrap_unit(-0.25) - 0.75).abs() < 1e-16);
    }
}
