//! Fixed-size linear algebra for the plane.
//!
//! `Vec2` doubles as a point type. `Mat2` carries a closed-form singular value
//! decomposition built from the conformal/anticonformal splitting of a 2×2
//! matrix, which avoids squaring the condition number.

use serde::{Deserialize, Serialize};
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

/// Points and vectors share one representation.
pub type Point2 = Vec2;

impl From<[f64; 2]> for Vec2 {
    fn from(a: [f64; 2]) -> Self {
        Vec2::new(a[0], a[1])
    }
}

impl From<Vec2> for [f64; 2] {
    fn from(v: Vec2) -> Self {
        [v.x, v.y]
    }
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// z-component of the 3d cross product.
    pub fn cross(self, o: Vec2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    pub fn normalized(self) -> Vec2 {
        let n = self.norm();
        Vec2::new(self.x / n, self.y / n)
    }

    /// Counter-clockwise rotation by a right angle.
    pub fn perp(self) -> Vec2 {
        Vec2::new(-self.y, self.x)
    }

    pub fn scale(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    /// Flip so that the first nonzero coordinate is positive.
    pub fn canonical_sign(self) -> Vec2 {
        if self.x < 0.0 || (self.x == 0.0 && self.y < 0.0) {
            -self
        } else {
            self
        }
    }

    /// Flip to agree in orientation with `reference`.
    pub fn aligned_with(self, reference: Vec2) -> Vec2 {
        if self.dot(reference) < 0.0 {
            -self
        } else {
            self
        }
    }

    /// Unsigned angle between the lines spanned by two vectors, in [0, π/2].
    pub fn line_angle(self, o: Vec2) -> f64 {
        self.cross(o).abs().atan2(self.dot(o).abs())
    }

    /// Unsigned angle between two vectors, in [0, π].
    pub fn angle(self, o: Vec2) -> f64 {
        self.cross(o).abs().atan2(self.dot(o))
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl AddAssign for Vec2 {
    fn add_assign(&mut self, o: Vec2) {
        self.x += o.x;
        self.y += o.y;
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl SubAssign for Vec2 {
    fn sub_assign(&mut self, o: Vec2) {
        self.x -= o.x;
        self.y -= o.y;
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, s: f64) -> Vec2 {
        self.scale(s)
    }
}

impl Mul<Vec2> for f64 {
    type Output = Vec2;
    fn mul(self, v: Vec2) -> Vec2 {
        v.scale(self)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "[[f64; 2]; 2]", into = "[[f64; 2]; 2]")]
pub struct Mat2 {
    pub a11: f64,
    pub a12: f64,
    pub a21: f64,
    pub a22: f64,
}

impl From<[[f64; 2]; 2]> for Mat2 {
    fn from(r: [[f64; 2]; 2]) -> Self {
        Mat2::new(r[0][0], r[0][1], r[1][0], r[1][1])
    }
}

impl From<Mat2> for [[f64; 2]; 2] {
    fn from(m: Mat2) -> Self {
        [[m.a11, m.a12], [m.a21, m.a22]]
    }
}

/// Singular data of a 2×2 matrix `A = σ₁ u₁ v₁ᵀ + σ₂ u₂ v₂ᵀ`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Svd2 {
    pub sigma_max: f64,
    pub sigma_min: f64,
    /// Right singular vector of `sigma_max`.
    pub right_max: Vec2,
    /// Right singular vector of `sigma_min`.
    pub right_min: Vec2,
    /// `A·right_max / sigma_max`.
    pub left_max: Vec2,
    /// `A·right_min / sigma_min`.
    pub left_min: Vec2,
}

impl Mat2 {
    pub const IDENTITY: Mat2 = Mat2 { a11: 1.0, a12: 0.0, a21: 0.0, a22: 1.0 };

    pub const fn new(a11: f64, a12: f64, a21: f64, a22: f64) -> Self {
        Mat2 { a11, a12, a21, a22 }
    }

    pub fn diag(a: f64, b: f64) -> Self {
        Mat2::new(a, 0.0, 0.0, b)
    }

    pub fn rotation(theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        Mat2::new(c, -s, s, c)
    }

    /// Matrix with the given columns.
    pub fn from_cols(c1: Vec2, c2: Vec2) -> Self {
        Mat2::new(c1.x, c2.x, c1.y, c2.y)
    }

    pub fn col1(&self) -> Vec2 {
        Vec2::new(self.a11, self.a21)
    }

    pub fn col2(&self) -> Vec2 {
        Vec2::new(self.a12, self.a22)
    }

    /// Determinant with Kahan's compensated 2×2 formula.
    pub fn det(&self) -> f64 {
        let w = self.a12 * self.a21;
        let e = (-self.a12).mul_add(self.a21, w);
        let f = self.a11.mul_add(self.a22, -w);
        f + e
    }

    pub fn trace(&self) -> f64 {
        self.a11 + self.a22
    }

    pub fn transpose(&self) -> Mat2 {
        Mat2::new(self.a11, self.a21, self.a12, self.a22)
    }

    pub fn inverse(&self) -> Option<Mat2> {
        let d = self.det();
        if d == 0.0 || !d.is_finite() {
            return None;
        }
        Some(Mat2::new(self.a22 / d, -self.a12 / d, -self.a21 / d, self.a11 / d))
    }

    pub fn apply(&self, v: Vec2) -> Vec2 {
        Vec2::new(self.a11 * v.x + self.a12 * v.y, self.a21 * v.x + self.a22 * v.y)
    }

    pub fn scale(&self, s: f64) -> Mat2 {
        Mat2::new(self.a11 * s, self.a12 * s, self.a21 * s, self.a22 * s)
    }

    pub fn frobenius(&self) -> f64 {
        (self.a11 * self.a11 + self.a12 * self.a12 + self.a21 * self.a21 + self.a22 * self.a22).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.a11.abs().max(self.a12.abs()).max(self.a21.abs()).max(self.a22.abs())
    }

    pub fn is_finite(&self) -> bool {
        self.a11.is_finite() && self.a12.is_finite() && self.a21.is_finite() && self.a22.is_finite()
    }

    /// Operator norm induced by the Euclidean norm.
    pub fn norm(&self) -> f64 {
        let (q, r) = self.conformal_parts();
        q + r
    }

    /// `1/‖A⁻¹‖`, the smallest singular value.
    pub fn sigma_min(&self) -> f64 {
        let s = self.norm();
        if s == 0.0 {
            0.0
        } else {
            self.det().abs() / s
        }
    }

    /// Magnitudes of the conformal and anticonformal parts.
    fn conformal_parts(&self) -> (f64, f64) {
        let e = 0.5 * (self.a11 + self.a22);
        let f = 0.5 * (self.a11 - self.a22);
        let g = 0.5 * (self.a21 + self.a12);
        let h = 0.5 * (self.a21 - self.a12);
        (e.hypot(h), f.hypot(g))
    }

    /// Closed-form SVD: `A = Rot(φ)·diag(q+r, q−r)·Rot(θ)ᵀ` where `q`, `r` are the
    /// magnitudes of the conformal and anticonformal parts.
    pub fn svd(&self) -> Svd2 {
        let e = 0.5 * (self.a11 + self.a22);
        let f = 0.5 * (self.a11 - self.a22);
        let g = 0.5 * (self.a21 + self.a12);
        let h = 0.5 * (self.a21 - self.a12);
        let q = e.hypot(h);
        let r = f.hypot(g);
        let sigma_max = q + r;
        let det = self.det();
        let sigma_min = if sigma_max > 0.0 { det.abs() / sigma_max } else { 0.0 };
        let alpha = h.atan2(e);
        let beta = g.atan2(f);
        let theta = 0.5 * (beta - alpha);
        let phi = 0.5 * (beta + alpha);
        let (st, ct) = theta.sin_cos();
        let (sp, cp) = phi.sin_cos();
        let right_max = Vec2::new(ct, st);
        let right_min = Vec2::new(-st, ct);
        let left_max = Vec2::new(cp, sp);
        let sgn = if det < 0.0 { -1.0 } else { 1.0 };
        let left_min = Vec2::new(-sp, cp).scale(sgn);
        Svd2 { sigma_max, sigma_min, right_max, right_min, left_max, left_min }
    }
}

impl Mul for Mat2 {
    type Output = Mat2;
    fn mul(self, o: Mat2) -> Mat2 {
        Mat2::new(
            self.a11 * o.a11 + self.a12 * o.a21,
            self.a11 * o.a12 + self.a12 * o.a22,
            self.a21 * o.a11 + self.a22 * o.a21,
            self.a21 * o.a12 + self.a22 * o.a22,
        )
    }
}

impl Mul<Vec2> for Mat2 {
    type Output = Vec2;
    fn mul(self, v: Vec2) -> Vec2 {
        self.apply(v)
    }
}

impl Add for Mat2 {
    type Output = Mat2;
    fn add(self, o: Mat2) -> Mat2 {
        Mat2::new(self.a11 + o.a11, self.a12 + o.a12, self.a21 + o.a21, self.a22 + o.a22)
    }
}

impl Sub for Mat2 {
    type Output = Mat2;
    fn sub(self, o: Mat2) -> Mat2 {
        Mat2::new(self.a11 - o.a11, self.a12 - o.a12, self.a21 - o.a21, self.a22 - o.a22)
    }
}
