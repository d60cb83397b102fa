use crate::cocycle::field_direction;
use crate::dynamics::SurfaceSystem;
use crate::error::{Error, Result};
use crate::linalg::{Point2, Vec2};
use serde::{Deserialize, Serialize};

/// Default number of RK4 steps per traced half-length.
pub const STEPS_PER_HALFLENGTH: f64 = 256.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LeafKind {
    Stable,
    Unstable,
}

impl LeafKind {
    pub fn is_stable(self) -> bool {
        self == LeafKind::Stable
    }
}

/// Integral curve of `e_n` or `f_n`, sampled at uniform arclength `step`.
///
/// Vertices are stored as offsets from `origin`; the curve passes through
/// `origin + base_offset` at parameter 0.
#[derive(Clone, Debug, PartialEq)]
pub struct ManifoldCurve {
    pub origin: Point2,
    pub base_offset: Vec2,
    pub n: usize,
    pub kind: LeafKind,
    pub tau: f64,
    pub step: f64,
    pub offsets: Vec<Vec2>,
    pub tangents: Vec<Vec2>,
    pub base_index: usize,
    pub arclength: f64,
    /// The integration stopped early on leaving `U_n`.
    pub truncated: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveRecord {
    pub base: Point2,
    pub n: usize,
    pub kind: LeafKind,
    pub step: f64,
    pub arclength: f64,
    pub truncated: bool,
    pub vertices: Vec<Point2>,
}

fn field(sys: &SurfaceSystem, p: Point2, n: usize, kind: LeafKind, tau: f64) -> Result<Vec2> {
    field_direction(sys, p, n, kind.is_stable(), tau)
}

/// One RK4 step of the unit field from `p`, signs aligned with `reference`.
fn rk4(
    sys: &SurfaceSystem,
    p: Point2,
    reference: Vec2,
    h: f64,
    n: usize,
    kind: LeafKind,
    tau: f64,
) -> Result<Vec2> {
    let k1 = field(sys, p, n, kind, tau)?.aligned_with(reference);
    let k2 = field(sys, p + k1 * (0.5 * h), n, kind, tau)?.aligned_with(k1);
    let k3 = field(sys, p + k2 * (0.5 * h), n, kind, tau)?.aligned_with(k1);
    let k4 = field(sys, p + k3 * h, n, kind, tau)?.aligned_with(k1);
    Ok((k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0))
}

/// Trace `E_n(z)` or `F_n(z)` from `origin + base_offset`, `back` and `fwd`
/// arclength on each side, oriented along `orient` when given.
#[allow(clippy::too_many_arguments)]
pub fn trace_leaf(
    sys: &SurfaceSystem,
    origin: Point2,
    base_offset: Vec2,
    n: usize,
    kind: LeafKind,
    back: f64,
    fwd: f64,
    step: f64,
    tau: f64,
    orient: Option<Vec2>,
) -> Result<ManifoldCurve> {
    if !(step > 0.0) || !(back >= 0.0) || !(fwd >= 0.0) {
        return Err(Error::InvalidParameter("trace needs positive step and nonnegative lengths".into()));
    }
    let base = origin + base_offset;
    let mut t0 = field(sys, base, n, kind, tau)?;
    if let Some(o) = orient {
        t0 = t0.aligned_with(o);
    }
    let mut truncated = false;
    let mut sides: [(Vec<Vec2>, Vec<Vec2>); 2] = [(Vec::new(), Vec::new()), (Vec::new(), Vec::new())];
    for (side, (len, sign)) in [(fwd, 1.0), (back, -1.0)].into_iter().enumerate() {
        let steps = (len / step - 1e-9).ceil().max(0.0) as usize;
        let mut off = base_offset;
        let mut dir = t0 * sign;
        for m in 0..steps {
            let next = rk4(sys, origin + off, dir, step, n, kind, tau).and_then(|inc| {
                let o = off + inc;
                field(sys, origin + o, n, kind, tau).map(|t| (o, t.aligned_with(dir)))
            });
            match next {
                Ok((o, t)) => {
                    off = o;
                    dir = t;
                    sides[side].0.push(off);
                    sides[side].1.push(dir * sign);
                }
                Err(Error::Degenerate { .. }) if m > 0 => {
                    truncated = true;
                    break;
                }
                Err(Error::Degenerate { n, ratio }) => {
                    return Err(Error::Tracing(format!(
                        "left U_{n} immediately (ratio {ratio}) at {:?}",
                        origin + off
                    )))
                }
                Err(e) => return Err(e),
            }
        }
    }
    let [(fo, ft), (bo, bt)] = sides;
    let base_index = bo.len();
    let mut offsets: Vec<Vec2> = bo.into_iter().rev().collect();
    let mut tangents: Vec<Vec2> = bt.into_iter().rev().collect();
    offsets.push(base_offset);
    tangents.push(t0);
    offsets.extend(fo);
    tangents.extend(ft);
    let arclength = offsets.windows(2).map(|w| (w[1] - w[0]).norm()).sum();
    Ok(ManifoldCurve {
        origin,
        base_offset,
        n,
        kind,
        tau,
        step,
        offsets,
        tangents,
        base_index,
        arclength,
        truncated,
    })
}

/// Trace `halflength` both ways from `z` with the default step `halflength/256`.
pub fn trace_manifold(
    sys: &SurfaceSystem,
    z: Point2,
    n: usize,
    kind: LeafKind,
    halflength: f64,
    tau: f64,
) -> Result<ManifoldCurve> {
    if !(halflength > 0.0) {
        return Err(Error::InvalidParameter("halflength must be positive".into()));
    }
    trace_leaf(sys, z, Vec2::ZERO, n, kind, halflength, halflength, halflength / STEPS_PER_HALFLENGTH, tau, None)
}

impl ManifoldCurve {
    pub fn base(&self) -> Point2 {
        self.origin + self.base_offset
    }

    pub fn vertices(&self) -> Vec<Point2> {
        self.offsets.iter().map(|&o| self.origin + o).collect()
    }

    pub fn record(&self) -> CurveRecord {
        CurveRecord {
            base: self.base(),
            n: self.n,
            kind: self.kind,
            step: self.step,
            arclength: self.arclength,
            truncated: self.truncated,
            vertices: self.vertices(),
        }
    }

    /// Parameter range `[lo, hi]` covered by the vertices.
    pub fn range(&self) -> (f64, f64) {
        let lo = -(self.base_index as f64) * self.step;
        let hi = (self.offsets.len() - 1 - self.base_index) as f64 * self.step;
        (lo, hi)
    }

    /// Offset from `origin` and unit tangent at parameter `sigma` (RK4 from the nearest vertex).
    pub fn eval(&self, sys: &SurfaceSystem, sigma: f64) -> Result<(Vec2, Vec2)> {
        let (lo, hi) = self.range();
        let slack = 0.5 * self.step;
        if !(sigma >= lo - slack && sigma <= hi + slack) {
            return Err(Error::Tracing(format!(
                "parameter {sigma} outside traced range [{lo}, {hi}] of {:?} leaf",
                self.kind
            )));
        }
        let rel = sigma / self.step;
        let idx = ((rel.round() as i64) + self.base_index as i64).clamp(0, self.offsets.len() as i64 - 1) as usize;
        let dh = sigma - (idx as f64 - self.base_index as f64) * self.step;
        let v = self.offsets[idx];
        let t = self.tangents[idx];
        if dh == 0.0 {
            return Ok((v, t));
        }
        let inc = rk4(sys, self.origin + v, t, dh, self.n, self.kind, self.tau)?;
        let o = v + inc;
        let tan = field(sys, self.origin + o, self.n, self.kind, self.tau)?.aligned_with(t);
        Ok((o, tan))
    }

    pub fn max_turning_angle(&self) -> f64 {
        self.offsets
            .windows(3)
            .map(|w| (w[1] - w[0]).angle(w[2] - w[1]))
            .fold(0.0, f64::max)
    }

    /// Largest angle between the stored tangent and the traced field.
    pub fn max_tangent_error(&self, sys: &SurfaceSystem) -> Result<f64> {
        let mut worst = 0.0f64;
        for (o, t) in self.offsets.iter().zip(&self.tangents) {
            let f = field(sys, self.origin + *o, self.n, self.kind, self.tau)?;
            worst = worst.max(f.line_angle(*t));
        }
        for w in self.offsets.windows(2).zip(self.tangents.windows(2)) {
            let chord = w.0[1] - w.0[0];
            worst = worst.max(chord.line_angle(w.1[0] + w.1[1]));
        }
        Ok(worst)
    }
}

/// Parameters `(σ, τ)` with `a(σ) = b(τ)`, by Newton from a guess.
///
/// Returns the parameters and the final gap.
pub fn intersect(
    sys: &SurfaceSystem,
    a: &ManifoldCurve,
    b: &ManifoldCurve,
    guess: (f64, f64),
    tol: f64,
) -> Result<(f64, f64, f64)> {
    let (mut s, mut t) = guess;
    let shift = a.origin - b.origin;
    let mut gap = f64::INFINITY;
    for _ in 0..40 {
        let (pa, ta) = a.eval(sys, s)?;
        let (pb, tb) = b.eval(sys, t)?;
        let r = (pa - pb) + shift;
        gap = r.norm();
        let det = ta.cross(-tb);
        if det.abs() < 1e-12 {
            return Err(Error::Tracing("leaves are tangent at the crossing".into()));
        }
        // solve ta·ds − tb·dt = −r
        let ds = (-r).cross(-tb) / det;
        let dt = ta.cross(-r) / det;
        s += ds;
        t += dt;
        if ds.abs().max(dt.abs()) <= tol {
            let (pa, _) = a.eval(sys, s)?;
            let (pb, _) = b.eval(sys, t)?;
            gap = ((pa - pb) + shift).norm();
            return Ok((s, t, gap));
        }
    }
    Err(Error::Tracing(format!("leaf intersection did not converge (gap {gap:e})")))
}
