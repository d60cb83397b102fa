use super::trace::{intersect, trace_leaf, LeafKind, ManifoldCurve};
use crate::cocycle::finite_time_fields;
use crate::dynamics::SurfaceSystem;
use crate::error::{Error, Result};
use crate::linalg::{Mat2, Point2, Vec2};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

pub const DEFAULT_GRID: usize = 16;
pub const DEFAULT_K_TOL: f64 = 0.01;

/// Nodes `φ(i/G, j/G)` stored as offsets from `origin`, row-major in `s`:
/// node `(i, j)` sits at index `j·(G+1) + i`.
#[derive(Clone, Debug, PartialEq)]
pub struct ChartGrid {
    pub origin: Point2,
    pub g: usize,
    pub offsets: Vec<Vec2>,
}

impl ChartGrid {
    pub fn new(origin: Point2, g: usize, offsets: Vec<Vec2>) -> Result<Self> {
        if g < 3 {
            return Err(Error::InvalidParameter("chart grids need G >= 3".into()));
        }
        if offsets.len() != (g + 1) * (g + 1) {
            return Err(Error::InvalidParameter("grid size mismatch".into()));
        }
        Ok(ChartGrid { origin, g, offsets })
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * (self.g + 1) + i
    }

    pub fn node(&self, i: usize, j: usize) -> Vec2 {
        self.offsets[self.idx(i, j)]
    }

    /// Cubic Lagrange interpolation at grid parameters `(t, s)`, with its partials.
    pub fn interp(&self, t: f64, s: f64) -> (Vec2, Vec2, Vec2) {
        let g = self.g as f64;
        let (it, wt, dt) = stencil(t * g, self.g);
        let (is, ws, ds) = stencil(s * g, self.g);
        let mut v = Vec2::ZERO;
        let mut pt = Vec2::ZERO;
        let mut ps = Vec2::ZERO;
        for b in 0..4 {
            for a in 0..4 {
                let o = self.node(it + a, is + b);
                v += o * (wt[a] * ws[b]);
                pt += o * (dt[a] * ws[b] * g);
                ps += o * (wt[a] * ds[b] * g);
            }
        }
        (v, pt, ps)
    }
}

/// Four-point Lagrange weights and derivative weights at `x` (in node units).
fn stencil(x: f64, g: usize) -> (usize, [f64; 4], [f64; 4]) {
    let i0 = (x.floor() as i64 - 1).clamp(0, g as i64 - 3) as usize;
    let xs = [i0 as f64, i0 as f64 + 1.0, i0 as f64 + 2.0, i0 as f64 + 3.0];
    let mut w = [0.0; 4];
    let mut d = [0.0; 4];
    for m in 0..4 {
        let mut denom = 1.0;
        for k in 0..4 {
            if k != m {
                denom *= xs[m] - xs[k];
            }
        }
        let mut prod = 1.0;
        for k in 0..4 {
            if k != m {
                prod *= x - xs[k];
            }
        }
        w[m] = prod / denom;
        let mut sum = 0.0;
        for l in 0..4 {
            if l == m {
                continue;
            }
            let mut p = 1.0;
            for k in 0..4 {
                if k != m && k != l {
                    p *= x - xs[k];
                }
            }
            sum += p;
        }
        d[m] = sum / denom;
    }
    (i0, w, d)
}

/// A discretized admissible chart `φ_{x,n}: [0,1]² → R_n`.
///
/// `t` runs along the stable leaves, `s` along the unstable ones. Sub-charts
/// share the parent grid and carry an affine window `[t0,t1]×[s0,s1]`.
#[derive(Clone, Debug)]
pub struct AdmissibleChart {
    pub x: Point2,
    pub n: usize,
    /// Stable fiber length through the center.
    pub l_e: f64,
    /// Unstable fiber length through the center.
    pub l_f: f64,
    pub k_tol: f64,
    /// Sampling resolution used by checks.
    pub g: usize,
    pub grid: Arc<ChartGrid>,
    pub window: [f64; 4],
    /// Largest gap between the two leaves at a computed node.
    pub commutation_defect: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChartRecord {
    pub x: Point2,
    pub n: usize,
    pub l_e: f64,
    pub l_f: f64,
    pub k_tol: f64,
    pub g: usize,
    pub window: [f64; 4],
    pub nodes: Vec<Point2>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChartOptions {
    pub g: usize,
    pub tau: f64,
    pub k_tol: f64,
    /// Extra traced length on each leaf, as a fraction of the needed span.
    pub margin: f64,
    /// RK4 steps per leaf span.
    pub steps: usize,
}

impl Default for ChartOptions {
    fn default() -> Self {
        ChartOptions { g: DEFAULT_GRID, tau: crate::cocycle::DEFAULT_TAU, k_tol: DEFAULT_K_TOL, margin: 0.5, steps: 256 }
    }
}

pub fn build_chart(
    sys: &SurfaceSystem,
    x: Point2,
    n: usize,
    l_e: f64,
    l_f: f64,
    g: usize,
    tau: f64,
) -> Result<AdmissibleChart> {
    let opts = ChartOptions { g, tau, ..ChartOptions::default() };
    build_chart_with(sys, x, n, (-0.5 * l_e, 0.5 * l_e), (-0.5 * l_f, 0.5 * l_f), &opts)
}

/// Chart whose stable axis through `x` spans arclength `e_span` and unstable axis `f_span`.
pub fn build_chart_with(
    sys: &SurfaceSystem,
    x: Point2,
    n: usize,
    e_span: (f64, f64),
    f_span: (f64, f64),
    opts: &ChartOptions,
) -> Result<AdmissibleChart> {
    let l_e = e_span.1 - e_span.0;
    let l_f = f_span.1 - f_span.0;
    if !(l_e > 0.0 && l_f > 0.0) || !l_e.is_finite() || !l_f.is_finite() {
        return Err(Error::InvalidParameter(format!("chart side lengths must be positive, got {l_e}, {l_f}")));
    }
    if !(e_span.0 <= 0.0 && e_span.1 >= 0.0 && f_span.0 <= 0.0 && f_span.1 >= 0.0) {
        return Err(Error::InvalidParameter("axis spans must contain the base point".into()));
    }
    let g = opts.g;
    if g < 3 {
        return Err(Error::InvalidParameter("chart grids need G >= 3".into()));
    }
    let fs = finite_time_fields(sys, x, n, opts.tau)?;
    let (e0, f0) = (fs.e_n, fs.f_n);
    let he = l_e / opts.steps as f64;
    let hf = l_f / opts.steps as f64;
    let pad = |span: (f64, f64), len: f64| ((-span.0) + opts.margin * len, span.1 + opts.margin * len);
    let (eb, ef) = pad(e_span, l_e);
    let (fb, ff) = pad(f_span, l_f);

    let axis_e = trace_leaf(sys, x, Vec2::ZERO, n, LeafKind::Stable, eb, ef, he, opts.tau, Some(e0))?;
    let axis_f = trace_leaf(sys, x, Vec2::ZERO, n, LeafKind::Unstable, fb, ff, hf, opts.tau, Some(f0))?;
    let ts: Vec<f64> = (0..=g).map(|i| e_span.0 + l_e * i as f64 / g as f64).collect();
    let ss: Vec<f64> = (0..=g).map(|j| f_span.0 + l_f * j as f64 / g as f64).collect();

    // columns: unstable leaves through stable-axis samples; rows: stable leaves through unstable-axis samples
    let mut cols: Vec<ManifoldCurve> = Vec::with_capacity(g + 1);
    for &t in &ts {
        let (o, _) = axis_e.eval(sys, t)?;
        cols.push(trace_leaf(sys, x, o, n, LeafKind::Unstable, fb, ff, hf, opts.tau, Some(f0))?);
    }
    let mut rows: Vec<ManifoldCurve> = Vec::with_capacity(g + 1);
    for &s in &ss {
        let (o, _) = axis_f.eval(sys, s)?;
        rows.push(trace_leaf(sys, x, o, n, LeafKind::Stable, eb, ef, he, opts.tau, Some(e0))?);
    }

    let size = l_e.max(l_f);
    let tol = 1e-13 * size;
    let mut offsets = vec![Vec2::ZERO; (g + 1) * (g + 1)];
    let mut defect = 0.0f64;
    for (j, row) in rows.iter().enumerate() {
        let mut guess_t = ss[j];
        for (i, col) in cols.iter().enumerate() {
            let (sig, tau_p, gap) = intersect(sys, row, col, (ts[i], guess_t), tol)?;
            guess_t = tau_p;
            let (o, _) = row.eval(sys, sig)?;
            offsets[j * (g + 1) + i] = o;
            defect = defect.max(gap);
        }
    }
    let grid = ChartGrid::new(x, g, offsets)?;
    let mut chart = AdmissibleChart {
        x,
        n,
        l_e,
        l_f,
        k_tol: opts.k_tol,
        g,
        grid: Arc::new(grid),
        window: [0.0, 1.0, 0.0, 1.0],
        commutation_defect: defect,
    };
    let (le, lf) = chart.center_lengths();
    chart.l_e = le;
    chart.l_f = lf;
    Ok(chart)
}

impl AdmissibleChart {
    pub fn origin(&self) -> Point2 {
        self.grid.origin
    }

    fn to_grid(&self, t: f64, s: f64) -> (f64, f64) {
        let [t0, t1, s0, s1] = self.window;
        (t0 + t * (t1 - t0), s0 + s * (s1 - s0))
    }

    fn grid_to_unit(&self, gt: f64, gs: f64) -> (f64, f64) {
        let [t0, t1, s0, s1] = self.window;
        ((gt - t0) / (t1 - t0), (gs - s0) / (s1 - s0))
    }

    /// Offset of `φ(t, s)` from the grid origin.
    pub fn eval_offset(&self, t: f64, s: f64) -> Vec2 {
        let (gt, gs) = self.to_grid(t, s);
        self.grid.interp(gt, gs).0
    }

    pub fn eval(&self, t: f64, s: f64) -> Point2 {
        self.origin() + self.eval_offset(t, s)
    }

    /// `Dφ(t, s)` with columns `∂_t φ`, `∂_s φ`.
    pub fn derivative(&self, t: f64, s: f64) -> Mat2 {
        let (gt, gs) = self.to_grid(t, s);
        let (_, pt, ps) = self.grid.interp(gt, gs);
        let [t0, t1, s0, s1] = self.window;
        Mat2::from_cols(pt * (t1 - t0), ps * (s1 - s0))
    }

    /// Chart parameters of a point given as an offset from the grid origin.
    pub fn locate_offset(&self, target: Vec2) -> Option<(f64, f64)> {
        let grid = &*self.grid;
        let g = grid.g;
        // start from the nearest node inside the window
        let [t0, t1, s0, s1] = self.window;
        let mut best = (f64::INFINITY, 0.5, 0.5);
        let probes = 8;
        for b in 0..=probes {
            for a in 0..=probes {
                let (gt, gs) = (t0 + (t1 - t0) * a as f64 / probes as f64, s0 + (s1 - s0) * b as f64 / probes as f64);
                let d = (grid.interp(gt, gs).0 - target).norm();
                if d < best.0 {
                    best = (d, gt, gs);
                }
            }
        }
        let (_, mut gt, mut gs) = best;
        let lo = -0.5 / g as f64 - 0.5;
        let hi = 1.5 + 0.5 / g as f64;
        let scale = self.l_e.max(self.l_f).max(f64::MIN_POSITIVE);
        for _ in 0..60 {
            let (v, pt, ps) = grid.interp(gt, gs);
            let r = v - target;
            let m = Mat2::from_cols(pt, ps);
            let inv = m.inverse()?;
            let d = inv * r;
            gt -= d.x;
            gs -= d.y;
            if !(gt > lo && gt < hi && gs > lo && gs < hi) {
                return None;
            }
            if d.norm() < 1e-14 && r.norm() < 1e-12 * scale {
                break;
            }
        }
        let r = (grid.interp(gt, gs).0 - target).norm();
        if r > 1e-9 * scale {
            return None;
        }
        Some(self.grid_to_unit(gt, gs))
    }

    pub fn locate(&self, p: Point2) -> Option<(f64, f64)> {
        self.locate_offset(p - self.origin())
    }

    /// `p` lies in `φ([−tol, 1+tol]²)`.
    pub fn contains(&self, p: Point2, tol: f64) -> bool {
        match self.locate(p) {
            Some((t, s)) => t >= -tol && t <= 1.0 + tol && s >= -tol && s <= 1.0 + tol,
            None => false,
        }
    }

    /// The chart restricted to `[a0,a1]×[b0,b1]` and reparametrized from the unit square.
    pub fn subchart(&self, a0: f64, a1: f64, b0: f64, b1: f64) -> AdmissibleChart {
        let (t0, s0) = self.to_grid(a0, b0);
        let (t1, s1) = self.to_grid(a1, b1);
        let mut c = AdmissibleChart { window: [t0, t1, s0, s1], ..self.clone() };
        let center = c.eval(0.5, 0.5);
        c.x = center;
        let (le, lf) = c.center_lengths();
        c.l_e = le;
        c.l_f = lf;
        c
    }

    /// Sample offsets at `(i/G, j/G)`, `G = self.g`, row-major in `s`.
    pub fn sample_offsets(&self) -> Vec<Vec2> {
        let g = self.g;
        if self.window == [0.0, 1.0, 0.0, 1.0] && g == self.grid.g {
            return self.grid.offsets.clone();
        }
        let mut out = Vec::with_capacity((g + 1) * (g + 1));
        for j in 0..=g {
            for i in 0..=g {
                out.push(self.eval_offset(i as f64 / g as f64, j as f64 / g as f64));
            }
        }
        out
    }

    pub fn sample_nodes(&self) -> Vec<Point2> {
        let o = self.origin();
        self.sample_offsets().into_iter().map(|d| o + d).collect()
    }

    /// Polyline lengths of the stable fiber `s = 1/2` and unstable fiber `t = 1/2`.
    pub fn center_lengths(&self) -> (f64, f64) {
        let m = 4 * self.g.max(4);
        let mut le = 0.0;
        let mut lf = 0.0;
        let mut pe = self.eval_offset(0.0, 0.5);
        let mut pf = self.eval_offset(0.5, 0.0);
        for k in 1..=m {
            let u = k as f64 / m as f64;
            let qe = self.eval_offset(u, 0.5);
            let qf = self.eval_offset(0.5, u);
            le += (qe - pe).norm();
            lf += (qf - pf).norm();
            pe = qe;
            pf = qf;
        }
        (le, lf)
    }

    pub fn record(&self) -> ChartRecord {
        ChartRecord {
            x: self.x,
            n: self.n,
            l_e: self.l_e,
            l_f: self.l_f,
            k_tol: self.k_tol,
            g: self.g,
            window: self.window,
            nodes: self.sample_nodes(),
        }
    }

    /// Grid polylines as `(t, s, u, v)` rows: all rows of constant `s`, then all columns of constant `t`.
    pub fn polylines(&self) -> Vec<(f64, f64, Point2)> {
        let g = self.g;
        let nodes = self.sample_nodes();
        let mut out = Vec::with_capacity(2 * nodes.len());
        for j in 0..=g {
            for i in 0..=g {
                out.push((i as f64 / g as f64, j as f64 / g as f64, nodes[j * (g + 1) + i]));
            }
        }
        for i in 0..=g {
            for j in 0..=g {
                out.push((i as f64 / g as f64, j as f64 / g as f64, nodes[j * (g + 1) + i]));
            }
        }
        out
    }
}
