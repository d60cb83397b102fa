//! Families of contracting charts covering the finite-time hyperbolic part of a
//! Bowen ball, built level by level with subdivide → saturate → cut.
//!
//! All geometry is in the rescaled frame around the orbit of `x`: a point `p`
//! at time `k` is represented by `(T^k p − T^k x)/ε`. Target sets are sampled
//! on a grid in the ε-square at `x`.

use crate::cocycle::{lambda_plus_of, lyapunov_qr, DEFAULT_TAU};
use crate::dynamics::SurfaceSystem;
use crate::error::{Error, Result};
use crate::hypersets::{
    floor_plus, k_sequence_from_jacobians, membership_from_jacobians, shannon_h, HypParams, KSequence,
};
use crate::linalg::{Mat2, Point2, Vec2};
use crate::rectangles::{
    build_chart_with, predicates_from, saturate, AdmissibleChart, ChartOptions, ChartRecord, NodeDynamics,
    SaturateOptions,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// `D` fitted on the calibration runs (cat map n=12, perturbed cat δ=0.005 n=10), then frozen.
pub const FITTED_D: f64 = 0.0;

/// Tile scale ceiling: `1/(√2·(1+η))` with a little room for interpolation error.
const TILE_SCALE: f64 = 0.7;
/// Largest tile side in parameter units; keeps tiles around middle-ninth targets inside the chart.
const MAX_TILE: f64 = 0.6;
const LOCATE_TOL: f64 = 1e-9;
const CUT_SAMPLES: usize = 64;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoverParams {
    pub hyp: HypParams,
    pub eps: f64,
    #[serde(rename = "K_tol")]
    pub k_tol: f64,
    #[serde(rename = "A_const")]
    pub a_const: f64,
    #[serde(rename = "D_const")]
    pub d_const: f64,
    pub n_threshold: usize,
    pub subdivision_cap: usize,
    /// Chart sample grid `G`.
    pub grid: usize,
    /// Target sampling resolution per axis of the ε-square.
    pub sample_res: usize,
    pub tau: f64,
}

/// `log 20 + 2 log(1 + e/K)`.
pub fn default_a_const(k_tol: f64) -> f64 {
    20f64.ln() + 2.0 * (1.0 + std::f64::consts::E / k_tol).ln()
}

impl CoverParams {
    pub fn new(hyp: HypParams) -> Self {
        let k_tol = 0.1;
        CoverParams {
            hyp,
            eps: 0.01,
            k_tol,
            a_const: default_a_const(k_tol),
            d_const: FITTED_D,
            n_threshold: 8,
            subdivision_cap: 10_000,
            grid: 8,
            sample_res: 512,
            tau: DEFAULT_TAU,
        }
    }

    /// Exponents read off the orbit of `x` (`n` steps), `γ = 0.1`, `C = 1.1`.
    pub fn from_orbit(sys: &SurfaceSystem, x: Point2, n: usize) -> Result<Self> {
        let l = lyapunov_qr(sys, x, n)?;
        Ok(Self::new(HypParams::new(l.chi_plus, l.chi_minus, 0.1, 1.1)?))
    }

    pub fn validate(&self) -> Result<()> {
        self.hyp.validate()?;
        let pos = [self.eps, self.k_tol, self.a_const, self.tau];
        if pos.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::InvalidParameter("eps, K_tol, A_const, tau must be positive".into()));
        }
        if !(self.d_const >= 0.0) {
            return Err(Error::InvalidParameter("D_const must be nonnegative".into()));
        }
        if self.n_threshold < 2 || self.subdivision_cap == 0 || self.grid < 3 || self.sample_res < 2 {
            return Err(Error::InvalidParameter("need n_threshold >= 2, subdivision_cap > 0, grid >= 3, sample_res >= 2".into()));
        }
        Ok(())
    }
}

/// Grid points of the ε-square at `x` with the level up to which each stays a target.
#[derive(Clone, Debug)]
pub struct TargetSample {
    pub x: Point2,
    pub eps: f64,
    pub res: usize,
    /// Offsets from `x` of points with `survive ≥ 1`.
    pub offsets: Vec<Vec2>,
    /// Largest `m` with the point in `H^m ∩ H(K_m) ∩ B(x, m+1, ε)`.
    pub survive: Vec<usize>,
    pub total: usize,
}

impl TargetSample {
    pub fn level(&self, m: usize) -> Vec<Vec2> {
        self.offsets.iter().zip(&self.survive).filter(|(_, &s)| s >= m).map(|(&d, _)| d).collect()
    }

    pub fn count(&self, m: usize) -> usize {
        self.survive.iter().filter(|&&s| s >= m).count()
    }
}

/// Samples `res²` points `x + (i − res/2)·2ε/res` and their survival levels up to `n_max`.
pub fn sample_targets(
    sys: &SurfaceSystem,
    x: Point2,
    hyp: &HypParams,
    eps: f64,
    res: usize,
    n_max: usize,
) -> Result<TargetSample> {
    if n_max < 2 {
        return Err(Error::InvalidParameter("target sampling needs n >= 2".into()));
    }
    let x_jac = sys.forward_jacobians(x, n_max)?;
    let x_ks = k_sequence_from_jacobians(&x_jac)?.ks;
    let h = 2.0 * eps / res as f64;
    let half = (res / 2) as f64;
    let rows: Vec<Result<Vec<(Vec2, usize)>>> = (0..res)
        .into_par_iter()
        .map(|j| {
            let row: Vec<Vec2> =
                (0..res).map(|i| Vec2::new((i as f64 - half) * h, (j as f64 - half) * h)).collect();
            let (orbit, images) = sys.propagate_offsets(x, &row, n_max);
            let mut out = Vec::new();
            for (idx, &d0) in row.iter().enumerate() {
                let exit = (0..=n_max).find(|&k| images[k][idx].norm() >= eps).unwrap_or(n_max + 1);
                if exit < 2 {
                    continue;
                }
                let len = (exit - 1).min(n_max);
                let jac: Vec<Mat2> = (0..len).map(|k| sys.jacobian(orbit[k] + images[k][idx])).collect();
                let fail = membership_from_jacobians(&jac, hyp)?.first_failure().unwrap_or(usize::MAX);
                let ks = k_sequence_from_jacobians(&jac)?.ks;
                let mismatch = ks.iter().zip(&x_ks).position(|(a, b)| a != b).map(|p| p + 1).unwrap_or(usize::MAX);
                let s = len.min(fail.saturating_sub(1)).min(mismatch);
                if s >= 1 {
                    out.push((d0, s));
                }
            }
            Ok(out)
        })
        .collect();
    let mut offsets = Vec::new();
    let mut survive = Vec::new();
    for r in rows {
        for (d, s) in r? {
            offsets.push(d);
            survive.push(s);
        }
    }
    Ok(TargetSample { x, eps, res, offsets, survive, total: res * res })
}

/// `[K⁻¹e^{k}] + 1`, the number of subsquares per axis.
pub fn subdivision_per_axis(k_n: u64, k_tol: f64) -> usize {
    ((k_n as f64).exp() / k_tol).floor() as usize + 1
}

/// Subchart whose middle ninth is cell `(a, b)` of the `m×m` division of the middle ninth.
pub fn subdivision_cell(chart: &AdmissibleChart, m: usize, a: usize, b: usize) -> AdmissibleChart {
    let w = 1.0 / (9.0 * m as f64);
    let ct = 4.0 / 9.0 + (a as f64 + 0.5) * w;
    let cs = 4.0 / 9.0 + (b as f64 + 0.5) * w;
    let half = 4.5 * w;
    chart.subchart(ct - half, ct + half, cs - half, cs + half)
}

/// All `([K⁻¹e^{k_n}]+1)²` subcharts, row-major in `s`; their middle ninths tile the parent's.
pub fn subdivide(chart: &AdmissibleChart, k_n: u64, k_tol: f64, cap: usize) -> Result<Vec<AdmissibleChart>> {
    let m = subdivision_per_axis(k_n, k_tol);
    if m.saturating_mul(m) > cap {
        return Err(Error::SizeCap(format!("subdivision into {m}² charts exceeds cap {cap}")));
    }
    let mut out = Vec::with_capacity(m * m);
    for b in 0..m {
        for a in 0..m {
            out.push(subdivision_cell(chart, m, a, b));
        }
    }
    Ok(out)
}

/// Rescaled sample images `(T^kφ(node) − T^k x)/ε`, `k = 0..=kmax`.
fn rescaled_images(sys: &SurfaceSystem, x: Point2, chart: &AdmissibleChart, kmax: usize, eps: f64) -> Vec<Vec<Vec2>> {
    let shift = sys.displacement(x, chart.origin());
    let offsets: Vec<Vec2> = chart.sample_offsets().into_iter().map(|d| d + shift).collect();
    let (_, images) = sys.propagate_offsets(x, &offsets, kmax);
    images.into_iter().map(|v| v.into_iter().map(|d| d * (1.0 / eps)).collect()).collect()
}

/// Largest grid-difference quotient of a sampled map on a `(g+1)²` grid.
fn grid_derivative(im: &[Vec2], g: usize) -> f64 {
    let gf = g as f64;
    let mut worst = 0.0f64;
    for j in 0..g {
        for i in 0..g {
            let o = im[j * (g + 1) + i];
            let dt = (im[j * (g + 1) + i + 1] - o) * gf;
            let ds = (im[(j + 1) * (g + 1) + i] - o) * gf;
            worst = worst.max(Mat2::from_cols(dt, ds).norm());
        }
    }
    worst
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CutRecord {
    pub a: f64,
    pub b: f64,
    /// `max ‖D(T^{n}∘φ)‖` of the cut chart in the rescaled frame.
    pub image_norm: f64,
    /// Rescaled length of the center unstable fiber's image at time `n`.
    pub image_length: f64,
    /// `image_norm ≤ 2 + 3K`.
    pub norm_within_slack: bool,
}

#[derive(Clone, Debug)]
pub enum CutOutcome {
    Kept { chart: AdmissibleChart, record: CutRecord },
    Skipped { reason: String },
}

/// Restricts `chart` to the `s`-range whose time-`n` image lies in the radius-3/2 ball.
pub fn cut(sys: &SurfaceSystem, x: Point2, chart: &AdmissibleChart, eps: f64, k_tol: f64) -> Result<CutOutcome> {
    let n = chart.n;
    let g = chart.g;
    let ns = CUT_SAMPLES;
    let shift = sys.displacement(x, chart.origin());
    let mut pts = Vec::with_capacity((g + 1) * (ns + 1));
    for j in 0..=ns {
        for i in 0..=g {
            pts.push(chart.eval_offset(i as f64 / g as f64, j as f64 / ns as f64) + shift);
        }
    }
    let (_, images) = sys.propagate_offsets(x, &pts, n);
    let z: Vec<f64> = images[n].iter().map(|d| d.norm() / eps).collect();
    if z.iter().all(|&r| r >= 1.0) {
        let closest = z.iter().cloned().fold(f64::INFINITY, f64::min);
        return Ok(CutOutcome::Skipped { reason: format!("image misses the unit ball (closest sample {closest:.4})") });
    }
    let zat = |t: f64, u: f64| {
        let (_, im) = sys.propagate_offsets(x, &[chart.eval_offset(t, u) + shift], n);
        im[n][0].norm() / eps
    };
    // per column, bisect the crossing of the radius-3/2 circle next to the inside samples
    let mut a = 1.0f64;
    let mut b = 0.0f64;
    for i in 0..=g {
        let t = i as f64 / g as f64;
        let col: Vec<usize> = (0..=ns).filter(|&j| z[j * (g + 1) + i] <= 1.5).collect();
        let (Some(&jlo), Some(&jhi)) = (col.first(), col.last()) else { continue };
        let cross = |inside: usize, outside: usize| {
            let (mut si, mut so) = (inside as f64 / ns as f64, outside as f64 / ns as f64);
            for _ in 0..50 {
                let mid = 0.5 * (si + so);
                if zat(t, mid) <= 1.5 {
                    si = mid;
                } else {
                    so = mid;
                }
            }
            so
        };
        a = a.min(if jlo == 0 { 0.0 } else { cross(jlo, jlo - 1) });
        b = b.max(if jhi == ns { 1.0 } else { cross(jhi, jhi + 1) });
    }
    if a >= b {
        return Ok(CutOutcome::Skipped { reason: "no sample of the image within radius 3/2".into() });
    }
    let a = (a - 1e-9).max(0.0);
    let b = (b + 1e-9).min(1.0);
    let cutc = if a == 0.0 && b == 1.0 { chart.clone() } else { chart.subchart(0.0, 1.0, a, b) };
    let im = rescaled_images(sys, x, &cutc, n, eps);
    let image_norm = grid_derivative(&im[n], g);
    let mid = g / 2;
    let image_length: f64 = (0..g).map(|j| (im[n][(j + 1) * (g + 1) + mid] - im[n][j * (g + 1) + mid]).norm()).sum();
    let record = CutRecord { a, b, image_norm, image_length, norm_within_slack: image_norm <= 2.0 + 3.0 * k_tol };
    Ok(CutOutcome::Kept { chart: cutc, record })
}

fn locate_all(chart: &AdmissibleChart, shift: Vec2, targets: &[Vec2]) -> Vec<(f64, f64)> {
    // cheap bounding-box filter before Newton
    let nodes = chart.sample_offsets();
    let (mut lo, mut hi) = (Vec2::new(f64::INFINITY, f64::INFINITY), Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY));
    for d in &nodes {
        let p = *d + shift;
        lo = Vec2::new(lo.x.min(p.x), lo.y.min(p.y));
        hi = Vec2::new(hi.x.max(p.x), hi.y.max(p.y));
    }
    let pad = 0.05 * (hi - lo).norm();
    targets
        .iter()
        .filter(|p| p.x >= lo.x - pad && p.x <= hi.x + pad && p.y >= lo.y - pad && p.y <= hi.y + pad)
        .filter_map(|&p| chart.locate_offset(p - shift))
        .collect()
}

fn in_box(p: (f64, f64), lo: f64, hi: f64, tol: f64) -> bool {
    p.0 >= lo - tol && p.0 <= hi + tol && p.1 >= lo - tol && p.1 <= hi + tol
}

/// Splits `chart` into isotropic tiles of side `sc ≤ 0.7/M` whose middle ninths hold the targets.
fn retile(sys: &SurfaceSystem, x: Point2, chart: &AdmissibleChart, targets: &[Vec2], eps: f64) -> Vec<AdmissibleChart> {
    let shift = sys.displacement(x, chart.origin());
    let located: Vec<(f64, f64)> =
        locate_all(chart, shift, targets).into_iter().filter(|&p| in_box(p, 0.0, 1.0, LOCATE_TOL)).collect();
    if located.is_empty() {
        return Vec::new();
    }
    let n = chart.n;
    let im = rescaled_images(sys, x, chart, n, eps);
    let mut m = 4.0 * grid_derivative(&im[0], chart.g);
    for k in 1..=n {
        m = m.max(grid_derivative(&im[k], chart.g));
    }
    let sc = (TILE_SCALE / m).min(MAX_TILE);
    let w = sc / 9.0;
    let mut cells: BTreeMap<(i64, i64), Vec<(f64, f64)>> = BTreeMap::new();
    for &(t, s) in &located {
        cells.entry(((t / w).floor() as i64, (s / w).floor() as i64)).or_default().push((t, s));
    }
    let mut tiles = Vec::new();
    for ((ci, cj), pts) in cells {
        let c = ((ci as f64 + 0.5) * w, (cj as f64 + 0.5) * w);
        let fits = |c: (f64, f64), h: f64| c.0 - h >= -LOCATE_TOL && c.0 + h <= 1.0 + LOCATE_TOL && c.1 - h >= -LOCATE_TOL && c.1 + h <= 1.0 + LOCATE_TOL;
        if fits(c, sc / 2.0) {
            tiles.push(chart.subchart(c.0 - sc / 2.0, c.0 + sc / 2.0, c.1 - sc / 2.0, c.1 + sc / 2.0));
            continue;
        }
        // near the chart boundary: one tile per target, centered on it
        for p in pts {
            let edge = p.0.min(1.0 - p.0).min(p.1).min(1.0 - p.1).max(0.0);
            let h = (sc / 2.0).min(edge);
            if h > 0.0 {
                tiles.push(chart.subchart(p.0 - h, p.0 + h, p.1 - h, p.1 + h));
            }
        }
    }
    tiles
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChartCertificate {
    /// `max_k ‖T^kφ − T^k x‖/ε` over the sample grid, `k ≤ n`.
    pub bowen_radius: f64,
    /// `‖Dφ‖` in the rescaled frame.
    pub dphi: f64,
    /// `max_{1≤k≤n} ‖D(T^k∘φ)‖` in the rescaled frame.
    pub max_image_derivative: f64,
    pub h_pass: bool,
    pub f_pass: bool,
    pub g_pass: bool,
}

impl ChartCertificate {
    pub fn contraction_ok(&self) -> bool {
        self.dphi <= 0.25 + 1e-9 && self.max_image_derivative <= 1.0 + 1e-9
    }

    /// First failing item, if any.
    pub fn failure(&self) -> Option<(&'static str, String)> {
        if !(self.bowen_radius <= 2.0) {
            return Some(("(i) Bowen ball", format!("radius {:.6}", self.bowen_radius)));
        }
        if !self.contraction_ok() {
            return Some(("(ii) contraction", format!("|Dphi| {:.6}, max |D(T^k phi)| {:.6}", self.dphi, self.max_image_derivative)));
        }
        if !self.h_pass {
            return Some(("(iii) H_k", String::new()));
        }
        if !self.f_pass {
            return Some(("(iv) F_n", String::new()));
        }
        if !self.g_pass {
            return Some(("(v) G_n", String::new()));
        }
        None
    }
}

pub fn certify_chart(sys: &SurfaceSystem, x: Point2, chart: &AdmissibleChart, eps: f64) -> Result<ChartCertificate> {
    let n = chart.n;
    let im = rescaled_images(sys, x, chart, n, eps);
    let bowen_radius = im.iter().flatten().map(|d| d.norm()).fold(0.0, f64::max);
    let dphi = grid_derivative(&im[0], chart.g);
    let max_image_derivative = (1..=n).map(|k| grid_derivative(&im[k], chart.g)).fold(0.0, f64::max);
    let nd = NodeDynamics::new(sys, chart, n)?;
    let ks: Vec<usize> = (0..=n).collect();
    let pred = predicates_from(&nd, n, &ks, chart.k_tol);
    Ok(ChartCertificate { bowen_radius, dphi, max_image_derivative, h_pass: pred.h.pass, f_pass: pred.f.pass, g_pass: pred.g.pass })
}

#[derive(Clone, Debug)]
pub struct CoverChart {
    /// Lineage: seed tile index, then `subcell/tile` per level.
    pub id: String,
    pub chart: AdmissibleChart,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SkipRecord {
    pub level: usize,
    pub id: String,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelStats {
    pub n: usize,
    pub k_prev: Option<u64>,
    pub targets: usize,
    pub parents: usize,
    pub per_axis: usize,
    pub subcharts: usize,
    pub saturated: usize,
    pub cut_skipped: usize,
    pub count: usize,
    pub growth_factor: f64,
    pub growth_bound: f64,
    /// Most tiles produced from one saturated chart.
    pub max_tiles_per_chart: usize,
    /// Worst `‖D(T^n∘φ)‖` after the cut, against `2 + 3K`.
    pub max_cut_norm: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverStats {
    pub count: usize,
    pub log_count: f64,
    pub bound_vii: f64,
    pub bound_iii: f64,
    pub lambda_plus_n: f64,
}

#[derive(Clone, Debug)]
pub struct CoverFamily {
    pub n: usize,
    pub x: Point2,
    pub charts: Vec<CoverChart>,
    pub k_seq: KSequence,
    pub stats: CoverStats,
    pub levels: Vec<LevelStats>,
    pub skipped: Vec<SkipRecord>,
    pub params: CoverParams,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverChartRecord {
    pub id: String,
    pub chart: ChartRecord,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverFamilyRecord {
    pub n: usize,
    pub x: Point2,
    pub k_seq: KSequence,
    pub stats: CoverStats,
    pub levels: Vec<LevelStats>,
    pub skipped: Vec<SkipRecord>,
    pub charts: Vec<CoverChartRecord>,
}

impl CoverFamily {
    pub fn record(&self) -> CoverFamilyRecord {
        CoverFamilyRecord {
            n: self.n,
            x: self.x,
            k_seq: self.k_seq.clone(),
            stats: self.stats.clone(),
            levels: self.levels.clone(),
            skipped: self.skipped.clone(),
            charts: self.charts.iter().map(|c| CoverChartRecord { id: c.id.clone(), chart: c.chart.record() }).collect(),
        }
    }

    /// The same family without the chart at `index`.
    pub fn without(&self, index: usize) -> CoverFamily {
        let mut f = self.clone();
        f.charts.remove(index);
        f.stats = cover_stats(f.charts.len(), &f.k_seq, f.stats.lambda_plus_n, &f.params, f.n);
        f
    }
}

fn cover_stats(count: usize, k_seq: &KSequence, lambda_plus_n: f64, p: &CoverParams, n: usize) -> CoverStats {
    let nf = n as f64;
    let log_count = if count == 0 { f64::NEG_INFINITY } else { (count as f64).ln() };
    let bound_vii = p.d_const + p.a_const * nf + 2.0 * k_seq.sum() as f64;
    let d = lambda_plus_n - p.hyp.chi_plus;
    let h = shannon_h(floor_plus(d) as f64 + 3.0).unwrap_or(0.0);
    let bound_iii = (2.0 + h) * d.max(0.0) * nf + p.a_const * nf + p.d_const;
    CoverStats { count, log_count, bound_vii, bound_iii, lambda_plus_n }
}

fn certify_level(sys: &SurfaceSystem, x: Point2, charts: &[CoverChart], eps: f64, level: usize) -> Result<()> {
    let certs: Vec<Result<ChartCertificate>> = charts.par_iter().map(|c| certify_chart(sys, x, &c.chart, eps)).collect();
    for (c, cert) in charts.iter().zip(certs) {
        if let Some((item, detail)) = cert?.failure() {
            return Err(Error::Cover { level, item: item.into(), detail: format!("chart {}: {detail}", c.id) });
        }
    }
    Ok(())
}

struct Advance {
    tiles: Vec<CoverChart>,
    skips: Vec<SkipRecord>,
    subcharts: usize,
    saturated: usize,
    cut_skipped: usize,
    max_tiles: usize,
    max_cut_norm: f64,
}

fn advance(
    sys: &SurfaceSystem,
    x: Point2,
    parent: &CoverChart,
    targets: &[Vec2],
    k_m: u64,
    p: &CoverParams,
) -> Result<Advance> {
    let m = parent.chart.n;
    let per = subdivision_per_axis(k_m, p.k_tol);
    if per.saturating_mul(per) > p.subdivision_cap {
        return Err(Error::Cover {
            level: m + 1,
            item: "subdivision cap".into(),
            detail: format!("{per}² subcharts exceed cap {}", p.subdivision_cap),
        });
    }
    let shift = sys.displacement(x, parent.chart.origin());
    let lo = 4.0 / 9.0;
    let w = 1.0 / (9.0 * per as f64);
    let mut cells: BTreeMap<(usize, usize), ()> = BTreeMap::new();
    for (t, s) in locate_all(&parent.chart, shift, targets) {
        if !in_box((t, s), lo, 5.0 / 9.0, LOCATE_TOL) {
            continue;
        }
        let a = (((t - lo) / w).floor().max(0.0) as usize).min(per - 1);
        let b = (((s - lo) / w).floor().max(0.0) as usize).min(per - 1);
        cells.insert((a, b), ());
    }
    let mut out = Advance { tiles: Vec::new(), skips: Vec::new(), subcharts: cells.len(), saturated: 0, cut_skipped: 0, max_tiles: 0, max_cut_norm: 0.0 };
    if cells.is_empty() {
        out.skips.push(SkipRecord { level: m + 1, id: parent.id.clone(), reason: "no target in the middle ninth".into() });
    }
    let sopts = SaturateOptions { k_prime: Some(2.0 * p.k_tol), tau: p.tau, ..SaturateOptions::default() };
    for &(a, b) in cells.keys() {
        let id = format!("{}.{a}-{b}", parent.id);
        let sub = subdivision_cell(&parent.chart, per, a, b);
        let sat = saturate(sys, &sub, &sopts).map_err(|e| Error::Cover {
            level: m + 1,
            item: "saturation".into(),
            detail: format!("chart {id}: {e}"),
        })?;
        out.saturated += 1;
        match cut(sys, x, &sat.chart, p.eps, p.k_tol)? {
            CutOutcome::Skipped { reason } => {
                out.cut_skipped += 1;
                out.skips.push(SkipRecord { level: m + 1, id, reason });
            }
            CutOutcome::Kept { chart, record } => {
                out.max_cut_norm = out.max_cut_norm.max(record.image_norm);
                let tiles = retile(sys, x, &chart, targets, p.eps);
                if tiles.is_empty() {
                    out.skips.push(SkipRecord { level: m + 1, id: id.clone(), reason: "no target in the cut chart".into() });
                }
                out.max_tiles = out.max_tiles.max(tiles.len());
                for (i, c) in tiles.into_iter().enumerate() {
                    out.tiles.push(CoverChart { id: format!("{id}.{i}"), chart: c });
                }
            }
        }
    }
    Ok(out)
}

/// Seed chart at level `n` around `x` containing every target offset.
fn seed_chart(sys: &SurfaceSystem, x: Point2, n: usize, targets: &[Vec2], p: &CoverParams) -> Result<AdmissibleChart> {
    let fs = crate::cocycle::finite_time_fields(sys, x, n, p.tau)?;
    let mut se = 0.0f64;
    let mut sf = 0.0f64;
    for d in targets {
        se = se.max(d.dot(fs.e_n).abs());
        sf = sf.max(d.dot(fs.f_n).abs());
    }
    let jac = sys.forward_jacobians(x, n)?;
    let mut prod = Mat2::IDENTITY;
    let mut growth = 1.0f64;
    for j in &jac {
        prod = *j * prod;
        growth = growth.max(prod.norm());
    }
    let mut l_e = 2.6 * se.max(0.5 * p.eps / p.sample_res as f64);
    let mut l_f = (2.6 * sf).max(1.05 * l_e / growth);
    if l_f > l_e {
        l_e = l_f;
        l_f = l_f.max(1.05 * l_e / growth);
    }
    let opts = ChartOptions { g: p.grid, tau: p.tau, k_tol: p.k_tol, ..ChartOptions::default() };
    build_chart_with(sys, x, n, (-l_e / 2.0, l_e / 2.0), (-l_f / 2.0, l_f / 2.0), &opts)
}

/// Runs the induction from `n_threshold` to `n_final` and certifies every level.
pub fn build_cover(sys: &SurfaceSystem, x: Point2, n_final: usize, p: &CoverParams) -> Result<CoverFamily> {
    p.validate()?;
    let n0 = p.n_threshold;
    if n_final < n0 {
        return Err(Error::InvalidParameter(format!("n_final {n_final} below n_threshold {n0}")));
    }
    let x = sys.canonical(x);
    let x_jac = sys.forward_jacobians(x, n_final)?;
    let k_seq = k_sequence_from_jacobians(&x_jac)?;
    let lambda_plus_n = lambda_plus_of(&x_jac);
    let sample = sample_targets(sys, x, &p.hyp, p.eps, p.sample_res, n_final)?;
    let mut levels = Vec::new();
    let mut skipped = Vec::new();

    let t0 = sample.level(n0);
    let mut family: Vec<CoverChart> = Vec::new();
    if !t0.is_empty() {
        let seed = seed_chart(sys, x, n0, &t0, p)?;
        let shift = sys.displacement(x, seed.origin());
        let inside = locate_all(&seed, shift, &t0).into_iter().filter(|&q| in_box(q, 0.0, 1.0, LOCATE_TOL)).count();
        if inside < t0.len() {
            return Err(Error::Cover {
                level: n0,
                item: "seed".into(),
                detail: format!("seed chart holds {inside} of {} targets", t0.len()),
            });
        }
        family = retile(sys, x, &seed, &t0, p.eps)
            .into_iter()
            .enumerate()
            .map(|(i, c)| CoverChart { id: format!("{i}"), chart: c })
            .collect();
        certify_level(sys, x, &family, p.eps, n0)?;
    }
    levels.push(LevelStats {
        n: n0,
        k_prev: None,
        targets: t0.len(),
        parents: 0,
        per_axis: 1,
        subcharts: 0,
        saturated: 0,
        cut_skipped: 0,
        count: family.len(),
        growth_factor: family.len() as f64,
        growth_bound: f64::INFINITY,
        max_tiles_per_chart: family.len(),
        max_cut_norm: 0.0,
    });

    for m in n0..n_final {
        let k_m = k_seq.ks[m - 1];
        let targets = sample.level(m + 1);
        let per = subdivision_per_axis(k_m, p.k_tol);
        let results: Vec<Result<Advance>> = family.par_iter().map(|c| advance(sys, x, c, &targets, k_m, p)).collect();
        let mut next = Vec::new();
        let mut st = LevelStats {
            n: m + 1,
            k_prev: Some(k_m),
            targets: targets.len(),
            parents: family.len(),
            per_axis: per,
            subcharts: 0,
            saturated: 0,
            cut_skipped: 0,
            count: 0,
            growth_factor: 0.0,
            growth_bound: (per * per) as f64 * 20.0,
            max_tiles_per_chart: 0,
            max_cut_norm: 0.0,
        };
        for r in results {
            let a = r?;
            st.subcharts += a.subcharts;
            st.saturated += a.saturated;
            st.cut_skipped += a.cut_skipped;
            st.max_tiles_per_chart = st.max_tiles_per_chart.max(a.max_tiles);
            st.max_cut_norm = st.max_cut_norm.max(a.max_cut_norm);
            next.extend(a.tiles);
            skipped.extend(a.skips);
        }
        certify_level(sys, x, &next, p.eps, m + 1)?;
        st.count = next.len();
        st.growth_factor = if family.is_empty() { 0.0 } else { next.len() as f64 / family.len() as f64 };
        levels.push(st);
        family = next;
    }

    let stats = cover_stats(family.len(), &k_seq, lambda_plus_n, p, n_final);
    Ok(CoverFamily { n: n_final, x, charts: family, k_seq, stats, levels, skipped, params: p.clone() })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverVerification {
    pub samples: usize,
    pub target_points: usize,
    pub covered: usize,
    pub coverage_fraction: f64,
    /// Fraction of targets inside some chart's middle ninth.
    pub middle_ninth_fraction: f64,
    pub contraction_violations: usize,
    pub max_dphi: f64,
    pub max_image_derivative: f64,
    pub log_count: f64,
    pub bound_iii: f64,
    pub bound_vii: f64,
    pub cardinality_ok: bool,
    pub conforming: bool,
}

/// Coverage of the sampled target set, contraction, and cardinality of `family`.
pub fn verify_cover(
    sys: &SurfaceSystem,
    family: &CoverFamily,
    x: Point2,
    params: &CoverParams,
    samples: usize,
) -> Result<CoverVerification> {
    let n = family.n;
    let x = sys.canonical(x);
    let res = (samples as f64).sqrt().round().max(2.0) as usize;
    let targets = sample_targets(sys, x, &params.hyp, params.eps, res, n)?.level(n);
    let shifts: Vec<Vec2> = family.charts.iter().map(|c| sys.displacement(x, c.chart.origin())).collect();
    let hits: Vec<(bool, bool)> = targets
        .par_iter()
        .map(|&d| {
            let mut hit = (false, false);
            for (c, &sh) in family.charts.iter().zip(&shifts) {
                if let Some(q) = c.chart.locate_offset(d - sh) {
                    hit.0 |= in_box(q, 0.0, 1.0, 1e-6);
                    hit.1 |= in_box(q, 4.0 / 9.0, 5.0 / 9.0, 1e-6);
                }
                if hit.0 && hit.1 {
                    break;
                }
            }
            hit
        })
        .collect();
    let covered = hits.iter().filter(|h| h.0).count();
    let ninth = hits.iter().filter(|h| h.1).count();
    let frac = |k: usize| if targets.is_empty() { 1.0 } else { k as f64 / targets.len() as f64 };

    let certs: Vec<Result<(f64, f64)>> = family
        .charts
        .par_iter()
        .map(|c| {
            let im = rescaled_images(sys, x, &c.chart, n, params.eps);
            let dphi = grid_derivative(&im[0], c.chart.g);
            let dk = (1..=n).map(|k| grid_derivative(&im[k], c.chart.g)).fold(0.0, f64::max);
            Ok((dphi, dk))
        })
        .collect();
    let mut violations = 0;
    let (mut max_dphi, mut max_dk) = (0.0f64, 0.0f64);
    for r in certs {
        let (dphi, dk) = r?;
        max_dphi = max_dphi.max(dphi);
        max_dk = max_dk.max(dk);
        if dphi > 0.25 + 1e-9 || dk > 1.0 + 1e-9 {
            violations += 1;
        }
    }
    let x_jac = sys.forward_jacobians(x, n)?;
    let k_seq = k_sequence_from_jacobians(&x_jac)?;
    let stats = cover_stats(family.charts.len(), &k_seq, lambda_plus_of(&x_jac), params, n);
    Ok(CoverVerification {
        samples: res * res,
        target_points: targets.len(),
        covered,
        coverage_fraction: frac(covered),
        middle_ninth_fraction: frac(ninth),
        contraction_violations: violations,
        max_dphi,
        max_image_derivative: max_dk,
        log_count: stats.log_count,
        bound_iii: stats.bound_iii,
        bound_vii: stats.bound_vii,
        cardinality_ok: stats.log_count <= stats.bound_iii,
        conforming: stats.log_count <= stats.bound_vii,
    })
}

#[cfg(test)]
mod tests;
