use super::chart::AdmissibleChart;
use crate::dynamics::SurfaceSystem;
use crate::error::Result;
use crate::linalg::{Mat2, Vec2};
use serde::{Deserialize, Serialize};

/// Orbit data of every sample node of a chart up to time `kmax`.
#[derive(Clone, Debug)]
pub struct NodeDynamics {
    pub g: usize,
    pub kmax: usize,
    /// Sample offsets at time `k` relative to `T^k` of the grid origin: `images[k][node]`.
    pub images: Vec<Vec<Vec2>>,
    /// `D T^k` at each node: `jac[k][node]`.
    pub jac: Vec<Vec<Mat2>>,
}

impl NodeDynamics {
    pub fn new(sys: &SurfaceSystem, chart: &AdmissibleChart, kmax: usize) -> Result<Self> {
        let offsets = chart.sample_offsets();
        let (orbit, images) = sys.propagate_offsets(chart.origin(), &offsets, kmax);
        let mut jac = Vec::with_capacity(kmax + 1);
        jac.push(vec![Mat2::IDENTITY; offsets.len()]);
        for k in 0..kmax {
            let prev = &jac[k];
            let next: Vec<Mat2> = images[k]
                .iter()
                .zip(prev)
                .map(|(&d, &m)| sys.jacobian(orbit[k] + d) * m)
                .collect();
            jac.push(next);
        }
        Ok(NodeDynamics { g: chart.g, kmax, images, jac })
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        j * (self.g + 1) + i
    }

    /// Largest relative parameter-derivative of a matrix field over the sample cells.
    fn oscillation(&self, field: &[Mat2]) -> f64 {
        let g = self.g;
        let gf = g as f64;
        let mut worst = 0.0f64;
        for j in 0..=g {
            for i in 0..=g {
                let m = field[self.idx(i, j)];
                let dt = if i < g { (field[self.idx(i + 1, j)] - m).norm() * gf } else { 0.0 };
                let ds = if j < g { (field[self.idx(i, j + 1)] - m).norm() * gf } else { 0.0 };
                worst = worst.max(dt.hypot(ds) / m.norm());
            }
        }
        worst
    }

    pub fn stable_lengths(&self, k: usize) -> Vec<f64> {
        let g = self.g;
        let im = &self.images[k];
        (0..=g).map(|j| (0..g).map(|i| (im[self.idx(i + 1, j)] - im[self.idx(i, j)]).norm()).sum()).collect()
    }

    pub fn unstable_lengths(&self, k: usize) -> Vec<f64> {
        let g = self.g;
        let im = &self.images[k];
        (0..=g).map(|i| (0..g).map(|j| (im[self.idx(i, j + 1)] - im[self.idx(i, j)]).norm()).sum()).collect()
    }

    /// `max` over cells of `‖D(T^k∘φ)‖` from forward differences.
    pub fn max_derivative(&self, k: usize) -> f64 {
        let g = self.g;
        let gf = g as f64;
        let im = &self.images[k];
        let mut worst = 0.0f64;
        for j in 0..g {
            for i in 0..g {
                let o = im[self.idx(i, j)];
                let dt = (im[self.idx(i + 1, j)] - o) * gf;
                let ds = (im[self.idx(i, j + 1)] - o) * gf;
                worst = worst.max(Mat2::from_cols(dt, ds).norm());
            }
        }
        worst
    }

    pub fn boundary_diameter(&self, k: usize) -> f64 {
        let g = self.g;
        let im = &self.images[k];
        let mut b = Vec::with_capacity(4 * g);
        for i in 0..=g {
            b.push(im[self.idx(i, 0)]);
            b.push(im[self.idx(i, g)]);
        }
        for j in 1..g {
            b.push(im[self.idx(0, j)]);
            b.push(im[self.idx(g, j)]);
        }
        let mut d = 0.0f64;
        for a in 0..b.len() {
            for c in a + 1..b.len() {
                d = d.max((b[a] - b[c]).norm());
            }
        }
        d
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HkRecord {
    pub k: usize,
    pub osc_fwd: f64,
    pub osc_bwd: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HReport {
    pub osc_fwd: f64,
    pub osc_bwd: f64,
    pub bound: f64,
    pub pass: bool,
    pub per_k: Vec<HkRecord>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FReport {
    /// `min ‖D_φT^n‖‖D_{T^nφ}T^{−n}‖` over nodes.
    pub min_product: f64,
    /// `min` over nodes of that product divided by `max_{k≤n} ‖D_φT^k‖`.
    pub min_growth_ratio: f64,
    pub pass: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GReport {
    /// `max l(F_n(x)∩R) / l(E_n(x)∩R)`; must stay below `1 + K`.
    pub worst_upper_ratio: f64,
    /// `min l(F_n(x)∩R)·max_k‖D_xT^k‖ / l(E_n(x)∩R)`; must stay above `1 − K`.
    pub worst_lower_ratio: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredicateReport {
    #[serde(rename = "H_n")]
    pub h: HReport,
    #[serde(rename = "F_n")]
    pub f: FReport,
    #[serde(rename = "G_n")]
    pub g: GReport,
}

impl PredicateReport {
    pub fn all_pass(&self) -> bool {
        self.h.pass && self.f.pass && self.g.pass
    }
}

pub fn h_report(nd: &NodeDynamics, k_list: &[usize], k_tol: f64) -> HReport {
    let per_k: Vec<HkRecord> = k_list
        .iter()
        .map(|&k| {
            let inv: Vec<Mat2> = nd.jac[k].iter().map(|m| m.inverse().unwrap_or(Mat2::new(f64::NAN, 0.0, 0.0, 0.0))).collect();
            HkRecord { k, osc_fwd: nd.oscillation(&nd.jac[k]), osc_bwd: nd.oscillation(&inv) }
        })
        .collect();
    let osc_fwd = per_k.iter().map(|r| r.osc_fwd).fold(0.0, f64::max);
    let osc_bwd = per_k.iter().map(|r| r.osc_bwd).fold(0.0, f64::max);
    let finite = per_k.iter().all(|r| r.osc_fwd.is_finite() && r.osc_bwd.is_finite());
    HReport { osc_fwd, osc_bwd, bound: k_tol, pass: finite && osc_fwd <= k_tol && osc_bwd <= k_tol, per_k }
}

fn max_growth(nd: &NodeDynamics, n: usize, node: usize) -> f64 {
    (0..=n).map(|k| nd.jac[k][node].norm()).fold(0.0, f64::max)
}

pub fn f_report(nd: &NodeDynamics, n: usize) -> FReport {
    let mut min_product = f64::INFINITY;
    let mut min_growth_ratio = f64::INFINITY;
    for node in 0..nd.jac[n].len() {
        let m = nd.jac[n][node];
        let p = m.norm() / m.sigma_min();
        min_product = min_product.min(p);
        min_growth_ratio = min_growth_ratio.min(p / max_growth(nd, n, node));
    }
    FReport { min_product, min_growth_ratio, pass: min_product >= 2.0 && min_growth_ratio >= 1.0 }
}

pub fn g_report(nd: &NodeDynamics, n: usize, k_tol: f64) -> GReport {
    let le = nd.stable_lengths(0);
    let lf = nd.unstable_lengths(0);
    let g = nd.g;
    let mut upper = 0.0f64;
    let mut lower = f64::INFINITY;
    for j in 0..=g {
        for i in 0..=g {
            let node = nd.idx(i, j);
            upper = upper.max(lf[i] / le[j]);
            lower = lower.min(lf[i] * max_growth(nd, n, node) / le[j]);
        }
    }
    GReport { worst_upper_ratio: upper, worst_lower_ratio: lower, pass: upper <= 1.0 + k_tol && lower >= 1.0 - k_tol }
}

/// `(H_k)` for `k` in `k_list`, `(F_n)` and `(G_n)` on the chart's sample grid.
pub fn check_predicates(sys: &SurfaceSystem, chart: &AdmissibleChart, k_list: &[usize]) -> Result<PredicateReport> {
    let kmax = k_list.iter().copied().max().unwrap_or(0).max(chart.n);
    let nd = NodeDynamics::new(sys, chart, kmax)?;
    Ok(predicates_from(&nd, chart.n, k_list, chart.k_tol))
}

pub fn predicates_from(nd: &NodeDynamics, n: usize, k_list: &[usize], k_tol: f64) -> PredicateReport {
    PredicateReport { h: h_report(nd, k_list, k_tol), f: f_report(nd, n), g: g_report(nd, n, k_tol) }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Factor {
    pub value: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegularityReport {
    /// The chart passed `(H_n)`, `(F_n)`, `(G_n)`.
    pub preconditions_met: bool,
    /// `max/min` of stable fiber lengths across the rectangle.
    pub fiber_e: Factor,
    /// `max/min` of unstable fiber lengths.
    pub fiber_f: Factor,
    /// `‖∂_tφ‖` against the center stable length, as `max(r, 1/r)`.
    pub partial_e: Factor,
    /// `‖∂_sφ‖` against the center unstable length.
    pub partial_f: Factor,
    /// `max(1, ‖D(Tⁿ∘φ)‖ / diam Tⁿ R)`.
    pub image_derivative: Factor,
    pub image_derivative_norm: f64,
    pub image_diameter: f64,
    /// `max(1, l(TⁿE) / l(TⁿF))` through the center.
    pub image_lengths: Factor,
    pub threshold: f64,
}

impl RegularityReport {
    pub fn factors(&self) -> [(&'static str, Factor); 6] {
        [
            ("fiber_e", self.fiber_e),
            ("fiber_f", self.fiber_f),
            ("partial_e", self.partial_e),
            ("partial_f", self.partial_f),
            ("image_derivative", self.image_derivative),
            ("image_lengths", self.image_lengths),
        ]
    }

    pub fn worst(&self) -> f64 {
        self.factors().iter().map(|f| f.1.value).fold(1.0, f64::max)
    }

    pub fn all_pass(&self) -> bool {
        self.factors().iter().all(|f| f.1.pass)
    }
}

fn spread(v: &[f64]) -> f64 {
    let mx = v.iter().copied().fold(0.0, f64::max);
    let mn = v.iter().copied().fold(f64::INFINITY, f64::min);
    mx / mn
}

pub fn check_regularity(sys: &SurfaceSystem, chart: &AdmissibleChart) -> Result<RegularityReport> {
    let n = chart.n;
    let nd = NodeDynamics::new(sys, chart, n)?;
    let pred = predicates_from(&nd, n, &[n], chart.k_tol);
    let threshold = (1.0 + chart.k_tol).powi(3);
    let fac = |value: f64| Factor { value, pass: value <= threshold };
    let g = nd.g;
    let gf = g as f64;
    let le = nd.stable_lengths(0);
    let lf = nd.unstable_lengths(0);
    let c = g / 2;
    let (le_c, lf_c) = (le[c], lf[c]);
    let im = &nd.images[0];
    let mut pe = 1.0f64;
    let mut pf = 1.0f64;
    for j in 0..=g {
        for i in 0..=g {
            let o = im[nd.idx(i, j)];
            if i < g {
                let r = (im[nd.idx(i + 1, j)] - o).norm() * gf / le_c;
                pe = pe.max(r.max(1.0 / r));
            }
            if j < g {
                let r = (im[nd.idx(i, j + 1)] - o).norm() * gf / lf_c;
                pf = pf.max(r.max(1.0 / r));
            }
        }
    }
    let dnorm = nd.max_derivative(n);
    let diam = nd.boundary_diameter(n);
    let le_n = nd.stable_lengths(n)[c];
    let lf_n = nd.unstable_lengths(n)[c];
    Ok(RegularityReport {
        preconditions_met: pred.all_pass(),
        fiber_e: fac(spread(&le)),
        fiber_f: fac(spread(&lf)),
        partial_e: fac(pe),
        partial_f: fac(pf),
        image_derivative: fac((dnorm / diam).max(1.0)),
        image_derivative_norm: dnorm,
        image_diameter: diam,
        image_lengths: fac((le_n / lf_n).max(1.0)),
        threshold,
    })
}

/// Largest angle (radians) between grid lines and the fields `e_n`, `f_n` at the nodes.
pub fn tangent_alignment(sys: &SurfaceSystem, chart: &AdmissibleChart) -> Result<(f64, f64)> {
    let nd = NodeDynamics::new(sys, chart, chart.n)?;
    let g = nd.g;
    let im = &nd.images[0];
    let mut we = 0.0f64;
    let mut wf = 0.0f64;
    for j in 0..=g {
        for i in 0..=g {
            let s = nd.jac[chart.n][nd.idx(i, j)].svd();
            let (i0, i1) = (i.saturating_sub(1), (i + 1).min(g));
            let (j0, j1) = (j.saturating_sub(1), (j + 1).min(g));
            let dt = im[nd.idx(i1, j)] - im[nd.idx(i0, j)];
            let ds = im[nd.idx(i, j1)] - im[nd.idx(i, j0)];
            we = we.max(dt.line_angle(s.right_min));
            wf = wf.max(ds.line_angle(s.right_max));
        }
    }
    Ok((we, wf))
}

/// `max` over adjacent nodes of `∠(e_n(p), e_n(q))·G`, and the same for `f_n`.
pub fn field_oscillation(sys: &SurfaceSystem, chart: &AdmissibleChart) -> Result<f64> {
    let nd = NodeDynamics::new(sys, chart, chart.n)?;
    let g = nd.g;
    let dirs: Vec<Vec2> = nd.jac[chart.n].iter().map(|m| m.svd().right_min).collect();
    let mut worst = 0.0f64;
    for j in 0..=g {
        for i in 0..=g {
            let d = dirs[nd.idx(i, j)];
            if i < g {
                worst = worst.max(d.line_angle(dirs[nd.idx(i + 1, j)]) * g as f64);
            }
            if j < g {
                worst = worst.max(d.line_angle(dirs[nd.idx(i, j + 1)]) * g as f64);
            }
        }
    }
    Ok(worst)
}
