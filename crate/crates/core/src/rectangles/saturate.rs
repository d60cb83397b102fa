use super::chart::{build_chart_with, AdmissibleChart, ChartOptions};
use super::checks::{predicates_from, NodeDynamics};
use super::trace::{intersect, trace_leaf, LeafKind};
use crate::cocycle::{finite_time_fields, DEFAULT_TAU};
use crate::dynamics::SurfaceSystem;
use crate::error::{Error, Result};
use crate::linalg::{Mat2, Vec2};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SaturateOptions {
    /// Allowed overhang past the middle third; defaults to `2·K_tol`.
    pub k_prime: Option<f64>,
    /// Sample points on the boundary of the middle third.
    pub boundary_samples: usize,
    /// Smallest level at which saturation is attempted.
    pub n_threshold: usize,
    pub tau: f64,
    pub check_preconditions: bool,
}

impl Default for SaturateOptions {
    fn default() -> Self {
        SaturateOptions { k_prime: None, boundary_samples: 64, n_threshold: 1, tau: DEFAULT_TAU, check_preconditions: true }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SaturationReport {
    pub n: usize,
    /// Largest excursion of the new rectangle outside `[1/3, 2/3]²` in parent coordinates.
    pub containment_margin: f64,
    pub allowed_margin: f64,
    pub covers_middle_third: bool,
    /// Worst `max(r, 1/r)` of new stable fiber lengths against a third of the old center length.
    pub length_ratio_e: f64,
    pub length_ratio_f: f64,
    /// `max ‖D(φ_old⁻¹ ∘ φ_new)‖`.
    pub chart_change_norm: f64,
    /// `max ‖D(φ_new⁻¹ ∘ φ_old)‖` on the middle third.
    pub inverse_change_norm: f64,
    /// Arclength range of the new stable axis through the center.
    pub sigma_range: (f64, f64),
    pub tau_range: (f64, f64),
}

#[derive(Clone, Debug)]
pub struct Saturation {
    pub chart: AdmissibleChart,
    pub report: SaturationReport,
}

fn middle_third_boundary(count: usize) -> Vec<(f64, f64)> {
    let per = (count / 4).max(1);
    let (a, b) = (1.0 / 3.0, 2.0 / 3.0);
    let mut out = Vec::with_capacity(4 * per);
    for k in 0..per {
        let u = a + (b - a) * k as f64 / per as f64;
        let w = b - (b - a) * k as f64 / per as f64;
        out.push((u, a));
        out.push((b, u));
        out.push((w, b));
        out.push((a, w));
    }
    out
}

/// Smallest `(n+1)`-rectangle containing the middle third of `chart`, with its checks.
pub fn saturate(sys: &SurfaceSystem, chart: &AdmissibleChart, opts: &SaturateOptions) -> Result<Saturation> {
    let n = chart.n;
    let m = n + 1;
    if n < opts.n_threshold {
        return Err(Error::Precondition(format!("level {n} below saturation threshold {}", opts.n_threshold)));
    }
    if opts.check_preconditions {
        let nd = NodeDynamics::new(sys, chart, m)?;
        let pred = predicates_from(&nd, n, &[n, m], chart.k_tol);
        if !pred.h.pass || !pred.g.pass {
            return Err(Error::Precondition(format!(
                "saturation needs H_{n}, H_{m}, G_{n}: osc_fwd {:.3e}, osc_bwd {:.3e}, bound {:.3e}, G ratios {:.4}/{:.4}",
                pred.h.osc_fwd, pred.h.osc_bwd, pred.h.bound, pred.g.worst_upper_ratio, pred.g.worst_lower_ratio
            )));
        }
    }
    let allowed = opts.k_prime.unwrap_or(2.0 * chart.k_tol);
    let origin = chart.origin();
    let y_off = chart.eval_offset(0.5, 0.5);
    let y = origin + y_off;
    let fs = finite_time_fields(sys, y, m, opts.tau)?;
    let (e0, f0) = (fs.e_n, fs.f_n);
    let (le, lf) = (chart.l_e, chart.l_f);
    let steps = 256.0;
    let he = le / 3.0 / steps;
    let hf = lf / 3.0 / steps;
    let reach = 0.45;
    let axis_e = trace_leaf(sys, origin, y_off, m, LeafKind::Stable, reach * le, reach * le, he, opts.tau, Some(e0))?;
    let axis_f = trace_leaf(sys, origin, y_off, m, LeafKind::Unstable, reach * lf, reach * lf, hf, opts.tau, Some(f0))?;

    // orientation of the old chart axes in terms of the new fields
    let d_old = chart.derivative(0.5, 0.5);
    let sign_t = if d_old.col1().dot(e0) >= 0.0 { 1.0 } else { -1.0 };
    let sign_s = if d_old.col2().dot(f0) >= 0.0 { 1.0 } else { -1.0 };

    let tol = 1e-13 * le.max(lf);
    let mut sig = (f64::INFINITY, f64::NEG_INFINITY);
    let mut tau_r = (f64::INFINITY, f64::NEG_INFINITY);
    let samples = middle_third_boundary(opts.boundary_samples);
    for &(t, s) in &samples {
        let p_off = chart.eval_offset(t, s);
        let leaf_f = trace_leaf(sys, origin, p_off, m, LeafKind::Unstable, reach * lf, reach * lf, hf, opts.tau, Some(f0))?;
        let guess = (sign_t * (t - 0.5) * le, -sign_s * (s - 0.5) * lf);
        let (sigma, _, _) = intersect(sys, &axis_e, &leaf_f, guess, tol)?;
        sig = (sig.0.min(sigma), sig.1.max(sigma));
        let leaf_e = trace_leaf(sys, origin, p_off, m, LeafKind::Stable, reach * le, reach * le, he, opts.tau, Some(e0))?;
        let guess = (sign_s * (s - 0.5) * lf, -sign_t * (t - 0.5) * le);
        let (tau_p, _, _) = intersect(sys, &axis_f, &leaf_e, guess, tol)?;
        tau_r = (tau_r.0.min(tau_p), tau_r.1.max(tau_p));
    }
    let copts = ChartOptions { g: chart.g, tau: opts.tau, k_tol: chart.k_tol, ..ChartOptions::default() };
    let new = build_chart_with(sys, y, m, sig, tau_r, &copts)?;

    // containment and chart change in parent coordinates
    let g = new.g;
    let gf = g as f64;
    let nodes = new.sample_offsets();
    let shift = new.origin() - origin;
    let mut params = Vec::with_capacity(nodes.len());
    let mut margin = 0.0f64;
    for d in &nodes {
        match chart.locate_offset(*d + shift) {
            Some((t, s)) => {
                let over = (1.0 / 3.0 - t).max(t - 2.0 / 3.0).max(1.0 / 3.0 - s).max(s - 2.0 / 3.0);
                margin = margin.max(over);
                params.push(Vec2::new(t, s));
            }
            None => {
                margin = f64::INFINITY;
                params.push(Vec2::new(f64::NAN, f64::NAN));
            }
        }
    }
    let mut change = 0.0f64;
    for j in 0..g {
        for i in 0..g {
            let p = params[j * (g + 1) + i];
            let dt = (params[j * (g + 1) + i + 1] - p) * gf;
            let ds = (params[(j + 1) * (g + 1) + i] - p) * gf;
            change = change.max(Mat2::from_cols(dt, ds).norm());
        }
    }
    let covers = samples.iter().all(|&(t, s)| new.contains(chart.eval(t, s), 1e-6));
    let mut inv_change = 0.0f64;
    let mut back = Vec::with_capacity((g + 1) * (g + 1));
    for j in 0..=g {
        for i in 0..=g {
            let (t, s) = (1.0 / 3.0 + i as f64 / (3.0 * gf), 1.0 / 3.0 + j as f64 / (3.0 * gf));
            let q = new.locate_offset(chart.eval_offset(t, s) - shift);
            back.push(q.map(|(a, b)| Vec2::new(a, b)).unwrap_or(Vec2::new(f64::NAN, f64::NAN)));
        }
    }
    for j in 0..g {
        for i in 0..g {
            let p = back[j * (g + 1) + i];
            let dt = (back[j * (g + 1) + i + 1] - p) * (3.0 * gf);
            let ds = (back[(j + 1) * (g + 1) + i] - p) * (3.0 * gf);
            inv_change = inv_change.max(Mat2::from_cols(dt, ds).norm());
        }
    }
    if inv_change.is_nan() {
        inv_change = f64::INFINITY;
    }
    if change.is_nan() {
        change = f64::INFINITY;
    }

    let nd = NodeDynamics::new(sys, &new, 0)?;
    let ratio = |lens: Vec<f64>, old: f64| {
        lens.iter().map(|l| l / (old / 3.0)).map(|r| r.max(1.0 / r)).fold(1.0, f64::max)
    };
    let report = SaturationReport {
        n: m,
        containment_margin: margin,
        allowed_margin: allowed,
        covers_middle_third: covers,
        length_ratio_e: ratio(nd.stable_lengths(0), le),
        length_ratio_f: ratio(nd.unstable_lengths(0), lf),
        chart_change_norm: change,
        inverse_change_norm: inv_change,
        sigma_range: sig,
        tau_range: tau_r,
    };
    if !(margin <= allowed) {
        return Err(Error::Containment { margin, allowed });
    }
    Ok(Saturation { chart: new, report })
}
