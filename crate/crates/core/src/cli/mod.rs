//! Config-driven experiment runner behind the `fthyp` binary.
//!
//! A run reads a [`RunConfig`] (system, command, parameter table, seed),
//! writes `<command>.json` with the resolved config echoed and hashed, any
//! CSV tables, a `<command>.meta.json` with timing, and appends events to
//! `run.jsonl`. Exit codes: 0 success, 2 verification violations, 1 usage or
//! config errors.

pub mod output;

use crate::cocycle::{
    cocycle_product, holangle_series, hyperbolic_split, lyapunov_qr, lyapunov_svd_endpoint, norm_identity_suite,
    FieldSample, HyperbolicSplit, LyapunovEstimate, NormIdentitySuite, DEFAULT_TAU,
};
use crate::cover::{build_cover, default_a_const, verify_cover, CoverFamilyRecord, CoverParams, CoverVerification, FITTED_D};
use crate::dynamics::{make_system, SurfaceSystem, SystemSpec};
use crate::entropy::{
    full_space_rate, newhouse_estimate, power_inclusion_check, sex_bound_report, EntropyReport, NewhouseProbe,
    PowerInclusionRecord, RateRow, SexProbe,
};
use crate::error::{Error, Result};
use crate::hypersets::{counting_suite, CountingSuite, HypParams};
use crate::linalg::{Mat2, Point2, Vec2};
use crate::rectangles::{
    build_chart, check_predicates, check_regularity, saturate, tangent_alignment, trace_manifold, ChartRecord,
    CurveRecord, LeafKind, PredicateReport, RegularityReport, SaturateOptions, SaturationReport,
};
use output::{blob_hash, fmt_f64, to_json, Sink};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::path::{Path, PathBuf};
use std::time::Instant;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Lyapunov,
    Split,
    Fields,
    Manifold,
    Rect,
    Entropy,
    Cover,
    VerifyLemmas,
    Report,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Lyapunov => "lyapunov",
            Command::Split => "split",
            Command::Fields => "fields",
            Command::Manifold => "manifold",
            Command::Rect => "rect",
            Command::Entropy => "entropy",
            Command::Cover => "cover",
            Command::VerifyLemmas => "verify-lemmas",
            Command::Report => "report",
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
}

/// Config file contents; `params` is checked against the command's table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub system: SystemSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<Command>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub params: Value,
    #[serde(default)]
    pub output: OutputSpec,
}

impl RunConfig {
    pub fn default_for(command: Command) -> Self {
        RunConfig { system: SystemSpec::cat(), command: Some(command), seed: 0, params: Value::Null, output: OutputSpec::default() }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}

fn params<T: DeserializeOwned + Default>(v: &Value) -> Result<T> {
    if v.is_null() {
        return Ok(T::default());
    }
    serde_json::from_value(v.clone()).map_err(|e| Error::Config(format!("params: {e}")))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LyapunovParams {
    pub x: Point2,
    pub n: usize,
}

impl Default for LyapunovParams {
    fn default() -> Self {
        LyapunovParams { x: Vec2::new(0.3, 0.6), n: 100 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SplitParams {
    /// Split this matrix; otherwise split `D_xTⁿ`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub matrix: Option<Mat2>,
    pub x: Point2,
    pub n: usize,
    pub tau: f64,
}

impl Default for SplitParams {
    fn default() -> Self {
        SplitParams { matrix: None, x: Vec2::new(0.3, 0.6), n: 20, tau: DEFAULT_TAU }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FieldsParams {
    /// Explicit base points; when empty a `grid × grid` lattice of the phase space is used.
    pub points: Vec<Point2>,
    pub grid: usize,
    pub n: usize,
    pub tau: f64,
}

impl Default for FieldsParams {
    fn default() -> Self {
        FieldsParams { points: Vec::new(), grid: 16, n: 20, tau: DEFAULT_TAU }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LeafChoice {
    Stable,
    Unstable,
    Both,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ManifoldParams {
    pub x: Point2,
    pub n: usize,
    pub leaf: LeafChoice,
    pub half_length: f64,
    pub tau: f64,
}

impl Default for ManifoldParams {
    fn default() -> Self {
        ManifoldParams { x: Vec2::new(0.3, 0.6), n: 10, leaf: LeafChoice::Both, half_length: 0.05, tau: DEFAULT_TAU }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RectParams {
    pub x: Point2,
    pub n: usize,
    pub l_e: f64,
    pub l_f: f64,
    pub g: usize,
    #[serde(rename = "K_tol")]
    pub k_tol: f64,
    pub tau: f64,
    pub saturate: bool,
}

impl Default for RectParams {
    fn default() -> Self {
        RectParams { x: Vec2::new(0.3, 0.6), n: 6, l_e: 0.002, l_f: 2e-4, g: 16, k_tol: 0.01, tau: DEFAULT_TAU, saturate: false }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FullSpaceParams {
    pub grid_res: usize,
    pub n: Vec<usize>,
    pub delta: f64,
}

impl Default for FullSpaceParams {
    fn default() -> Self {
        FullSpaceParams { grid_res: 256, n: vec![12], delta: 0.05 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PowerParams {
    pub x: Point2,
    pub n: usize,
    pub k: usize,
    pub eps: f64,
    /// Uniform samples in the `eps`-square at `x`.
    pub samples: usize,
}

impl Default for PowerParams {
    fn default() -> Self {
        PowerParams { x: Vec2::new(0.3, 0.6), n: 3, k: 2, eps: 0.01, samples: 10_000 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EntropyParams {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub full: Option<FullSpaceParams>,
    pub newhouse: Vec<NewhouseProbe>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub power_inclusion: Option<PowerParams>,
}

impl Default for EntropyParams {
    fn default() -> Self {
        EntropyParams {
            full: Some(FullSpaceParams::default()),
            newhouse: vec![NewhouseProbe { x: Vec2::new(0.3, 0.6), eps: vec![0.01], delta: vec![0.002], n: vec![8, 10, 12, 14], grid_res: 1024 }],
            power_inclusion: Some(PowerParams::default()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CoverRunParams {
    pub x: Point2,
    pub n_final: usize,
    /// Target exponents; read off the orbit of `x` over `hyp_orbit_n` steps when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hyp: Option<HypParams>,
    pub hyp_orbit_n: usize,
    pub eps: f64,
    #[serde(rename = "K_tol")]
    pub k_tol: f64,
    #[serde(rename = "A_const", skip_serializing_if = "Option::is_none")]
    pub a_const: Option<f64>,
    #[serde(rename = "D_const")]
    pub d_const: f64,
    pub n_threshold: usize,
    pub subdivision_cap: usize,
    pub grid: usize,
    pub sample_res: usize,
    pub verify_samples: usize,
    pub tau: f64,
}

impl Default for CoverRunParams {
    fn default() -> Self {
        CoverRunParams {
            x: Vec2::new(0.3, 0.6),
            n_final: 12,
            hyp: None,
            hyp_orbit_n: 1000,
            eps: 0.01,
            k_tol: 0.1,
            a_const: None,
            d_const: FITTED_D,
            n_threshold: 8,
            subdivision_cap: 10_000,
            grid: 8,
            sample_res: 512,
            verify_samples: 512 * 512,
            tau: DEFAULT_TAU,
        }
    }
}

impl CoverRunParams {
    pub fn resolve(&self, sys: &SurfaceSystem) -> Result<CoverParams> {
        let hyp = match self.hyp {
            Some(h) => h,
            None => CoverParams::from_orbit(sys, self.x, self.hyp_orbit_n)?.hyp,
        };
        let mut p = CoverParams::new(hyp);
        p.eps = self.eps;
        p.k_tol = self.k_tol;
        p.a_const = self.a_const.unwrap_or_else(|| default_a_const(self.k_tol));
        p.d_const = self.d_const;
        p.n_threshold = self.n_threshold;
        p.subdivision_cap = self.subdivision_cap;
        p.grid = self.grid;
        p.sample_res = self.sample_res;
        p.tau = self.tau;
        p.validate()?;
        Ok(p)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HolangleParams {
    pub points: usize,
    pub n_min: usize,
    pub n_max: usize,
}

impl Default for HolangleParams {
    fn default() -> Self {
        HolangleParams { points: 100, n_min: 5, n_max: 20 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyParams {
    pub pairs: usize,
    pub max_condition: f64,
    pub tol: f64,
    pub count_max: u64,
    pub power_inclusion: PowerParams,
    pub holangle: HolangleParams,
}

impl Default for VerifyParams {
    fn default() -> Self {
        VerifyParams {
            pairs: 10_000,
            max_condition: 1e6,
            tol: 1e-9,
            count_max: 24,
            power_inclusion: PowerParams::default(),
            holangle: HolangleParams::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LyapunovResult {
    pub qr: LyapunovEstimate,
    /// Dense-product read-out, absent once the product overflows.
    pub svd_endpoint: Option<LyapunovEstimate>,
    pub exponent_sum: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RectResult {
    pub chart: ChartRecord,
    pub commutation_defect: f64,
    pub predicates: PredicateReport,
    pub regularity: RegularityReport,
    /// Largest angles (radians) between chart partials and the finite-time fields.
    pub alignment: (f64, f64),
    pub saturation: Option<SaturationReport>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntropyResult {
    pub full_space: Vec<RateRow>,
    pub newhouse: Vec<RateRow>,
    pub power_inclusion: Option<PowerInclusionRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverResult {
    pub params: CoverParams,
    pub family: CoverFamilyRecord,
    pub verification: CoverVerification,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HolangleSuite {
    pub points: usize,
    pub checks: usize,
    pub violations: usize,
    /// Largest `lhs / rhs`.
    pub worst_ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LemmaSuites {
    pub norm_identity: NormIdentitySuite,
    pub counting: CountingSuite,
    pub power_inclusion: PowerInclusionRecord,
    pub holangle: Option<HolangleSuite>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeadlineReport {
    pub lyapunov: LyapunovEstimate,
    pub entropy: EntropyReport,
}

/// Resolved run configuration, echoed into every report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResolvedConfig {
    pub system: SystemSpec,
    pub command: Command,
    pub seed: u64,
    pub params: Value,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub command: Command,
    pub version: String,
    pub config: ResolvedConfig,
    /// Git-style SHA-256 of the resolved config JSON.
    pub input_hash: String,
    pub violations: usize,
    pub result: Value,
    /// Git-style SHA-256 of the result JSON.
    pub content_hash: String,
}

#[derive(Clone, Debug)]
pub struct RunOptions {
    pub config: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub quiet: bool,
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub report: Report,
    pub files: Vec<PathBuf>,
}

impl RunOutcome {
    pub fn exit_code(&self) -> i32 {
        if self.report.violations > 0 {
            2
        } else {
            0
        }
    }
}

/// Exit code for an error that stopped a run.
pub fn error_exit_code(e: &Error) -> i32 {
    match e {
        Error::Cover { .. } => 2,
        _ => 1,
    }
}

fn random_points_near(x: Point2, eps: f64, count: usize, seed: u64) -> Vec<Point2> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| x + Vec2::new(rng.gen_range(-eps..eps), rng.gen_range(-eps..eps))).collect()
}

fn power_suite(sys: &SurfaceSystem, p: &PowerParams, seed: u64) -> Result<PowerInclusionRecord> {
    let sample = random_points_near(p.x, p.eps, p.samples, seed);
    power_inclusion_check(sys, p.x, p.n, p.k, p.eps, &sample)
}

fn holangle_suite(sys: &SurfaceSystem, p: &HolangleParams, seed: u64) -> Result<HolangleSuite> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checks = 0;
    let mut violations = 0;
    let mut worst = 0.0f64;
    for _ in 0..p.points {
        let x = Point2::new(rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0));
        for r in holangle_series(sys, x, p.n_min..=p.n_max, DEFAULT_TAU)? {
            checks += 1;
            if !r.ok {
                violations += 1;
            }
            if r.rhs > 0.0 {
                worst = worst.max(r.lhs / r.rhs);
            }
        }
    }
    Ok(HolangleSuite { points: p.points, checks, violations, worst_ratio: worst })
}

/// Lemma suites on `sys`: the 2×2 norm identity, exact counting, power inclusion and, on the torus, the angle bound.
pub fn lemma_suites(sys: &SurfaceSystem, p: &VerifyParams, seed: u64) -> Result<LemmaSuites> {
    let norm_identity = norm_identity_suite(p.pairs, p.max_condition, seed, p.tol)?;
    let counting = counting_suite(p.count_max)?;
    let power_inclusion = power_suite(sys, &p.power_inclusion, seed)?;
    let holangle = if sys.is_torus() { Some(holangle_suite(sys, &p.holangle, seed)?) } else { None };
    Ok(LemmaSuites { norm_identity, counting, power_inclusion, holangle })
}

fn to_value<T: Serialize>(v: &T) -> Result<Value> {
    serde_json::to_value(v).map_err(|e| Error::Io(e.to_string()))
}

fn field_rows(samples: &[FieldSample]) -> Vec<Vec<String>> {
    samples
        .iter()
        .map(|s| {
            vec![fmt_f64(s.x.x), fmt_f64(s.x.y), fmt_f64(s.e_n.x), fmt_f64(s.e_n.y), fmt_f64(s.f_n.x), fmt_f64(s.f_n.y), fmt_f64(s.log_norm_n)]
        })
        .collect()
}

fn curve_rows(c: &CurveRecord) -> Vec<Vec<String>> {
    c.vertices
        .iter()
        .enumerate()
        .map(|(i, v)| vec![i.to_string(), fmt_f64(c.step * i as f64 - c.arclength / 2.0), fmt_f64(v.x), fmt_f64(v.y)])
        .collect()
}

fn rate_rows(rows: &[RateRow]) -> Vec<Vec<String>> {
    rows.iter()
        .map(|r| vec![fmt_f64(r.eps), fmt_f64(r.delta), r.n.to_string(), r.count.to_string(), r.members.to_string(), fmt_f64(r.rate)])
        .collect()
}

const RATE_HEADER: [&str; 6] = ["eps", "delta", "n", "count", "members", "rate"];

/// Runs one command; `Err` only for config, usage and numerical failures.
pub fn run(command: Command, opts: &RunOptions) -> Result<RunOutcome> {
    let mut cfg = match &opts.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default_for(command),
    };
    if let Some(c) = cfg.command {
        if c != command {
            return Err(Error::Config(format!("config is for `{}`, not `{}`", c.name(), command.name())));
        }
    }
    if let Some(s) = opts.seed {
        cfg.seed = s;
    }
    let out_dir = opts.out.clone().or(cfg.output.dir.clone()).unwrap_or_else(|| PathBuf::from("out"));
    let sys = make_system(&cfg.system)?;
    let seed = cfg.seed;
    let mut sink = Sink::new(&out_dir, opts.quiet)?;
    let name = command.name();
    let started = Instant::now();
    sink.log(&serde_json::json!({"event": "start", "command": name, "seed": seed}))?;

    let (resolved, result, violations): (Value, Value, usize) = match command {
        Command::Lyapunov => {
            let p: LyapunovParams = params(&cfg.params)?;
            let qr = lyapunov_qr(&sys, p.x, p.n)?;
            let svd = lyapunov_svd_endpoint(&sys, p.x, p.n).ok().filter(|e| e.chi_plus.is_finite() && e.chi_minus.is_finite());
            let r = LyapunovResult { exponent_sum: qr.chi_plus + qr.chi_minus, qr, svd_endpoint: svd };
            (to_value(&p)?, to_value(&r)?, 0)
        }
        Command::Split => {
            let p: SplitParams = params(&cfg.params)?;
            let m = match p.matrix {
                Some(m) => m,
                None => cocycle_product(&sys, p.x, p.n)?.to_matrix(),
            };
            let r: HyperbolicSplit = hyperbolic_split(&m, p.tau)?;
            (to_value(&p)?, to_value(&r)?, 0)
        }
        Command::Fields => {
            let p: FieldsParams = params(&cfg.params)?;
            let pts = if p.points.is_empty() { crate::entropy::phase_space_grid(&sys, p.grid) } else { p.points.clone() };
            let mut samples = Vec::new();
            let mut skipped = Vec::new();
            for x in pts {
                match crate::cocycle::finite_time_fields(&sys, x, p.n, p.tau) {
                    Ok(s) => samples.push(s),
                    Err(e) => skipped.push(serde_json::json!({"x": x, "reason": e.to_string()})),
                }
            }
            sink.csv("fields.csv", &["x", "y", "e_x", "e_y", "f_x", "f_y", "log_norm_n"], &field_rows(&samples))?;
            (to_value(&p)?, serde_json::json!({"samples": samples, "skipped": skipped}), 0)
        }
        Command::Manifold => {
            let p: ManifoldParams = params(&cfg.params)?;
            let kinds = match p.leaf {
                LeafChoice::Stable => vec![LeafKind::Stable],
                LeafChoice::Unstable => vec![LeafKind::Unstable],
                LeafChoice::Both => vec![LeafKind::Stable, LeafKind::Unstable],
            };
            let mut curves = Vec::new();
            for k in kinds {
                let c = trace_manifold(&sys, p.x, p.n, k, p.half_length, p.tau)?.record();
                let file = match k {
                    LeafKind::Stable => "manifold_stable.csv",
                    LeafKind::Unstable => "manifold_unstable.csv",
                };
                sink.csv(file, &["index", "arclength", "x", "y"], &curve_rows(&c))?;
                curves.push(c);
            }
            (to_value(&p)?, to_value(&curves)?, 0)
        }
        Command::Rect => {
            let p: RectParams = params(&cfg.params)?;
            let mut chart = build_chart(&sys, p.x, p.n, p.l_e, p.l_f, p.g, p.tau)?;
            chart.k_tol = p.k_tol;
            let predicates = check_predicates(&sys, &chart, &[p.n])?;
            let regularity = check_regularity(&sys, &chart)?;
            let alignment = tangent_alignment(&sys, &chart)?;
            let saturation = if p.saturate {
                Some(saturate(&sys, &chart, &SaturateOptions { tau: p.tau, ..SaturateOptions::default() })?.report)
            } else {
                None
            };
            let rows: Vec<Vec<String>> = chart
                .polylines()
                .into_iter()
                .map(|(t, s, q)| vec![fmt_f64(t), fmt_f64(s), fmt_f64(q.x), fmt_f64(q.y)])
                .collect();
            sink.csv("rect_polylines.csv", &["t", "s", "x", "y"], &rows)?;
            let factors = [regularity.fiber_e, regularity.fiber_f, regularity.partial_e, regularity.partial_f, regularity.image_derivative, regularity.image_lengths];
            let mut violations = factors.iter().filter(|f| !f.pass).count();
            violations += [predicates.h.pass, predicates.f.pass, predicates.g.pass].iter().filter(|ok| !**ok).count();
            let r = RectResult {
                chart: chart.record(),
                commutation_defect: chart.commutation_defect,
                predicates,
                regularity,
                alignment,
                saturation,
            };
            (to_value(&p)?, to_value(&r)?, violations)
        }
        Command::Entropy => {
            let p: EntropyParams = params(&cfg.params)?;
            let mut full_space = Vec::new();
            if let Some(f) = &p.full {
                for &n in &f.n {
                    full_space.push(full_space_rate(&sys, f.grid_res, n, f.delta)?);
                }
            }
            let mut newhouse = Vec::new();
            for nh in &p.newhouse {
                for &eps in &nh.eps {
                    for &delta in &nh.delta {
                        newhouse.extend(newhouse_estimate(&sys, nh.x, eps, delta, &nh.n, nh.grid_res)?);
                    }
                }
            }
            let power_inclusion = match &p.power_inclusion {
                Some(pp) => Some(power_suite(&sys, pp, seed)?),
                None => None,
            };
            let mut all = full_space.clone();
            all.extend(newhouse.iter().copied());
            sink.csv("entropy_rates.csv", &RATE_HEADER, &rate_rows(&all))?;
            let violations = power_inclusion.map(|r| r.violations).unwrap_or(0);
            (to_value(&p)?, to_value(&EntropyResult { full_space, newhouse, power_inclusion })?, violations)
        }
        Command::Cover => {
            let p: CoverRunParams = params(&cfg.params)?;
            let cp = p.resolve(&sys)?;
            let family = build_cover(&sys, p.x, p.n_final, &cp)?;
            let verification = verify_cover(&sys, &family, p.x, &cp, p.verify_samples)?;
            let mut rows = Vec::new();
            for c in &family.charts {
                let g = c.chart.g;
                for (idx, q) in c.chart.sample_nodes().iter().enumerate() {
                    rows.push(vec![c.id.clone(), (idx % (g + 1)).to_string(), (idx / (g + 1)).to_string(), fmt_f64(q.x), fmt_f64(q.y)]);
                }
            }
            sink.csv("cover_charts.csv", &["id", "i", "j", "x", "y"], &rows)?;
            let level_rows: Vec<Vec<String>> = family
                .levels
                .iter()
                .map(|l| vec![l.n.to_string(), l.targets.to_string(), l.parents.to_string(), l.saturated.to_string(), l.count.to_string(), fmt_f64(l.growth_factor), fmt_f64(l.growth_bound)])
                .collect();
            sink.csv("cover_levels.csv", &["n", "targets", "parents", "saturated", "count", "growth_factor", "growth_bound"], &level_rows)?;
            for s in &family.skipped {
                sink.log(&serde_json::json!({"event": "skip", "level": s.level, "id": s.id, "reason": s.reason}))?;
            }
            let mut violations = verification.contraction_violations;
            if verification.coverage_fraction < 1.0 {
                violations += verification.target_points - verification.covered;
            }
            if !verification.cardinality_ok {
                violations += 1;
            }
            (to_value(&p)?, to_value(&CoverResult { params: cp, family: family.record(), verification })?, violations)
        }
        Command::VerifyLemmas => {
            let p: VerifyParams = params(&cfg.params)?;
            let r = lemma_suites(&sys, &p, seed)?;
            let violations = r.norm_identity.violations
                + r.counting.mismatches
                + r.counting.bound_violations
                + r.power_inclusion.violations
                + r.holangle.as_ref().map(|h| h.violations).unwrap_or(0);
            let rows: Vec<Vec<String>> = r
                .counting
                .rows
                .iter()
                .map(|c| vec![c.n.to_string(), c.s.to_string(), c.count.clone(), fmt_f64(c.log_count), fmt_f64(c.bound)])
                .collect();
            sink.csv("counting.csv", &["n", "S", "count", "log_count", "bound"], &rows)?;
            (to_value(&p)?, to_value(&r)?, violations)
        }
        Command::Report => {
            let mut p: SexProbe = params(&cfg.params)?;
            if opts.seed.is_some() || cfg.params.get("seed").is_none() {
                p.seed = seed;
            }
            let entropy = sex_bound_report(&sys, &p)?;
            let x0 = if sys.is_torus() { Vec2::new(0.3, 0.6) } else { Vec2::new(0.0, 0.0) };
            let lyapunov = lyapunov_qr(&sys, x0, p.r_horizon)?;
            let mut rows = vec![entropy.h_top_row];
            rows.extend(entropy.newhouse_rates.iter().copied());
            sink.csv("report_rates.csv", &RATE_HEADER, &rate_rows(&rows))?;
            (to_value(&p)?, to_value(&HeadlineReport { lyapunov, entropy })?, 0)
        }
    };

    let config = ResolvedConfig { system: cfg.system.clone(), command, seed, params: resolved };
    let input_hash = blob_hash(to_json(&config)?.as_bytes());
    let content_hash = blob_hash(to_json(&result)?.as_bytes());
    let report = Report { command, version: env!("CARGO_PKG_VERSION").into(), config, input_hash, violations, result, content_hash };
    sink.write_text(&format!("{name}.json"), &to_json(&report)?)?;
    let meta = serde_json::json!({
        "command": name,
        "elapsed_seconds": started.elapsed().as_secs_f64(),
        "finished_unix": std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
        "input_hash": report.input_hash,
        "content_hash": report.content_hash,
    });
    sink.write_text(&format!("{name}.meta.json"), &to_json(&meta)?)?;
    sink.log(&serde_json::json!({"event": "end", "command": name, "violations": violations, "content_hash": report.content_hash}))?;
    Ok(RunOutcome { report, files: sink.written().to_vec() })
}

#[cfg(test)]
mod tests;
