//! Bowen balls, `(n, δ)`-separated sets and sample-based entropy estimators.
//!
//! Measures are replaced by deterministic grids: every rate reported here is a
//! topological surrogate computed on finitely many points.

use crate::cocycle::cocycle_product;
use crate::dynamics::{Direction, SurfaceSystem, SystemSpec};
use crate::error::{Error, Result};
use crate::linalg::{Point2, Vec2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

/// Largest candidate set accepted by the exhaustive search.
pub const EXACT_SMALL_CAP: usize = 20;
pub const MAX_GRID_RES: usize = 2048;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeparationMethod {
    Greedy,
    ExactSmall,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeparatedSetResult {
    pub n: usize,
    pub delta: f64,
    pub points: Vec<Point2>,
    /// Positions of `points` in the candidate list.
    pub indices: Vec<usize>,
    pub count: usize,
    pub method: SeparationMethod,
    /// Candidates dropped because their orbit left the domain.
    pub escaped: usize,
}

/// First `n` points of the forward orbit, or `None` if it escapes.
fn orbit_points(sys: &SurfaceSystem, p: Point2, n: usize) -> Option<Vec<Point2>> {
    let mut out = Vec::with_capacity(n);
    let mut q = sys.canonical(p);
    for k in 0..n {
        out.push(q);
        if k + 1 < n {
            q = sys.step(q, Direction::Forward).ok()?;
        }
    }
    Some(out)
}

/// Number of leading times `k` with `d(T^k x, T^k y) < eps`, capped at `n`.
fn exit_time(sys: &SurfaceSystem, x_orbit: &[Point2], y: Point2, eps: f64) -> usize {
    let mut q = sys.canonical(y);
    for (k, &p) in x_orbit.iter().enumerate() {
        if !(sys.distance(p, q) < eps) {
            return k;
        }
        if k + 1 < x_orbit.len() {
            match sys.step(q, Direction::Forward) {
                Ok(next) => q = next,
                Err(_) => return k + 1,
            }
        }
    }
    x_orbit.len()
}

/// `d(T^k x, T^k y) < eps` for `k = 0..n−1`.
pub fn bowen_ball_member(sys: &SurfaceSystem, x: Point2, y: Point2, n: usize, eps: f64) -> bool {
    match orbit_points(sys, x, n) {
        Some(xo) => exit_time(sys, &xo, y, eps) == n,
        None => false,
    }
}

/// Two orbit segments stay `delta`-close at every time; latest times are checked first.
fn not_separated(sys: &SurfaceSystem, a: &[Point2], b: &[Point2], delta: f64) -> bool {
    a.iter().rev().zip(b.iter().rev()).all(|(&p, &q)| sys.distance(p, q) < delta)
}

/// Pairwise definitional check of `(n, δ)`-separation.
pub fn is_separated(sys: &SurfaceSystem, points: &[Point2], n: usize, delta: f64) -> bool {
    let orbits: Option<Vec<Vec<Point2>>> = points.par_iter().map(|&p| orbit_points(sys, p, n)).collect();
    let Some(orbits) = orbits else { return false };
    (0..orbits.len())
        .into_par_iter()
        .all(|i| (i + 1..orbits.len()).all(|j| !not_separated(sys, &orbits[i], &orbits[j], delta)))
}

struct CellHash {
    cell: f64,
    wrap: Option<i64>,
    buckets: HashMap<(i64, i64), Vec<usize>>,
}

impl CellHash {
    fn new(sys: &SurfaceSystem, delta: f64) -> Self {
        if sys.is_torus() {
            let m = ((1.0 / delta).floor() as i64).max(1);
            CellHash { cell: 1.0 / m as f64, wrap: Some(m), buckets: HashMap::new() }
        } else {
            CellHash { cell: delta, wrap: None, buckets: HashMap::new() }
        }
    }

    fn key(&self, p: Point2) -> (i64, i64) {
        let k = ((p.x / self.cell).floor() as i64, (p.y / self.cell).floor() as i64);
        match self.wrap {
            Some(m) => (k.0.rem_euclid(m), k.1.rem_euclid(m)),
            None => k,
        }
    }

    fn neighbors(&self, p: Point2) -> Vec<(i64, i64)> {
        let (a, b) = self.key(p);
        let mut out = Vec::with_capacity(9);
        for da in -1..=1 {
            for db in -1..=1 {
                let k = match self.wrap {
                    Some(m) => ((a + da).rem_euclid(m), (b + db).rem_euclid(m)),
                    None => (a + da, b + db),
                };
                if !out.contains(&k) {
                    out.push(k);
                }
            }
        }
        out
    }
}

fn greedy(sys: &SurfaceSystem, orbits: &[Vec<Point2>], delta: f64) -> Vec<usize> {
    let mut hash = CellHash::new(sys, delta);
    let mut chosen = Vec::new();
    for (i, o) in orbits.iter().enumerate() {
        let blocked = hash
            .neighbors(o[0])
            .iter()
            .filter_map(|k| hash.buckets.get(k))
            .flatten()
            .any(|&j| not_separated(sys, o, &orbits[j], delta));
        if !blocked {
            let key = hash.key(o[0]);
            hash.buckets.entry(key).or_default().push(i);
            chosen.push(i);
        }
    }
    chosen
}

fn exact(sys: &SurfaceSystem, orbits: &[Vec<Point2>], delta: f64) -> Vec<usize> {
    let m = orbits.len();
    let conflict: Vec<u32> = (0..m)
        .map(|i| {
            (0..m)
                .filter(|&j| j != i && not_separated(sys, &orbits[i], &orbits[j], delta))
                .fold(0u32, |acc, j| acc | (1 << j))
        })
        .collect();
    let mut best = 0u32;
    for mask in 0u32..(1u32 << m) {
        if mask.count_ones() <= best.count_ones() {
            continue;
        }
        let independent = (0..m).all(|i| mask & (1 << i) == 0 || conflict[i] & mask == 0);
        if independent {
            best = mask;
        }
    }
    (0..m).filter(|&i| best & (1 << i) != 0).collect()
}

/// Separated subset of `candidates`: greedy first-fit in candidate order, or an exhaustive maximum.
pub fn max_separated(
    sys: &SurfaceSystem,
    candidates: &[Point2],
    n: usize,
    delta: f64,
    method: SeparationMethod,
) -> Result<SeparatedSetResult> {
    if n == 0 || !(delta > 0.0) {
        return Err(Error::InvalidParameter("separation needs n >= 1 and delta > 0".into()));
    }
    if method == SeparationMethod::ExactSmall && candidates.len() > EXACT_SMALL_CAP {
        return Err(Error::SizeCap(format!(
            "exact search limited to {EXACT_SMALL_CAP} candidates, got {}",
            candidates.len()
        )));
    }
    let computed: Vec<Option<Vec<Point2>>> = candidates.par_iter().map(|&p| orbit_points(sys, p, n)).collect();
    let mut idx = Vec::with_capacity(candidates.len());
    let mut orbits = Vec::with_capacity(candidates.len());
    for (i, o) in computed.into_iter().enumerate() {
        if let Some(o) = o {
            idx.push(i);
            orbits.push(o);
        }
    }
    let escaped = candidates.len() - idx.len();
    let chosen = match method {
        SeparationMethod::Greedy => greedy(sys, &orbits, delta),
        SeparationMethod::ExactSmall => exact(sys, &orbits, delta),
    };
    let indices: Vec<usize> = chosen.iter().map(|&c| idx[c]).collect();
    let points = indices.iter().map(|&i| candidates[i]).collect();
    Ok(SeparatedSetResult { n, delta, points, count: indices.len(), indices, method, escaped })
}

/// One row of a rate table.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub eps: f64,
    pub delta: f64,
    pub n: usize,
    pub count: usize,
    /// Sampled points that stayed in the Bowen ball (or the whole grid for full-space rows).
    pub members: usize,
    pub rate: f64,
}

/// Grid of `res²` points with spacing `2 eps / res` around `x`, containing `x`, restricted to the open `eps`-ball.
fn ball_grid(sys: &SurfaceSystem, x: Point2, eps: f64, res: usize) -> Vec<Point2> {
    let h = 2.0 * eps / res as f64;
    let half = (res / 2) as f64;
    let mut out = Vec::new();
    for i in 0..res {
        for j in 0..res {
            let d = Vec2::new((i as f64 - half) * h, (j as f64 - half) * h);
            if d.norm() < eps {
                out.push(sys.canonical(x + d));
            }
        }
    }
    out
}

/// `log(#max separated subset of B(x,n,eps)) / n` for each `n`, on a grid in the `eps`-ball at `x`.
pub fn newhouse_estimate(
    sys: &SurfaceSystem,
    x: Point2,
    eps: f64,
    delta: f64,
    n_list: &[usize],
    grid_res: usize,
) -> Result<Vec<RateRow>> {
    if !(delta > 0.0 && delta < eps) {
        return Err(Error::InvalidParameter(format!("need 0 < delta < eps, got delta {delta}, eps {eps}")));
    }
    if grid_res == 0 || grid_res > MAX_GRID_RES {
        return Err(Error::InvalidParameter(format!("grid_res must be in 1..={MAX_GRID_RES}")));
    }
    if n_list.contains(&0) {
        return Err(Error::InvalidParameter("n must be >= 1".into()));
    }
    let nmax = n_list.iter().copied().max().unwrap_or(1);
    let xo = orbit_points(sys, x, nmax).ok_or(Error::Escape { u: x.x, v: x.y })?;
    let grid = ball_grid(sys, x, eps, grid_res);
    let exits: Vec<usize> = grid.par_iter().map(|&y| exit_time(sys, &xo, y, eps)).collect();
    let mut rows = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let members: Vec<Point2> = grid.iter().zip(&exits).filter(|(_, &e)| e >= n).map(|(&p, _)| p).collect();
        if members.is_empty() {
            return Err(Error::EmptySample(format!("no grid point of B(x, {n}, {eps}) survived")));
        }
        let sep = max_separated(sys, &members, n, delta, SeparationMethod::Greedy)?;
        rows.push(RateRow { eps, delta, n, count: sep.count, members: members.len(), rate: (sep.count as f64).ln() / n as f64 });
    }
    Ok(rows)
}

/// Uniform `res × res` grid over the phase space (the unit torus or the escape box).
pub fn phase_space_grid(sys: &SurfaceSystem, res: usize) -> Vec<Point2> {
    let [x0, x1, y0, y1] = match sys.spec() {
        SystemSpec::Henon { bbox, .. } => *bbox,
        _ => [0.0, 1.0, 0.0, 1.0],
    };
    let mut out = Vec::with_capacity(res * res);
    for i in 0..res {
        for j in 0..res {
            out.push(Point2::new(x0 + (x1 - x0) * i as f64 / res as f64, y0 + (y1 - y0) * j as f64 / res as f64));
        }
    }
    out
}

/// `log(#greedy (n, δ)-separated subset of a full-space grid) / n`.
pub fn full_space_rate(sys: &SurfaceSystem, grid_res: usize, n: usize, delta: f64) -> Result<RateRow> {
    if grid_res == 0 || grid_res > MAX_GRID_RES {
        return Err(Error::InvalidParameter(format!("grid_res must be in 1..={MAX_GRID_RES}")));
    }
    let grid = phase_space_grid(sys, grid_res);
    let sep = max_separated(sys, &grid, n, delta, SeparationMethod::Greedy)?;
    if sep.count == 0 {
        return Err(Error::EmptySample("every grid orbit escaped".into()));
    }
    Ok(RateRow {
        eps: f64::INFINITY,
        delta,
        n,
        count: sep.count,
        members: grid.len() - sep.escaped,
        rate: (sep.count as f64).ln() / n as f64,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PowerInclusionRecord {
    pub sampled: usize,
    /// Samples in `B_T(x, nk, eps)`.
    pub in_t_ball: usize,
    /// Of those, samples outside `B_{T^k}(x, n, eps)`.
    pub violations: usize,
}

/// Counts sampled points of `B_T(x, nk, eps)` that are not in `B_{T^k}(x, n, eps)`.
pub fn power_inclusion_check(
    sys: &SurfaceSystem,
    x: Point2,
    n: usize,
    k: usize,
    eps: f64,
    sample: &[Point2],
) -> Result<PowerInclusionRecord> {
    if n == 0 || k == 0 {
        return Err(Error::InvalidParameter("n and k must be >= 1".into()));
    }
    let xo = orbit_points(sys, x, n * k).ok_or(Error::Escape { u: x.x, v: x.y })?;
    let (in_t, viol) = sample
        .par_iter()
        .map(|&y| {
            let Some(yo) = orbit_points(sys, y, n * k) else { return (0, 0) };
            let close = |j: usize| sys.distance(xo[j], yo[j]) < eps;
            let in_t = (0..n * k).all(close);
            let in_tk = (0..n).all(|m| close(m * k));
            (in_t as usize, (in_t && !in_tk) as usize)
        })
        .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
    Ok(PowerInclusionRecord { sampled: sample.len(), in_t_ball: in_t, violations: viol })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NewhouseProbe {
    pub x: Point2,
    pub eps: Vec<f64>,
    pub delta: Vec<f64>,
    pub n: Vec<usize>,
    pub grid_res: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SexProbe {
    /// Full-space grid resolution for the `h_top` estimate.
    pub grid_res: usize,
    pub n: usize,
    pub delta: f64,
    /// Number of seeded points for `R`.
    pub r_samples: usize,
    pub r_horizon: usize,
    pub seed: u64,
    pub newhouse: Vec<NewhouseProbe>,
}

impl Default for SexProbe {
    fn default() -> Self {
        SexProbe { grid_res: 256, n: 12, delta: 0.05, r_samples: 64, r_horizon: 200, seed: 0, newhouse: Vec::new() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntropyReport {
    /// `min(h_top_raw, R_estimate)`.
    pub h_top_estimate: f64,
    /// `log(count)/n` of the full-space separated set.
    pub h_top_raw: f64,
    pub h_top_row: RateRow,
    #[serde(rename = "R_estimate")]
    pub r_estimate: f64,
    /// `h_top_estimate + 2·R_estimate`.
    pub sex_bound: f64,
    pub newhouse_rates: Vec<RateRow>,
}

/// `max` over seeded points of `log⁺‖D_xT^n‖ / n`.
pub fn r_estimate(sys: &SurfaceSystem, samples: usize, horizon: usize, seed: u64) -> Result<f64> {
    if horizon == 0 {
        return Err(Error::InvalidParameter("R horizon must be >= 1".into()));
    }
    let [x0, x1, y0, y1] = match sys.spec() {
        SystemSpec::Henon { bbox, .. } => *bbox,
        _ => [0.0, 1.0, 0.0, 1.0],
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pts: Vec<Point2> =
        (0..samples).map(|_| Point2::new(rng.gen_range(x0..x1), rng.gen_range(y0..y1))).collect();
    let logs: Vec<f64> = pts.par_iter().filter_map(|&p| cocycle_product(sys, p, horizon).ok().map(|c| c.log_norm())).collect();
    if logs.is_empty() {
        return Err(Error::EmptySample("every R sample escaped".into()));
    }
    Ok(logs.into_iter().fold(0.0, f64::max) / horizon as f64)
}

/// `h_top + 2R` from a full-space separated-set probe and sampled derivative growth.
pub fn sex_bound_report(sys: &SurfaceSystem, probe: &SexProbe) -> Result<EntropyReport> {
    let row = full_space_rate(sys, probe.grid_res, probe.n, probe.delta)?;
    let r = r_estimate(sys, probe.r_samples, probe.r_horizon, probe.seed)?;
    let h = row.rate.min(r);
    let mut newhouse_rates = Vec::new();
    for nh in &probe.newhouse {
        for &eps in &nh.eps {
            for &delta in &nh.delta {
                newhouse_rates.extend(newhouse_estimate(sys, nh.x, eps, delta, &nh.n, nh.grid_res)?);
            }
        }
    }
    Ok(EntropyReport { h_top_estimate: h, h_top_raw: row.rate, h_top_row: row, r_estimate: r, sex_bound: h + 2.0 * r, newhouse_rates })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sys(spec: SystemSpec) -> SurfaceSystem {
        SurfaceSystem::new(&spec).unwrap()
    }

    #[test]
    fn identity_bowen_ball_is_metric_ball() {
        let s = sys(SystemSpec::identity());
        let x = Point2::new(0.5, 0.5);
        assert!(bowen_ball_member(&s, x, Point2::new(0.505, 0.5), 50, 0.01));
        assert!(!bowen_ball_member(&s, x, Point2::new(0.515, 0.5), 1, 0.01));
        assert!(bowen_ball_member(&s, Point2::new(0.999, 0.0), Point2::new(0.001, 0.0), 3, 0.01));
    }

    #[test]
    fn cat_bowen_ball_exit() {
        let s = sys(SystemSpec::cat());
        let x = Point2::new(0.0, 0.0);
        let y = Point2::new(1e-4, 0.0);
        // A^k (1,0): (1,0) (2,1) (5,3) (13,8) (34,21) (89,55) (233,144) (610,377)
        let a4 = 1e-4 * (34f64.powi(2) + 21f64.powi(2)).sqrt();
        assert!((a4 - 3.996e-3).abs() < 1e-6);
        assert!(bowen_ball_member(&s, x, y, 5, 1e-2));
        assert!(!bowen_ball_member(&s, x, y, 6, 1e-2));
        assert!(!bowen_ball_member(&s, x, y, 8, 1e-2));
        assert!(bowen_ball_member(&s, x, x, 30, 1e-9));
    }

    #[test]
    fn identity_grid_greedy_is_king_independent() {
        let s = sys(SystemSpec::identity());
        let mut pts = Vec::new();
        for i in 0..10 {
            for j in 0..10 {
                pts.push(Point2::new(i as f64 * 0.1, j as f64 * 0.1));
            }
        }
        let r = max_separated(&s, &pts, 3, 0.15, SeparationMethod::Greedy).unwrap();
        // points 0.1 apart on each axis and diagonal conflict; five per axis survive on the circle of length 1
        assert_eq!(r.count, 25);
        assert!(is_separated(&s, &r.points, 3, 0.15));
    }

    #[test]
    fn single_candidate() {
        let s = sys(SystemSpec::cat());
        let r = max_separated(&s, &[Point2::new(0.3, 0.3)], 5, 0.1, SeparationMethod::ExactSmall).unwrap();
        assert_eq!(r.count, 1);
    }

    #[test]
    fn greedy_against_exact() {
        let s = sys(SystemSpec::cat());
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let pts: Vec<Point2> = (0..12).map(|_| Point2::new(rng.gen(), rng.gen())).collect();
        let g = max_separated(&s, &pts, 3, 0.1, SeparationMethod::Greedy).unwrap();
        let e = max_separated(&s, &pts, 3, 0.1, SeparationMethod::ExactSmall).unwrap();
        assert!(2 * g.count >= e.count && g.count <= e.count);
        assert!(is_separated(&s, &e.points, 3, 0.1));
    }

    #[test]
    fn exact_cap() {
        let s = sys(SystemSpec::cat());
        let pts = vec![Point2::new(0.1, 0.1); 21];
        assert!(matches!(max_separated(&s, &pts, 2, 0.1, SeparationMethod::ExactSmall), Err(Error::SizeCap(_))));
    }

    #[test]
    fn identity_newhouse_rate_decays() {
        let s = sys(SystemSpec::identity());
        let rows = newhouse_estimate(&s, Point2::new(0.5, 0.5), 0.01, 0.004, &[5, 10, 20], 64).unwrap();
        assert!(rows.iter().all(|r| r.count == rows[0].count));
        assert!(rows[2].rate < rows[1].rate && rows[1].rate < rows[0].rate);
    }

    #[test]
    fn cat_newhouse_matches_lattice_count() {
        let s = sys(SystemSpec::cat());
        let (eps, res) = (0.01, 1024usize);
        // integer oracle: offsets (i, j)·h stay in the ball iff ‖A^k (i, j)‖·h < eps
        let h = 2.0 * eps / res as f64;
        let half = (res / 2) as i64;
        let mut members = 0;
        for i in -half..half {
            for j in -half..half {
                let (mut a, mut b) = (i, j);
                let mut inside = true;
                for _ in 0..14 {
                    if ((a * a + b * b) as f64).sqrt() * h >= eps {
                        inside = false;
                        break;
                    }
                    (a, b) = (2 * a + b, a + b);
                }
                members += inside as usize;
            }
        }
        assert_eq!(members, 5);
        for x in [Point2::new(0.0, 0.0), Point2::new(0.2, 0.3)] {
            let rows = newhouse_estimate(&s, x, eps, 0.002, &[14, 20], res).unwrap();
            assert_eq!(rows[0].members, members);
            assert_eq!(rows[0].count, 5);
            assert!((rows[0].rate - 5f64.ln() / 14.0).abs() < 1e-15);
            assert_eq!(rows[1].count, 1);
        }
    }

    #[test]
    fn power_inclusion_cat() {
        let s = sys(SystemSpec::cat());
        let x = Point2::new(0.4, 0.1);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let sample: Vec<Point2> =
            (0..10_000).map(|_| x + Vec2::new(rng.gen_range(-0.01..0.01), rng.gen_range(-0.01..0.01))).collect();
        let r = power_inclusion_check(&s, x, 4, 3, 0.01, &sample).unwrap();
        assert_eq!(r.violations, 0);
        // samples along the stable direction do land in the thin ball
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        let e = Vec2::new(1.0, -phi).normalized();
        let sample: Vec<Point2> = (0..1000).map(|i| x + e * (0.018 * (i as f64 / 1000.0 - 0.5))).collect();
        let r = power_inclusion_check(&s, x, 4, 3, 0.01, &sample).unwrap();
        assert_eq!(r.violations, 0);
        assert!(r.in_t_ball > 500);
    }

    #[test]
    fn identity_report_is_zero() {
        let s = sys(SystemSpec::identity());
        let probe = SexProbe { grid_res: 32, r_samples: 8, r_horizon: 20, ..SexProbe::default() };
        let r = sex_bound_report(&s, &probe).unwrap();
        assert_eq!(r.r_estimate, 0.0);
        assert_eq!(r.h_top_estimate, 0.0);
        assert_eq!(r.sex_bound, 0.0);
    }

    #[test]
    fn cat_report() {
        let s = sys(SystemSpec::cat());
        let r = sex_bound_report(&s, &SexProbe::default()).unwrap();
        let lam = ((3.0 + 5f64.sqrt()) / 2.0).ln();
        // every grid point is (12, 0.05)-separated from the others
        assert_eq!(r.h_top_row.count, 256 * 256);
        assert!((r.h_top_estimate - lam).abs() <= 0.15 * lam);
        assert!((r.r_estimate - lam).abs() <= 0.02 * lam);
        assert!((r.sex_bound - (r.h_top_estimate + 2.0 * r.r_estimate)).abs() < 1e-15);
    }

    #[test]
    fn perturbed_r_near_cat() {
        let cat = r_estimate(&sys(SystemSpec::cat()), 32, 200, 1).unwrap();
        let pert = r_estimate(&sys(SystemSpec::perturbed_cat(0.01)), 32, 200, 1).unwrap();
        let lam = ((3.0 + 5f64.sqrt()) / 2.0).ln();
        assert!((cat - lam).abs() < 1e-12);
        assert!((pert - cat).abs() < 0.02);
    }
}
