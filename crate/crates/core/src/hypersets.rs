//! Finite-time hyperbolic sets, K-sequences and the counting behind them.

use crate::cocycle::CocycleProduct;
use crate::dynamics::SurfaceSystem;
use crate::error::{Error, Result};
use crate::linalg::{Mat2, Point2};
use num_bigint::BigUint;
use num_traits::{One, ToPrimitive};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HypParams {
    pub chi_plus: f64,
    pub chi_minus: f64,
    pub gamma: f64,
    #[serde(rename = "C")]
    pub c: f64,
}

impl HypParams {
    pub fn new(chi_plus: f64, chi_minus: f64, gamma: f64, c: f64) -> Result<Self> {
        let p = HypParams { chi_plus, chi_minus, gamma, c };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.chi_plus > 0.0 && self.chi_minus < 0.0) {
            return Err(Error::InvalidParameter("need chi_plus > 0 > chi_minus".into()));
        }
        if !(self.gamma > 0.0 && self.gamma < self.chi_plus.min(-self.chi_minus) / 3.0) {
            return Err(Error::InvalidParameter("need 0 < gamma < min(chi_plus, -chi_minus)/3".into()));
        }
        if !(self.c > 1.0) {
            return Err(Error::InvalidParameter("need C > 1".into()));
        }
        Ok(())
    }
}

/// Log slacks of the four bounds at time `k`; all nonnegative iff the bounds hold.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Margins {
    pub k: usize,
    pub fwd_lower: f64,
    pub fwd_upper: f64,
    pub bwd_lower: f64,
    pub bwd_upper: f64,
}

impl Margins {
    pub fn min(&self) -> f64 {
        self.fwd_lower.min(self.fwd_upper).min(self.bwd_lower).min(self.bwd_upper)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MembershipReport {
    pub member: bool,
    pub margins: Vec<Margins>,
}

impl MembershipReport {
    pub fn first_failure(&self) -> Option<usize> {
        self.margins.iter().find(|m| m.min() < 0.0).map(|m| m.k)
    }
}

/// Margins from the log norm series `ln‖D_xT^k‖`, `ln‖D_{T^k x}T^{−k}‖`, `k = 0..=n`.
pub fn margins_from_logs(log_fwd: &[f64], log_inv: &[f64], p: &HypParams) -> MembershipReport {
    let lc = p.c.ln();
    let margins: Vec<Margins> = (1..log_fwd.len())
        .map(|k| {
            let kf = k as f64;
            Margins {
                k,
                fwd_lower: log_fwd[k] + lc - (p.chi_plus - p.gamma) * kf,
                fwd_upper: lc + (p.chi_plus + p.gamma) * kf - log_fwd[k],
                bwd_lower: log_inv[k] + lc - (-p.chi_minus - p.gamma) * kf,
                bwd_upper: lc + (-p.chi_minus + p.gamma) * kf - log_inv[k],
            }
        })
        .collect();
    let member = margins.iter().all(|m| m.min() >= 0.0);
    MembershipReport { member, margins }
}

pub fn membership(sys: &SurfaceSystem, x: Point2, n: usize, p: &HypParams) -> Result<MembershipReport> {
    if n == 0 {
        return Err(Error::InvalidParameter("membership needs n >= 1".into()));
    }
    let jac = sys.forward_jacobians(x, n)?;
    membership_from_jacobians(&jac, p)
}

pub fn membership_from_jacobians(jac: &[Mat2], p: &HypParams) -> Result<MembershipReport> {
    let (f, i) = log_series(jac)?;
    Ok(margins_from_logs(&f, &i, p))
}

fn log_series(jac: &[Mat2]) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut prod = CocycleProduct::identity();
    let mut f = Vec::with_capacity(jac.len() + 1);
    let mut i = Vec::with_capacity(jac.len() + 1);
    f.push(0.0);
    i.push(0.0);
    for a in jac {
        prod.push(a)?;
        f.push(prod.log_norm());
        i.push(prod.log_norm_inv());
    }
    Ok((f, i))
}

/// The integer part of `x` if `x > 0`, zero otherwise.
pub fn floor_plus(x: f64) -> u64 {
    if x > 0.0 {
        x.floor() as u64
    } else {
        0
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct KSequence {
    pub ks: Vec<u64>,
}

impl KSequence {
    pub fn sum(&self) -> u64 {
        self.ks.iter().sum()
    }

    pub fn len(&self) -> usize {
        self.ks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ks.is_empty()
    }
}

/// `k_i = [log⁺(‖D_yT^i‖ max(‖D_{T^i y}T‖, 1) / ‖D_yT^{i+1}‖)] + 1` for `i = 1..n−1`.
pub fn k_sequence(sys: &SurfaceSystem, y: Point2, n: usize) -> Result<KSequence> {
    if n < 2 {
        return Err(Error::InvalidParameter("k_sequence needs n >= 2".into()));
    }
    k_sequence_from_jacobians(&sys.forward_jacobians(y, n)?)
}

pub fn k_sequence_from_jacobians(jac: &[Mat2]) -> Result<KSequence> {
    let (f, _) = log_series(jac)?;
    let n = jac.len();
    let ks = (1..n)
        .map(|i| {
            let step = jac[i].norm().ln().max(0.0);
            floor_plus(f[i] + step - f[i + 1]) + 1
        })
        .collect();
    Ok(KSequence { ks })
}

/// `H(t) = −(1/t) log(1/t) − (1 − 1/t) log(1 − 1/t)`.
pub fn shannon_h(t: f64) -> Result<f64> {
    if !(t >= 1.0) {
        return Err(Error::InvalidParameter(format!("H(t) needs t >= 1, got {t}")));
    }
    let p = 1.0 / t;
    let q = 1.0 - p;
    let term = |a: f64| if a > 0.0 { -a * a.ln() } else { 0.0 };
    Ok(term(p) + term(q))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CountMode {
    ClosedForm,
    BruteForce,
}

pub const BRUTE_FORCE_CAP: u64 = 24;

/// Number of sequences of `n` positive integers with sum at most `nS`.
pub fn count_admitting(n: u64, s: u64, mode: CountMode) -> Result<BigUint> {
    if n == 0 || s == 0 {
        return Err(Error::InvalidParameter("count_admitting needs n, S >= 1".into()));
    }
    match mode {
        CountMode::ClosedForm => Ok(binomial(n * s, n)),
        CountMode::BruteForce => {
            if n * s > BRUTE_FORCE_CAP {
                return Err(Error::SizeCap(format!("brute force needs nS <= {BRUTE_FORCE_CAP}, got {}", n * s)));
            }
            Ok(BigUint::from(enumerate(n, n * s)))
        }
    }
}

fn enumerate(slots: u64, budget: u64) -> u64 {
    if slots == 0 {
        return 1;
    }
    // each remaining slot needs at least 1
    (1..=budget.saturating_sub(slots - 1)).map(|k| enumerate(slots - 1, budget - k)).sum()
}

pub fn binomial(n: u64, k: u64) -> BigUint {
    let k = k.min(n - k);
    let mut acc = BigUint::one();
    for i in 0..k {
        acc = acc * BigUint::from(n - i) / BigUint::from(i + 1);
    }
    acc
}

pub fn big_ln(x: &BigUint) -> f64 {
    let bits = x.bits();
    if bits < 1000 {
        return x.to_f64().unwrap_or(f64::INFINITY).ln();
    }
    let shift = bits - 64;
    let top: BigUint = x >> shift;
    top.to_f64().unwrap().ln() + shift as f64 * std::f64::consts::LN_2
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CountingRow {
    pub n: u64,
    pub s: u64,
    pub count: String,
    pub log_count: f64,
    /// `nS·H(S) + 1`.
    pub bound: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CountingSuite {
    pub rows: Vec<CountingRow>,
    pub mismatches: usize,
    pub bound_violations: usize,
}

/// Brute-force counts against `C(nS, n)` and the entropy bound for every `nS ≤ max_ns`.
pub fn counting_suite(max_ns: u64) -> Result<CountingSuite> {
    let mut rows = Vec::new();
    let (mut mismatches, mut bound_violations) = (0, 0);
    for n in 1..=max_ns {
        for s in 1..=max_ns / n {
            let brute = count_admitting(n, s, CountMode::BruteForce)?;
            if brute != count_admitting(n, s, CountMode::ClosedForm)? {
                mismatches += 1;
            }
            let log_count = big_ln(&brute);
            let bound = (n * s) as f64 * shannon_h(s as f64)? + 1.0;
            if log_count > bound {
                bound_violations += 1;
            }
            rows.push(CountingRow { n, s, count: brute.to_string(), log_count, bound });
        }
    }
    Ok(CountingSuite { rows, mismatches, bound_violations })
}

/// `(3n − 2) + (n − 1)·d·H([d] + 3)` with `d = max(λ⁺ − χ⁺, 0)`, in nats.
pub fn lemma_com_bound(n: usize, lambda_plus: f64, chi_plus: f64) -> Result<f64> {
    if n < 2 {
        return Err(Error::InvalidParameter("bound needs n >= 2".into()));
    }
    let d = (lambda_plus - chi_plus).max(0.0);
    let h = shannon_h(floor_plus(d) as f64 + 3.0)?;
    Ok((3 * n - 2) as f64 + (n - 1) as f64 * d * h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{make_system, SystemSpec};
    use crate::linalg::Vec2;

    #[test]
    fn h_values() {
        assert_eq!(shannon_h(1.0).unwrap(), 0.0);
        assert!((shannon_h(2.0).unwrap() - 2f64.ln()).abs() < 1e-15);
        assert!((shannon_h(4.0).unwrap() - 0.562335).abs() < 1e-6);
        assert!((shannon_h(3.0).unwrap() - 0.636514).abs() < 1e-6);
        assert!((shannon_h(4.0 / 3.0).unwrap() - shannon_h(4.0).unwrap()).abs() < 1e-12);
        assert!(shannon_h(0.5).is_err());
    }

    #[test]
    fn floor_plus_examples() {
        assert_eq!(floor_plus(2.7), 2);
        assert_eq!(floor_plus(-3.1), 0);
        assert_eq!(floor_plus(0.0), 0);
    }

    #[test]
    fn counts() {
        for (n, s, c) in [(1, 1, 1u64), (2, 2, 6), (3, 2, 20)] {
            assert_eq!(count_admitting(n, s, CountMode::ClosedForm).unwrap(), BigUint::from(c));
            assert_eq!(count_admitting(n, s, CountMode::BruteForce).unwrap(), BigUint::from(c));
        }
        assert!(matches!(count_admitting(5, 5, CountMode::BruteForce), Err(Error::SizeCap(_))));
    }

    #[test]
    fn counting_suite_up_to_24() {
        let r = counting_suite(24).unwrap();
        assert_eq!((r.mismatches, r.bound_violations), (0, 0));
        let row = r.rows.iter().find(|r| r.n == 3 && r.s == 2).unwrap();
        assert_eq!(row.count, "20");
    }

    #[test]
    fn com_bound_examples() {
        assert!((lemma_com_bound(10, 0.9, 0.9).unwrap() - 28.0).abs() < 1e-12);
        assert!((lemma_com_bound(10, 2.0, 1.0).unwrap() - 33.061).abs() < 1e-3);
        assert!((lemma_com_bound(2, 1.0, 0.5).unwrap() - 4.318).abs() < 1e-3);
        assert!((lemma_com_bound(10, 0.5, 0.9).unwrap() - 28.0).abs() < 1e-12);
    }

    #[test]
    fn cat_membership() {
        let sys = make_system(&SystemSpec::cat()).unwrap();
        let p = HypParams::new(0.9624, -0.9624, 0.1, 1.1).unwrap();
        assert!(membership(&sys, Vec2::new(0.3, 0.4), 30, &p).unwrap().member);
        let bad = HypParams { chi_plus: 1.2, chi_minus: -1.2, gamma: 0.01, c: 1.0001 };
        let r = membership(&sys, Vec2::new(0.3, 0.4), 30, &bad).unwrap();
        assert!(!r.member);
        assert_eq!(r.first_failure(), Some(1));
    }

    #[test]
    fn identity_not_member() {
        let sys = make_system(&SystemSpec::identity()).unwrap();
        let p = HypParams::new(0.9624, -0.9624, 0.1, 1.1).unwrap();
        let r = membership(&sys, Vec2::new(0.3, 0.4), 30, &p).unwrap();
        assert_eq!(r.first_failure(), Some(1));
    }

    #[test]
    fn cat_and_identity_k_sequences() {
        for spec in [SystemSpec::cat(), SystemSpec::identity()] {
            let sys = make_system(&spec).unwrap();
            let k = k_sequence(&sys, Vec2::new(0.1, 0.2), 15).unwrap();
            assert_eq!(k.ks, vec![1; 14]);
        }
    }

    #[test]
    fn big_ln_matches_f64() {
        let b = binomial(60, 30);
        assert!((big_ln(&b) - b.to_f64().unwrap().ln()).abs() < 1e-12);
        let huge = BigUint::one() << 5000u32;
        assert!((big_ln(&huge) - 5000.0 * std::f64::consts::LN_2).abs() < 1e-9);
    }
}
