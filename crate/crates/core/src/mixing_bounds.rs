//! Quantitative bounds behind the mixing argument: the norm of the basic
//! Hecke operator between `A_p = {x_p in GL_2(Z_p)}` and
//! `B_p = {|det x_p|_p = 1/p}`, the constant `c0`, the measures of the
//! excised sets, and the telescoping inequality chain.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::arith::is_prime;
use crate::error::{Error, Result};
use crate::number_field_primes::{IdealTag, PrimePairing};
use crate::padic_matrices::{stratum_mass, unit_group_mass};

fn check_beta(beta: f64) -> Result<()> {
    if beta > 1.0 && beta <= 2.0 {
        Ok(())
    } else {
        Err(Error::validation(format!("beta must lie in (1, 2], got {beta}")))
    }
}

/// `c0 = lambda^((1-beta)/(2 beta)) / (1 + lambda^((1-beta)/beta))`.
pub fn c0(beta: f64, lambda: f64) -> Result<f64> {
    check_beta(beta)?;
    if !(lambda >= 1.0 && lambda.is_finite()) {
        return Err(Error::validation(format!("lambda must be >= 1, got {lambda}")));
    }
    let t = lambda.powf((1.0 - beta) / (2.0 * beta));
    Ok(t / (1.0 + t * t))
}

/// `nu_beta(A_p) = (1 - p^-beta)(1 - p^(1-beta))`.
pub fn nu_a(p: u64, beta: f64) -> f64 {
    unit_group_mass(p, beta)
}

/// `nu_beta(B_p) = p^-beta (p + 1)(1 - p^-beta)(1 - p^(1-beta))`.
pub fn nu_b(p: u64, beta: f64) -> Result<f64> {
    stratum_mass(p, beta, 0, 1)
}

/// `p + 1` partial isometries with orthogonal initial spaces of dimension
/// `dim` and a common range, each scaled by `p^(beta/2)`.
#[derive(Clone, Debug, PartialEq)]
pub struct NormModel {
    pub p: u64,
    pub beta: f64,
    pub arity: usize,
    pub dim: usize,
    /// Row-major `dim x (arity * dim)` matrix of `(S_1 + ... + S_{p+1}) / (p + 1)`.
    pub matrix: Vec<f64>,
}

fn random_orthogonal(dim: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(dim);
    while basis.len() < dim {
        let mut v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        for _ in 0..2 {
            for b in &basis {
                let dot: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
                v.iter_mut().zip(b).for_each(|(x, y)| *x -= dot * y);
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-6 {
            basis.push(v.into_iter().map(|x| x / norm).collect());
        }
    }
    basis
}

impl NormModel {
    pub fn new(beta: f64, p: u64, dim: usize, seed: u64) -> Result<Self> {
        check_beta(beta)?;
        if !is_prime(p) {
            return Err(Error::validation(format!("{p} is not prime")));
        }
        if dim == 0 {
            return Err(Error::validation("model dimension must be positive"));
        }
        let arity = p as usize + 1;
        let scale = (p as f64).powf(beta / 2.0) / arity as f64;
        let cols = arity * dim;
        let mut matrix = vec![0.0; dim * cols];
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ p.rotate_left(17));
        for i in 0..arity {
            let u = random_orthogonal(dim, &mut rng);
            for (r, row) in u.iter().enumerate() {
                for (c, &x) in row.iter().enumerate() {
                    matrix[r * cols + i * dim + c] = scale * x;
                }
            }
        }
        Ok(NormModel { p, beta, arity, dim, matrix })
    }

    fn cols(&self) -> usize {
        self.arity * self.dim
    }

    fn apply(&self, v: &[f64]) -> Vec<f64> {
        let cols = self.cols();
        (0..self.dim)
            .map(|r| self.matrix[r * cols..(r + 1) * cols].iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    fn apply_transpose(&self, w: &[f64]) -> Vec<f64> {
        let cols = self.cols();
        let mut out = vec![0.0; cols];
        for (r, &wr) in w.iter().enumerate() {
            for (o, a) in out.iter_mut().zip(&self.matrix[r * cols..(r + 1) * cols]) {
                *o += a * wr;
            }
        }
        out
    }

    /// Largest singular value by power iteration on `A^T A`.
    pub fn largest_singular_value(&self) -> f64 {
        let cols = self.cols();
        let mut v: Vec<f64> = (0..cols).map(|i| 1.0 + (i % 7) as f64 * 0.1).collect();
        let mut sigma = 0.0;
        for _ in 0..1000 {
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            v.iter_mut().for_each(|x| *x /= norm);
            let av = self.apply(&v);
            let next = av.iter().map(|x| x * x).sum::<f64>().sqrt();
            v = self.apply_transpose(&av);
            if (next - sigma).abs() <= 1e-15 * next {
                return next;
            }
            sigma = next;
        }
        sigma
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormComparison {
    /// `p^(beta/2) (p+1)^(-1/2)`.
    pub formula_value: f64,
    /// Largest singular value of the explicit model.
    pub model_value: f64,
    /// `nu(A_p)^(1/2) nu(B_p)^(-1/2)`.
    pub measure_value: f64,
}

pub const DEFAULT_MODEL_DIM: usize = 3;
pub const DEFAULT_MODEL_SEED: u64 = 0x5eed;

pub fn basic_norm(beta: f64, p: u64) -> Result<NormComparison> {
    basic_norm_seeded(beta, p, DEFAULT_MODEL_SEED)
}

/// As [`basic_norm`], with the model's random isometries drawn from `seed`.
pub fn basic_norm_seeded(beta: f64, p: u64, seed: u64) -> Result<NormComparison> {
    let model = NormModel::new(beta, p, DEFAULT_MODEL_DIM, seed)?;
    let pf = p as f64;
    Ok(NormComparison {
        formula_value: pf.powf(beta / 2.0) / (pf + 1.0).sqrt(),
        model_value: model.largest_singular_value(),
        measure_value: (nu_a(p, beta) / nu_b(p, beta)?).sqrt(),
    })
}

/// Per-place masses along a schedule of prime pairs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairScheduleStats {
    pub beta: f64,
    pub pairs: Vec<(u64, u64)>,
    pub nu_a_p: Vec<f64>,
    pub nu_a_q: Vec<f64>,
    pub nu_b_p: Vec<f64>,
    pub nu_b_q: Vec<f64>,
}

impl PairScheduleStats {
    pub fn new(beta: f64, pairs: &[(u64, u64)]) -> Result<Self> {
        check_beta(beta)?;
        let mut seen = std::collections::HashSet::new();
        for (n, &(p, q)) in pairs.iter().enumerate() {
            for r in [p, q] {
                if !is_prime(r) {
                    return Err(Error::validation(format!("pair {n}: {r} is not prime")));
                }
                if !seen.insert(r) {
                    return Err(Error::validation(format!("pair {n}: prime {r} used twice")));
                }
            }
        }
        let map_a = |f: fn(&(u64, u64)) -> u64| pairs.iter().map(|x| nu_a(f(x), beta)).collect::<Vec<_>>();
        let map_b = |f: fn(&(u64, u64)) -> u64| {
            pairs.iter().map(|x| nu_b(f(x), beta)).collect::<Result<Vec<_>>>()
        };
        Ok(PairScheduleStats {
            beta,
            pairs: pairs.to_vec(),
            nu_a_p: map_a(|x| x.0),
            nu_a_q: map_a(|x| x.1),
            nu_b_p: map_b(|x| x.0)?,
            nu_b_q: map_b(|x| x.1)?,
        })
    }

    /// Schedule from a pairing over Q.
    pub fn from_pairing(pairing: &PrimePairing) -> Result<Self> {
        let pairs = pairing
            .pairs
            .iter()
            .map(|pair| {
                if pair.p.tag != IdealTag::Rational || pair.q.tag != IdealTag::Rational {
                    return Err(Error::validation("mixing schedules need rational primes"));
                }
                Ok((pair.p.norm, pair.q.norm))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(pairing.beta, &pairs)
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// `nu(B_p cup B_q)` for pair `i` (0-based); distinct places are independent.
    pub fn union_mass(&self, i: usize) -> f64 {
        let (bp, bq) = (self.nu_b_p[i], self.nu_b_q[i]);
        bp + bq - bp * bq
    }
}

/// `nu(X_1n cap X_2n) = nu(A_{p_n}) nu(A_{q_n}) prod_{k<n} (1 - nu(B_{p_k} cup B_{q_k}))`,
/// with `n` counted from 1.
pub fn set_recursion_mass(stats: &PairScheduleStats, n: usize) -> Result<f64> {
    if n == 0 || n > stats.len() {
        return Err(Error::validation(format!("index {n} outside 1..={}", stats.len())));
    }
    let excluded: f64 = (0..n - 1).map(|k| 1.0 - stats.union_mass(k)).product();
    Ok(stats.nu_a_p[n - 1] * stats.nu_a_q[n - 1] * excluded)
}

/// `(sum_n u_n prod_{k<n}(1 - u_k), 1 - prod_n (1 - u_n))`.
pub fn telescoping(u: &[f64]) -> (f64, f64) {
    let mut survive = 1.0;
    let mut sum = 0.0;
    for &x in u {
        sum += x * survive;
        survive *= 1.0 - x;
    }
    (sum, 1.0 - survive)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Inequality {
    /// `nu(A_p) nu(A_q) > 1 - delta`.
    UnitMassProduct,
    /// `(nu(B_p) nu(B_q))^(1/2) > (1 - delta) c0 nu(B_p cup B_q)`.
    UnionComparison,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    /// 1-based schedule index.
    pub index: usize,
    pub inequality: Inequality,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixingReport {
    pub beta: f64,
    pub lambda: f64,
    pub delta: f64,
    pub c0: f64,
    /// `(1 - delta)^7 c0`.
    pub bound: f64,
    /// `sum_n (nu(B_{p_n}) nu(B_{q_n}))^(1/2) nu(X_1n cap X_2n)`.
    pub series_value: f64,
    pub series_partial_sums: Vec<f64>,
    /// `sum_n u_n prod_{k<n}(1 - u_k)` with `u_n = nu(B_{p_n} cup B_{q_n})`.
    pub telescoping_sum: f64,
    /// `1 - prod_n (1 - u_n)`.
    pub telescoping_closed_form: f64,
    /// Smallest index from which both inequalities hold for the rest of the schedule.
    pub threshold_index: Option<usize>,
    /// `(1 - delta)^2 c0 sum_{n >= threshold} u_n prod_{k<n}(1 - u_k)`.
    pub partial_lower_bound: f64,
    /// Series terms from the threshold on.
    pub series_beyond_threshold: f64,
    /// `series_value / ((1 - delta)^2 c0 telescoping_sum)`.
    pub measured_slack: f64,
    pub violations: Vec<Violation>,
    pub pass: bool,
}

pub fn mixing_sum_lower_bound(
    beta: f64,
    lambda: f64,
    delta: f64,
    stats: &PairScheduleStats,
) -> Result<MixingReport> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::validation(format!("delta must lie in (0, 1), got {delta}")));
    }
    if (beta - stats.beta).abs() > 0.0 {
        return Err(Error::validation("beta differs from the schedule's beta"));
    }
    let c = c0(beta, lambda)?;
    let len = stats.len();
    let mut terms = Vec::with_capacity(len);
    let mut violations = Vec::new();
    let mut last_bad = 0;
    let u: Vec<f64> = (0..len).map(|i| stats.union_mass(i)).collect();
    for n in 1..=len {
        let i = n - 1;
        let geometric = (stats.nu_b_p[i] * stats.nu_b_q[i]).sqrt();
        terms.push(geometric * set_recursion_mass(stats, n)?);
        let unit = stats.nu_a_p[i] * stats.nu_a_q[i];
        let mut bad = false;
        if !(unit > 1.0 - delta) {
            violations.push(Violation { index: n, inequality: Inequality::UnitMassProduct, lhs: unit, rhs: 1.0 - delta });
            bad = true;
        }
        let rhs = (1.0 - delta) * c * u[i];
        if !(geometric > rhs) {
            violations.push(Violation { index: n, inequality: Inequality::UnionComparison, lhs: geometric, rhs });
            bad = true;
        }
        if bad {
            last_bad = n;
        }
    }
    let threshold_index = (last_bad < len).then_some(last_bad + 1);
    let mut acc = 0.0;
    let series_partial_sums: Vec<f64> = terms
        .iter()
        .map(|t| {
            acc += t;
            acc
        })
        .collect();
    let (telescoping_sum, telescoping_closed_form) = telescoping(&u);
    let from = threshold_index.unwrap_or(len + 1);
    let mut survive = 1.0;
    let mut tail_telescoped = 0.0;
    for (n, &x) in u.iter().enumerate() {
        if n + 1 >= from {
            tail_telescoped += x * survive;
        }
        survive *= 1.0 - x;
    }
    let series_beyond_threshold: f64 = terms.iter().skip(from.saturating_sub(1)).sum();
    let lead = (1.0 - delta).powi(2) * c;
    Ok(MixingReport {
        beta,
        lambda,
        delta,
        c0: c,
        bound: (1.0 - delta).powi(7) * c,
        series_value: acc,
        series_partial_sums,
        telescoping_sum,
        telescoping_closed_form,
        threshold_index,
        partial_lower_bound: lead * tail_telescoped,
        series_beyond_threshold,
        measured_slack: if telescoping_sum > 0.0 { acc / (lead * telescoping_sum) } else { f64::NAN },
        pass: violations.is_empty() && len > 0,
        violations,
    })
}

/// Check of the approximation step on synthetic vectors: with the coordinates
/// split into mutually orthogonal blocks (`first[n]`, `second[n]`),
/// `sum_n |e'_n (phi - f)| |e''_n phi| <= |phi - f| |phi|`.
/// Returns `(lhs, rhs)`.
pub fn orthogonal_projection_bound(
    phi: &[f64],
    f: &[f64],
    first: &[Vec<usize>],
    second: &[Vec<usize>],
) -> Result<(f64, f64)> {
    if phi.len() != f.len() {
        return Err(Error::validation("vectors differ in length"));
    }
    for family in [first, second] {
        let mut used = vec![false; phi.len()];
        for idx in family.iter().flatten() {
            if *idx >= phi.len() || std::mem::replace(&mut used[*idx], true) {
                return Err(Error::validation("projection family is not orthogonal"));
            }
        }
    }
    let norm_on = |v: &dyn Fn(usize) -> f64, set: &[usize]| set.iter().map(|&i| v(i) * v(i)).sum::<f64>().sqrt();
    let diff = |i: usize| phi[i] - f[i];
    let phi_at = |i: usize| phi[i];
    let lhs = first
        .iter()
        .zip(second)
        .map(|(a, b)| norm_on(&diff, a) * norm_on(&phi_at, b))
        .sum();
    let all: Vec<usize> = (0..phi.len()).collect();
    Ok((lhs, norm_on(&diff, &all) * norm_on(&phi_at, &all)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn c0_values() {
        for beta in [1.1, 1.5, 2.0] {
            assert_eq!(c0(beta, 1.0).unwrap(), 0.5);
        }
        let expected = 4.0_f64.powf(-0.25) / 1.5;
        assert!((c0(2.0, 4.0).unwrap() - expected).abs() < 1e-15);
        assert!((c0(2.0, 4.0).unwrap() - 0.471405).abs() < 1e-6);
        assert!(c0(0.9, 2.0).is_err());
        assert!(c0(1.5, 0.5).is_err());
    }

    #[test]
    fn c0_monotone_and_finite() {
        for beta in [1.01, 1.3, 1.7, 2.0] {
            let mut prev = 0.5;
            for k in 0..=120 {
                let lambda = 10_f64.powf(k as f64 * 0.05);
                let v = c0(beta, lambda).unwrap();
                assert!(v.is_finite() && v > 0.0 && v <= 0.5);
                assert!(v <= prev + 1e-15);
                prev = v;
            }
        }
    }

    #[test]
    fn basic_norm_examples() {
        let r = basic_norm(2.0, 3).unwrap();
        assert!((r.formula_value - 1.5).abs() < 1e-15);
        assert!((r.model_value - 1.5).abs() < 1e-10);
        let r = basic_norm(2.0, 2).unwrap();
        assert!((r.formula_value - 2.0 / 3.0_f64.sqrt()).abs() < 1e-15);
        for p in [2_u64, 5, 13] {
            for beta in [1.1, 1.5, 2.0] {
                let ratio = nu_a(p, beta) / nu_b(p, beta).unwrap();
                let pf = p as f64;
                assert!((ratio - pf.powf(beta) / (pf + 1.0)).abs() < 1e-12 * ratio);
            }
        }
    }

    #[test]
    fn recursion_examples() {
        let stats = PairScheduleStats::new(2.0, &[(2, 3)]).unwrap();
        let v = set_recursion_mass(&stats, 1).unwrap();
        assert!((v - 0.375 * (8.0 / 9.0) * (2.0 / 3.0)).abs() < 1e-15);
        assert!((v - 0.22222).abs() < 1e-5);
        assert!(set_recursion_mass(&stats, 2).is_err());
        assert!(PairScheduleStats::new(2.0, &[(2, 3), (3, 5)]).is_err());
        assert!(PairScheduleStats::new(2.0, &[(2, 4)]).is_err());
    }

    #[test]
    fn exclusion_shrinks_mass() {
        let stats = PairScheduleStats::new(1.5, &[(2, 3), (5, 7), (11, 13)]).unwrap();
        for n in 2..=3 {
            let bare = stats.nu_a_p[n - 1] * stats.nu_a_q[n - 1];
            assert!(set_recursion_mass(&stats, n).unwrap() < bare);
        }
    }

    #[test]
    fn single_pair_unit_check() {
        let stats = PairScheduleStats::new(2.0, &[(2, 3)]).unwrap();
        let loose = mixing_sum_lower_bound(2.0, 1.5, 0.9, &stats).unwrap();
        assert!(!loose.violations.iter().any(|v| v.inequality == Inequality::UnitMassProduct));
        let tight = mixing_sum_lower_bound(2.0, 1.5, 0.5, &stats).unwrap();
        let v = tight
            .violations
            .iter()
            .find(|v| v.inequality == Inequality::UnitMassProduct)
            .expect("reported");
        assert_eq!(v.index, 1);
        assert!((v.lhs - 0.2222222).abs() < 1e-6 && v.rhs == 0.5);
        assert!(!tight.pass);
        assert_eq!(tight.threshold_index, None);
    }

    #[test]
    fn bound_tends_to_c0() {
        let stats = PairScheduleStats::new(2.0, &[(2, 3)]).unwrap();
        let c = c0(2.0, 1.5).unwrap();
        let mut prev_gap = f64::INFINITY;
        for delta in [0.1, 0.01, 0.001, 1e-6] {
            let r = mixing_sum_lower_bound(2.0, 1.5, delta, &stats).unwrap();
            let gap = c - r.bound;
            assert!(gap >= 0.0 && gap < prev_gap);
            prev_gap = gap;
        }
        assert!(prev_gap < 1e-5);
    }

    #[test]
    fn telescoping_small() {
        let (s, closed) = telescoping(&[0.5, 0.5]);
        assert_eq!((s, closed), (0.75, 0.75));
        let (s, closed) = telescoping(&[]);
        assert_eq!((s, closed), (0.0, 0.0));
    }

    #[test]
    fn projection_bound() {
        let phi = [1.0, -2.0, 0.5, 3.0, 0.0, 1.5];
        let f = [0.8, -1.0, 0.5, 2.0, 0.3, 1.0];
        let first = vec![vec![0, 1], vec![2], vec![3, 4]];
        let second = vec![vec![5], vec![0, 3], vec![1]];
        let (lhs, rhs) = orthogonal_projection_bound(&phi, &f, &first, &second).unwrap();
        assert!(lhs <= rhs);
        let overlapping = vec![vec![0, 1], vec![1]];
        assert!(orthogonal_projection_bound(&phi, &f, &overlapping, &second).is_err());
    }
}
