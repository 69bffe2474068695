//! Measures `mu_{beta,p}` on integral p-adic 2x2 matrices.
//!
//! `M_2(Z_p)` splits into elementary-divisor strata `GL_2(Z_p) diag(p^a, p^b) GL_2(Z_p)`.
//! A stratum is a union of `N(a,b)` cosets of the unit group, and scaling
//! gives each coset mass `p^{-(a+b) beta} mu(GL_2(Z_p))` with
//! `mu(GL_2(Z_p)) = (1 - p^-beta)(1 - p^(1-beta))`.
//!
//! Finite-level enumeration over `Z/p^k` is the oracle for all of this.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::arith::{is_prime, valuation};
use crate::error::{Error, Result};
use crate::exec::{compensated_sum, map_indexed, Execution};

/// Largest number of level-k cells (`p^{4k}`) brute force will visit.
pub const ENUMERATION_LIMIT: u64 = 1 << 24;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FiniteLevelMatrix {
    pub p: u64,
    pub k: u32,
    /// Row-major `[m00, m01, m10, m11]`, reduced mod `p^k`.
    pub entries: [u64; 4],
}

impl FiniteLevelMatrix {
    pub fn new(p: u64, k: u32, entries: [u64; 4]) -> Self {
        let q = p.pow(k);
        FiniteLevelMatrix {
            p,
            k,
            entries: entries.map(|e| e % q),
        }
    }

    pub fn modulus(&self) -> u64 {
        self.p.pow(self.k)
    }

    /// Determinant reduced mod `p^k`.
    pub fn det(&self) -> u64 {
        let q = self.modulus() as u128;
        let [a, b, c, d] = self.entries.map(|e| e as u128);
        ((a * d % q + q - b * c % q) % q) as u64
    }

    /// Valuation of a residue, capped at `k` (zero has "valuation >= k").
    pub fn residue_valuation(&self, x: u64) -> u32 {
        if x == 0 {
            self.k
        } else {
            valuation(x, self.p).min(self.k)
        }
    }
}

/// Elementary-divisor class at finite level.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PadicStratum {
    /// Smith form `diag(p^a, p^b)`, `a <= b`, fully determined (`a + b < k`).
    Resolved { a: u32, b: u32 },
    /// `det = 0 mod p^k`: the level is too coarse to separate the stratum.
    Tail(u32),
}

pub fn elementary_divisor_type(m: &FiniteLevelMatrix) -> PadicStratum {
    let a = m.entries.iter().map(|&e| m.residue_valuation(e)).min().unwrap_or(m.k);
    let det_val = m.residue_valuation(m.det());
    if det_val >= m.k {
        PadicStratum::Tail(m.k)
    } else {
        PadicStratum::Resolved { a, b: det_val - a }
    }
}

fn check_prime(p: u64) -> Result<()> {
    if is_prime(p) {
        Ok(())
    } else {
        Err(Error::validation(format!("{p} is not prime")))
    }
}

fn pow_u128(p: u64, e: u32) -> Result<u128> {
    (p as u128).checked_pow(e).ok_or_else(|| Error::ResourceLimit {
        what: format!("{p}^{e} overflows 128 bits"),
        limit: u128::BITS as u64,
    })
}

/// `N(a,b)`: number of unit-group cosets in the stratum of `diag(p^a, p^b)`.
///
/// Counts Hermite normal forms `[[p^i, c], [0, p^j]]`, `i + j = a + b`,
/// `0 <= c < p^j`, whose entry gcd has valuation `a`, grouping the `c` by
/// valuation instead of listing them.
pub fn stratum_coset_count(p: u64, a: u32, b: u32) -> Result<u128> {
    check_prime(p)?;
    if a > b {
        return Err(Error::validation(format!("stratum needs a <= b, got ({a}, {b})")));
    }
    let n = a + b;
    let mut total = 0_u128;
    for i in 0..=n {
        let j = n - i;
        let m = i.min(j);
        total += if m < a {
            0
        } else if m == a {
            // v(c) >= a
            pow_u128(p, j - a)?
        } else {
            // v(c) == a
            pow_u128(p, j - a)? - pow_u128(p, j - a - 1)?
        };
    }
    Ok(total)
}

/// `mu_{beta,p}(GL_2(Z_p)) = (1 - p^-beta)(1 - p^(1-beta))`.
pub fn unit_group_mass(p: u64, beta: f64) -> f64 {
    let p = p as f64;
    (1.0 - p.powf(-beta)) * (1.0 - p.powf(1.0 - beta))
}

fn check_beta(beta: f64) -> Result<()> {
    if beta > 1.0 && beta.is_finite() {
        Ok(())
    } else {
        Err(Error::validation(format!(
            "GL2 masses need beta > 1 (convergent regime), got {beta}"
        )))
    }
}

pub fn stratum_mass(p: u64, beta: f64, a: u32, b: u32) -> Result<f64> {
    check_beta(beta)?;
    let count = stratum_coset_count(p, a, b)?;
    Ok(count as f64 * (p as f64).powf(-((a + b) as f64) * beta) * unit_group_mass(p, beta))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MassCheck {
    pub partial_sum: f64,
    pub gap_to_one: f64,
}

/// Sum of stratum masses over `a <= b`, `a + b <= cutoff`.
pub fn total_mass_check(p: u64, beta: f64, cutoff: u32) -> Result<MassCheck> {
    if !(beta > 1.0) {
        return Err(Error::Divergent(format!(
            "sum of GL2 stratum masses diverges for beta = {beta} <= 1"
        )));
    }
    let rows = stratum_table(p, beta, cutoff)?;
    let partial_sum = compensated_sum(rows.iter().map(|r| r.mass));
    let gap = compensated_sum(std::iter::once(1.0).chain(rows.iter().map(|r| -r.mass)));
    Ok(MassCheck {
        partial_sum,
        gap_to_one: gap.max(0.0),
    })
}

/// One row of the stratum table written by the command-line runner.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StratumRow {
    pub p: u64,
    pub beta: f64,
    pub a: u32,
    pub b: u32,
    pub coset_count: u128,
    pub mass: f64,
}

/// All strata with `a + b <= cutoff`, ordered by `a + b`, then `a`.
pub fn stratum_table(p: u64, beta: f64, cutoff: u32) -> Result<Vec<StratumRow>> {
    let mut rows = Vec::new();
    for n in 0..=cutoff {
        for a in 0..=n / 2 {
            let b = n - a;
            rows.push(StratumRow {
                p,
                beta,
                a,
                b,
                coset_count: stratum_coset_count(p, a, b)?,
                mass: stratum_mass(p, beta, a, b)?,
            });
        }
    }
    Ok(rows)
}

fn check_enumeration(p: u64, k: u32) -> Result<u64> {
    check_prime(p)?;
    if k == 0 {
        return Err(Error::validation("level k must be >= 1"));
    }
    let cells = (p as u128).checked_pow(4 * k).unwrap_or(u128::MAX);
    if cells > ENUMERATION_LIMIT as u128 {
        return Err(Error::ResourceLimit {
            what: format!("enumerating M_2(Z/{p}^{k})"),
            limit: ENUMERATION_LIMIT,
        });
    }
    Ok(p.pow(k))
}

/// Per-stratum `(cells, cells satisfying the predicate)` at level `k`.
fn stratum_counts<F>(p: u64, k: u32, pred: &F, exec: Execution) -> Result<BTreeMap<PadicStratum, (u64, u64)>>
where
    F: Fn(&FiniteLevelMatrix) -> bool + Sync,
{
    let q = check_enumeration(p, k)?;
    let chunks = map_indexed(exec, q as usize, |first| {
        let mut counts: BTreeMap<PadicStratum, (u64, u64)> = BTreeMap::new();
        for e1 in 0..q {
            for e2 in 0..q {
                for e3 in 0..q {
                    let m = FiniteLevelMatrix { p, k, entries: [first as u64, e1, e2, e3] };
                    let slot = counts.entry(elementary_divisor_type(&m)).or_default();
                    slot.0 += 1;
                    if pred(&m) {
                        slot.1 += 1;
                    }
                }
            }
        }
        counts
    });
    let mut merged = BTreeMap::new();
    for chunk in chunks {
        for (s, (t, h)) in chunk {
            let slot: &mut (u64, u64) = merged.entry(s).or_default();
            slot.0 += t;
            slot.1 += h;
        }
    }
    Ok(merged)
}

/// Exact Haar (`beta = 2`) mass of a level-`k` predicate: `count / p^{4k}`.
pub fn haar_mass<F>(p: u64, k: u32, pred: &F, exec: Execution) -> Result<f64>
where
    F: Fn(&FiniteLevelMatrix) -> bool + Sync,
{
    let counts = stratum_counts(p, k, pred, exec)?;
    let hits: u64 = counts.values().map(|c| c.1).sum();
    let cells: u64 = counts.values().map(|c| c.0).sum();
    Ok(hits as f64 / cells as f64)
}

/// Stratified reweighting: each resolved cell of stratum `(a,b)` carries
/// `stratum_mass / #cells`; Tail cells share the remaining mass evenly.
pub fn stratified_mass<F>(p: u64, k: u32, pred: &F, beta: f64, exec: Execution) -> Result<f64>
where
    F: Fn(&FiniteLevelMatrix) -> bool + Sync,
{
    check_beta(beta)?;
    let counts = stratum_counts(p, k, pred, exec)?;
    let mut terms = Vec::with_capacity(counts.len());
    let mut resolved_mass = Vec::new();
    let mut tail = (0_u64, 0_u64);
    for (stratum, &(cells, hits)) in &counts {
        match *stratum {
            PadicStratum::Resolved { a, b } => {
                let mass = stratum_mass(p, beta, a, b)?;
                resolved_mass.push(mass);
                terms.push(mass * hits as f64 / cells as f64);
            }
            PadicStratum::Tail(_) => tail = (cells, hits),
        }
    }
    if tail.0 > 0 {
        let residual = compensated_sum(std::iter::once(1.0).chain(resolved_mass.iter().map(|m| -m)));
        terms.push(residual * tail.1 as f64 / tail.0 as f64);
    }
    Ok(compensated_sum(terms))
}

/// Mass of a level-`k` predicate: exact Haar counting at `beta = 2`,
/// stratified reweighting otherwise.
pub fn brute_force_mass<F>(p: u64, k: u32, pred: F, beta: f64) -> Result<f64>
where
    F: Fn(&FiniteLevelMatrix) -> bool + Sync,
{
    brute_force_mass_with(p, k, pred, beta, Execution::default())
}

pub fn brute_force_mass_with<F>(p: u64, k: u32, pred: F, beta: f64, exec: Execution) -> Result<f64>
where
    F: Fn(&FiniteLevelMatrix) -> bool + Sync,
{
    if beta == 2.0 {
        check_prime(p)?;
        haar_mass(p, k, &pred, exec)
    } else {
        stratified_mass(p, k, &pred, beta, exec)
    }
}

/// Predicate helper: `|det m|_p = p^-v`, resolvable when `v < k`.
pub fn det_valuation_is(v: u32) -> impl Fn(&FiniteLevelMatrix) -> bool + Sync {
    move |m| m.residue_valuation(m.det()) == v
}
