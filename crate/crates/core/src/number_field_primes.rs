//! Prime ideals of Q and of quadratic fields, counted by absolute norm, and the
//! block construction pairing primes whose norm ratios approximate a target.
//!
//! Only norms are modeled. A rational prime `p` splits, stays inert or ramifies
//! in `Q(sqrt d)` according to the Kronecker symbol of the field discriminant
//! at `p`; no ideal arithmetic beyond that is needed.

use std::f64::consts::FRAC_PI_2;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::arith::{is_squarefree, kronecker_prime};
use crate::error::{Error, Result};
use crate::exec::{map_indexed, Execution};
use crate::sieve;

/// Default norm ceiling for pairings over Q.
pub const RATIONAL_CEILING: u64 = 100_000_000;
/// Default norm ceiling for pairings over quadratic fields.
pub const QUADRATIC_CEILING: u64 = 1_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FieldKind {
    Rationals,
    Quadratic { d: i64 },
}

/// A validated base field: Q or Q(sqrt d) with `d` squarefree, `d != 0, 1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(transparent)]
pub struct FieldSpec(FieldKind);

impl FieldSpec {
    pub const fn rationals() -> Self {
        FieldSpec(FieldKind::Rationals)
    }

    pub fn quadratic(d: i64) -> Result<Self> {
        if d == 0 || d == 1 {
            return Err(Error::validation(format!("Q(sqrt {d}) is not a quadratic field")));
        }
        if !is_squarefree(d) {
            return Err(Error::validation(format!("d = {d} is not squarefree")));
        }
        Ok(FieldSpec(FieldKind::Quadratic { d }))
    }

    pub fn from_kind(kind: FieldKind) -> Result<Self> {
        match kind {
            FieldKind::Rationals => Ok(Self::rationals()),
            FieldKind::Quadratic { d } => Self::quadratic(d),
        }
    }

    pub fn kind(&self) -> FieldKind {
        self.0
    }

    /// Field discriminant; `None` for Q.
    pub fn discriminant(&self) -> Option<i64> {
        match self.0 {
            FieldKind::Rationals => None,
            FieldKind::Quadratic { d } if d.rem_euclid(4) == 1 => Some(d),
            FieldKind::Quadratic { d } => Some(4 * d),
        }
    }

    /// How the rational prime `p` decomposes.
    pub fn splitting(&self, p: u64) -> Splitting {
        match self.discriminant() {
            None => Splitting::Rational,
            Some(disc) => match kronecker_prime(disc, p) {
                1 => Splitting::Split,
                -1 => Splitting::Inert,
                _ => Splitting::Ramified,
            },
        }
    }

    pub fn default_ceiling(&self) -> u64 {
        match self.0 {
            FieldKind::Rationals => RATIONAL_CEILING,
            FieldKind::Quadratic { .. } => QUADRATIC_CEILING,
        }
    }
}

impl<'de> Deserialize<'de> for FieldSpec {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let kind = FieldKind::deserialize(deserializer)?;
        FieldSpec::from_kind(kind).map_err(serde::de::Error::custom)
    }
}

impl std::fmt::Display for FieldSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.0 {
            FieldKind::Rationals => write!(f, "Q"),
            FieldKind::Quadratic { d } => write!(f, "Q(sqrt({d}))"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Splitting {
    Rational,
    Split,
    Inert,
    Ramified,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IdealTag {
    Rational,
    /// One of the two conjugate ideals above a split prime.
    Split(u8),
    Inert,
    Ramified,
}

/// A finite place, identified by the rational prime below it, its absolute
/// norm and its decomposition type. Ordered by norm first.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PrimeIdeal {
    pub norm: u64,
    pub residue_prime: u64,
    pub tag: IdealTag,
}

/// Where primes come from: the execution strategy for sieving and an optional
/// cache directory.
#[derive(Clone, Debug, Default)]
pub struct PrimeSource {
    pub exec: Execution,
    pub cache_dir: Option<PathBuf>,
}

impl PrimeSource {
    pub fn primes_up_to(&self, bound: u64) -> Result<Vec<u64>> {
        sieve::load_or_compute(self.cache_dir.as_deref(), bound, self.exec)
    }
}

/// Prime ideals of norm at most `bound`, sorted by norm.
pub fn enumerate_prime_ideals(field: FieldSpec, bound: u64) -> Result<Vec<PrimeIdeal>> {
    enumerate_prime_ideals_with(field, bound, &PrimeSource::default())
}

pub fn enumerate_prime_ideals_with(
    field: FieldSpec,
    bound: u64,
    source: &PrimeSource,
) -> Result<Vec<PrimeIdeal>> {
    if bound < 2 {
        return Err(Error::validation(format!("norm bound must be >= 2, got {bound}")));
    }
    let primes = source.primes_up_to(bound)?;
    Ok(ideals_from_primes(field, &primes, bound))
}

fn ideals_from_primes(field: FieldSpec, primes: &[u64], bound: u64) -> Vec<PrimeIdeal> {
    let mut out = Vec::with_capacity(primes.len() * 2);
    for &p in primes.iter().take_while(|&&p| p <= bound) {
        let ideal = |norm, tag| PrimeIdeal { norm, residue_prime: p, tag };
        match field.splitting(p) {
            Splitting::Rational => out.push(ideal(p, IdealTag::Rational)),
            Splitting::Ramified => out.push(ideal(p, IdealTag::Ramified)),
            Splitting::Split => {
                out.push(ideal(p, IdealTag::Split(1)));
                out.push(ideal(p, IdealTag::Split(2)));
            }
            Splitting::Inert => {
                if let Some(n) = p.checked_mul(p).filter(|&n| n <= bound) {
                    out.push(ideal(n, IdealTag::Inert));
                }
            }
        }
    }
    out.sort_unstable();
    out
}

/// Number of prime ideals with norm at most `x`.
pub fn prime_ideal_count(field: FieldSpec, x: f64) -> u64 {
    if !(x >= 2.0) {
        return 0;
    }
    let bound = x.floor() as u64;
    let primes = sieve::primes_up_to(bound);
    ideals_from_primes(field, &primes, bound).len() as u64
}

/// Parameters of the pairing construction.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PairingParams {
    pub beta: f64,
    pub lambda: f64,
    pub eps: f64,
    pub n_pairs: usize,
    /// Starting point of the upward scan for x0; every `p_n` exceeds it.
    pub min_norm: f64,
    /// Largest norm the construction may enumerate; field default when `None`.
    pub ceiling: Option<u64>,
}

impl PairingParams {
    pub fn new(beta: f64, lambda: f64, eps: f64, n_pairs: usize) -> Self {
        PairingParams {
            beta,
            lambda,
            eps,
            n_pairs,
            min_norm: 1.0,
            ceiling: None,
        }
    }

    pub fn with_min_norm(mut self, min_norm: f64) -> Self {
        self.min_norm = min_norm;
        self
    }

    pub fn with_ceiling(mut self, ceiling: u64) -> Self {
        self.ceiling = Some(ceiling);
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta <= 2.0) {
            return Err(Error::validation(format!("beta must lie in (0, 2], got {}", self.beta)));
        }
        if !(self.lambda > 1.0 && self.lambda.is_finite()) {
            return Err(Error::validation(format!("lambda must exceed 1, got {}", self.lambda)));
        }
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(Error::validation(format!("eps must be positive, got {}", self.eps)));
        }
        if !(self.min_norm > 0.0 && self.min_norm.is_finite()) {
            return Err(Error::validation(format!(
                "min_norm must be positive, got {}",
                self.min_norm
            )));
        }
        Ok(())
    }

    /// Target ratio of raw norms, `lambda^(1/beta)`.
    pub fn norm_ratio(&self) -> f64 {
        self.lambda.powf(1.0 / self.beta)
    }

    /// Relative block width. At `beta = 1` this is `min((lambda-1)/2, eps/(2 lambda))`.
    pub fn block_width(&self) -> f64 {
        let by_ratio = (self.norm_ratio() - 1.0) / 2.0;
        let by_eps = ((1.0 + self.eps / self.lambda).powf(1.0 / self.beta) - 1.0) / 2.0;
        by_ratio.min(by_eps)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrimePair {
    pub p: PrimeIdeal,
    pub q: PrimeIdeal,
}

impl PrimePair {
    pub fn ratio(&self, beta: f64) -> f64 {
        (self.q.norm as f64 / self.p.norm as f64).powf(beta)
    }
}

/// One consumed block pair `B(y)`, `C_m` inside `B(r y)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairingBlock {
    pub m: u32,
    /// Lower end `y = x0 r^(2m)` of the p-block.
    pub lower: f64,
    pub p_block_size: usize,
    pub q_block_size: usize,
    /// Pairs taken from this block (less than the block size only for the last one).
    pub used: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrimePairing {
    pub beta: f64,
    pub lambda: f64,
    pub eps: f64,
    pub delta: f64,
    pub x0: f64,
    pub pairs: Vec<PrimePair>,
    pub blocks: Vec<PairingBlock>,
}

impl PrimePairing {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Check every structural invariant of a pairing.
    pub fn validate(&self) -> Result<()> {
        let r = self.lambda.powf(1.0 / self.beta);
        if !(1.0 + self.delta < r) {
            return Err(Error::Internal(format!("1 + delta = {} not below {r}", 1.0 + self.delta)));
        }
        let mut seen = std::collections::HashSet::new();
        for (n, pair) in self.pairs.iter().enumerate() {
            let dev = (pair.ratio(self.beta) - self.lambda).abs();
            if !(dev < self.eps) {
                return Err(Error::Internal(format!(
                    "pair {n} ({}, {}) deviates by {dev} >= eps",
                    pair.p.norm, pair.q.norm
                )));
            }
            if !seen.insert(pair.p) || !seen.insert(pair.q) {
                return Err(Error::Internal(format!("pair {n} reuses a prime ideal")));
            }
        }
        for w in self.pairs.windows(2) {
            if w[0].p.norm > w[1].p.norm || w[0].q.norm > w[1].q.norm {
                return Err(Error::Internal("norms not nondecreasing".into()));
            }
        }
        Ok(())
    }
}

enum Attempt {
    Done(PrimePairing),
    NeedLargerBound,
}

/// Pair prime ideals `p_n`, `q_n` with `|N(q_n)^beta / N(p_n)^beta - lambda| < eps`.
///
/// The construction works with raw norms and the ratio `r = lambda^(1/beta)`:
/// blocks `B(y) = {x < N <= (1+delta) y}` at `y = x0 r^(2m)` provide the `p_n`,
/// and the smallest `|B(y)|` norms of `B(r y)` provide the `q_n`. `x0` is
/// scanned upward by factors of `r` until every consumed block satisfies
/// `|B(r y)| >= |B(y)|`.
pub fn pair_primes(field: FieldSpec, params: &PairingParams) -> Result<PrimePairing> {
    pair_primes_with(field, params, &PrimeSource::default())
}

pub fn pair_primes_with(
    field: FieldSpec,
    params: &PairingParams,
    source: &PrimeSource,
) -> Result<PrimePairing> {
    params.validate()?;
    let delta = params.block_width();
    if params.n_pairs == 0 {
        return Ok(PrimePairing {
            beta: params.beta,
            lambda: params.lambda,
            eps: params.eps,
            delta,
            x0: params.min_norm,
            pairs: Vec::new(),
            blocks: Vec::new(),
        });
    }
    let ceiling = params.ceiling.unwrap_or_else(|| field.default_ceiling());
    let mut bound = ceiling.clamp(2, 1 << 16);
    loop {
        let ideals = enumerate_prime_ideals_with(field, bound, source)?;
        match attempt_pairing(&ideals, bound, params, delta) {
            Attempt::Done(pairing) => {
                pairing.validate()?;
                return Ok(pairing);
            }
            Attempt::NeedLargerBound if bound < ceiling => {
                bound = bound.saturating_mul(4).min(ceiling);
            }
            Attempt::NeedLargerBound => {
                return Err(Error::ResourceLimit {
                    what: format!(
                        "{} pairs over {field} need norms beyond the ceiling",
                        params.n_pairs
                    ),
                    limit: ceiling,
                });
            }
        }
    }
}

fn block(ideals: &[PrimeIdeal], lower: f64, upper: f64) -> &[PrimeIdeal] {
    let start = ideals.partition_point(|i| i.norm as f64 <= lower);
    let end = ideals.partition_point(|i| i.norm as f64 <= upper);
    &ideals[start..end.max(start)]
}

fn attempt_pairing(
    ideals: &[PrimeIdeal],
    bound: u64,
    params: &PairingParams,
    delta: f64,
) -> Attempt {
    let r = params.norm_ratio();
    let mut x0 = params.min_norm;
    'scan: loop {
        let mut pairs = Vec::with_capacity(params.n_pairs);
        let mut blocks = Vec::new();
        let mut m = 0_u32;
        while pairs.len() < params.n_pairs {
            let y = x0 * r.powi(2 * m as i32);
            let q_lower = r * y;
            if (1.0 + delta) * q_lower > bound as f64 {
                return Attempt::NeedLargerBound;
            }
            let p_block = block(ideals, y, (1.0 + delta) * y);
            let q_block = block(ideals, q_lower, (1.0 + delta) * q_lower);
            if q_block.len() < p_block.len() {
                x0 *= r;
                continue 'scan;
            }
            let used = p_block.len().min(params.n_pairs - pairs.len());
            pairs.extend(
                p_block[..used]
                    .iter()
                    .zip(&q_block[..used])
                    .map(|(&p, &q)| PrimePair { p, q }),
            );
            blocks.push(PairingBlock {
                m,
                lower: y,
                p_block_size: p_block.len(),
                q_block_size: q_block.len(),
                used,
            });
            m += 1;
        }
        return Attempt::Done(PrimePairing {
            beta: params.beta,
            lambda: params.lambda,
            eps: params.eps,
            delta,
            x0,
            pairs,
            blocks,
        });
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DivergenceReport {
    /// `S_m = sum_{n <= m} N(q_n)^(-beta)`.
    pub partial_sums: Vec<f64>,
    /// Block-count comparison sum `sum_m used_m ((1+delta) r^(2m+1) x0)^(-beta)`,
    /// which never exceeds the final partial sum.
    pub lower_bound: f64,
}

pub fn divergence_report(pairing: &PrimePairing) -> Result<DivergenceReport> {
    if pairing.pairs.is_empty() {
        return Err(Error::validation("divergence report needs a nonempty pairing"));
    }
    let beta = pairing.beta;
    let mut acc = 0.0;
    let partial_sums = pairing
        .pairs
        .iter()
        .map(|pair| {
            acc += (pair.q.norm as f64).powf(-beta);
            acc
        })
        .collect();
    let r = pairing.lambda.powf(1.0 / beta);
    let lower_bound = pairing
        .blocks
        .iter()
        .map(|b| b.used as f64 * ((1.0 + pairing.delta) * r * b.lower).powf(-beta))
        .sum();
    Ok(DivergenceReport {
        partial_sums,
        lower_bound,
    })
}

/// A degree-one prime of Z[i], normalized to the associate `a + bi` with
/// `a > 0`, `b >= 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianAngle {
    pub a: u64,
    pub b: u64,
    pub norm: u64,
    /// `arg(a + bi)` in `[0, pi/2)`.
    pub angle: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AngleSample {
    pub angles: Vec<GaussianAngle>,
    /// Kolmogorov-Smirnov distance to the uniform law on `[0, pi/2)`.
    pub ks_statistic: f64,
}

/// Angles of the degree-one prime ideals of Z[i] with norm at most `bound`,
/// one per ideal, reduced modulo the unit group.
pub fn gaussian_prime_angles(bound: u64) -> Result<AngleSample> {
    gaussian_prime_angles_with(bound, Execution::default())
}

pub fn gaussian_prime_angles_with(bound: u64, exec: Execution) -> Result<AngleSample> {
    if bound < 2 {
        return Err(Error::validation(format!("norm bound must be >= 2, got {bound}")));
    }
    let primes = sieve::primes_up_to_with(bound, exec);
    let is_prime = |n: u64| primes.binary_search(&n).is_ok();
    let a_max = (bound as f64).sqrt() as u64 + 1;
    let rows = map_indexed(exec, a_max as usize, |i| {
        let a = i as u64 + 1;
        let mut row = Vec::new();
        let mut b = 0_u64;
        while a * a + b * b <= bound {
            let norm = a * a + b * b;
            if is_prime(norm) {
                row.push(GaussianAngle {
                    a,
                    b,
                    norm,
                    angle: (b as f64).atan2(a as f64),
                });
            }
            b += 1;
        }
        row
    });
    let mut angles = rows.concat();
    angles.sort_by(|x, y| x.norm.cmp(&y.norm).then(x.angle.total_cmp(&y.angle)));
    let mut unit: Vec<f64> = angles.iter().map(|g| g.angle / FRAC_PI_2).collect();
    let ks_statistic = ks_uniform(&mut unit);
    Ok(AngleSample {
        angles,
        ks_statistic,
    })
}

/// Kolmogorov-Smirnov distance between the sample and U[0,1). Sorts in place.
pub fn ks_uniform(sample: &mut [f64]) -> f64 {
    if sample.is_empty() {
        return 0.0;
    }
    sample.sort_by(f64::total_cmp);
    let n = sample.len() as f64;
    sample
        .iter()
        .enumerate()
        .map(|(i, &u)| {
            let above = (i as f64 + 1.0) / n - u;
            let below = u - i as f64 / n;
            above.max(below)
        })
        .fold(0.0, f64::max)
}
