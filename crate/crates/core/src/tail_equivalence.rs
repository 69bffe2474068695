//! Countable products of the geometric factors `(Z_+, nu_{beta,v})`, cylinder
//! measures, and certificates placing a number in the asymptotic ratio set of
//! the tail equivalence relation.
//!
//! A certificate block uses two places `v, w` with `K = {(0,1)}`,
//! `L = {(1,0)}`. The measure ratio of the two cylinders is exactly
//! `(N(w)/N(v))^beta`: the `(1 - N^-beta)` factors cancel.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::number_field_primes::{
    enumerate_prime_ideals_with, pair_primes_with, FieldSpec, PairingParams, PrimeIdeal,
    PrimeSource,
};

/// Normalization checks stop after this many terms...
pub const WEIGHT_TRUNCATION_TERMS: u32 = 64;
/// ...or once the remaining tail is below this.
pub const WEIGHT_TAIL_TOLERANCE: f64 = 1e-15;

/// One factor `(Z_+, nu_{beta,v})` with `nu(n) = N^(-n beta) (1 - N^(-beta))`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FactorSpace {
    pub place_norm: u64,
    pub beta: f64,
}

impl FactorSpace {
    pub fn new(place_norm: u64, beta: f64) -> Result<Self> {
        if place_norm < 2 {
            return Err(Error::validation(format!("place norm must be >= 2, got {place_norm}")));
        }
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::validation(format!("beta must be positive, got {beta}")));
        }
        Ok(FactorSpace { place_norm, beta })
    }

    /// `N^(-beta)`, the common ratio of the geometric weights.
    fn ratio(&self) -> f64 {
        (self.place_norm as f64).powf(-self.beta)
    }

    pub fn weight(&self, n: u32) -> f64 {
        factor_weight(self, n)
    }

    /// Truncated total mass and the number of terms summed.
    pub fn truncated_mass(&self) -> (f64, u32) {
        let r = self.ratio();
        let mut sum = 0.0;
        let mut terms = 0;
        while terms < WEIGHT_TRUNCATION_TERMS {
            sum += self.weight(terms);
            terms += 1;
            if r.powi(terms as i32) < WEIGHT_TAIL_TOLERANCE {
                break;
            }
        }
        (sum, terms)
    }
}

pub fn factor_weight(space: &FactorSpace, n: u32) -> f64 {
    let r = space.ratio();
    (space.place_norm as f64).powf(-(n as f64) * space.beta) * (1.0 - r)
}

/// `Z(a) = {x : x_i = a_i for i in the support}`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CylinderSet {
    pub assignment: BTreeMap<usize, u32>,
}

impl CylinderSet {
    pub fn new<I: IntoIterator<Item = (usize, u32)>>(coords: I) -> Self {
        CylinderSet {
            assignment: coords.into_iter().collect(),
        }
    }

    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.assignment.keys().copied()
    }

    /// Union of two cylinders with disjoint supports.
    pub fn join(&self, other: &CylinderSet) -> Result<CylinderSet> {
        let mut out = self.clone();
        for (&i, &a) in &other.assignment {
            if out.assignment.insert(i, a).is_some() {
                return Err(Error::validation(format!("supports overlap at index {i}")));
            }
        }
        Ok(out)
    }
}

/// Factor spaces indexed by place.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ProductSpace {
    pub factors: BTreeMap<usize, FactorSpace>,
}

impl ProductSpace {
    pub fn insert(&mut self, index: usize, space: FactorSpace) {
        self.factors.insert(index, space);
    }

    pub fn get(&self, index: usize) -> Result<&FactorSpace> {
        self.factors.get(&index).ok_or(Error::MissingFactor(index))
    }

    /// The factors a certificate refers to.
    pub fn for_certificate(cert: &RatioCertificate) -> Result<Self> {
        let mut out = ProductSpace::default();
        for b in &cert.blocks {
            out.insert(b.p_place, FactorSpace::new(b.p_norm, cert.beta)?);
            out.insert(b.q_place, FactorSpace::new(b.q_norm, cert.beta)?);
        }
        Ok(out)
    }
}

pub fn cylinder_measure(spaces: &ProductSpace, z: &CylinderSet) -> Result<f64> {
    z.assignment
        .iter()
        .try_fold(1.0, |acc, (&i, &a)| Ok(acc * spaces.get(i)?.weight(a)))
}

/// Block `I_n = {v_n, w_n}`, `K_n = {(0,1)}`, `L_n = {(1,0)}`.
///
/// Places are indices into the norm-ordered enumeration of prime ideals of
/// the field; a certificate read without them gets `2n`, `2n+1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CertificateBlock {
    pub p_norm: u64,
    pub q_norm: u64,
    #[serde(default = "unset_place")]
    pub p_place: usize,
    #[serde(default = "unset_place")]
    pub q_place: usize,
}

fn unset_place() -> usize {
    usize::MAX
}

impl CertificateBlock {
    /// The cylinder `a = (0, 1)` on `(v, w)`.
    pub fn k_cylinder(&self) -> CylinderSet {
        CylinderSet::new([(self.p_place, 0), (self.q_place, 1)])
    }

    /// The cylinder `phi(a) = (1, 0)` on `(v, w)`.
    pub fn l_cylinder(&self) -> CylinderSet {
        CylinderSet::new([(self.p_place, 1), (self.q_place, 0)])
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RatioCertificate {
    pub beta: f64,
    pub lambda: f64,
    pub eps: f64,
    pub blocks: Vec<CertificateBlock>,
}

impl<'de> Deserialize<'de> for RatioCertificate {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            beta: f64,
            lambda: f64,
            eps: f64,
            blocks: Vec<CertificateBlock>,
        }
        let raw = Raw::deserialize(deserializer)?;
        let blocks = raw.blocks.into_iter().enumerate().map(|(n, mut b)| {
            if b.p_place == usize::MAX {
                b.p_place = 2 * n;
            }
            if b.q_place == usize::MAX {
                b.q_place = 2 * n + 1;
            }
            b
        });
        Ok(RatioCertificate {
            beta: raw.beta,
            lambda: raw.lambda,
            eps: raw.eps,
            blocks: blocks.collect(),
        })
    }
}

impl RatioCertificate {
    /// Certificate over explicit norm pairs, with places `2n`, `2n+1`.
    pub fn from_norm_pairs(beta: f64, lambda: f64, eps: f64, pairs: &[(u64, u64)]) -> Self {
        let blocks = pairs
            .iter()
            .enumerate()
            .map(|(n, &(p_norm, q_norm))| CertificateBlock {
                p_norm,
                q_norm,
                p_place: 2 * n,
                q_place: 2 * n + 1,
            })
            .collect();
        RatioCertificate {
            beta,
            lambda,
            eps,
            blocks,
        }
    }

    /// Places used by more than one block (or twice in one block).
    pub fn overlapping_places(&self) -> Vec<usize> {
        let mut seen = BTreeSet::new();
        let mut dup = BTreeSet::new();
        for b in &self.blocks {
            for place in [b.p_place, b.q_place] {
                if !seen.insert(place) {
                    dup.insert(place);
                }
            }
        }
        dup.into_iter().collect()
    }
}

fn place_index(ideals: &[PrimeIdeal], ideal: &PrimeIdeal) -> Result<usize> {
    ideals
        .binary_search(ideal)
        .map_err(|_| Error::Internal(format!("ideal of norm {} missing from enumeration", ideal.norm)))
}

pub fn build_certificate(
    field: FieldSpec,
    beta: f64,
    lambda: f64,
    eps: f64,
    n_blocks: usize,
) -> Result<RatioCertificate> {
    build_certificate_with(
        field,
        &PairingParams::new(beta, lambda, eps, n_blocks),
        &PrimeSource::default(),
    )
}

pub fn build_certificate_with(
    field: FieldSpec,
    params: &PairingParams,
    source: &PrimeSource,
) -> Result<RatioCertificate> {
    if params.n_pairs == 0 {
        return Err(Error::validation("a certificate needs at least one block"));
    }
    let pairing = pair_primes_with(field, params, source)?;
    let top = pairing.pairs.last().map(|p| p.q.norm).unwrap_or(2).max(2);
    let ideals = enumerate_prime_ideals_with(field, top, source)?;
    let blocks = pairing
        .pairs
        .iter()
        .map(|pair| {
            Ok(CertificateBlock {
                p_norm: pair.p.norm,
                q_norm: pair.q.norm,
                p_place: place_index(&ideals, &pair.p)?,
                q_place: place_index(&ideals, &pair.q)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RatioCertificate {
        beta: params.beta,
        lambda: params.lambda,
        eps: params.eps,
        blocks,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockReport {
    pub p_norm: u64,
    pub q_norm: u64,
    /// `mu(Z(phi(a))) / mu(Z(a))`.
    pub ratio: f64,
    /// `|ratio - lambda|`.
    pub deviation: f64,
    /// `mu(Z(a))` for the single `a` in `K_n`.
    pub mass: f64,
    pub passes: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    pub blocks: Vec<BlockReport>,
    pub cumulative_mass: f64,
    pub mass_partial_sums: Vec<f64>,
    /// Least-squares slope of the mass partial sums against
    /// `sum_{k<=n} N(q_k)^(-beta)`.
    pub reference_slope: Option<f64>,
    pub divergence_threshold: f64,
    pub overlapping_places: Vec<usize>,
    pub pass: bool,
}

pub fn verify_certificate(
    cert: &RatioCertificate,
    spaces: &ProductSpace,
    divergence_threshold: f64,
) -> Result<CertificateReport> {
    let mut blocks = Vec::with_capacity(cert.blocks.len());
    let mut mass_partial_sums = Vec::with_capacity(cert.blocks.len());
    let mut reference = Vec::with_capacity(cert.blocks.len());
    let (mut cumulative, mut ref_acc) = (0.0, 0.0);
    for b in &cert.blocks {
        let mass = cylinder_measure(spaces, &b.k_cylinder())?;
        let image = cylinder_measure(spaces, &b.l_cylinder())?;
        let ratio = image / mass;
        let deviation = (ratio - cert.lambda).abs();
        cumulative += mass;
        ref_acc += (b.q_norm as f64).powf(-cert.beta);
        mass_partial_sums.push(cumulative);
        reference.push(ref_acc);
        blocks.push(BlockReport {
            p_norm: b.p_norm,
            q_norm: b.q_norm,
            ratio,
            deviation,
            mass,
            passes: deviation < cert.eps,
        });
    }
    let overlapping_places = cert.overlapping_places();
    let pass = !blocks.is_empty()
        && overlapping_places.is_empty()
        && blocks.iter().all(|b| b.passes)
        && cumulative >= divergence_threshold;
    Ok(CertificateReport {
        blocks,
        cumulative_mass: cumulative,
        reference_slope: least_squares_slope(&reference, &mass_partial_sums),
        mass_partial_sums,
        divergence_threshold,
        overlapping_places,
        pass,
    })
}

pub(crate) fn least_squares_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len().min(y.len());
    if n < 2 {
        return None;
    }
    let mx = x[..n].iter().sum::<f64>() / n as f64;
    let my = y[..n].iter().sum::<f64>() / n as f64;
    let sxy: f64 = x[..n].iter().zip(&y[..n]).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x[..n].iter().map(|a| (a - mx) * (a - mx)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}
