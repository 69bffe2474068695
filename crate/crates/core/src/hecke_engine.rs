//! The Hecke pair `(GL_2^+(Q), SL_2(Z))` restricted to integral matrices.
//!
//! Left classes `Gamma m` of determinant-`n` matrices are represented by row
//! Hermite normal forms `[[d1, c], [0, d2]]`, `d1 d2 = n`, `0 <= c < d2`.
//! Double cosets are labeled by Smith form `diag(d1, d2)`, `d1 | d2`.
//!
//! Normalization: the algebra element `[g]` acts on Gamma-invariant functions
//! as `R(g) T_g`, where `T_g` averages over the `R(g)` left classes in
//! `Gamma g Gamma`. On the upper half-plane `[g]` and `[g^{-1}]` give the same
//! operator since `g^{-1}` is a scalar multiple of the adjugate of `g`.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::arith::{divisors, ext_gcd, gcd};
use crate::error::{Error, Result};
use crate::exec::{map_slice, Execution};

/// Integral 2x2 matrix with positive determinant.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct IntegerMatrix {
    pub a: i64,
    pub b: i64,
    pub c: i64,
    pub d: i64,
}

impl IntegerMatrix {
    pub fn new(a: i64, b: i64, c: i64, d: i64) -> Result<Self> {
        let m = IntegerMatrix { a, b, c, d };
        if m.det() <= 0 {
            return Err(Error::validation(format!("{m} does not have positive determinant")));
        }
        Ok(m)
    }

    pub const fn diag(d1: i64, d2: i64) -> Self {
        IntegerMatrix { a: d1, b: 0, c: 0, d: d2 }
    }

    pub const fn identity() -> Self {
        Self::diag(1, 1)
    }

    pub fn det(&self) -> i64 {
        self.a * self.d - self.b * self.c
    }

    pub fn mul(&self, o: &IntegerMatrix) -> IntegerMatrix {
        IntegerMatrix {
            a: self.a * o.a + self.b * o.c,
            b: self.a * o.b + self.b * o.d,
            c: self.c * o.a + self.d * o.c,
            d: self.c * o.b + self.d * o.d,
        }
    }

    /// Overflow-checked product.
    pub fn checked_mul(&self, o: &IntegerMatrix) -> Option<IntegerMatrix> {
        let dot = |x: i64, y: i64, z: i64, w: i64| x.checked_mul(y)?.checked_add(z.checked_mul(w)?);
        Some(IntegerMatrix {
            a: dot(self.a, o.a, self.b, o.c)?,
            b: dot(self.a, o.b, self.b, o.d)?,
            c: dot(self.c, o.a, self.d, o.c)?,
            d: dot(self.c, o.b, self.d, o.d)?,
        })
    }

    pub fn smith_label(&self) -> SmithLabel {
        let d1 = gcd(gcd(self.a.unsigned_abs(), self.b.unsigned_abs()), gcd(self.c.unsigned_abs(), self.d.unsigned_abs()));
        let n = self.det().unsigned_abs();
        SmithLabel { d1, d2: n / d1 }
    }

    /// Canonical representative of the left class `SL_2(Z) m`.
    pub fn left_class_canonical(&self) -> IntegerMatrix {
        // Row-reduce the first column to (g, 0) with an SL_2(Z) matrix.
        let (g, s, t) = ext_gcd(self.a, self.c);
        let (u, v) = (self.a / g, self.c / g);
        // [[s, t], [-v, u]] has determinant s u + t v = 1.
        let top_b = s * self.b + t * self.d;
        let bottom_d = -v * self.b + u * self.d;
        debug_assert!(g > 0 && bottom_d > 0);
        IntegerMatrix {
            a: g,
            b: top_b.rem_euclid(bottom_d),
            c: 0,
            d: bottom_d,
        }
    }

    /// `self ~ other` in `SL_2(Z) \ GL_2^+(Q)`: `self other^{-1}` is in `SL_2(Z)`.
    pub fn same_left_class(&self, other: &IntegerMatrix) -> bool {
        let n = other.det();
        if n != self.det() {
            return false;
        }
        // other^{-1} = adj(other) / n
        let adj = IntegerMatrix { a: other.d, b: -other.b, c: -other.c, d: other.a };
        let p = self.mul(&adj);
        [p.a, p.b, p.c, p.d].iter().all(|x| x % n == 0)
    }
}

impl fmt::Display for IntegerMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[[{}, {}], [{}, {}]]", self.a, self.b, self.c, self.d)
    }
}

/// Double-coset label: Smith form `diag(d1, d2)` with `d1 | d2`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SmithLabel {
    pub d1: u64,
    pub d2: u64,
}

impl SmithLabel {
    pub fn new(d1: u64, d2: u64) -> Result<Self> {
        if d1 == 0 || !d2.is_multiple_of(d1) {
            return Err(Error::validation(format!("({d1}, {d2}) is not a Smith label")));
        }
        Ok(SmithLabel { d1, d2 })
    }

    pub fn det(&self) -> u64 {
        self.d1 * self.d2
    }

    pub fn matrix(&self) -> IntegerMatrix {
        IntegerMatrix::diag(self.d1 as i64, self.d2 as i64)
    }
}

impl fmt::Display for SmithLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{}", self.d1, self.d2)
    }
}

impl std::str::FromStr for SmithLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (x, y) = s
            .split_once(',')
            .ok_or_else(|| Error::validation(format!("label {s:?} is not \"d1,d2\"")))?;
        let parse = |t: &str| {
            t.trim()
                .parse::<u64>()
                .map_err(|e| Error::validation(format!("label {s:?}: {e}")))
        };
        SmithLabel::new(parse(x)?, parse(y)?)
    }
}

/// Left-class representatives of all determinant-`n` integral matrices, in
/// Hermite normal form. There are `sigma(n)` of them.
pub fn double_coset_reps(n: u64) -> Result<Vec<IntegerMatrix>> {
    if n == 0 {
        return Err(Error::validation("determinant must be >= 1"));
    }
    let mut out = Vec::new();
    for d1 in divisors(n) {
        let d2 = n / d1;
        for c in 0..d2 {
            out.push(IntegerMatrix { a: d1 as i64, b: c as i64, c: 0, d: d2 as i64 });
        }
    }
    Ok(out)
}

/// Left-class representatives inside the double coset `label`.
pub fn left_reps(label: SmithLabel) -> Vec<IntegerMatrix> {
    double_coset_reps(label.det())
        .expect("label determinant is positive")
        .into_iter()
        .filter(|m| m.smith_label() == label)
        .collect()
}

/// `R(g) = |Gamma \ Gamma g Gamma|`, by enumeration.
pub fn degree(g: &IntegerMatrix) -> Result<u64> {
    if g.det() <= 0 {
        return Err(Error::validation(format!("{g} does not have positive determinant")));
    }
    Ok(label_degree(g.smith_label()))
}

pub fn label_degree(label: SmithLabel) -> u64 {
    left_reps(label).len() as u64
}

/// Degrees of every double coset of determinant `n`.
pub fn degree_table(n: u64) -> Result<BTreeMap<SmithLabel, u64>> {
    let mut table = BTreeMap::new();
    for m in double_coset_reps(n)? {
        *table.entry(m.smith_label()).or_insert(0) += 1;
    }
    Ok(table)
}

/// Finitely supported function on double cosets, `sum coeff [label]`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct HeckeElement {
    terms: BTreeMap<SmithLabel, i64>,
}

impl HeckeElement {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn unit() -> Self {
        Self::basis(SmithLabel { d1: 1, d2: 1 })
    }

    pub fn basis(label: SmithLabel) -> Self {
        let mut terms = BTreeMap::new();
        terms.insert(label, 1);
        HeckeElement { terms }
    }

    pub fn from_terms<I: IntoIterator<Item = (SmithLabel, i64)>>(terms: I) -> Self {
        let mut out = HeckeElement::zero();
        for (l, c) in terms {
            out.add_term(l, c);
        }
        out
    }

    pub fn add_term(&mut self, label: SmithLabel, coeff: i64) {
        let slot = self.terms.entry(label).or_insert(0);
        *slot += coeff;
        if *slot == 0 {
            self.terms.remove(&label);
        }
    }

    pub fn coeff(&self, label: SmithLabel) -> i64 {
        self.terms.get(&label).copied().unwrap_or(0)
    }

    pub fn terms(&self) -> impl Iterator<Item = (SmithLabel, i64)> + '_ {
        self.terms.iter().map(|(&l, &c)| (l, c))
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// `sum coeff * R(label)`, a ring homomorphism to Z.
    pub fn total_degree(&self) -> i64 {
        self.terms().map(|(l, c)| c * label_degree(l) as i64).sum()
    }

    pub fn add(&self, other: &HeckeElement) -> HeckeElement {
        let mut out = self.clone();
        for (l, c) in other.terms() {
            out.add_term(l, c);
        }
        out
    }

    pub fn scale(&self, k: i64) -> HeckeElement {
        HeckeElement::from_terms(self.terms().map(|(l, c)| (l, c * k)))
    }
}

impl fmt::Display for HeckeElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let parts: Vec<String> = self.terms().map(|(l, c)| format!("{c}[diag({l})]")).collect();
        write!(f, "{}", parts.join(" + "))
    }
}

impl Serialize for HeckeElement {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeMap;
        let mut map = serializer.serialize_map(Some(self.terms.len()))?;
        for (l, c) in self.terms() {
            map.serialize_entry(&l.to_string(), &c)?;
        }
        map.end()
    }
}

impl<'de> Deserialize<'de> for HeckeElement {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = BTreeMap::<String, i64>::deserialize(deserializer)?;
        let mut out = HeckeElement::zero();
        for (k, c) in raw {
            let label: SmithLabel = k.parse().map_err(serde::de::Error::custom)?;
            out.add_term(label, c);
        }
        Ok(out)
    }
}

/// `[alpha] * [beta] = sum_gamma c_gamma [gamma]` with
/// `c_gamma = #{(i, j) : Gamma alpha_i beta_j = Gamma gamma}`.
fn convolve_basis(alpha: SmithLabel, beta: SmithLabel) -> Result<Vec<(SmithLabel, i64)>> {
    let ra = left_reps(alpha);
    let rb = left_reps(beta);
    let mut hits: HashMap<IntegerMatrix, i64> = HashMap::new();
    for x in &ra {
        for y in &rb {
            let prod = x
                .checked_mul(y)
                .ok_or_else(|| Error::Internal(format!("overflow multiplying {x} by {y}")))?;
            *hits.entry(prod.left_class_canonical()).or_insert(0) += 1;
        }
    }
    let mut per_label: BTreeMap<SmithLabel, (i64, i64)> = BTreeMap::new();
    for (class, count) in &hits {
        let label = class.smith_label();
        let slot = per_label.entry(label).or_insert((0, 0));
        slot.0 += count;
        if *class == label.matrix() {
            slot.1 = *count;
        }
    }
    per_label
        .into_iter()
        .map(|(label, (total, at_diag))| {
            // every left class of the double coset is hit equally often
            if total != at_diag * label_degree(label) as i64 {
                return Err(Error::Internal(format!(
                    "uneven class counts in [{alpha}]*[{beta}] at {label}"
                )));
            }
            Ok((label, at_diag))
        })
        .collect()
}

pub fn convolve(f1: &HeckeElement, f2: &HeckeElement) -> Result<HeckeElement> {
    convolve_with(f1, f2, Execution::default())
}

pub fn convolve_with(f1: &HeckeElement, f2: &HeckeElement, exec: Execution) -> Result<HeckeElement> {
    let pairs: Vec<_> = f1
        .terms()
        .flat_map(|(a, ca)| f2.terms().map(move |(b, cb)| (a, ca, b, cb)))
        .collect();
    let parts = map_slice(exec, &pairs, |&(a, ca, b, cb)| {
        convolve_basis(a, b).map(|terms| (ca * cb, terms))
    });
    let mut out = HeckeElement::zero();
    for part in parts {
        let (scale, terms) = part?;
        for (l, c) in terms {
            out.add_term(l, scale * c);
        }
    }
    Ok(out)
}

/// A left action of integral matrices on points.
pub trait MatrixAction<P> {
    fn act(&self, m: &IntegerMatrix, point: &P) -> std::result::Result<P, String>;
}

/// `(T_g f)(x) = R(g)^{-1} sum_{h in Gamma \ Gamma g Gamma} f(h x)` at each point.
pub fn hecke_apply<P, A, F>(g: &IntegerMatrix, f: F, points: &[P], action: &A) -> Result<Vec<f64>>
where
    A: MatrixAction<P>,
    F: Fn(&P) -> f64,
{
    if g.det() <= 0 {
        return Err(Error::validation(format!("{g} does not have positive determinant")));
    }
    let reps = left_reps(g.smith_label());
    let r = reps.len() as f64;
    points
        .iter()
        .enumerate()
        .map(|(index, x)| {
            let mut sum = 0.0;
            for h in &reps {
                let hx = action.act(h, x).map_err(|reason| Error::Action { index, reason })?;
                sum += f(&hx);
            }
            Ok(sum / r)
        })
        .collect()
}

/// Action of a Hecke algebra element, `[g] -> R(g) T_g`, extended linearly.
pub fn represent<P, A, F>(element: &HeckeElement, f: F, points: &[P], action: &A) -> Result<Vec<f64>>
where
    A: MatrixAction<P>,
    F: Fn(&P) -> f64 + Copy,
{
    let mut out = vec![0.0; points.len()];
    for (label, coeff) in element.terms() {
        let vals = hecke_apply(&label.matrix(), f, points, action)?;
        let weight = coeff as f64 * label_degree(label) as f64;
        for (o, v) in out.iter_mut().zip(vals) {
            *o += weight * v;
        }
    }
    Ok(out)
}

/// Check `|T_g f|^2 <= T_g(|f|^2)` at every point; returns the largest
/// violation `|T_g f|^2 - T_g(|f|^2)` (non-positive when the inequality holds).
pub fn convexity_excess<P, A, F>(g: &IntegerMatrix, f: F, points: &[P], action: &A) -> Result<f64>
where
    A: MatrixAction<P>,
    F: Fn(&P) -> f64 + Copy,
{
    let tf = hecke_apply(g, f, points, action)?;
    let tf2 = hecke_apply(g, |x: &P| f(x) * f(x), points, action)?;
    Ok(tf
        .iter()
        .zip(&tf2)
        .map(|(a, b)| a * a - b)
        .fold(f64::NEG_INFINITY, f64::max))
}
