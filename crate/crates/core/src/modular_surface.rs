//! Geometry of `SL_2(Z) \ H`: reduction to the standard fundamental domain,
//! the invariant measure normalized to total mass 2, and Hecke points.
//!
//! The strict fundamental domain is `-1/2 <= x < 1/2`, `|z| >= 1`, keeping
//! only the `x <= 0` half of the unit arc.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::arith::is_prime;
use crate::error::{Error, Result};
use crate::exec::{map_slice, Execution};
use crate::hecke_engine::{double_coset_reps, IntegerMatrix, MatrixAction};
use crate::quadrature::{integrate, integrate_piecewise};
use crate::tail_equivalence::least_squares_slope;

/// Width of the band around `|z| = 1` treated as the arc.
pub const ARC_TOLERANCE: f64 = 1e-12;
/// Per-box absolute tolerance of the mass quadrature.
pub const QUADRATURE_TOLERANCE: f64 = 1e-10;
const MAX_REDUCTION_STEPS: usize = 100_000;
/// Largest Hecke orbit `equidistribution_test` will build.
pub const MAX_ORBIT: u64 = 10_000_000;

/// A point of the upper half-plane.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Result<Self> {
        if !(y > 0.0) || !x.is_finite() || !y.is_finite() {
            return Err(Error::validation(format!("({x}, {y}) is not in the upper half-plane")));
        }
        Ok(Point { x, y })
    }

    pub fn norm_sqr(&self) -> f64 {
        self.x * self.x + self.y * self.y
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DomainPoint {
    pub x: f64,
    pub y: f64,
    pub reduced: bool,
}

impl DomainPoint {
    pub fn point(&self) -> Point {
        Point { x: self.x, y: self.y }
    }
}

/// Mobius action `z -> (a z + b) / (c z + d)`.
pub fn mobius(m: &IntegerMatrix, z: &Point) -> Point {
    let (a, b, c, d) = (m.a as f64, m.b as f64, m.c as f64, m.d as f64);
    let re = c * z.x + d;
    let im = c * z.y;
    let denom = re * re + im * im;
    // (a z + b) * conj(c z + d)
    let num_re = (a * z.x + b) * re + a * z.y * im;
    let num_im = a * z.y * re - (a * z.x + b) * im;
    debug_assert!((num_im - m.det() as f64 * z.y).abs() <= 1e-9 * num_im.abs().max(1.0));
    Point {
        x: num_re / denom,
        y: m.det() as f64 * z.y / denom,
    }
}

pub struct MobiusAction;

impl MatrixAction<Point> for MobiusAction {
    fn act(&self, m: &IntegerMatrix, z: &Point) -> std::result::Result<Point, String> {
        if !(z.y > 0.0) {
            return Err(format!("({}, {}) is not in the upper half-plane", z.x, z.y));
        }
        Ok(mobius(m, z))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Reduction {
    pub point: DomainPoint,
    /// Generator count: inversions plus total translation length.
    pub word_length: usize,
    /// `gamma` in `SL_2(Z)` with `gamma z = point`.
    pub matrix: IntegerMatrix,
}

const S: IntegerMatrix = IntegerMatrix { a: 0, b: -1, c: 1, d: 0 };

fn compose(step: &IntegerMatrix, acc: &IntegerMatrix) -> Result<IntegerMatrix> {
    step.checked_mul(acc).ok_or_else(|| Error::ResourceLimit {
        what: "reduction matrix entries overflow i64".into(),
        limit: i64::MAX as u64,
    })
}

fn invert(z: Point) -> Point {
    let r = z.norm_sqr();
    Point { x: -z.x / r, y: z.y / r }
}

pub fn reduce_to_fundamental_domain(z: Point) -> Result<Reduction> {
    let mut z = Point::new(z.x, z.y)?;
    let mut gamma = IntegerMatrix::identity();
    let mut word = 0_usize;
    let mut steps = 0;
    loop {
        steps += 1;
        if steps > MAX_REDUCTION_STEPS {
            return Err(Error::ResourceLimit {
                what: "fundamental-domain reduction steps".into(),
                limit: MAX_REDUCTION_STEPS as u64,
            });
        }
        let shift = (z.x + 0.5).floor();
        if shift != 0.0 {
            if shift.abs() > i64::MAX as f64 / 4.0 {
                return Err(Error::ResourceLimit {
                    what: "translation length".into(),
                    limit: i64::MAX as u64,
                });
            }
            let n = shift as i64;
            z.x -= shift;
            gamma = compose(&IntegerMatrix { a: 1, b: -n, c: 0, d: 1 }, &gamma)?;
            word += n.unsigned_abs() as usize;
        }
        if z.norm_sqr() < 1.0 - ARC_TOLERANCE {
            z = invert(z);
            gamma = compose(&S, &gamma)?;
            word += 1;
            continue;
        }
        break;
    }
    if (z.norm_sqr() - 1.0).abs() <= ARC_TOLERANCE && z.x > 0.0 {
        z = invert(z);
        z.x = z.x.max(-0.5);
        gamma = compose(&S, &gamma)?;
        word += 1;
    }
    Ok(Reduction {
        point: DomainPoint { x: z.x, y: z.y, reduced: true },
        word_length: word,
        matrix: gamma,
    })
}

/// Axis-aligned box `[x0, x1) x [y0, y1)` in the strip chart; `y1` may be infinite.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DomainBox {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl DomainBox {
    pub fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Result<Self> {
        if !(x0 <= x1 && y0 <= y1 && y0 >= 0.0 && x0 >= -0.5 && x1 <= 0.5) {
            return Err(Error::validation(format!(
                "box [{x0}, {x1}) x [{y0}, {y1}) is not inside the chart [-1/2, 1/2] x [0, inf)"
            )));
        }
        Ok(DomainBox { x0, x1, y0, y1 })
    }

    pub fn full_domain() -> Self {
        DomainBox { x0: -0.5, x1: 0.5, y0: 0.0, y1: f64::INFINITY }
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x0 && x < self.x1 && y >= self.y0 && y < self.y1
    }

    fn overlaps(&self, o: &DomainBox) -> bool {
        self.x0.max(o.x0) < self.x1.min(o.x1) && self.y0.max(o.y0) < self.y1.min(o.y1)
    }
}

/// Normalizing constant `c` with `c * area(F) = 2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalizedHyperbolicMeasure {
    pub normalization: f64,
}

impl NormalizedHyperbolicMeasure {
    /// Computes the hyperbolic area of the fundamental domain by quadrature.
    pub fn new() -> Self {
        let area = integrate(|x| 1.0 / (1.0 - x * x).sqrt(), -0.5, 0.5, 1e-14);
        NormalizedHyperbolicMeasure { normalization: 2.0 / area }
    }

    pub fn global() -> &'static Self {
        static MEASURE: OnceLock<NormalizedHyperbolicMeasure> = OnceLock::new();
        MEASURE.get_or_init(NormalizedHyperbolicMeasure::new)
    }

    /// `c * int int_{box cap F} dx dy / y^2`.
    pub fn mass(&self, region: &DomainBox) -> f64 {
        let x0 = region.x0.max(-0.5);
        let x1 = region.x1.min(0.5);
        if !(x0 < x1) || !(region.y0 < region.y1) {
            return 0.0;
        }
        let (y0, y1) = (region.y0, region.y1);
        let inv_top = if y1.is_finite() { 1.0 / y1 } else { 0.0 };
        // inner integral over y done exactly: 1/max(y0, sqrt(1-x^2)) - 1/y1
        let inner = |x: f64| {
            let floor = (1.0 - x * x).sqrt().max(y0);
            (1.0 / floor - inv_top).max(0.0)
        };
        let mut breaks = Vec::new();
        for level in [y0, y1] {
            if level.is_finite() && level < 1.0 {
                let xb = (1.0 - level * level).sqrt();
                breaks.extend([-xb, xb]);
            }
        }
        self.normalization * integrate_piecewise(inner, x0, x1, &breaks, QUADRATURE_TOLERANCE)
    }
}

impl Default for NormalizedHyperbolicMeasure {
    fn default() -> Self {
        Self::new()
    }
}

pub fn hyperbolic_mass(region: &DomainBox) -> f64 {
    NormalizedHyperbolicMeasure::global().mass(region)
}

/// Reduced images of `z` under every left class of determinant-`n` matrices,
/// sorted; `sigma(n)` points counted with multiplicity.
pub fn hecke_points(z: Point, n: u64) -> Result<Vec<DomainPoint>> {
    hecke_points_with(z, n, Execution::default())
}

pub fn hecke_points_with(z: Point, n: u64, exec: Execution) -> Result<Vec<DomainPoint>> {
    let z = Point::new(z.x, z.y)?;
    let reps = double_coset_reps(n)?;
    let images = map_slice(exec, &reps, |h| {
        reduce_to_fundamental_domain(mobius(h, &z)).map(|r| r.point)
    });
    let mut pts = images.into_iter().collect::<Result<Vec<_>>>()?;
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    Ok(pts)
}

/// Six cells: the halves `x < 0`, `x >= 0` crossed with the bands
/// `y < 1.4`, `1.4 <= y < 2.9`, `y >= 2.9`, each band holding roughly a
/// third of the mass.
pub fn six_box_partition() -> Vec<DomainBox> {
    let xs = [(-0.5, 0.0), (0.0, 0.5)];
    let ys = [(0.0, 1.4), (1.4, 2.9), (2.9, f64::INFINITY)];
    ys.iter()
        .flat_map(|&(y0, y1)| xs.iter().map(move |&(x0, x1)| DomainBox { x0, x1, y0, y1 }))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxStat {
    pub box_id: usize,
    pub empirical: f64,
    pub expected: f64,
    pub discrepancy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscrepancyRow {
    pub n: u32,
    pub points: usize,
    pub discrepancy: f64,
    pub boxes: Vec<BoxStat>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquidistributionReport {
    pub base: Point,
    pub p: u64,
    pub rows: Vec<DiscrepancyRow>,
    /// Least-squares slope of `log D_n` over `n >= 2` (positive `D_n` only).
    pub log_slope: Option<f64>,
}

impl EquidistributionReport {
    pub fn discrepancy(&self, n: u32) -> Option<f64> {
        self.rows.iter().find(|r| r.n == n).map(|r| r.discrepancy)
    }
}

/// Discrepancy of the Hecke points of degree `p^n`, `n = 1..=n_max`, against
/// the normalized measure over the given boxes.
pub fn equidistribution_test(z: Point, p: u64, n_max: u32, boxes: &[DomainBox]) -> Result<EquidistributionReport> {
    equidistribution_test_with(z, p, n_max, boxes, Execution::default())
}

pub fn equidistribution_test_with(
    z: Point,
    p: u64,
    n_max: u32,
    boxes: &[DomainBox],
    exec: Execution,
) -> Result<EquidistributionReport> {
    if !is_prime(p) {
        return Err(Error::validation(format!("{p} is not prime")));
    }
    if n_max < 2 {
        return Err(Error::validation("n_max must be >= 2"));
    }
    if boxes.is_empty() {
        return Err(Error::validation("partition is empty"));
    }
    for (i, b) in boxes.iter().enumerate() {
        DomainBox::new(b.x0, b.x1, b.y0, b.y1)?;
        if boxes[..i].iter().any(|o| o.overlaps(b)) {
            return Err(Error::validation(format!("box {i} overlaps an earlier box")));
        }
    }
    let expected: Vec<f64> = boxes.iter().map(|b| hyperbolic_mass(b) / 2.0).collect();
    let mut rows = Vec::with_capacity(n_max as usize);
    for n in 1..=n_max {
        let degree = p
            .checked_pow(n)
            .filter(|&d| (d as u128) * (p as u128) / (p as u128 - 1) <= MAX_ORBIT as u128)
            .ok_or_else(|| Error::ResourceLimit {
                what: format!("Hecke orbit of degree {p}^{n}"),
                limit: MAX_ORBIT,
            })?;
        let pts = hecke_points_with(z, degree, exec)?;
        let total = pts.len() as f64;
        let stats: Vec<BoxStat> = boxes
            .iter()
            .zip(&expected)
            .enumerate()
            .map(|(box_id, (b, &exp))| {
                let hits = pts.iter().filter(|q| b.contains(q.x, q.y)).count();
                let empirical = hits as f64 / total;
                BoxStat {
                    box_id,
                    empirical,
                    expected: exp,
                    discrepancy: (empirical - exp).abs(),
                }
            })
            .collect();
        rows.push(DiscrepancyRow {
            n,
            points: pts.len(),
            discrepancy: stats.iter().map(|s| s.discrepancy).fold(0.0, f64::max),
            boxes: stats,
        });
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = rows
        .iter()
        .filter(|r| r.n >= 2 && r.discrepancy > 0.0)
        .map(|r| (r.n as f64, r.discrepancy.ln()))
        .unzip();
    Ok(EquidistributionReport {
        base: z,
        p,
        rows,
        log_slope: least_squares_slope(&xs, &ys),
    })
}
