//! Reproducible experiment runner behind the `aelab` command.
//!
//! Each experiment writes `<name>.json` (summary with the schema tag and the
//! embedded configuration) and `<name>.csv` (detail rows) into the output
//! directory. Reports contain only values derived from the configuration, so
//! identical configurations give identical bytes whatever the thread count.

use std::f64::consts::TAU;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::arith::{is_prime, sigma};
use crate::error::{Error, Result};
use crate::exec::{with_threads, Execution};
use crate::hecke_engine::{
    convexity_excess, convolve_with, degree_table, HeckeElement, IntegerMatrix, SmithLabel,
};
use crate::mixing_bounds::{basic_norm_seeded, mixing_sum_lower_bound, NormComparison, PairScheduleStats};
use crate::modular_surface::{equidistribution_test_with, six_box_partition, MobiusAction, Point};
use crate::number_field_primes::{
    divergence_report, gaussian_prime_angles_with, pair_primes_with, FieldSpec, PairingParams,
    PrimeSource,
};
use crate::padic_matrices::{
    brute_force_mass_with, elementary_divisor_type, stratum_mass, stratum_table, total_mass_check,
    PadicStratum,
};
use crate::tail_equivalence::{
    build_certificate_with, verify_certificate, ProductSpace, RatioCertificate,
};

pub const SCHEMA: &str = "aelab-1";
pub const CACHE_DIR_ENV: &str = "AELAB_CACHE_DIR";

/// Number of base points per random function in the convexity check.
const CONVEXITY_POINTS: usize = 8;
/// Number of schedule primes whose norm model is evaluated in `mixing-bound`.
const NORM_CHECKS: usize = 10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "subcommand", rename_all = "kebab-case")]
pub enum Experiment {
    PairPrimes {
        field: FieldSpec,
        beta: f64,
        lambda: f64,
        eps: f64,
        pairs: usize,
        min_norm: f64,
        ceiling: Option<u64>,
    },
    Certificate {
        field: FieldSpec,
        beta: f64,
        lambda: f64,
        eps: f64,
        blocks: usize,
        divergence_threshold: f64,
        /// Verify this certificate file instead of building one.
        input: Option<PathBuf>,
    },
    PadicMass {
        p: u64,
        beta: f64,
        cutoff: u32,
        /// Compare low strata against enumeration mod `p^level`; 0 skips.
        check_level: u32,
    },
    HeckeTable {
        n_max: u64,
        trials: usize,
        seed: Option<u64>,
    },
    Equidist {
        x: f64,
        y: f64,
        p: u64,
        n_max: u32,
    },
    MixingBound {
        beta: f64,
        lambda: f64,
        delta: f64,
        eps: f64,
        pairs: usize,
        min_norm: f64,
        seed: Option<u64>,
    },
    Angles {
        bound: u64,
    },
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::PairPrimes { .. } => "pair-primes",
            Experiment::Certificate { .. } => "certificate",
            Experiment::PadicMass { .. } => "padic-mass",
            Experiment::HeckeTable { .. } => "hecke-table",
            Experiment::Equidist { .. } => "equidist",
            Experiment::MixingBound { .. } => "mixing-bound",
            Experiment::Angles { .. } => "angles",
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::validation(format!("{name} must be positive, got {v}")))
            }
        };
        let nonzero = |name: &str, v: u64| {
            if v > 0 {
                Ok(())
            } else {
                Err(Error::validation(format!("{name} must be at least 1")))
            }
        };
        let prime = |p: u64| {
            if is_prime(p) {
                Ok(())
            } else {
                Err(Error::validation(format!("{p} is not prime")))
            }
        };
        match self {
            Experiment::PairPrimes { beta, lambda, eps, pairs, min_norm, .. } => {
                positive("beta", *beta)?;
                positive("lambda", *lambda)?;
                positive("eps", *eps)?;
                positive("min_norm", *min_norm)?;
                nonzero("pairs", *pairs as u64)
            }
            Experiment::Certificate { beta, lambda, eps, blocks, divergence_threshold, input, .. } => {
                if !(*divergence_threshold >= 0.0 && divergence_threshold.is_finite()) {
                    return Err(Error::validation("divergence threshold must be non-negative"));
                }
                if input.is_none() {
                    positive("beta", *beta)?;
                    positive("lambda", *lambda)?;
                    positive("eps", *eps)?;
                    nonzero("blocks", *blocks as u64)?;
                }
                Ok(())
            }
            Experiment::PadicMass { p, beta, cutoff, .. } => {
                prime(*p)?;
                positive("beta", *beta)?;
                if *cutoff > 64 {
                    return Err(Error::validation("cutoff must be at most 64"));
                }
                Ok(())
            }
            Experiment::HeckeTable { n_max, trials, seed } => {
                nonzero("n_max", *n_max)?;
                if *trials > 0 && seed.is_none() {
                    return Err(Error::validation("hecke-table with convexity trials needs --seed"));
                }
                Ok(())
            }
            Experiment::Equidist { x, y, p, n_max } => {
                Point::new(*x, *y)?;
                prime(*p)?;
                if *n_max < 2 {
                    return Err(Error::validation("n_max must be >= 2"));
                }
                Ok(())
            }
            Experiment::MixingBound { beta, lambda, delta, eps, pairs, min_norm, seed } => {
                if !(*beta > 1.0 && *beta <= 2.0) {
                    return Err(Error::validation(format!("beta must lie in (1, 2], got {beta}")));
                }
                positive("lambda", *lambda)?;
                positive("eps", *eps)?;
                positive("min_norm", *min_norm)?;
                if !(*delta > 0.0 && *delta < 1.0) {
                    return Err(Error::validation(format!("delta must lie in (0, 1), got {delta}")));
                }
                nonzero("pairs", *pairs as u64)?;
                if seed.is_none() {
                    return Err(Error::validation("mixing-bound needs --seed"));
                }
                Ok(())
            }
            Experiment::Angles { bound } => {
                if *bound < 2 {
                    return Err(Error::validation("bound must be >= 2"));
                }
                Ok(())
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub out_dir: PathBuf,
    /// Worker threads; 0 uses every core, 1 runs sequentially.
    pub threads: usize,
    pub cache_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(experiment: Experiment, out_dir: impl Into<PathBuf>) -> Self {
        ExperimentConfig {
            experiment,
            out_dir: out_dir.into(),
            threads: 0,
            cache_dir: None,
        }
    }

    /// Reads the sieve cache directory from `AELAB_CACHE_DIR`.
    pub fn with_env_cache(mut self) -> Self {
        self.cache_dir = std::env::var_os(CACHE_DIR_ENV)
            .filter(|v| !v.is_empty())
            .map(PathBuf::from);
        self
    }

    fn exec(&self) -> Execution {
        if self.threads == 1 {
            Execution::Sequential
        } else {
            Execution::Parallel
        }
    }

    fn source(&self) -> PrimeSource {
        PrimeSource {
            exec: self.exec(),
            cache_dir: self.cache_dir.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Outcome {
    pub summary: String,
    pub files: Vec<PathBuf>,
}

#[derive(Serialize)]
struct Envelope<'a, R> {
    schema: &'static str,
    config: &'a Experiment,
    result: R,
}

struct Output<R> {
    result: R,
    rows: Vec<Vec<String>>,
    header: &'static [&'static str],
    summary: String,
    extra: Vec<(String, String)>,
}

pub fn run(config: &ExperimentConfig) -> Result<Outcome> {
    config.experiment.validate()?;
    let name = config.experiment.name();
    let out = with_threads(config.threads, || dispatch(config))??;
    fs::create_dir_all(&config.out_dir).map_err(|e| Error::io(&config.out_dir, e))?;
    let json_path = config.out_dir.join(format!("{name}.json"));
    let csv_path = config.out_dir.join(format!("{name}.csv"));
    let envelope = Envelope {
        schema: SCHEMA,
        config: &config.experiment,
        result: &out.result,
    };
    write_text(&json_path, &(serde_json::to_string_pretty(&envelope)? + "\n"))?;
    write_csv(&csv_path, out.header, &out.rows)?;
    let mut files = vec![json_path, csv_path];
    for (file, text) in out.extra {
        let path = config.out_dir.join(file);
        write_text(&path, &text)?;
        files.push(path);
    }
    Ok(Outcome {
        summary: out.summary,
        files,
    })
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn dispatch(config: &ExperimentConfig) -> Result<Output<serde_json::Value>> {
    match &config.experiment {
        Experiment::PairPrimes { field, beta, lambda, eps, pairs, min_norm, ceiling } => {
            let mut params = PairingParams::new(*beta, *lambda, *eps, *pairs).with_min_norm(*min_norm);
            params.ceiling = *ceiling;
            run_pair_primes(*field, &params, &config.source())
        }
        Experiment::Certificate { field, beta, lambda, eps, blocks, divergence_threshold, input } => {
            let cert = match input {
                Some(path) => {
                    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
                    serde_json::from_str::<RatioCertificate>(&text)
                        .map_err(|e| Error::validation(format!("{}: {e}", path.display())))?
                }
                None => build_certificate_with(
                    *field,
                    &PairingParams::new(*beta, *lambda, *eps, *blocks),
                    &config.source(),
                )?,
            };
            run_certificate(cert, *divergence_threshold)
        }
        Experiment::PadicMass { p, beta, cutoff, check_level } => {
            run_padic_mass(*p, *beta, *cutoff, *check_level, config.exec())
        }
        Experiment::HeckeTable { n_max, trials, seed } => {
            run_hecke_table(*n_max, *trials, seed.unwrap_or_default(), config.exec())
        }
        Experiment::Equidist { x, y, p, n_max } => run_equidist(Point::new(*x, *y)?, *p, *n_max, config.exec()),
        Experiment::MixingBound { beta, lambda, delta, eps, pairs, min_norm, seed } => {
            let params = PairingParams::new(*beta, *lambda, *eps, *pairs).with_min_norm(*min_norm);
            let seed = seed.ok_or_else(|| Error::validation("mixing-bound needs --seed"))?;
            run_mixing(&params, *delta, seed, &config.source())
        }
        Experiment::Angles { bound } => run_angles(*bound, config.exec()),
    }
}

fn to_value<T: Serialize>(v: &T) -> Result<serde_json::Value> {
    Ok(serde_json::to_value(v)?)
}

fn cells<const N: usize>(values: [String; N]) -> Vec<String> {
    values.into()
}

fn run_pair_primes(field: FieldSpec, params: &PairingParams, source: &PrimeSource) -> Result<Output<serde_json::Value>> {
    let pairing = pair_primes_with(field, params, source)?;
    let divergence = divergence_report(&pairing)?;
    let max_deviation = pairing
        .pairs
        .iter()
        .map(|p| (p.ratio(params.beta) - params.lambda).abs())
        .fold(0.0, f64::max);
    let rows = pairing
        .pairs
        .iter()
        .zip(&divergence.partial_sums)
        .enumerate()
        .map(|(n, (pair, s))| {
            cells([
                n.to_string(),
                pair.p.norm.to_string(),
                pair.q.norm.to_string(),
                pair.p.residue_prime.to_string(),
                pair.q.residue_prime.to_string(),
                pair.ratio(params.beta).to_string(),
                s.to_string(),
            ])
        })
        .collect();
    let summary = format!(
        "{} pairs over {field}, delta = {:.6}, x0 = {}, max |ratio - lambda| = {:.3e}, partial sum = {:.6}",
        pairing.len(),
        pairing.delta,
        pairing.x0,
        max_deviation,
        divergence.partial_sums.last().copied().unwrap_or(0.0),
    );
    Ok(Output {
        result: serde_json::json!({
            "delta": pairing.delta,
            "x0": pairing.x0,
            "max_deviation": max_deviation,
            "blocks": to_value(&pairing.blocks)?,
            "divergence": to_value(&divergence)?,
        }),
        rows,
        header: &["n", "p_norm", "q_norm", "p_residue", "q_residue", "ratio", "partial_sum"],
        summary,
        extra: Vec::new(),
    })
}

fn run_certificate(cert: RatioCertificate, threshold: f64) -> Result<Output<serde_json::Value>> {
    let spaces = ProductSpace::for_certificate(&cert)?;
    let report = verify_certificate(&cert, &spaces, threshold)?;
    let rows = cert
        .blocks
        .iter()
        .zip(&report.blocks)
        .zip(&report.mass_partial_sums)
        .enumerate()
        .map(|(n, ((b, r), s))| {
            cells([
                n.to_string(),
                b.p_norm.to_string(),
                b.q_norm.to_string(),
                b.p_place.to_string(),
                b.q_place.to_string(),
                r.ratio.to_string(),
                r.deviation.to_string(),
                r.mass.to_string(),
                s.to_string(),
            ])
        })
        .collect();
    let failing = report.blocks.iter().filter(|b| !b.passes).count();
    let summary = format!(
        "{} blocks, {failing} outside eps, cumulative mass {:.6}, overlapping places {}, {}",
        cert.blocks.len(),
        report.cumulative_mass,
        report.overlapping_places.len(),
        if report.pass { "pass" } else { "fail" },
    );
    let cert_text = serde_json::to_string_pretty(&cert)? + "\n";
    Ok(Output {
        result: serde_json::json!({ "certificate": to_value(&cert)?, "report": to_value(&report)? }),
        rows,
        header: &["n", "p_norm", "q_norm", "p_place", "q_place", "ratio", "deviation", "mass", "cumulative_mass"],
        summary,
        extra: vec![("certificate-blocks.json".into(), cert_text)],
    })
}

#[derive(Serialize)]
struct BruteForceRow {
    a: u32,
    b: u32,
    formula: f64,
    enumerated: f64,
}

fn run_padic_mass(p: u64, beta: f64, cutoff: u32, check_level: u32, exec: Execution) -> Result<Output<serde_json::Value>> {
    let check = total_mass_check(p, beta, cutoff)?;
    let table = stratum_table(p, beta, cutoff)?;
    let mut brute = Vec::new();
    for n in 0..check_level {
        for a in 0..=n / 2 {
            let b = n - a;
            let target = PadicStratum::Resolved { a, b };
            let enumerated = brute_force_mass_with(
                p,
                check_level,
                move |m| elementary_divisor_type(m) == target,
                beta,
                exec,
            )?;
            brute.push(BruteForceRow { a, b, formula: stratum_mass(p, beta, a, b)?, enumerated });
        }
    }
    let rows = table
        .iter()
        .map(|r| {
            cells([
                r.p.to_string(),
                r.beta.to_string(),
                r.a.to_string(),
                r.b.to_string(),
                r.coset_count.to_string(),
                r.mass.to_string(),
            ])
        })
        .collect();
    let summary = format!(
        "p = {p}, beta = {beta}, {} strata up to a+b = {cutoff}: partial sum {:.12}, gap to one {:.3e}",
        table.len(),
        check.partial_sum,
        check.gap_to_one,
    );
    Ok(Output {
        result: serde_json::json!({
            "partial_sum": check.partial_sum,
            "gap_to_one": check.gap_to_one,
            "strata": table.len(),
            "brute_force": to_value(&brute)?,
        }),
        rows,
        header: &["p", "beta", "a", "b", "coset_count", "mass"],
        summary,
        extra: Vec::new(),
    })
}

#[derive(Serialize)]
struct Product {
    left: HeckeElement,
    right: HeckeElement,
    product: HeckeElement,
}

fn random_point(rng: &mut ChaCha8Rng) -> Point {
    Point {
        x: rng.gen_range(-0.5..0.5),
        y: rng.gen_range(0.5..4.0),
    }
}

fn run_hecke_table(n_max: u64, trials: usize, seed: u64, exec: Execution) -> Result<Output<serde_json::Value>> {
    let mut rows = Vec::new();
    let mut sigma_mismatches = Vec::new();
    for n in 1..=n_max {
        let table = degree_table(n)?;
        let total: u64 = table.values().sum();
        if total != sigma(n) {
            sigma_mismatches.push(n);
        }
        for (label, deg) in table {
            rows.push(cells([n.to_string(), label.d1.to_string(), label.d2.to_string(), deg.to_string()]));
        }
    }
    let mut products = Vec::new();
    for p in (2..=n_max).filter(|&p| is_prime(p) && p * p <= n_max) {
        let t = HeckeElement::basis(SmithLabel::new(1, p)?);
        products.push(Product { product: convolve_with(&t, &t, exec)?, left: t.clone(), right: t });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let generators: Vec<IntegerMatrix> = (2..=n_max.min(12)).map(|n| IntegerMatrix::diag(1, n as i64)).collect();
    let mut worst = f64::NEG_INFINITY;
    for trial in 0..trials {
        let coeffs: [(f64, f64, f64); 3] =
            std::array::from_fn(|_| (rng.gen_range(-1.0..1.0), rng.gen_range(0.0..TAU), rng.gen_range(0.0..1.0)));
        let f = move |z: &Point| {
            coeffs
                .iter()
                .enumerate()
                .map(|(k, &(c, phase, decay))| c * ((k + 1) as f64 * TAU * z.x + phase).cos() * (-decay * z.y).exp())
                .sum::<f64>()
        };
        let points: Vec<Point> = (0..CONVEXITY_POINTS).map(|_| random_point(&mut rng)).collect();
        if let Some(g) = generators.get(trial % generators.len().max(1)) {
            worst = worst.max(convexity_excess(g, f, &points, &MobiusAction)?);
        }
    }
    let convexity_holds = trials == 0 || worst <= 1e-12;
    let summary = format!(
        "degree tables for n <= {n_max}: {} sigma mismatches; {} products; convexity over {trials} trials: max excess {:.3e}",
        sigma_mismatches.len(),
        products.len(),
        if trials > 0 { worst } else { 0.0 },
    );
    Ok(Output {
        result: serde_json::json!({
            "sigma_mismatches": sigma_mismatches,
            "products": to_value(&products)?,
            "convexity_trials": trials,
            "convexity_max_excess": if trials > 0 { Some(worst) } else { None },
            "convexity_holds": convexity_holds,
        }),
        rows,
        header: &["n", "d1", "d2", "degree"],
        summary,
        extra: Vec::new(),
    })
}

fn run_equidist(z: Point, p: u64, n_max: u32, exec: Execution) -> Result<Output<serde_json::Value>> {
    let boxes = six_box_partition();
    let report = equidistribution_test_with(z, p, n_max, &boxes, exec)?;
    let mut rows = Vec::new();
    for r in &report.rows {
        for b in &r.boxes {
            rows.push(cells([
                r.n.to_string(),
                r.points.to_string(),
                b.box_id.to_string(),
                b.empirical.to_string(),
                b.expected.to_string(),
                b.discrepancy.to_string(),
            ]));
        }
    }
    let discrepancies: Vec<f64> = report.rows.iter().map(|r| r.discrepancy).collect();
    let summary = format!(
        "Hecke points of ({}, {}) for {p}^n, n <= {n_max}: D_1 = {:.4}, D_{n_max} = {:.4}, log slope {}",
        z.x,
        z.y,
        discrepancies.first().copied().unwrap_or(f64::NAN),
        discrepancies.last().copied().unwrap_or(f64::NAN),
        report.log_slope.map_or("undefined".to_string(), |s| format!("{s:.4}")),
    );
    Ok(Output {
        result: serde_json::json!({
            "boxes": to_value(&boxes)?,
            "discrepancy": discrepancies,
            "log_slope": report.log_slope,
        }),
        rows,
        header: &["n", "points", "box_id", "empirical", "expected", "discrepancy"],
        summary,
        extra: Vec::new(),
    })
}

#[derive(Serialize)]
struct NormCheck {
    p: u64,
    #[serde(flatten)]
    values: NormComparison,
}

fn run_mixing(params: &PairingParams, delta: f64, seed: u64, source: &PrimeSource) -> Result<Output<serde_json::Value>> {
    let pairing = pair_primes_with(FieldSpec::rationals(), params, source)?;
    let stats = PairScheduleStats::from_pairing(&pairing)?;
    let report = mixing_sum_lower_bound(params.beta, params.lambda, delta, &stats)?;
    let norm_checks = stats
        .pairs
        .iter()
        .take(NORM_CHECKS)
        .map(|&(p, _)| Ok(NormCheck { p, values: basic_norm_seeded(params.beta, p, seed)? }))
        .collect::<Result<Vec<_>>>()?;
    let rows = (0..stats.len())
        .map(|i| {
            let (p, q) = stats.pairs[i];
            cells([
                (i + 1).to_string(),
                p.to_string(),
                q.to_string(),
                stats.nu_a_p[i].to_string(),
                stats.nu_a_q[i].to_string(),
                stats.nu_b_p[i].to_string(),
                stats.nu_b_q[i].to_string(),
                stats.union_mass(i).to_string(),
                report.series_partial_sums[i].to_string(),
            ])
        })
        .collect();
    let summary = format!(
        "{} pairs, c0 = {:.6}, bound = {:.6}, series = {:.6}, threshold index {}, {} violations, telescoping error {:.1e}",
        stats.len(),
        report.c0,
        report.bound,
        report.series_value,
        report.threshold_index.map_or("none".to_string(), |t| t.to_string()),
        report.violations.len(),
        (report.telescoping_sum - report.telescoping_closed_form).abs(),
    );
    let mut result = to_value(&report)?;
    result["norm_checks"] = to_value(&norm_checks)?;
    Ok(Output {
        result,
        rows,
        header: &["n", "p", "q", "nu_a_p", "nu_a_q", "nu_b_p", "nu_b_q", "nu_b_union", "partial_sum"],
        summary,
        extra: Vec::new(),
    })
}

fn run_angles(bound: u64, exec: Execution) -> Result<Output<serde_json::Value>> {
    let sample = gaussian_prime_angles_with(bound, exec)?;
    let rows = sample
        .angles
        .iter()
        .map(|g| cells([g.a.to_string(), g.b.to_string(), g.norm.to_string(), g.angle.to_string()]))
        .collect();
    let summary = format!(
        "{} degree-one Gaussian primes of norm <= {bound}, KS distance to uniform {:.4}",
        sample.angles.len(),
        sample.ks_statistic,
    );
    Ok(Output {
        result: serde_json::json!({ "count": sample.angles.len(), "ks_statistic": sample.ks_statistic }),
        rows,
        header: &["a", "b", "norm", "angle"],
        summary,
        extra: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_in(dir: &Path, experiment: Experiment) -> Result<Outcome> {
        run(&ExperimentConfig::new(experiment, dir))
    }

    #[test]
    fn envelope_carries_schema_and_config() {
        let dir = tempfile::tempdir().unwrap();
        let exp = Experiment::PadicMass { p: 3, beta: 2.0, cutoff: 4, check_level: 0 };
        let out = run_in(dir.path(), exp.clone()).unwrap();
        let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(&out.files[0]).unwrap()).unwrap();
        assert_eq!(json["schema"], SCHEMA);
        assert_eq!(json["config"]["subcommand"], "padic-mass");
        let back: Experiment = serde_json::from_value(json["config"].clone()).unwrap();
        assert_eq!(back, exp);
        let csv = fs::read_to_string(&out.files[1]).unwrap();
        assert!(csv.starts_with("p,beta,a,b,coset_count,mass\n"));
        assert_eq!(csv.lines().count(), 1 + 9);
    }

    #[test]
    fn seed_required() {
        let dir = tempfile::tempdir().unwrap();
        let exp = Experiment::HeckeTable { n_max: 4, trials: 3, seed: None };
        assert!(matches!(run_in(dir.path(), exp), Err(Error::Validation(_))));
        let exp = Experiment::MixingBound {
            beta: 1.5,
            lambda: 2.0,
            delta: 0.1,
            eps: 0.1,
            pairs: 3,
            min_norm: 1.0,
            seed: None,
        };
        assert!(matches!(run_in(dir.path(), exp), Err(Error::Validation(_))));
    }

    #[test]
    fn validation_before_dispatch() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("never");
        let exp = Experiment::PairPrimes {
            field: FieldSpec::rationals(),
            beta: 1.0,
            lambda: 2.0,
            eps: 0.1,
            pairs: 0,
            min_norm: 1.0,
            ceiling: None,
        };
        let err = run_in(&out, exp).unwrap_err();
        assert_eq!(err.exit_code(), 1);
        assert!(!out.exists());
    }
}
