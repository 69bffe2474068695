use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use aelab::harness::{run, Experiment, ExperimentConfig};
use aelab::number_field_primes::FieldSpec;
use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "aelab", version, about = "Reproducible experiments on adelic measures and Hecke operators")]
struct Cli {
    /// Directory for the JSON and CSV reports.
    #[arg(long, global = true, default_value = "aelab-out")]
    out: PathBuf,
    /// Worker threads (0 = all cores, 1 = sequential).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct FieldArgs {
    /// Base field: `q` for the rationals or a squarefree integer d for Q(sqrt d).
    #[arg(long, default_value = "q", value_parser = parse_field, allow_hyphen_values = true)]
    field: FieldSpec,
}

fn parse_field(s: &str) -> Result<FieldSpec, String> {
    if s.eq_ignore_ascii_case("q") || s.eq_ignore_ascii_case("rationals") {
        return Ok(FieldSpec::rationals());
    }
    let d: i64 = s.parse().map_err(|_| format!("expected `q` or an integer, got `{s}`"))?;
    FieldSpec::quadratic(d).map_err(|e| e.to_string())
}

#[derive(Subcommand)]
enum Command {
    /// Pair primes whose norm ratios approximate lambda.
    PairPrimes {
        #[command(flatten)]
        field: FieldArgs,
        #[arg(long, default_value_t = 1.0)]
        beta: f64,
        #[arg(long, default_value_t = 2.0)]
        lambda: f64,
        #[arg(long, default_value_t = 0.1)]
        eps: f64,
        #[arg(long, default_value_t = 100)]
        pairs: usize,
        #[arg(long, default_value_t = 1.0)]
        min_norm: f64,
        #[arg(long)]
        ceiling: Option<u64>,
    },
    /// Build (or read) a ratio certificate and verify it exactly.
    Certificate {
        #[command(flatten)]
        field: FieldArgs,
        #[arg(long, default_value_t = 1.0)]
        beta: f64,
        #[arg(long, default_value_t = 2.0)]
        lambda: f64,
        #[arg(long, default_value_t = 0.5)]
        eps: f64,
        #[arg(long, default_value_t = 50)]
        blocks: usize,
        /// Cumulative K-mass the certificate must reach to pass.
        #[arg(long, default_value_t = 0.0)]
        divergence_threshold: f64,
        /// Certificate JSON to verify instead of building one.
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Masses of the elementary-divisor strata of GL2(Z_p).
    PadicMass {
        #[arg(long)]
        p: u64,
        #[arg(long, default_value_t = 2.0)]
        beta: f64,
        #[arg(long, default_value_t = 12)]
        cutoff: u32,
        /// Cross-check low strata by enumeration mod p^k.
        #[arg(long, default_value_t = 0)]
        check_level: u32,
    },
    /// Hecke degree tables, products and the convexity check.
    HeckeTable {
        #[arg(long, default_value_t = 36)]
        n_max: u64,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Discrepancy of Hecke points on the modular surface.
    Equidist {
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        x: f64,
        #[arg(long, default_value_t = 2.0)]
        y: f64,
        #[arg(long, default_value_t = 2)]
        p: u64,
        #[arg(long, default_value_t = 8)]
        n_max: u32,
    },
    /// Measure inequalities and series bound for a pair schedule over Q.
    MixingBound {
        #[arg(long, default_value_t = 1.5)]
        beta: f64,
        #[arg(long, default_value_t = 2.0)]
        lambda: f64,
        #[arg(long, default_value_t = 0.1)]
        delta: f64,
        #[arg(long, default_value_t = 0.1)]
        eps: f64,
        #[arg(long, default_value_t = 200)]
        pairs: usize,
        #[arg(long, default_value_t = 1.0)]
        min_norm: f64,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Angles of Gaussian primes.
    Angles {
        #[arg(long, default_value_t = 100_000)]
        bound: u64,
    },
}

impl Command {
    fn experiment(self) -> Experiment {
        match self {
            Command::PairPrimes { field, beta, lambda, eps, pairs, min_norm, ceiling } => {
                Experiment::PairPrimes { field: field.field, beta, lambda, eps, pairs, min_norm, ceiling }
            }
            Command::Certificate { field, beta, lambda, eps, blocks, divergence_threshold, input } => {
                Experiment::Certificate { field: field.field, beta, lambda, eps, blocks, divergence_threshold, input }
            }
            Command::PadicMass { p, beta, cutoff, check_level } => Experiment::PadicMass { p, beta, cutoff, check_level },
            Command::HeckeTable { n_max, trials, seed } => Experiment::HeckeTable { n_max, trials, seed },
            Command::Equidist { x, y, p, n_max } => Experiment::Equidist { x, y, p, n_max },
            Command::MixingBound { beta, lambda, delta, eps, pairs, min_norm, seed } => {
                Experiment::MixingBound { beta, lambda, delta, eps, pairs, min_norm, seed }
            }
            Command::Angles { bound } => Experiment::Angles { bound },
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let mut config = ExperimentConfig::new(cli.command.experiment(), cli.out).with_env_cache();
    config.threads = cli.threads;
    match run(&config) {
        Ok(outcome) => {
            let mut stdout = std::io::stdout().lock();
            let _ = writeln!(stdout, "{}", outcome.summary);
            for f in &outcome.files {
                let _ = writeln!(stdout, "wrote {}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
