use clap::{Parser, Subcommand};
use frontsim::cli::{self, CliError};
use frontsim::config::{EngineChoice, ExperimentConfig};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "frontsim", version, about = "N-particle selection-front simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured size sweep and write results.csv / summary.json.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; falls back to the config `[output] dir`, then
        /// to the current directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the master seed from the config file.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the engine choice (counts | naive | both).
        #[arg(long)]
        engine: Option<EngineChoice>,
        /// Also write a per-step trajectory dump for every size and engine.
        #[arg(long)]
        dump: bool,
    },
    /// Print the limiting quantities for a disorder spec as JSON.
    Limits {
        #[arg(long = "spec")]
        spec: PathBuf,
    },
    /// Pathwise-coupled comparison against the zero-decay system.
    CoupleR0 {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Validate the count-engine kernel against exhaustive enumeration.
    ValidateKernel {
        #[arg(long)]
        config: PathBuf,
        /// Largest size to exhaust (kept small: the check is exponential).
        #[arg(long, default_value_t = 3)]
        max_n: u64,
        /// Random configurations for the row-sum and mass checks.
        #[arg(long, default_value_t = 10_000)]
        samples: u64,
    },
}

fn load_config(path: &PathBuf, seed: Option<u64>) -> Result<ExperimentConfig, CliError> {
    let text = std::fs::read_to_string(path)?;
    let mut cfg = ExperimentConfig::from_toml(&text)?;
    if let Some(seed) = seed {
        cfg.run.seed = seed;
    }
    Ok(cfg)
}

fn warn_on_snapped_exponent(cfg: &ExperimentConfig) {
    if let Ok(spec) = cfg.disorder.to_spec() {
        if let Some(split) = frontsim::analytics::ExponentSplit::of(spec.r()) {
            if split.snapped {
                eprintln!(
                    "warning: float exponent r = {} was classified as critical \
                     (1/r within 1e-9 of {}); pass r as a fraction string for an exact split",
                    split.r, split.m
                );
            }
        }
    }
}

fn run() -> Result<(), CliError> {
    if let Ok(workers) = std::env::var("FRONTSIM_WORKERS") {
        if let Ok(workers) = workers.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(workers)
                .build_global();
        }
    }
    match Cli::parse().command {
        Command::Simulate {
            config,
            out,
            seed,
            engine,
            dump,
        } => {
            let mut cfg = load_config(&config, seed)?;
            if let Some(engine) = engine {
                cfg.run.engine = engine;
            }
            warn_on_snapped_exponent(&cfg);
            let out = out.unwrap_or_else(|| {
                cfg.output
                    .as_ref()
                    .and_then(|o| o.dir.as_ref())
                    .map(PathBuf::from)
                    .unwrap_or_else(|| PathBuf::from("."))
            });
            let outcome = cli::run_simulate(&cfg, &out, dump)?;
            eprintln!(
                "wrote {} and {}",
                outcome.results_csv.display(),
                outcome.summary_json.display()
            );
            Ok(())
        }
        Command::Limits { spec } => {
            let cfg = load_config(&spec, None)?;
            warn_on_snapped_exponent(&cfg);
            let report = cli::limits_report(&cfg)?;
            println!("{}", serde_json::to_string_pretty(&report).expect("serializable"));
            Ok(())
        }
        Command::CoupleR0 { config, out, seed } => {
            let cfg = load_config(&config, seed)?;
            let report = cli::run_couple_r0(&cfg, &out)?;
            eprintln!(
                "coupled paths ordered on every step: {} (v_zero mean {:.5}, compared mean {:.5})",
                report.all_ordered, report.mean_v_zero, report.mean_v_compare
            );
            if !report.all_ordered {
                return Err(CliError::Validation(
                    "coupled ordering violated on some path".into(),
                ));
            }
            Ok(())
        }
        Command::ValidateKernel {
            config,
            max_n,
            samples,
        } => {
            let cfg = load_config(&config, None)?;
            let report = cli::run_validate_kernel(&cfg, max_n, samples)?;
            println!("{}", serde_json::to_string_pretty(&report).expect("serializable"));
            if report.passed {
                Ok(())
            } else {
                Err(CliError::Validation(format!(
                    "kernel checks failed: max TV {}, max row-sum error {}",
                    report.max_total_variation, report.max_row_sum_error
                )))
            }
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
