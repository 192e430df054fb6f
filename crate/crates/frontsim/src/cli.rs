//! Experiment orchestration behind the command-line interface: size sweeps,
//! engine selection, output emission, the coupled zero-decay comparison and
//! the kernel validation report.

use crate::analytics::{self, AnalyticsError, ExponentSplit, VChainSpec};
use crate::config::{spec_hash, ConfigError, EngineChoice, ExperimentConfig};
use crate::counts::{one_step_config_law, run_chain, shift_canonical, Configuration, CountsError};
use crate::disorder::{Decay, DisorderError, DisorderSpec};
use crate::particle::{enumerate_one_step_law, run_coupled_two_state};
use crate::renewal::{
    collect_cycles_naive_parallel, collect_cycles_parallel, estimate_speed, summarize,
    CycleRecord, RenewalError,
};
use crate::seeding::{stream_rng, EngineTag};
use rand::Rng;
use serde::Serialize;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use thiserror::Error;

/// Stable schema tag written into every results row.
pub const CSV_SCHEMA: &str = "v1";
const DUMP_STEPS: u64 = 1_000;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Disorder(#[from] DisorderError),
    #[error(transparent)]
    Counts(#[from] CountsError),
    #[error(transparent)]
    Renewal(#[from] RenewalError),
    #[error(transparent)]
    Analytics(#[from] AnalyticsError),
    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization failure: {0}")]
    Serialize(#[from] serde_json::Error),
    #[error("validation failed: {0}")]
    Validation(String),
}

impl CliError {
    /// Distinct exit codes: bad input 2, cycle-cap blowup 3, i/o 4, any
    /// other failure 1.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Disorder(_) => 2,
            CliError::Renewal(RenewalError::CycleCapExceeded { .. }) => 3,
            CliError::Io(_) => 4,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ResultRow {
    pub schema: &'static str,
    pub n: u64,
    pub spec_hash: String,
    pub engine: &'static str,
    pub v_hat: f64,
    pub stderr: f64,
    pub n_cycles: usize,
    pub mean_cycle_length: f64,
    pub mean_moves_per_cycle: f64,
    pub seed: u64,
}

#[derive(Debug, Serialize)]
pub struct SummaryRow {
    pub n: u64,
    pub engine: &'static str,
    pub v_hat: f64,
    pub stderr: f64,
    pub n_cycles: usize,
    pub mean_cycle_length: f64,
    pub mean_moves_per_cycle: f64,
    /// Standardized distance to the large-size limit, when it exists.
    pub z_vs_limit: Option<f64>,
}

#[derive(Debug, Serialize)]
pub struct SummaryReport {
    pub schema: &'static str,
    pub seed: u64,
    pub spec: DisorderSpec,
    pub spec_hash: String,
    pub limit_speed: Option<f64>,
    pub rows: Vec<SummaryRow>,
    /// For `engine = both`: standardized naive-vs-counts gap per size.
    pub engine_gap_z: Vec<(u64, f64)>,
}

#[derive(Debug)]
pub struct SimulateOutcome {
    pub results_csv: PathBuf,
    pub summary_json: PathBuf,
    pub rows: Vec<ResultRow>,
}

fn csv_header() -> &'static str {
    "schema,n,spec_hash,engine,v_hat,stderr,n_cycles,mean_cycle_length,mean_moves_per_cycle,seed"
}

fn csv_line(row: &ResultRow) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{},{}",
        row.schema,
        row.n,
        row.spec_hash,
        row.engine,
        row.v_hat,
        row.stderr,
        row.n_cycles,
        row.mean_cycle_length,
        row.mean_moves_per_cycle,
        row.seed
    )
}

fn engines_for(choice: EngineChoice) -> Vec<&'static str> {
    match choice {
        EngineChoice::Counts => vec!["counts"],
        EngineChoice::Naive => vec!["naive"],
        EngineChoice::Both => vec!["counts", "naive"],
    }
}

fn collect_for_engine(
    engine: &str,
    spec: &DisorderSpec,
    n: u64,
    cycles: u64,
    cap: u64,
    seed: u64,
    streams: u64,
) -> Result<Vec<CycleRecord>, RenewalError> {
    match engine {
        "counts" => collect_cycles_parallel(spec, n, cycles, cap, seed, streams),
        _ => collect_cycles_naive_parallel(spec, n, cycles, cap, seed, streams),
    }
}

/// Run the configured sweep and write `results.csv` plus `summary.json`
/// under `out_dir`. Deterministic byte-for-byte given `(config, seed)`.
pub fn run_simulate(
    cfg: &ExperimentConfig,
    out_dir: &Path,
    dump: bool,
) -> Result<SimulateOutcome, CliError> {
    cfg.validate()?;
    let spec = cfg.disorder.to_spec()?;
    let hash = spec_hash(&spec);
    let seed = cfg.run.seed;
    fs::create_dir_all(out_dir)?;

    let limit = analytics::limit_speed(&spec).ok();
    let mut rows = Vec::new();
    let mut summary_rows = Vec::new();
    let mut per_engine: Vec<(u64, &'static str, f64, f64)> = Vec::new();

    for &n in &cfg.run.n_values {
        spec.validate_at(n).map_err(ConfigError::Disorder)?;
        for engine in engines_for(cfg.run.engine) {
            let figures = match (cfg.run.cycles, cfg.run.horizon) {
                (Some(cycles), _) => {
                    let cycles = collect_for_engine(
                        engine,
                        &spec,
                        n,
                        cycles,
                        cfg.run.cycle_cap,
                        seed,
                        cfg.run.streams,
                    )?;
                    let est = estimate_speed(&cycles, n, &spec)?;
                    let stats = summarize(&cycles);
                    RunFigures {
                        v_hat: est.v_hat,
                        stderr: est.stderr,
                        n_cycles: est.n_cycles,
                        mean_cycle_length: stats.mean_cycle_length,
                        mean_moves_per_cycle: stats.mean_moves_per_cycle,
                    }
                }
                (None, Some(horizon)) => {
                    horizon_estimate(engine, &spec, n, horizon, seed, cfg.run.streams)?
                }
                _ => unreachable!("validated"),
            };
            let RunFigures {
                v_hat,
                stderr,
                n_cycles,
                mean_cycle_length,
                mean_moves_per_cycle,
            } = figures;
            rows.push(ResultRow {
                schema: CSV_SCHEMA,
                n,
                spec_hash: hash.clone(),
                engine,
                v_hat,
                stderr,
                n_cycles,
                mean_cycle_length,
                mean_moves_per_cycle,
                seed,
            });
            summary_rows.push(SummaryRow {
                n,
                engine,
                v_hat,
                stderr,
                n_cycles,
                mean_cycle_length,
                mean_moves_per_cycle,
                z_vs_limit: limit.map(|l| (v_hat - l) / stderr.max(1e-300)),
            });
            per_engine.push((n, engine, v_hat, stderr));
            if dump {
                write_dump(out_dir, &spec, n, engine, seed)?;
            }
        }
    }

    let mut engine_gap_z = Vec::new();
    if cfg.run.engine == EngineChoice::Both {
        for &n in &cfg.run.n_values {
            let find = |engine: &str| {
                per_engine
                    .iter()
                    .find(|(m, e, _, _)| *m == n && *e == engine)
                    .map(|&(_, _, v, s)| (v, s))
            };
            if let (Some((vc, sc)), Some((vn, sn))) = (find("counts"), find("naive")) {
                let z = (vc - vn) / (sc * sc + sn * sn).sqrt().max(1e-300);
                engine_gap_z.push((n, z));
            }
        }
    }

    let results_csv = out_dir.join("results.csv");
    let mut csv = String::new();
    csv.push_str(csv_header());
    csv.push('\n');
    for row in &rows {
        csv.push_str(&csv_line(row));
        csv.push('\n');
    }
    fs::write(&results_csv, csv)?;

    let report = SummaryReport {
        schema: CSV_SCHEMA,
        seed,
        spec: spec.clone(),
        spec_hash: hash,
        limit_speed: limit,
        rows: summary_rows,
        engine_gap_z,
    };
    let summary_json = out_dir.join("summary.json");
    fs::write(&summary_json, serde_json::to_string_pretty(&report)?)?;

    Ok(SimulateOutcome {
        results_csv,
        summary_json,
        rows,
    })
}

/// Point figures of one (size, engine) run, however they were produced.
struct RunFigures {
    v_hat: f64,
    stderr: f64,
    n_cycles: usize,
    mean_cycle_length: f64,
    mean_moves_per_cycle: f64,
}

/// Fixed-horizon estimate: one trajectory of `horizon` steps per virtual
/// stream, speed averaged over streams. The cycle-structure columns report
/// the mean spacing between front moves instead (moves-per-cycle has no
/// meaning here and is emitted as NaN / null).
fn horizon_estimate(
    engine: &str,
    spec: &DisorderSpec,
    n: u64,
    horizon: u64,
    seed: u64,
    streams: u64,
) -> Result<RunFigures, CliError> {
    use rayon::prelude::*;
    let streams = streams.max(1);
    let per_stream: Vec<Result<(f64, u64), CliError>> = (0..streams)
        .into_par_iter()
        .map(|idx| {
            let (l0, l1) = spec.levels();
            match engine {
                "counts" => {
                    let mut rng = stream_rng(seed, n, EngineTag::Counts, idx);
                    let mut chain =
                        crate::counts::CountsChain::new(spec, Configuration::all_at_front(n))?;
                    let mut displacement = 0.0;
                    let mut moves = 0u64;
                    for _ in 0..horizon {
                        let out = chain.step(&mut rng);
                        displacement += l0 - (l0 - l1) * out.front_drop as f64;
                        moves += u64::from(out.front_drop >= 1);
                    }
                    Ok((displacement, moves))
                }
                _ => {
                    let mut rng = stream_rng(seed, n, EngineTag::Naive, idx);
                    let fronts = crate::particle::front_trajectory(spec, n, horizon, &mut rng)?;
                    let mut moves = 0u64;
                    let mut prev = 0.0;
                    for &f in &fronts {
                        moves += u64::from(f < prev);
                        prev = f;
                    }
                    Ok((fronts.last().copied().unwrap_or(0.0), moves))
                }
            }
        })
        .collect();
    let mut speeds = Vec::with_capacity(streams as usize);
    let mut total_moves = 0u64;
    for r in per_stream {
        let (displacement, moves) = r?;
        speeds.push(displacement / horizon as f64);
        total_moves += moves;
    }
    Ok(RunFigures {
        v_hat: crate::stats::mean(&speeds),
        stderr: (crate::stats::sample_variance(&speeds) / speeds.len() as f64).sqrt(),
        n_cycles: speeds.len(),
        mean_cycle_length: (streams * horizon) as f64 / total_moves as f64,
        mean_moves_per_cycle: f64::NAN,
    })
}

fn write_dump(
    out_dir: &Path,
    spec: &DisorderSpec,
    n: u64,
    engine: &str,
    seed: u64,
) -> Result<(), CliError> {
    // trajectory dumps always come from the count engine on a dedicated
    // stream index that the estimator never uses
    let mut rng = stream_rng(seed, n, EngineTag::Counts, u64::MAX - 1);
    let traj = run_chain(Configuration::all_at_front(n), spec, DUMP_STEPS, &mut rng)?;
    let path = out_dir.join(format!("dump_n{n}_{engine}.csv"));
    let mut file = std::io::BufWriter::new(fs::File::create(path)?);
    writeln!(file, "t,front_drop,occupancy")?;
    for (t, step) in traj.iter().enumerate() {
        writeln!(
            file,
            "{},{},{}",
            t + 1,
            step.front_drop,
            step.state.occupancy_string()
        )?;
    }
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct LimitsReport {
    pub spec: DisorderSpec,
    pub spec_hash: String,
    pub rho: f64,
    pub r: f64,
    pub m: Option<u64>,
    pub eta: Option<f64>,
    pub critical: Option<bool>,
    /// True when a float exponent was snapped onto the critical branch.
    pub snapped_float_r: Option<bool>,
    pub limit_speed: Option<f64>,
    pub expected_steps_per_move: Option<f64>,
    pub extinction_rounds: Option<f64>,
    pub expected_cycle_length: Option<f64>,
    pub expected_cycle_displacement: Option<f64>,
}

/// All limiting quantities for a spec, as printed by `frontsim limits`.
pub fn limits_report(cfg: &ExperimentConfig) -> Result<LimitsReport, CliError> {
    let spec = cfg.disorder.to_spec()?;
    let split = ExponentSplit::of(spec.r());
    let limit = analytics::limit_speed(&spec).ok();
    let tau = match &spec {
        DisorderSpec::TwoState(s) => analytics::expected_tau_limit(s.rho, &s.r).ok(),
        _ => None,
    };
    let mut extinction_rounds = None;
    let mut cycle_limits = None;
    if let Some(split) = &split {
        if split.is_critical() {
            let theta = spec.theta();
            if theta > 0.0 {
                let v = VChainSpec::new(spec.rho(), split.m, theta)?;
                extinction_rounds = Some(analytics::g_theta(&v, 1e-10)?);
                cycle_limits = Some(analytics::expected_cycle_limits(&v, 1e-10)?);
            } else {
                extinction_rounds = Some(spec.rho().powi(split.m as i32).exp());
            }
        }
    }
    Ok(LimitsReport {
        spec_hash: spec_hash(&spec),
        rho: spec.rho(),
        r: spec.r().as_f64(),
        m: split.as_ref().map(|s| s.m),
        eta: split.as_ref().map(|s| s.eta),
        critical: split.as_ref().map(|s| s.is_critical()),
        snapped_float_r: split.as_ref().map(|s| s.snapped),
        limit_speed: limit,
        expected_steps_per_move: tau,
        extinction_rounds,
        expected_cycle_length: cycle_limits.map(|(l, _)| l),
        expected_cycle_displacement: cycle_limits.map(|(_, d)| d),
        spec,
    })
}

#[derive(Debug, Serialize)]
pub struct CouplePathRow {
    pub path: u64,
    pub v_zero: f64,
    pub v_compare: f64,
    pub ordered: bool,
}

#[derive(Debug, Serialize)]
pub struct CoupleReport {
    pub n: u64,
    pub horizon: u64,
    pub all_ordered: bool,
    pub mean_v_zero: f64,
    pub mean_v_compare: f64,
    pub paths: Vec<CouplePathRow>,
    /// Count-engine speed of the zero-decay system per configured size.
    pub zero_decay_speeds: Vec<(u64, f64, f64)>,
}

/// Run the shared-uniform coupling between the configured two-state system
/// and its zero-decay counterpart, then estimate the zero-decay speed on the
/// configured sizes with the count engine.
pub fn run_couple_r0(cfg: &ExperimentConfig, out_dir: &Path) -> Result<CoupleReport, CliError> {
    cfg.validate()?;
    let spec = cfg.disorder.to_spec()?;
    let (rho, r) = match &spec {
        DisorderSpec::TwoState(s) => (s.rho, s.r),
        _ => {
            return Err(CliError::Validation(
                "the coupled comparison is defined for the two-state family".into(),
            ))
        }
    };
    let couple = cfg.couple.clone().unwrap_or_default();
    let seed = cfg.run.seed;

    let mut paths = Vec::new();
    let mut all_ordered = true;
    let (mut sum_zero, mut sum_cmp) = (0.0, 0.0);
    for path in 0..couple.paths {
        let mut rng = stream_rng(seed, couple.n, EngineTag::Coupled, path);
        let run = run_coupled_two_state(rho, &r, couple.n, couple.horizon, &mut rng)?;
        let (v_zero, v_compare) = run.speeds();
        let ordered = run.is_ordered();
        all_ordered &= ordered;
        sum_zero += v_zero;
        sum_cmp += v_compare;
        paths.push(CouplePathRow {
            path,
            v_zero,
            v_compare,
            ordered,
        });
    }

    let zero_spec = DisorderSpec::TwoState(crate::disorder::TwoStateSpec::new(
        rho,
        Decay::value(0.0)?,
    )?);
    let zero_cycles = cfg.run.cycles.ok_or_else(|| {
        CliError::Validation("the coupled comparison needs a cycle budget (set run.cycles)".into())
    })?;
    let mut zero_decay_speeds = Vec::new();
    for &n in &cfg.run.n_values {
        let cycles = collect_cycles_parallel(
            &zero_spec,
            n,
            zero_cycles,
            cfg.run.cycle_cap,
            seed,
            cfg.run.streams,
        )?;
        let est = estimate_speed(&cycles, n, &zero_spec)?;
        zero_decay_speeds.push((n, est.v_hat, est.stderr));
    }

    let report = CoupleReport {
        n: couple.n,
        horizon: couple.horizon,
        all_ordered,
        mean_v_zero: sum_zero / couple.paths.max(1) as f64,
        mean_v_compare: sum_cmp / couple.paths.max(1) as f64,
        paths,
        zero_decay_speeds,
    };

    fs::create_dir_all(out_dir)?;
    let mut csv = String::from("path,v_zero,v_compare,ordered\n");
    for row in &report.paths {
        csv.push_str(&format!(
            "{},{},{},{}\n",
            row.path, row.v_zero, row.v_compare, row.ordered
        ));
    }
    fs::write(out_dir.join("couple.csv"), csv)?;
    fs::write(
        out_dir.join("couple_summary.json"),
        serde_json::to_string_pretty(&report)?,
    )?;
    Ok(report)
}

#[derive(Debug, Serialize)]
pub struct ValidationReport {
    pub max_total_variation: f64,
    pub enumerated_sizes: Vec<u64>,
    pub row_sum_samples: u64,
    pub max_row_sum_error: f64,
    pub mass_conserved: bool,
    pub passed: bool,
}

/// Validate the count-engine kernel for the configured disorder: exact
/// small-size agreement with the enumerated position engine, and row-sum /
/// mass-conservation checks on random configurations.
pub fn run_validate_kernel(
    cfg: &ExperimentConfig,
    max_n: u64,
    samples: u64,
) -> Result<ValidationReport, CliError> {
    let spec = cfg.disorder.to_spec()?;
    let support = spec.max_depth() + 1;
    let mut max_tv = 0.0f64;
    let mut enumerated_sizes = Vec::new();
    for n in 1..=max_n {
        let outcomes = (support as f64).powi((n * n) as i32);
        if outcomes > 2.5e7 {
            break;
        }
        if spec.validate_at(n).is_err() {
            continue;
        }
        enumerated_sizes.push(n);
        for counts in compositions(n, spec.max_depth() + 1) {
            let start = match Configuration::new(counts) {
                Ok(c) => c,
                Err(_) => continue,
            };
            let tv = one_step_total_variation(&start, &spec)?;
            max_tv = max_tv.max(tv);
        }
    }

    let mut rng = stream_rng(cfg.run.seed, 0, EngineTag::Counts, u64::MAX - 2);
    let mut max_row_err = 0.0f64;
    let mut mass_conserved = true;
    for _ in 0..samples {
        let n = 1 + rng.random_range(0..1_000_000u64);
        if spec.validate_at(n).is_err() {
            continue;
        }
        let depths = spec.max_depth() + 1;
        let mut counts = vec![0u64; depths];
        let mut left = n;
        for slot in counts.iter_mut().take(depths - 1) {
            let piece = rng.random_range(0..=left);
            *slot = piece;
            left -= piece;
        }
        counts[depths - 1] = left;
        let config = match Configuration::new(counts) {
            Ok(c) => c,
            Err(_) => continue,
        };
        let (canon, _) = shift_canonical(&config);
        let row = crate::counts::kernel_row(&canon, &spec)?;
        let total: f64 = row.probs().iter().sum();
        max_row_err = max_row_err.max((total + row.residual() - 1.0).abs());
        let (stepped, _) = crate::counts::step_counts(&config, &spec, &mut rng)?;
        mass_conserved &= stepped.total() == n;
    }

    let passed = max_tv < 1e-10 && max_row_err < 1e-10 && mass_conserved;
    Ok(ValidationReport {
        max_total_variation: max_tv,
        enumerated_sizes,
        row_sum_samples: samples,
        max_row_sum_error: max_row_err,
        mass_conserved,
        passed,
    })
}

/// Total variation distance between the exact one-step law of the count
/// engine and the enumerated position-engine law, over re-anchored
/// configuration and front drop jointly.
pub fn one_step_total_variation(
    start: &Configuration,
    spec: &DisorderSpec,
) -> Result<f64, CliError> {
    let counts_law = one_step_config_law(start, spec)?;
    let mut particle_law = enumerate_one_step_law(start, spec)?;
    let mut tv = 0.0f64;
    for (drop, config, p) in counts_law {
        let q = particle_law
            .remove(&(drop, config.counts().to_vec()))
            .unwrap_or(0.0);
        tv += (p - q).abs();
    }
    for (_, q) in particle_law {
        tv += q;
    }
    Ok(tv / 2.0)
}

/// All count vectors of total `n` over `parts` depth slots.
pub fn compositions(n: u64, parts: usize) -> Vec<Vec<u64>> {
    let mut out = Vec::new();
    let mut current = vec![0u64; parts];
    fn recurse(slot: usize, left: u64, current: &mut Vec<u64>, out: &mut Vec<Vec<u64>>) {
        if slot + 1 == current.len() {
            current[slot] = left;
            out.push(current.clone());
            current[slot] = 0;
            return;
        }
        for take in 0..=left {
            current[slot] = take;
            recurse(slot + 1, left - take, current, out);
            current[slot] = 0;
        }
    }
    recurse(0, n, &mut current, &mut out);
    out
}
