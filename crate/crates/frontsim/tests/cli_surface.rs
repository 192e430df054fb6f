//! Integration tests for the orchestration layer: config parsing, the sweep
//! runner with both engines, the limits report, the kernel validator and the
//! coupled comparison.

use frontsim::cli;
use frontsim::config::{EngineChoice, ExperimentConfig};
use std::path::PathBuf;

fn temp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("frontsim-{tag}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

const BOTH_ENGINES_TOML: &str = r#"
[disorder]
family = "two_state"
rho = 1.0
r = "1/2"

[run]
n_values = [50]
engine = "both"
cycles = 600
seed = 42
streams = 8
"#;

#[test]
fn both_engines_agree_within_combined_error() {
    let cfg = ExperimentConfig::from_toml(BOTH_ENGINES_TOML).unwrap();
    let dir = temp_dir("both");
    let outcome = cli::run_simulate(&cfg, &dir, false).unwrap();
    assert_eq!(outcome.rows.len(), 2);

    let csv = std::fs::read_to_string(&outcome.results_csv).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "schema,n,spec_hash,engine,v_hat,stderr,n_cycles,mean_cycle_length,mean_moves_per_cycle,seed"
    );
    assert_eq!(csv.lines().count(), 3);

    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&outcome.summary_json).unwrap()).unwrap();
    let gap = summary["engine_gap_z"][0][1].as_f64().unwrap();
    assert!(gap.abs() < 3.5, "engines disagree: z = {gap}");
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn limits_report_carries_the_critical_quantities() {
    let toml = r#"
[disorder]
family = "two_state"
rho = 1.0
r = "1/2"

[run]
n_values = [100]
engine = "counts"
cycles = 10
seed = 1
"#;
    let cfg = ExperimentConfig::from_toml(toml).unwrap();
    let report = cli::limits_report(&cfg).unwrap();
    assert_eq!(report.m, Some(2));
    assert_eq!(report.eta, Some(0.0));
    assert_eq!(report.critical, Some(true));
    let tau = report.expected_steps_per_move.unwrap();
    assert!((tau - (3.0 - (-1.0f64).exp())).abs() < 1e-12);
    let v = report.limit_speed.unwrap();
    assert!((v + 1.0 / tau).abs() < 1e-12);
    // two-state: the extinction-round count from the zero-tail shortcut
    assert!((report.extinction_rounds.unwrap() - 1.0f64.exp()).abs() < 1e-12);
}

#[test]
fn kernel_validator_passes_for_mixture_family() {
    let toml = r#"
[disorder]
family = "mixture"
rho = 1.0
r = "1/1"
theta = 0.5
tail = [[2, 1.0]]
lambda0 = 2.0
lambda1 = 1.0

[run]
n_values = [100]
engine = "counts"
cycles = 10
seed = 1
"#;
    let cfg = ExperimentConfig::from_toml(toml).unwrap();
    let report = cli::run_validate_kernel(&cfg, 3, 2_000).unwrap();
    assert!(report.passed, "{report:?}");
    assert!(report.max_total_variation < 1e-10);
    assert!(!report.enumerated_sizes.is_empty());
}

#[test]
fn horizon_mode_estimates_speed_without_cycles() {
    let toml = r#"
[disorder]
family = "two_state"
rho = 1.0
r = 0.4

[run]
n_values = [10000]
engine = "counts"
horizon = 2000
seed = 42
streams = 16

[output]
dir = "ignored-by-direct-call"
"#;
    let cfg = ExperimentConfig::from_toml(toml).unwrap();
    let dir = temp_dir("horizon");
    let outcome = cli::run_simulate(&cfg, &dir, false).unwrap();
    let row = &outcome.rows[0];
    // the noncritical speed here is near -1/3.15 at this size
    assert!(row.v_hat < -0.25 && row.v_hat > -0.40, "v_hat {}", row.v_hat);
    assert!(row.stderr > 0.0);
    assert_eq!(row.n_cycles, 16); // one replicate per stream
    assert!((row.mean_cycle_length - 3.15).abs() < 0.3);
    assert!(row.mean_moves_per_cycle.is_nan());
    // NaN must serialize as null, keeping the JSON well formed
    let summary = std::fs::read_to_string(&outcome.summary_json).unwrap();
    assert!(summary.contains("\"mean_moves_per_cycle\": null"));
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn cycles_and_horizon_are_mutually_exclusive() {
    let toml = BOTH_ENGINES_TOML.replace("cycles = 600", "cycles = 600\nhorizon = 100");
    assert!(ExperimentConfig::from_toml(&toml).is_err());
    let toml = BOTH_ENGINES_TOML.replace("cycles = 600\n", "");
    assert!(ExperimentConfig::from_toml(&toml).is_err());
}

#[test]
fn coupled_comparison_orders_paths_and_reports_speeds() {
    let toml = r#"
[disorder]
family = "two_state"
rho = 1.0
r = 0.4

[run]
n_values = [2000]
engine = "counts"
cycles = 200
seed = 42

[couple]
n = 32
paths = 6
horizon = 150
"#;
    let cfg = ExperimentConfig::from_toml(toml).unwrap();
    let dir = temp_dir("couple");
    let report = cli::run_couple_r0(&cfg, &dir).unwrap();
    assert!(report.all_ordered);
    assert_eq!(report.paths.len(), 6);
    assert!(report.mean_v_zero >= report.mean_v_compare);
    let (n, v, _) = report.zero_decay_speeds[0];
    assert_eq!(n, 2000);
    assert!(v <= 0.0 && v > -0.1);
    assert!(dir.join("couple.csv").exists());
    assert!(dir.join("couple_summary.json").exists());
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn coupling_requires_the_two_state_family() {
    let toml = r#"
[disorder]
family = "lattice"
rho = 1.0
r = "1/1"
theta = 0.5
tail = [[2, 1.0]]

[run]
n_values = [100]
engine = "counts"
cycles = 10
seed = 1
"#;
    let cfg = ExperimentConfig::from_toml(toml).unwrap();
    let dir = temp_dir("couple-bad");
    let err = cli::run_couple_r0(&cfg, &dir).unwrap_err();
    assert_eq!(err.exit_code(), 1);
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn error_exit_codes_are_distinct() {
    // invalid config
    let toml = BOTH_ENGINES_TOML.replace("rho = 1.0", "rho = -1.0");
    let err = ExperimentConfig::from_toml(&toml).unwrap_err();
    assert_eq!(cli::CliError::from(err).exit_code(), 2);

    // cycle-cap blowup: a spec whose front never moves
    let toml = r#"
[disorder]
family = "two_state"
rho = 100.0
r = 0.0

[run]
n_values = [10]
engine = "counts"
cycles = 1
seed = 1
cycle_cap = 40
"#;
    let cfg = ExperimentConfig::from_toml(toml).unwrap();
    let dir = temp_dir("cap");
    let err = cli::run_simulate(&cfg, &dir, false).unwrap_err();
    assert_eq!(err.exit_code(), 3);
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn engine_override_parses() {
    assert_eq!("counts".parse::<EngineChoice>().unwrap(), EngineChoice::Counts);
    assert_eq!("both".parse::<EngineChoice>().unwrap(), EngineChoice::Both);
    assert!("fast".parse::<EngineChoice>().is_err());
}
