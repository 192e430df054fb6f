//! Experiment configuration: a single TOML file with nested tables.
//!
//! ```toml
//! [disorder]
//! family = "lattice"        # two_state | lattice | mixture
//! rho    = 1.0
//! r      = "1/2"            # float or exact fraction string
//! theta  = 0.5              # lattice and mixture only
//! tail   = [[2, 1.0]]       # [depth, weight] pairs, depths >= 2
//! # lambda0 = 2.0           # mixture only
//! # lambda1 = 1.0
//!
//! [run]
//! n_values  = [1000, 100000]
//! engine    = "counts"      # counts | naive | both
//! cycles    = 20000
//! seed      = 42
//! cycle_cap = 1000000
//! streams   = 64
//! ```

use crate::disorder::{
    Decay, DisorderSpec, LatticeSpec, MixtureSpec, TailSpec, TwoStateSpec,
};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("failed to parse config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid disorder spec: {0}")]
    Disorder(#[from] crate::disorder::DisorderError),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    TwoState,
    Lattice,
    Mixture,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EngineChoice {
    Counts,
    Naive,
    Both,
}

impl EngineChoice {
    pub fn as_str(&self) -> &'static str {
        match self {
            EngineChoice::Counts => "counts",
            EngineChoice::Naive => "naive",
            EngineChoice::Both => "both",
        }
    }
}

impl std::str::FromStr for EngineChoice {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "counts" => Ok(EngineChoice::Counts),
            "naive" => Ok(EngineChoice::Naive),
            "both" => Ok(EngineChoice::Both),
            other => Err(format!("unknown engine {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DisorderConfig {
    pub family: Family,
    pub rho: f64,
    pub r: Decay,
    #[serde(default)]
    pub theta: Option<f64>,
    /// `[depth, weight]` pairs with integer depths `>= 2`.
    #[serde(default)]
    pub tail: Option<Vec<(usize, f64)>>,
    #[serde(default)]
    pub truncated_mass: Option<f64>,
    #[serde(default)]
    pub lambda0: Option<f64>,
    #[serde(default)]
    pub lambda1: Option<f64>,
}

impl DisorderConfig {
    pub fn to_spec(&self) -> Result<DisorderSpec, ConfigError> {
        match self.family {
            Family::TwoState => Ok(DisorderSpec::TwoState(TwoStateSpec::new(self.rho, self.r)?)),
            Family::Lattice => Ok(DisorderSpec::Lattice(self.lattice_part()?)),
            Family::Mixture => {
                let lambda0 = self
                    .lambda0
                    .ok_or_else(|| ConfigError::Invalid("mixture requires lambda0".into()))?;
                let lambda1 = self
                    .lambda1
                    .ok_or_else(|| ConfigError::Invalid("mixture requires lambda1".into()))?;
                Ok(DisorderSpec::Mixture(MixtureSpec::new(
                    lambda0,
                    lambda1,
                    self.lattice_part()?,
                )?))
            }
        }
    }

    fn lattice_part(&self) -> Result<LatticeSpec, ConfigError> {
        let theta = self
            .theta
            .ok_or_else(|| ConfigError::Invalid("lattice family requires theta".into()))?;
        let pairs = self
            .tail
            .as_ref()
            .ok_or_else(|| ConfigError::Invalid("lattice family requires a tail table".into()))?;
        let tail = TailSpec::new(pairs, self.truncated_mass.unwrap_or(0.0))?;
        Ok(LatticeSpec::new(self.rho, self.r, theta, tail)?)
    }
}

fn default_streams() -> u64 {
    64
}

fn default_cycle_cap() -> u64 {
    crate::renewal::DEFAULT_CYCLE_CAP
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub n_values: Vec<u64>,
    pub engine: EngineChoice,
    /// Renewal-cycle budget per size and engine. Exactly one of `cycles`
    /// and `horizon` must be set.
    #[serde(default)]
    pub cycles: Option<u64>,
    /// Fixed-length alternative: each virtual stream runs one trajectory of
    /// this many steps and the speed is averaged over streams.
    #[serde(default)]
    pub horizon: Option<u64>,
    pub seed: u64,
    #[serde(default = "default_cycle_cap")]
    pub cycle_cap: u64,
    /// Number of virtual random streams the cycle budget is split over.
    /// Fixed by config, not by machine, so outputs are byte-stable.
    #[serde(default = "default_streams")]
    pub streams: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
pub struct CoupleConfig {
    /// Particle count for the coupled pair (position-level engine).
    #[serde(default = "default_couple_n")]
    pub n: u64,
    #[serde(default = "default_couple_paths")]
    pub paths: u64,
    #[serde(default = "default_couple_horizon")]
    pub horizon: u64,
}

fn default_couple_n() -> u64 {
    64
}

fn default_couple_paths() -> u64 {
    20
}

fn default_couple_horizon() -> u64 {
    400
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
pub struct OutputConfig {
    /// Output directory; the command-line `--out` flag takes precedence.
    #[serde(default)]
    pub dir: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub disorder: DisorderConfig,
    pub run: RunConfig,
    #[serde(default)]
    pub output: Option<OutputConfig>,
    #[serde(default)]
    pub couple: Option<CoupleConfig>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: ExperimentConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.run.n_values.is_empty() {
            return Err(ConfigError::Invalid("n_values must not be empty".into()));
        }
        if self.run.n_values.contains(&0) {
            return Err(ConfigError::Invalid("n_values must be positive".into()));
        }
        match (self.run.cycles, self.run.horizon) {
            (Some(0), _) => return Err(ConfigError::Invalid("cycles must be positive".into())),
            (_, Some(0)) => return Err(ConfigError::Invalid("horizon must be positive".into())),
            (None, None) | (Some(_), Some(_)) => {
                return Err(ConfigError::Invalid(
                    "exactly one of cycles and horizon must be set".into(),
                ))
            }
            _ => {}
        }
        self.disorder.to_spec().map(|_| ())
    }
}

/// FNV-1a hash of the serialized spec; identifies the disorder in output
/// rows.
pub fn spec_hash(spec: &DisorderSpec) -> String {
    let text = serde_json::to_string(spec).expect("specs serialize");
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for byte in text.as_bytes() {
        hash ^= u64::from(*byte);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    format!("{hash:016x}")
}
