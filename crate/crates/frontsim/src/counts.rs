//! Exact occupation-count engine.
//!
//! Instead of tracking `N` particle positions and drawing `N^2` increments
//! per step, this engine tracks the vector of particle counts by depth
//! behind the front and advances it with the exact one-step law: each of the
//! `N` next-generation particles independently lands at depth `k` with
//! probability `s_k(x) = A_k(x) - A_{k+1}(x)`, where
//!
//! ```text
//! A_k(x) = prod_{l < k} T_{k-l}^{x_l},    T_j = P(xi <= -j),
//! ```
//!
//! is the probability that a single particle lands at depth `>= k` given the
//! current counts `x`. The counts therefore evolve as a multinomial with
//! those class probabilities, sampled here as sequential conditional
//! binomials in depth order with conditional success probability
//! `1 - A_{k+1}/A_k`. That scheme is exact, streams over depths, and never
//! materializes an unbounded class list.
//!
//! All powers are accumulated in log space, so counts of order `10^6` and
//! beyond are safe from underflow.
//!
//! Depths are always stored relative to the current front: after a step in
//! which the deepest occupied level moved down by `front_drop`, the vector is
//! shifted so that index zero is the new front. A front move is any step
//! with `front_drop >= 1`.

use crate::disorder::{DisorderError, DisorderSpec};
use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::Serialize;
use thiserror::Error;

/// Residual mass threshold that ends a kernel row.
pub const ROW_MASS_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CountsError {
    #[error("configuration must contain at least one particle")]
    EmptyConfiguration,
    #[error("kernel row requires a canonical configuration (first count nonzero)")]
    NonCanonical,
    #[error(transparent)]
    Disorder(#[from] DisorderError),
}

/// Occupation vector: `counts()[l]` particles at depth `l` behind the front.
///
/// The trailing entry is always nonzero and the total is fixed. A
/// configuration is *canonical* when depth zero is occupied; states reached
/// by the engine are always canonical.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Configuration {
    counts: Vec<u64>,
    total: u64,
}

impl Configuration {
    pub fn new(mut counts: Vec<u64>) -> Result<Self, CountsError> {
        while counts.last() == Some(&0) {
            counts.pop();
        }
        let total: u64 = counts.iter().sum();
        if counts.is_empty() || total == 0 {
            return Err(CountsError::EmptyConfiguration);
        }
        Ok(Configuration { counts, total })
    }

    /// All `n` particles at the front.
    pub fn all_at_front(n: u64) -> Self {
        assert!(n > 0, "a configuration needs at least one particle");
        Configuration {
            counts: vec![n],
            total: n,
        }
    }

    /// All `n` particles exactly one level behind the front reference.
    pub fn all_one_behind(n: u64) -> Self {
        assert!(n > 0, "a configuration needs at least one particle");
        Configuration {
            counts: vec![0, n],
            total: n,
        }
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn count_at(&self, depth: usize) -> u64 {
        self.counts.get(depth).copied().unwrap_or(0)
    }

    pub fn max_depth(&self) -> usize {
        self.counts.len() - 1
    }

    pub fn is_canonical(&self) -> bool {
        self.counts[0] > 0
    }

    pub fn is_all_at_front(&self) -> bool {
        self.counts.len() == 1
    }

    /// Compact `depth:count` rendering used by trajectory dumps.
    pub fn occupancy_string(&self) -> String {
        self.counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(l, c)| format!("{l}:{c}"))
            .collect::<Vec<_>>()
            .join(" ")
    }
}

/// Shift a configuration so that depth zero is occupied. Returns the shifted
/// configuration and the shift amount (zero when already canonical).
pub fn shift_canonical(x: &Configuration) -> (Configuration, usize) {
    let shift = x.counts.iter().position(|&c| c > 0).expect("nonempty");
    if shift == 0 {
        (x.clone(), 0)
    } else {
        (
            Configuration {
                counts: x.counts[shift..].to_vec(),
                total: x.total,
            },
            shift,
        )
    }
}

/// One-step class probabilities from a canonical configuration, truncated at
/// the first depth where the cumulative mass reaches `1 - ROW_MASS_TOLERANCE`;
/// the mass beyond the truncation is kept as an explicit residual.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelRow {
    source: Configuration,
    probs: Vec<f64>,
    residual: f64,
}

impl KernelRow {
    pub fn source(&self) -> &Configuration {
        &self.source
    }

    /// `s_0 ..= s_K`.
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Mass beyond the last computed class.
    pub fn residual(&self) -> f64 {
        self.residual
    }
}

/// Log-survival profile `ln A_k` for `k = 0 ..= D + 1`, where `D` is the
/// deepest reachable depth from a canonical configuration. `A_{D+1} = 0`.
fn log_survivals(x: &Configuration, spec: &DisorderSpec, ln_tail: &[f64]) -> Vec<f64> {
    let depth_cap = spec.max_depth();
    let mut ln_a = Vec::with_capacity(depth_cap + 2);
    ln_a.push(0.0);
    for k in 1..=depth_cap + 1 {
        let mut acc = 0.0f64;
        for (l, &c) in x.counts.iter().enumerate() {
            if c == 0 || l >= k {
                continue;
            }
            let lt = ln_tail[(k - l).min(depth_cap + 1)];
            if lt == f64::NEG_INFINITY {
                acc = f64::NEG_INFINITY;
                break;
            }
            acc += c as f64 * lt;
        }
        ln_a.push(acc);
    }
    ln_a
}

/// `ln T_j` for `j = 0 ..= D + 1` (the last entry is `-inf`).
fn log_tails(spec: &DisorderSpec, n: u64) -> Vec<f64> {
    let d = spec.max_depth();
    let mut out = Vec::with_capacity(d + 2);
    out.push(0.0);
    // ln(1 - p0) via ln_1p for accuracy when p0 is tiny
    out.push((-spec.p_zero(n)).ln_1p());
    for j in 2..=d {
        out.push(spec.tail_ge(n, j).ln());
    }
    out.push(f64::NEG_INFINITY);
    out
}

/// Exact class probabilities `s_k` from a canonical configuration.
pub fn kernel_row(x: &Configuration, spec: &DisorderSpec) -> Result<KernelRow, CountsError> {
    if !x.is_canonical() {
        return Err(CountsError::NonCanonical);
    }
    let n = x.total();
    spec.validate_at(n)?;
    let ln_tail = log_tails(spec, n);
    let ln_a = log_survivals(x, spec, &ln_tail);
    let mut probs = Vec::new();
    let mut residual = 1.0f64;
    for k in 0..ln_a.len() - 1 {
        let a_k = ln_a[k].exp();
        let s_k = if ln_a[k + 1] == f64::NEG_INFINITY {
            a_k
        } else {
            // s_k = A_k - A_{k+1} = -A_k * expm1(ln A_{k+1} - ln A_k)
            (-a_k * (ln_a[k + 1] - ln_a[k]).exp_m1()).max(0.0)
        };
        probs.push(s_k);
        residual = ln_a[k + 1].exp();
        if residual <= ROW_MASS_TOLERANCE {
            break;
        }
    }
    Ok(KernelRow {
        source: x.clone(),
        probs,
        residual,
    })
}

fn draw_binomial<R: Rng + ?Sized>(n: u64, p: f64, rng: &mut R) -> u64 {
    if n == 0 || p <= 0.0 {
        0
    } else if p >= 1.0 {
        n
    } else {
        Binomial::new(n, p).expect("valid binomial").sample(rng)
    }
}

/// Outcome of one engine step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    /// Depth of the front move at this step (zero when the front held).
    pub front_drop: usize,
}

/// Reusable chain over occupation vectors with a fixed spec and size.
#[derive(Debug, Clone)]
pub struct CountsChain {
    spec: DisorderSpec,
    n: u64,
    ln_tail: Vec<f64>,
    state: Configuration,
    time: u64,
}

impl CountsChain {
    /// Start a chain. Non-canonical starts are anchored at their leading
    /// particle; the anchoring shift is bookkeeping, not a front move.
    pub fn new(spec: &DisorderSpec, start: Configuration) -> Result<Self, CountsError> {
        let n = start.total();
        spec.validate_at(n)?;
        let (state, _) = shift_canonical(&start);
        Ok(CountsChain {
            ln_tail: log_tails(spec, n),
            spec: spec.clone(),
            n,
            state,
            time: 0,
        })
    }

    pub fn state(&self) -> &Configuration {
        &self.state
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn time(&self) -> u64 {
        self.time
    }

    pub fn spec(&self) -> &DisorderSpec {
        &self.spec
    }

    /// Advance one step: draw the next occupation vector from the exact
    /// kernel and re-anchor it at the new front.
    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> StepOutcome {
        let ln_a = log_survivals(&self.state, &self.spec, &self.ln_tail);
        let depth_cap = ln_a.len() - 2;
        let mut counts = vec![0u64; depth_cap + 1];
        let mut remaining = self.n;
        for k in 0..=depth_cap {
            if remaining == 0 {
                break;
            }
            let p_cond = if ln_a[k + 1] == f64::NEG_INFINITY {
                1.0
            } else {
                (-(ln_a[k + 1] - ln_a[k]).exp_m1()).clamp(0.0, 1.0)
            };
            let landed = draw_binomial(remaining, p_cond, rng);
            counts[k] = landed;
            remaining -= landed;
        }
        debug_assert_eq!(remaining, 0, "all particles must land within reach");
        let front_drop = counts.iter().position(|&c| c > 0).expect("total > 0");
        self.state = Configuration::new(counts[front_drop..].to_vec()).expect("nonempty");
        self.time += 1;
        StepOutcome { front_drop }
    }
}

/// One-shot step from a configuration; returns the re-anchored state and the
/// front drop. Convenience wrapper over [`CountsChain`].
pub fn step_counts<R: Rng + ?Sized>(
    x: &Configuration,
    spec: &DisorderSpec,
    rng: &mut R,
) -> Result<(Configuration, usize), CountsError> {
    let mut chain = CountsChain::new(spec, x.clone())?;
    let out = chain.step(rng);
    Ok((chain.state.clone(), out.front_drop))
}

/// Recorded step of a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryStep {
    pub state: Configuration,
    pub front_drop: usize,
}

/// Run the chain for `horizon` steps, recording each re-anchored state and
/// its front drop. Deterministic given the stream.
pub fn run_chain<R: Rng + ?Sized>(
    start: Configuration,
    spec: &DisorderSpec,
    horizon: u64,
    rng: &mut R,
) -> Result<Vec<TrajectoryStep>, CountsError> {
    let mut chain = CountsChain::new(spec, start)?;
    let mut out = Vec::with_capacity(horizon as usize);
    for _ in 0..horizon {
        let step = chain.step(rng);
        out.push(TrajectoryStep {
            state: chain.state.clone(),
            front_drop: step.front_drop,
        });
    }
    Ok(out)
}

/// Exact one-step law from a configuration: every reachable re-anchored
/// configuration with its front drop and probability. Exponential in the
/// depth range, so only suitable for small `N`.
pub fn one_step_config_law(
    x: &Configuration,
    spec: &DisorderSpec,
) -> Result<Vec<(usize, Configuration, f64)>, CountsError> {
    let (canon, _) = shift_canonical(x);
    let n = canon.total();
    spec.validate_at(n)?;
    let ln_tail = log_tails(spec, n);
    let ln_a = log_survivals(&canon, spec, &ln_tail);
    let depth_cap = ln_a.len() - 2;
    let probs: Vec<f64> = (0..=depth_cap)
        .map(|k| {
            let a_k = ln_a[k].exp();
            if ln_a[k + 1] == f64::NEG_INFINITY {
                a_k
            } else {
                (-a_k * (ln_a[k + 1] - ln_a[k]).exp_m1()).max(0.0)
            }
        })
        .collect();
    let mut out = Vec::new();
    let mut composition = vec![0u64; depth_cap + 1];
    enumerate_compositions(n, 0, &probs, &mut composition, 0.0, n, &mut out);
    Ok(out)
}

fn enumerate_compositions(
    _n: u64,
    class: usize,
    probs: &[f64],
    composition: &mut Vec<u64>,
    ln_weight: f64,
    remaining: u64,
    out: &mut Vec<(usize, Configuration, f64)>,
) {
    if class == probs.len() - 1 {
        composition[class] = remaining;
        let mut ln_p = ln_weight;
        if remaining > 0 {
            if probs[class] <= 0.0 {
                composition[class] = 0;
                return;
            }
            ln_p += remaining as f64 * probs[class].ln() - ln_factorial(remaining);
        }
        let total: u64 = composition.iter().sum();
        ln_p += ln_factorial(total);
        let drop = composition.iter().position(|&c| c > 0).expect("total > 0");
        let config = Configuration::new(composition[drop..].to_vec()).expect("nonempty");
        out.push((drop, config, ln_p.exp()));
        composition[class] = 0;
        return;
    }
    for y in 0..=remaining {
        if y > 0 && probs[class] <= 0.0 {
            break;
        }
        composition[class] = y;
        let mut lw = ln_weight;
        if y > 0 {
            lw += y as f64 * probs[class].ln() - ln_factorial(y);
        }
        enumerate_compositions(_n, class + 1, probs, composition, lw, remaining - y, out);
        composition[class] = 0;
    }
}

fn ln_factorial(n: u64) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}
