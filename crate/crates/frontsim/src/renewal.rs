//! Renewal-cycle collection and front-speed estimation.
//!
//! A cycle runs from one full reset to the next: the chain starts with all
//! particles together, and a cycle completes at the first step where the
//! front moves down by exactly one level and every particle sits at the new
//! front. Successive cycles are independent and identically distributed, so
//! the speed is the ratio of mean displacement to mean length, with the
//! delta-method standard error of the ratio estimator over cycles.

use crate::counts::{Configuration, CountsChain, CountsError, TrajectoryStep};
use crate::disorder::{DisorderError, DisorderSpec};
use crate::particle::ParticleSystem;
use crate::seeding::{stream_rng, EngineTag};
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

/// Default per-cycle step cap; exceeding it signals a mis-parameterized run
/// rather than an interesting regime.
pub const DEFAULT_CYCLE_CAP: u64 = 1_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RenewalError {
    #[error("cycle exceeded the step cap of {cap} steps; the run is likely mis-parameterized")]
    CycleCapExceeded { cap: u64 },
    #[error("speed estimation requires at least two complete cycles, got {0}")]
    TooFewCycles(usize),
    #[error("total cycle length is zero")]
    DegenerateCycles,
    #[error(transparent)]
    Counts(#[from] CountsError),
    #[error(transparent)]
    Disorder(#[from] DisorderError),
}

/// One complete renewal cycle.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CycleRecord {
    /// Steps between successive front moves, last entry closing the cycle.
    pub tau_increments: Vec<u32>,
    /// Depth of each front move, aligned with `tau_increments`.
    pub move_depths: Vec<u32>,
    /// Total steps in the cycle (the sum of the increments).
    pub cycle_length: u64,
    /// Total front displacement over the cycle, in real units.
    pub displacement: f64,
}

impl CycleRecord {
    pub fn moves(&self) -> usize {
        self.move_depths.len()
    }
}

/// Point estimate of the front speed with its ratio-estimator error.
#[derive(Debug, Clone, Serialize)]
pub struct SpeedEstimate {
    pub v_hat: f64,
    pub stderr: f64,
    pub n_cycles: usize,
    pub n: u64,
    pub spec: DisorderSpec,
}

/// Aggregate cycle statistics reported next to the estimate.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CycleSummary {
    pub mean_cycle_length: f64,
    pub mean_moves_per_cycle: f64,
    pub mean_displacement: f64,
}

pub fn summarize(cycles: &[CycleRecord]) -> CycleSummary {
    let n = cycles.len().max(1) as f64;
    CycleSummary {
        mean_cycle_length: cycles.iter().map(|c| c.cycle_length as f64).sum::<f64>() / n,
        mean_moves_per_cycle: cycles.iter().map(|c| c.moves() as f64).sum::<f64>() / n,
        mean_displacement: cycles.iter().map(|c| c.displacement).sum::<f64>() / n,
    }
}

fn displacement_for(spec: &DisorderSpec, cycle_length: u64, total_depth: u64) -> f64 {
    let (l0, l1) = spec.levels();
    cycle_length as f64 * l0 - (l0 - l1) * total_depth as f64
}

/// Collect `n_cycles` complete cycles from the count engine, starting with
/// all particles together. Later cycles start from the reset state, which
/// has identical dynamics.
pub fn collect_cycles<R: Rng + ?Sized>(
    spec: &DisorderSpec,
    n: u64,
    n_cycles: u64,
    cycle_cap: u64,
    rng: &mut R,
) -> Result<Vec<CycleRecord>, RenewalError> {
    let mut chain = CountsChain::new(spec, Configuration::all_at_front(n))?;
    let mut cycles = Vec::with_capacity(n_cycles as usize);
    for _ in 0..n_cycles {
        cycles.push(run_one_cycle(&mut chain, spec, cycle_cap, rng)?);
    }
    Ok(cycles)
}

fn run_one_cycle<R: Rng + ?Sized>(
    chain: &mut CountsChain,
    spec: &DisorderSpec,
    cycle_cap: u64,
    rng: &mut R,
) -> Result<CycleRecord, RenewalError> {
    let mut tau_increments = Vec::new();
    let mut move_depths = Vec::new();
    let mut steps_total = 0u64;
    let mut since_move = 0u32;
    let mut total_depth = 0u64;
    loop {
        if steps_total >= cycle_cap {
            return Err(RenewalError::CycleCapExceeded { cap: cycle_cap });
        }
        let out = chain.step(rng);
        steps_total += 1;
        since_move += 1;
        if out.front_drop >= 1 {
            tau_increments.push(since_move);
            move_depths.push(out.front_drop as u32);
            total_depth += out.front_drop as u64;
            since_move = 0;
            // cycle closes when the move has depth one and the whole
            // population landed on the new front
            if out.front_drop == 1 && chain.state().is_all_at_front() {
                return Ok(CycleRecord {
                    displacement: displacement_for(spec, steps_total, total_depth),
                    tau_increments,
                    move_depths,
                    cycle_length: steps_total,
                });
            }
        }
    }
}

/// Parallel cycle collection over a fixed set of virtual streams. The
/// partition of cycles over streams and the merge order depend only on the
/// arguments, never on the physical thread count.
pub fn collect_cycles_parallel(
    spec: &DisorderSpec,
    n: u64,
    n_cycles: u64,
    cycle_cap: u64,
    master_seed: u64,
    streams: u64,
) -> Result<Vec<CycleRecord>, RenewalError> {
    let streams = streams.clamp(1, n_cycles.max(1));
    let per = n_cycles / streams;
    let extra = n_cycles % streams;
    let batches: Vec<Result<Vec<CycleRecord>, RenewalError>> = (0..streams)
        .into_par_iter()
        .map(|idx| {
            let quota = per + u64::from(idx < extra);
            let mut rng = stream_rng(master_seed, n, EngineTag::Counts, idx);
            collect_cycles(spec, n, quota, cycle_cap, &mut rng)
        })
        .collect();
    let mut out = Vec::with_capacity(n_cycles as usize);
    for batch in batches {
        out.extend(batch?);
    }
    Ok(out)
}

/// Parallel variant of [`collect_cycles_naive`] over virtual streams, with
/// the same determinism guarantees as [`collect_cycles_parallel`].
pub fn collect_cycles_naive_parallel(
    spec: &DisorderSpec,
    n: u64,
    n_cycles: u64,
    cycle_cap: u64,
    master_seed: u64,
    streams: u64,
) -> Result<Vec<CycleRecord>, RenewalError> {
    let streams = streams.clamp(1, n_cycles.max(1));
    let per = n_cycles / streams;
    let extra = n_cycles % streams;
    let batches: Vec<Result<Vec<CycleRecord>, RenewalError>> = (0..streams)
        .into_par_iter()
        .map(|idx| {
            let quota = per + u64::from(idx < extra);
            let mut rng = stream_rng(master_seed, n, EngineTag::Naive, idx);
            collect_cycles_naive(spec, n, quota, cycle_cap, &mut rng)
        })
        .collect();
    let mut out = Vec::with_capacity(n_cycles as usize);
    for batch in batches {
        out.extend(batch?);
    }
    Ok(out)
}

/// Collect cycles from the position-level engine. Depth bookkeeping uses the
/// level spacing of the spec, so the mixture family is handled through its
/// affine levels. Meant for validation at small `N`.
pub fn collect_cycles_naive<R: Rng + ?Sized>(
    spec: &DisorderSpec,
    n: u64,
    n_cycles: u64,
    cycle_cap: u64,
    rng: &mut R,
) -> Result<Vec<CycleRecord>, RenewalError> {
    let (l0, l1) = spec.levels();
    let spacing = l0 - l1;
    let mut system = ParticleSystem::new_at_origin(n);
    let mut cycles = Vec::with_capacity(n_cycles as usize);
    let mut front = system.front();
    for _ in 0..n_cycles {
        let mut tau_increments = Vec::new();
        let mut move_depths = Vec::new();
        let mut steps_total = 0u64;
        let mut since_move = 0u32;
        let mut displacement = 0.0f64;
        loop {
            if steps_total >= cycle_cap {
                return Err(RenewalError::CycleCapExceeded { cap: cycle_cap });
            }
            system.step(spec, rng)?;
            steps_total += 1;
            since_move += 1;
            let new_front = system.front();
            let step_change = new_front - front;
            // depth of the move in level units; the step change is
            // lambda0 - spacing * depth
            let depth = ((l0 - step_change) / spacing).round() as u32;
            displacement += step_change;
            front = new_front;
            if depth >= 1 {
                tau_increments.push(since_move);
                move_depths.push(depth);
                since_move = 0;
                if depth == 1 && system.to_configuration(spacing).is_all_at_front() {
                    cycles.push(CycleRecord {
                        tau_increments,
                        move_depths,
                        cycle_length: steps_total,
                        displacement,
                    });
                    break;
                }
            }
        }
    }
    Ok(cycles)
}

/// Ratio-of-means speed estimate over complete cycles, with the delta-method
/// standard error (cycles are the i.i.d. batches).
pub fn estimate_speed(
    cycles: &[CycleRecord],
    n: u64,
    spec: &DisorderSpec,
) -> Result<SpeedEstimate, RenewalError> {
    if cycles.len() < 2 {
        return Err(RenewalError::TooFewCycles(cycles.len()));
    }
    let total_length: f64 = cycles.iter().map(|c| c.cycle_length as f64).sum();
    if total_length <= 0.0 {
        return Err(RenewalError::DegenerateCycles);
    }
    let total_disp: f64 = cycles.iter().map(|c| c.displacement).sum();
    let v_hat = total_disp / total_length;
    let n_cycles = cycles.len();
    let mean_length = total_length / n_cycles as f64;
    let residual_sq: f64 = cycles
        .iter()
        .map(|c| {
            let resid = c.displacement - v_hat * c.cycle_length as f64;
            resid * resid
        })
        .sum();
    let var = residual_sq / (n_cycles as f64 - 1.0);
    let stderr = (var / n_cycles as f64).sqrt() / mean_length;
    Ok(SpeedEstimate {
        v_hat,
        stderr,
        n_cycles,
        n,
        spec: spec.clone(),
    })
}

/// Number of steps at which the front moved.
pub fn count_front_moves(trajectory: &[TrajectoryStep]) -> u64 {
    trajectory.iter().filter(|s| s.front_drop >= 1).count() as u64
}
