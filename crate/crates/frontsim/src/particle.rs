//! Direct position-level simulation.
//!
//! Each particle's next position is the maximum over all current particles
//! of position plus a fresh increment, which costs `N^2` draws per step.
//! This engine is the ground-truth oracle used to validate the count-vector
//! engine at small `N`; it is not meant to be fast.

use crate::counts::{shift_canonical, Configuration, CountsError};
use crate::disorder::{Decay, DisorderError, DisorderSpec, TwoStateSpec};
use rand::Rng;
use std::collections::BTreeMap;

/// Positions of the `N` particles. Positions are kept as raw reals; for the
/// lattice families they are exact integers in floating point, so long runs
/// do not drift.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleSystem {
    positions: Vec<f64>,
    time: u64,
}

impl ParticleSystem {
    /// All particles at the origin.
    pub fn new_at_origin(n: u64) -> Self {
        assert!(n > 0, "a system needs at least one particle");
        ParticleSystem {
            positions: vec![0.0; n as usize],
            time: 0,
        }
    }

    /// Particles placed at depth `l` below zero for each occupied depth of a
    /// count vector (the leading particle of a canonical vector sits at 0).
    pub fn from_configuration(config: &Configuration) -> Self {
        let mut positions = Vec::with_capacity(config.total() as usize);
        for (depth, &count) in config.counts().iter().enumerate() {
            for _ in 0..count {
                positions.push(-(depth as f64));
            }
        }
        ParticleSystem { positions, time: 0 }
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn n(&self) -> u64 {
        self.positions.len() as u64
    }

    pub fn time(&self) -> u64 {
        self.time
    }

    /// Position of the rightmost particle.
    pub fn front(&self) -> f64 {
        self.positions.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Advance one step, consuming exactly `N^2` increments in fixed
    /// source-major order so runs are bit-reproducible for a given stream.
    pub fn step<R: Rng + ?Sized>(
        &mut self,
        spec: &DisorderSpec,
        rng: &mut R,
    ) -> Result<(), DisorderError> {
        let n = self.positions.len();
        spec.validate_at(n as u64)?;
        let masses = spec.depth_masses(n as u64);
        let values: Vec<f64> = (0..masses.len()).map(|k| spec.value_of_depth(k)).collect();
        let mut next = vec![f64::NEG_INFINITY; n];
        for j in 0..n {
            let base = self.positions[j];
            for slot in next.iter_mut() {
                // same uniform consumption and thresholds as sample_xi
                let u: f64 = rng.random();
                let mut depth = masses.len() - 1;
                let mut acc = 0.0;
                for (k, m) in masses.iter().enumerate() {
                    acc += m;
                    if u < acc {
                        depth = k;
                        break;
                    }
                }
                let candidate = base + values[depth];
                if candidate > *slot {
                    *slot = candidate;
                }
            }
        }
        self.positions = next;
        self.time += 1;
        Ok(())
    }

    /// Count vector of depths behind the current front, with `spacing` the
    /// gap between adjacent levels (1 for the lattice families,
    /// `lambda0 - lambda1` for the mixture).
    pub fn to_configuration(&self, spacing: f64) -> Configuration {
        let front = self.front();
        let mut counts: Vec<u64> = Vec::new();
        for &p in &self.positions {
            let depth = ((front - p) / spacing).round() as usize;
            if counts.len() <= depth {
                counts.resize(depth + 1, 0);
            }
            counts[depth] += 1;
        }
        Configuration::new(counts).expect("nonempty system")
    }
}

/// Pure one-step transition given an explicit increment matrix in
/// source-major layout (`xi[j * n + i]` is the edge from source `j` to
/// target `i`). Exposed for enumeration and equivariance checks.
pub fn step_with_matrix(positions: &[f64], xi: &[f64]) -> Vec<f64> {
    let n = positions.len();
    assert_eq!(xi.len(), n * n);
    let mut next = vec![f64::NEG_INFINITY; n];
    for j in 0..n {
        for (i, slot) in next.iter_mut().enumerate() {
            let candidate = positions[j] + xi[j * n + i];
            if candidate > *slot {
                *slot = candidate;
            }
        }
    }
    next
}

/// Run from the all-zero start and return the front after every step.
pub fn front_trajectory<R: Rng + ?Sized>(
    spec: &DisorderSpec,
    n: u64,
    steps: u64,
    rng: &mut R,
) -> Result<Vec<f64>, DisorderError> {
    let mut system = ParticleSystem::new_at_origin(n);
    let mut fronts = Vec::with_capacity(steps as usize);
    for _ in 0..steps {
        system.step(spec, rng)?;
        fronts.push(system.front());
    }
    Ok(fronts)
}

/// Minimal path energy per step for a run started from the all-zero state:
/// the negated front trajectory.
pub fn ground_state_energy(fronts: &[f64]) -> Vec<f64> {
    fronts.iter().map(|&f| -f).collect()
}

/// Exact one-step law of the count vector obtained by enumerating every
/// disorder outcome of the `N^2` edges. Keys are `(front_drop, counts)`
/// where counts are re-anchored at the new front. Only feasible when
/// `support_size^(N^2)` is small.
pub fn enumerate_one_step_law(
    start: &Configuration,
    spec: &DisorderSpec,
) -> Result<BTreeMap<(usize, Vec<u64>), f64>, CountsError> {
    let (canon, _) = shift_canonical(start);
    let n = canon.total() as usize;
    spec.validate_at(n as u64)?;
    let masses = spec.depth_masses(n as u64);
    let support = masses.len();
    let edges = n * n;
    let outcomes = (support as f64).powi(edges as i32);
    assert!(
        outcomes <= 2.5e7,
        "enumeration over {outcomes} outcomes is not feasible"
    );

    // integer depths: position of each particle below the front at 0
    let mut depths = Vec::with_capacity(n);
    for (depth, &count) in canon.counts().iter().enumerate() {
        for _ in 0..count {
            depths.push(depth as i64);
        }
    }

    let mut law: BTreeMap<(usize, Vec<u64>), f64> = BTreeMap::new();
    let mut digits = vec![0usize; edges];
    loop {
        let mut prob = 1.0f64;
        for &d in &digits {
            prob *= masses[d];
        }
        if prob > 0.0 {
            // new position of target i: max over sources j of -(depth_j + drop_ji)
            let mut new_depth = vec![i64::MAX; n];
            for j in 0..n {
                for (i, nd) in new_depth.iter_mut().enumerate() {
                    let cand = depths[j] + digits[j * n + i] as i64;
                    if cand < *nd {
                        *nd = cand;
                    }
                }
            }
            let drop = *new_depth.iter().min().expect("nonempty");
            let mut counts = Vec::new();
            for &d in &new_depth {
                let rel = (d - drop) as usize;
                if counts.len() <= rel {
                    counts.resize(rel + 1, 0u64);
                }
                counts[rel] += 1;
            }
            *law.entry((drop as usize, counts)).or_insert(0.0) += prob;
        }
        // odometer increment
        let mut pos = 0;
        loop {
            if pos == edges {
                return Ok(law);
            }
            digits[pos] += 1;
            if digits[pos] < support {
                break;
            }
            digits[pos] = 0;
            pos += 1;
        }
    }
}

/// Marginal law of `(leader count at the previous front, front_drop)` from a
/// full enumerated law.
pub fn marginal_leaders_and_drop(
    law: &BTreeMap<(usize, Vec<u64>), f64>,
) -> BTreeMap<(u64, usize), f64> {
    let mut out = BTreeMap::new();
    for ((drop, counts), p) in law {
        let leaders = if *drop == 0 { counts[0] } else { 0 };
        *out.entry((leaders, *drop)).or_insert(0.0) += p;
    }
    out
}

/// Pathwise-coupled pair of two-state runs sharing the same uniforms: the
/// run with the larger zero-increment mass (decay exponent 0) dominates the
/// other on every path, so its front can never fall behind.
#[derive(Debug, Clone)]
pub struct CoupledRun {
    /// Fronts of the `r = 0` run after each step.
    pub fronts_zero: Vec<f64>,
    /// Fronts of the compared `r > 0` run after each step.
    pub fronts_r: Vec<f64>,
}

impl CoupledRun {
    /// True when the dominance ordering held at every recorded step.
    pub fn is_ordered(&self) -> bool {
        self.fronts_zero
            .iter()
            .zip(&self.fronts_r)
            .all(|(a, b)| a >= b)
    }

    pub fn speeds(&self) -> (f64, f64) {
        let t = self.fronts_zero.len() as f64;
        (
            self.fronts_zero.last().copied().unwrap_or(0.0) / t,
            self.fronts_r.last().copied().unwrap_or(0.0) / t,
        )
    }
}

/// Run the shared-uniform coupling for `steps` steps at size `n`, comparing
/// the two-state systems with decay exponents `0` and `r_compare`.
pub fn run_coupled_two_state<R: Rng + ?Sized>(
    rho: f64,
    r_compare: &Decay,
    n: u64,
    steps: u64,
    rng: &mut R,
) -> Result<CoupledRun, DisorderError> {
    let zero = DisorderSpec::TwoState(TwoStateSpec::new(rho, Decay::value(0.0)?)?);
    let compared = DisorderSpec::TwoState(TwoStateSpec::new(rho, *r_compare)?);
    let p_zero = zero.p_zero(n);
    let p_compare = compared.p_zero(n);
    let size = n as usize;
    let mut pos_zero = vec![0.0f64; size];
    let mut pos_r = vec![0.0f64; size];
    let mut fronts_zero = Vec::with_capacity(steps as usize);
    let mut fronts_r = Vec::with_capacity(steps as usize);
    let mut next_zero = vec![f64::NEG_INFINITY; size];
    let mut next_r = vec![f64::NEG_INFINITY; size];
    for _ in 0..steps {
        next_zero.fill(f64::NEG_INFINITY);
        next_r.fill(f64::NEG_INFINITY);
        for j in 0..size {
            for i in 0..size {
                let u: f64 = rng.random();
                // thresholding the same uniform at both masses keeps the
                // increments ordered edge by edge
                let xi_zero = if u < p_zero { 0.0 } else { -1.0 };
                let xi_r = if u < p_compare { 0.0 } else { -1.0 };
                let cand = pos_zero[j] + xi_zero;
                if cand > next_zero[i] {
                    next_zero[i] = cand;
                }
                let cand = pos_r[j] + xi_r;
                if cand > next_r[i] {
                    next_r[i] = cand;
                }
            }
        }
        std::mem::swap(&mut pos_zero, &mut next_zero);
        std::mem::swap(&mut pos_r, &mut next_r);
        fronts_zero.push(pos_zero.iter().cloned().fold(f64::NEG_INFINITY, f64::max));
        fronts_r.push(pos_r.iter().cloned().fold(f64::NEG_INFINITY, f64::max));
    }
    Ok(CoupledRun {
        fronts_zero,
        fronts_r,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::disorder::TwoStateSpec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn two_state(rho: f64, r: f64) -> DisorderSpec {
        DisorderSpec::TwoState(TwoStateSpec::new(rho, Decay::value(r).unwrap()).unwrap())
    }

    #[test]
    fn degenerate_drop_moves_everything_down_one() {
        let spec = two_state(1e-300, 0.0);
        let mut system = ParticleSystem::new_at_origin(5);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for t in 1..=10 {
            system.step(&spec, &mut rng).unwrap();
            assert_eq!(system.front(), -(t as f64));
            assert!(system.positions().iter().all(|&p| p == -(t as f64)));
        }
    }

    #[test]
    fn single_particle_with_certain_zero_is_fixed() {
        let spec = two_state(10.0, 0.0); // p0 clamps to 1 at N = 1
        let mut system = ParticleSystem::new_at_origin(1);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..5 {
            system.step(&spec, &mut rng).unwrap();
        }
        assert_eq!(system.positions(), &[0.0]);
    }

    #[test]
    fn enumerated_leader_law_is_binomial_from_joint_start() {
        // from all particles at the front, the leader count after one step
        // is binomial with success mass 1 - (1 - p0)^N
        let n = 3u64;
        let spec = two_state(1.0, 0.5);
        let p0 = spec.p_zero(n);
        let law = enumerate_one_step_law(&Configuration::all_at_front(n), &spec).unwrap();
        let marginal = marginal_leaders_and_drop(&law);
        let s = 1.0 - (1.0 - p0).powi(3);
        let binom = |k: u64| {
            let c = [1.0, 3.0, 3.0, 1.0][k as usize];
            c * s.powi(k as i32) * (1.0 - s).powi((n - k) as i32)
        };
        for k in 1..=n {
            let p = marginal.get(&(k, 0)).copied().unwrap_or(0.0);
            assert!((p - binom(k)).abs() < 1e-14, "k={k}");
        }
        let p_drop = marginal.get(&(0, 1)).copied().unwrap_or(0.0);
        assert!((p_drop - binom(0)).abs() < 1e-14);
    }

    #[test]
    fn energies_flip_sign_and_increase_by_at_most_one() {
        let fronts = vec![0.0, 0.0, -1.0];
        assert_eq!(ground_state_energy(&fronts), vec![0.0, 0.0, 1.0]);

        let spec = two_state(1.0, 0.3);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let fronts = front_trajectory(&spec, 30, 60, &mut rng).unwrap();
        let energies = ground_state_energy(&fronts);
        let mut prev = 0.0;
        for &e in &energies {
            let inc = e - prev;
            assert!(inc == 0.0 || inc == 1.0, "increment {inc}");
            prev = e;
        }
    }

    #[test]
    fn forced_drop_gives_linear_energy() {
        let spec = two_state(1e-300, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let fronts = front_trajectory(&spec, 4, 10, &mut rng).unwrap();
        let energies = ground_state_energy(&fronts);
        let expected: Vec<f64> = (1..=10).map(|t| t as f64).collect();
        assert_eq!(energies, expected);
    }

    #[test]
    fn relabeling_particles_and_disorder_commutes_with_the_step() {
        let positions = [0.0, -1.0, 0.0, -2.0];
        let n = positions.len();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let xi: Vec<f64> = (0..n * n)
            .map(|_| if rng.random::<f64>() < 0.4 { 0.0 } else { -1.0 })
            .collect();
        let perm = [2usize, 0, 3, 1];
        let mut permuted_positions = vec![0.0; n];
        let mut permuted_xi = vec![0.0; n * n];
        for (new, &old) in perm.iter().enumerate() {
            permuted_positions[new] = positions[old];
            for (new_i, &old_i) in perm.iter().enumerate() {
                permuted_xi[new * n + new_i] = xi[old * n + old_i];
            }
        }
        let stepped = step_with_matrix(&positions, &xi);
        let permuted_stepped = step_with_matrix(&permuted_positions, &permuted_xi);
        for (new, &old) in perm.iter().enumerate() {
            assert_eq!(permuted_stepped[new], stepped[old]);
        }
    }

    #[test]
    fn front_increments_stay_in_support_range() {
        let spec = two_state(1.0, 0.4);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let fronts = front_trajectory(&spec, 40, 80, &mut rng).unwrap();
        let mut prev = 0.0;
        for &f in &fronts {
            let inc = f - prev;
            assert!(inc == 0.0 || inc == -1.0);
            prev = f;
        }
    }

    #[test]
    fn coupled_runs_are_ordered_and_degenerate_pair_is_identical() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let run = run_coupled_two_state(1.0, &Decay::value(0.4).unwrap(), 32, 120, &mut rng)
            .unwrap();
        assert!(run.is_ordered());
        let (v0, vr) = run.speeds();
        assert!(v0 <= 0.0 && v0 >= vr);

        // comparing r = 0 against itself must produce identical paths
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let same = run_coupled_two_state(1.0, &Decay::value(0.0).unwrap(), 16, 60, &mut rng)
            .unwrap();
        assert_eq!(same.fronts_zero, same.fronts_r);
    }
}
