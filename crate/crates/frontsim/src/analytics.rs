//! Limiting quantities for the front models: leading-order transforms of the
//! leader count, its deviation rate function, the limiting leader-count
//! chain at near-move times, and the large-`N` speed limits the simulations
//! are checked against.

use crate::disorder::{Decay, DisorderSpec, LatticeSpec, TwoStateSpec};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalyticsError {
    #[error("decay exponent must be positive for this quantity")]
    ZeroDecay,
    #[error("tolerance must be positive, got {0}")]
    BadTolerance(f64),
    #[error("theta must lie strictly inside (0, 1), got {0}")]
    ThetaOutOfRange(f64),
    #[error("chain parameter m must be at least one")]
    ZeroM,
    #[error("hitting-time solve did not stabilize: doubling the state space still moved the result by {delta}")]
    NonConvergence { delta: f64 },
    #[error("no limit formula available: {0}")]
    Unsupported(&'static str),
}

/// Split of `1/r` into integer part `m` and fractional part `eta`.
///
/// `eta == 0` selects the corrected branch of every limit formula. Ratio
/// exponents split exactly; float exponents within `1e-9` of an integer
/// reciprocal are snapped to the critical branch and flagged so callers can
/// warn about the knife-edge classification.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExponentSplit {
    pub m: u64,
    pub eta: f64,
    pub r: f64,
    pub snapped: bool,
}

impl ExponentSplit {
    /// `None` when `r == 0` (the reciprocal split does not exist there).
    pub fn of(r: &Decay) -> Option<Self> {
        if r.is_zero() {
            return None;
        }
        match *r {
            Decay::Ratio { num, den } => Some(ExponentSplit {
                m: den / num,
                eta: (den % num) as f64 / num as f64,
                r: r.as_f64(),
                snapped: false,
            }),
            Decay::Value(v) => {
                let inv = 1.0 / v;
                let nearest = inv.round();
                if nearest >= 1.0 && (inv - nearest).abs() < 1e-9 {
                    Some(ExponentSplit {
                        m: nearest as u64,
                        eta: 0.0,
                        r: v,
                        snapped: inv != nearest,
                    })
                } else {
                    Some(ExponentSplit {
                        m: inv.floor() as u64,
                        eta: inv - inv.floor(),
                        r: v,
                        snapped: false,
                    })
                }
            }
        }
    }

    pub fn is_critical(&self) -> bool {
        self.eta == 0.0
    }
}

/// Leading-order Laplace transform of the leader count at time `t` started
/// from `k` leaders: `exp{(e^s - 1) k (N p0)^t}`. The dropped correction
/// vanishes as `N` grows; at `t = 0` the start is deterministic and the
/// exact transform `e^{sk}` is returned instead.
pub fn laplace_leader_count(k: u64, s: f64, t: u64, n: u64, spec: &TwoStateSpec) -> f64 {
    if t == 0 {
        return (s * k as f64).exp();
    }
    let p0 = DisorderSpec::TwoState(spec.clone()).p_zero(n);
    let drift = (n as f64 * p0).powf(t as f64);
    ((s.exp() - 1.0) * k as f64 * drift).exp()
}

/// Large-deviation rate function of the normalized leader count:
/// `x (ln x - t ln rho) + rho^t - x` for `x > 0`, infinite otherwise.
/// Its unique zero sits at `rho^t`.
pub fn rate_function(x: f64, t: u64, rho: f64) -> f64 {
    if x <= 0.0 {
        return f64::INFINITY;
    }
    let t = t as f64;
    x * (x.ln() - t * rho.ln()) + rho.powf(t) - x
}

/// Fraction of the population that lands exactly one level down when `k`
/// leaders survive: `1 - theta^k` for `k >= 1`, and `1` for `k = 0`.
pub fn g_func(k: u64, theta: f64) -> f64 {
    if k == 0 {
        1.0
    } else {
        -((k as f64) * theta.ln()).exp_m1()
    }
}

/// Parameters of the limiting leader-count chain at successive near-move
/// times: from state `t` the next state is Poisson with mean
/// `rho^m * g_func(t, theta)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VChainSpec {
    pub rho: f64,
    pub m: u64,
    pub theta: f64,
}

impl VChainSpec {
    pub fn new(rho: f64, m: u64, theta: f64) -> Result<Self, AnalyticsError> {
        if m == 0 {
            return Err(AnalyticsError::ZeroM);
        }
        if !(theta > 0.0 && theta < 1.0) {
            return Err(AnalyticsError::ThetaOutOfRange(theta));
        }
        Ok(VChainSpec { rho, m, theta })
    }

    pub fn rho_m(&self) -> f64 {
        self.rho.powi(self.m as i32)
    }

    /// Poisson mean of the transition out of state `t`.
    pub fn transition_mean(&self, t: u64) -> f64 {
        self.rho_m() * g_func(t, self.theta)
    }
}

fn poisson_pmf_row(lambda: f64, k_max: usize) -> Vec<f64> {
    let mut row = Vec::with_capacity(k_max + 1);
    let mut p = (-lambda).exp();
    row.push(p);
    for k in 1..=k_max {
        p *= lambda / k as f64;
        row.push(p);
    }
    row
}

fn poisson_upper_tail(lambda: f64, k_max: usize) -> f64 {
    1.0 - poisson_pmf_row(lambda, k_max).iter().sum::<f64>()
}

/// Gaussian elimination with partial pivoting; `a` is consumed.
fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| {
            a[i][col]
                .abs()
                .partial_cmp(&a[j][col].abs())
                .expect("finite")
        })?;
        if a[pivot][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        let pivot_row = a[col].clone();
        let pivot_rhs = b[col];
        for row in col + 1..n {
            let factor = a[row][col] / pivot_row[col];
            if factor == 0.0 {
                continue;
            }
            for (k, pv) in pivot_row.iter().enumerate().skip(col) {
                a[row][k] -= factor * pv;
            }
            b[row] -= factor * pivot_rhs;
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for k in row + 1..n {
            acc -= a[row][k] * x[k];
        }
        x[row] = acc / a[row][row];
    }
    Some(x)
}

/// Expected number of near-move rounds until the leader chain dies out,
/// starting from the empty state, on the state space truncated at `k_max`.
/// Probability mass beyond the truncation is treated as immediate death,
/// which biases the value down; the certification loop in [`g_theta`]
/// bounds that bias.
fn hitting_rounds_truncated(v: &VChainSpec, k_max: usize) -> Option<f64> {
    let mut a = vec![vec![0.0; k_max]; k_max];
    for t in 1..=k_max {
        let row = poisson_pmf_row(v.transition_mean(t as u64), k_max);
        for l in 1..=k_max {
            a[t - 1][l - 1] = ((t == l) as u64) as f64 - row[l];
        }
    }
    let h = solve_dense(a, vec![1.0; k_max])?;
    let first = poisson_pmf_row(v.rho_m(), k_max);
    Some(1.0 + (1..=k_max).map(|l| first[l] * h[l - 1]).sum::<f64>())
}

/// Expected rounds-to-extinction `g(theta)` of the limiting leader chain,
/// computed by a truncated linear solve certified by doubling the state
/// space until the value moves by less than `tol`.
pub fn g_theta(v: &VChainSpec, tol: f64) -> Result<f64, AnalyticsError> {
    if !tol.is_finite() || tol <= 0.0 {
        return Err(AnalyticsError::BadTolerance(tol));
    }
    let lambda_max = v.rho_m();
    let mut k_max = 4usize;
    while poisson_upper_tail(lambda_max, k_max) >= tol * 1e-3 && k_max < 4096 {
        k_max += 1;
    }
    let mut current =
        hitting_rounds_truncated(v, k_max).ok_or(AnalyticsError::NonConvergence { delta: f64::NAN })?;
    for _ in 0..8 {
        k_max *= 2;
        let refined = hitting_rounds_truncated(v, k_max)
            .ok_or(AnalyticsError::NonConvergence { delta: f64::NAN })?;
        let delta = (refined - current).abs();
        if delta <= tol {
            return Ok(refined);
        }
        current = refined;
    }
    Err(AnalyticsError::NonConvergence {
        delta: f64::INFINITY,
    })
}

const DEFAULT_G_TOL: f64 = 1e-10;

/// Rounds-to-extinction for a lattice spec in the critical regime; the
/// zero-tail limit is available in closed form.
fn g_for_lattice(lat: &LatticeSpec, m: u64) -> Result<f64, AnalyticsError> {
    if lat.theta == 0.0 {
        Ok(lat.rho.powi(m as i32).exp())
    } else {
        g_theta(&VChainSpec::new(lat.rho, m, lat.theta)?, DEFAULT_G_TOL)
    }
}

/// Large-`N` limit of the front speed.
pub fn limit_speed(spec: &DisorderSpec) -> Result<f64, AnalyticsError> {
    match spec {
        DisorderSpec::TwoState(s) => match ExponentSplit::of(&s.r) {
            None => Ok(0.0),
            Some(split) => {
                let m = split.m as f64;
                if split.is_critical() {
                    Ok(-1.0 / (1.0 + m - (-s.rho.powi(split.m as i32)).exp()))
                } else {
                    Ok(-1.0 / (1.0 + m))
                }
            }
        },
        DisorderSpec::Lattice(s) => lattice_limit_speed(s),
        DisorderSpec::Mixture(s) => {
            let lattice_v = lattice_limit_speed(&s.lattice)?;
            Ok(s.lambda0 + (s.lambda0 - s.lambda1) * lattice_v)
        }
    }
}

fn lattice_limit_speed(s: &LatticeSpec) -> Result<f64, AnalyticsError> {
    let split = ExponentSplit::of(&s.r).ok_or(AnalyticsError::Unsupported(
        "the zero-decay limit is only established for the two-state family",
    ))?;
    let m = split.m as f64;
    if split.is_critical() {
        let g = g_for_lattice(s, split.m)?;
        Ok(-1.0 / (m + 1.0 - 1.0 / g))
    } else {
        Ok(-1.0 / (1.0 + m))
    }
}

/// Large-`N` limit of the expected steps per front move for the two-state
/// family: `1 + m`, with the extinction correction `-e^{-rho^m}` on the
/// critical branch.
pub fn expected_tau_limit(rho: f64, r: &Decay) -> Result<f64, AnalyticsError> {
    let split = ExponentSplit::of(r).ok_or(AnalyticsError::ZeroDecay)?;
    let m = split.m as f64;
    if split.is_critical() {
        Ok(1.0 + m - (-rho.powi(split.m as i32)).exp())
    } else {
        Ok(1.0 + m)
    }
}

/// Large-`N` limits of (expected renewal-cycle length, expected front
/// displacement over the cycle) in the critical regime:
/// `((m + 1) g - 1, -g)`. Their ratio is the critical speed limit.
pub fn expected_cycle_limits(v: &VChainSpec, tol: f64) -> Result<(f64, f64), AnalyticsError> {
    let g = g_theta(v, tol)?;
    Ok(((v.m as f64 + 1.0) * g - 1.0, -g))
}
