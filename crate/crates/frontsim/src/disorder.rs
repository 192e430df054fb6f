//! Edge-disorder distributions.
//!
//! Three families of step increments are supported, all sharing the same
//! size-dependent zero-increment mass `p0(N) = min(1, rho * N^-(1+r))`:
//!
//! * [`TwoStateSpec`]: increments in `{0, -1}`.
//! * [`LatticeSpec`]: increments in `{0, -1, -2, ...}` where the mass below
//!   `-1` is a fixed fraction `theta` spread over a finite tail.
//! * [`MixtureSpec`]: the lattice family pushed through the affine map
//!   `k -> lambda0 - k*(lambda0 - lambda1)`, so the two point masses sit at
//!   `lambda0 > lambda1` and the tail below `lambda1`.
//!
//! Specs are immutable values and can be shared freely across threads.
//! Sampling always takes a caller-supplied random stream; workers must never
//! share a stream.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DisorderError {
    #[error("prefactor rho must be positive, got {0}")]
    NonPositiveRho(f64),
    #[error("decay exponent r must be nonnegative and finite, got {0}")]
    BadDecay(f64),
    #[error("decay ratio denominator must be positive")]
    ZeroDenominator,
    #[error("theta must lie in [0, 1), got {0}")]
    ThetaOutOfRange(f64),
    #[error("tail depth {0} is invalid: tail support starts at depth 2")]
    TailDepthTooSmall(usize),
    #[error("tail weight at depth {depth} is negative or non-finite: {weight}")]
    BadTailWeight { depth: usize, weight: f64 },
    #[error("tail must carry positive total weight")]
    EmptyTail,
    #[error("mixture levels must satisfy lambda1 < lambda0, got {lambda0} and {lambda1}")]
    BadLevels { lambda0: f64, lambda1: f64 },
    #[error("spec invalid at N = {n}: p1 = {p1} < 0 (zero and tail masses exceed 1)")]
    InvalidAtN { n: u64, p1: f64 },
}

/// Decay exponent `r`, either an exact ratio `num/den` or a float.
///
/// The ratio form keeps the split of `1/r` into integer and fractional part
/// exact. That split decides between two branches of the limiting-speed
/// formulas, so misclassifying it silently would invalidate comparisons;
/// float inputs that land within `1e-9` of the integer knife edge are
/// snapped and flagged (see [`crate::analytics::ExponentSplit`]).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Decay {
    Ratio { num: u64, den: u64 },
    Value(f64),
}

impl Decay {
    pub fn ratio(num: u64, den: u64) -> Result<Self, DisorderError> {
        if den == 0 {
            return Err(DisorderError::ZeroDenominator);
        }
        Ok(Decay::Ratio { num, den })
    }

    pub fn value(r: f64) -> Result<Self, DisorderError> {
        if !r.is_finite() || r < 0.0 {
            return Err(DisorderError::BadDecay(r));
        }
        Ok(Decay::Value(r))
    }

    pub fn as_f64(&self) -> f64 {
        match *self {
            Decay::Ratio { num, den } => num as f64 / den as f64,
            Decay::Value(r) => r,
        }
    }

    pub fn is_zero(&self) -> bool {
        match *self {
            Decay::Ratio { num, .. } => num == 0,
            Decay::Value(r) => r == 0.0,
        }
    }
}

/// Serialized either as a float or as a `"num/den"` string.
#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum RawDecay {
    Num(f64),
    Frac(String),
}

impl Serialize for Decay {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        match *self {
            Decay::Ratio { num, den } => ser.serialize_str(&format!("{num}/{den}")),
            Decay::Value(r) => ser.serialize_f64(r),
        }
    }
}

impl<'de> Deserialize<'de> for Decay {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        match RawDecay::deserialize(de)? {
            RawDecay::Num(r) => Decay::value(r).map_err(D::Error::custom),
            RawDecay::Frac(s) => {
                let (num, den) = s
                    .split_once('/')
                    .ok_or_else(|| D::Error::custom(format!("expected \"num/den\", got {s:?}")))?;
                let num: u64 = num.trim().parse().map_err(D::Error::custom)?;
                let den: u64 = den.trim().parse().map_err(D::Error::custom)?;
                Decay::ratio(num, den).map_err(D::Error::custom)
            }
        }
    }
}

/// Finite tail distribution on depths `{2, 3, ...}`, renormalized to total
/// mass one. `truncated_mass` records the mass bound that was cut off when
/// deriving this finite support from an infinite tail, for documentation of
/// the approximation; it never enters the sampling weights.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailSpec {
    /// `probs[i]` is the probability of depth `i + 2`.
    probs: Vec<f64>,
    mean_abs: f64,
    truncated_mass: f64,
}

impl TailSpec {
    pub fn new(weights: &[(usize, f64)], truncated_mass: f64) -> Result<Self, DisorderError> {
        let mut max_depth = 0usize;
        for &(depth, w) in weights {
            if depth < 2 {
                return Err(DisorderError::TailDepthTooSmall(depth));
            }
            if !w.is_finite() || w < 0.0 {
                return Err(DisorderError::BadTailWeight { depth, weight: w });
            }
            max_depth = max_depth.max(depth);
        }
        let mut probs = vec![0.0; max_depth.saturating_sub(1)];
        for &(depth, w) in weights {
            probs[depth - 2] += w;
        }
        let total: f64 = probs.iter().sum();
        if total <= 0.0 {
            return Err(DisorderError::EmptyTail);
        }
        for p in &mut probs {
            *p /= total;
        }
        let mean_abs = probs
            .iter()
            .enumerate()
            .map(|(i, p)| (i + 2) as f64 * p)
            .sum();
        Ok(TailSpec {
            probs,
            mean_abs,
            truncated_mass,
        })
    }

    /// Point mass at a single depth `k >= 2`.
    pub fn point(depth: usize) -> Result<Self, DisorderError> {
        TailSpec::new(&[(depth, 1.0)], 0.0)
    }

    /// Deepest depth with positive mass.
    pub fn max_depth(&self) -> usize {
        self.probs.len() + 1
    }

    /// `P(depth = k)` for `k >= 2`.
    pub fn prob_at(&self, depth: usize) -> f64 {
        if depth < 2 {
            0.0
        } else {
            self.probs.get(depth - 2).copied().unwrap_or(0.0)
        }
    }

    /// `P(depth >= k)` within the tail, so `suffix(2) == 1`.
    pub fn suffix(&self, depth: usize) -> f64 {
        if depth <= 2 {
            1.0
        } else if depth > self.max_depth() {
            0.0
        } else {
            self.probs[depth - 2..].iter().sum()
        }
    }

    pub fn mean_abs(&self) -> f64 {
        self.mean_abs
    }

    pub fn truncated_mass(&self) -> f64 {
        self.truncated_mass
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TwoStateSpec {
    pub rho: f64,
    pub r: Decay,
}

impl TwoStateSpec {
    pub fn new(rho: f64, r: Decay) -> Result<Self, DisorderError> {
        check_rho_r(rho, &r)?;
        Ok(TwoStateSpec { rho, r })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LatticeSpec {
    pub rho: f64,
    pub r: Decay,
    pub theta: f64,
    pub tail: TailSpec,
}

impl LatticeSpec {
    pub fn new(rho: f64, r: Decay, theta: f64, tail: TailSpec) -> Result<Self, DisorderError> {
        check_rho_r(rho, &r)?;
        if !theta.is_finite() || !(0.0..1.0).contains(&theta) {
            return Err(DisorderError::ThetaOutOfRange(theta));
        }
        Ok(LatticeSpec {
            rho,
            r,
            theta,
            tail,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MixtureSpec {
    pub lambda0: f64,
    pub lambda1: f64,
    pub lattice: LatticeSpec,
}

impl MixtureSpec {
    pub fn new(lambda0: f64, lambda1: f64, lattice: LatticeSpec) -> Result<Self, DisorderError> {
        if !lambda0.is_finite() || !lambda1.is_finite() || lambda1 >= lambda0 {
            return Err(DisorderError::BadLevels { lambda0, lambda1 });
        }
        Ok(MixtureSpec {
            lambda0,
            lambda1,
            lattice,
        })
    }
}

fn check_rho_r(rho: f64, r: &Decay) -> Result<(), DisorderError> {
    if !rho.is_finite() || rho <= 0.0 {
        return Err(DisorderError::NonPositiveRho(rho));
    }
    let rv = r.as_f64();
    if !rv.is_finite() || rv < 0.0 {
        return Err(DisorderError::BadDecay(rv));
    }
    Ok(())
}

/// One of the three disorder families.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum DisorderSpec {
    TwoState(TwoStateSpec),
    Lattice(LatticeSpec),
    Mixture(MixtureSpec),
}

impl DisorderSpec {
    pub fn rho(&self) -> f64 {
        match self {
            DisorderSpec::TwoState(s) => s.rho,
            DisorderSpec::Lattice(s) => s.rho,
            DisorderSpec::Mixture(s) => s.lattice.rho,
        }
    }

    pub fn r(&self) -> &Decay {
        match self {
            DisorderSpec::TwoState(s) => &s.r,
            DisorderSpec::Lattice(s) => &s.r,
            DisorderSpec::Mixture(s) => &s.lattice.r,
        }
    }

    /// Mass strictly below the second level (`0` for the two-state family).
    pub fn theta(&self) -> f64 {
        match self {
            DisorderSpec::TwoState(_) => 0.0,
            DisorderSpec::Lattice(s) => s.theta,
            DisorderSpec::Mixture(s) => s.lattice.theta,
        }
    }

    /// The two leading point-mass levels `(lambda0, lambda1)`.
    pub fn levels(&self) -> (f64, f64) {
        match self {
            DisorderSpec::Mixture(s) => (s.lambda0, s.lambda1),
            _ => (0.0, -1.0),
        }
    }

    /// Zero-increment mass `min(1, rho * N^-(1+r))`.
    pub fn p_zero(&self, n: u64) -> f64 {
        let r = self.r().as_f64();
        (self.rho() * (n as f64).powf(-(1.0 + r))).min(1.0)
    }

    /// Mass at depth one, `1 - p0 - theta`. May be negative for small `N`,
    /// in which case the spec is rejected by [`Self::validate_at`].
    pub fn p_one(&self, n: u64) -> f64 {
        1.0 - self.p_zero(n) - self.theta()
    }

    /// A spec is only meaningful at sizes where all masses are nonnegative.
    /// Sizes that fail are rejected loudly instead of being renormalized,
    /// since renormalization would change the model.
    pub fn validate_at(&self, n: u64) -> Result<(), DisorderError> {
        let p1 = self.p_one(n);
        if p1 < 0.0 {
            return Err(DisorderError::InvalidAtN { n, p1 });
        }
        Ok(())
    }

    fn tail_spec(&self) -> Option<&TailSpec> {
        match self {
            DisorderSpec::TwoState(_) => None,
            DisorderSpec::Lattice(s) => Some(&s.tail),
            DisorderSpec::Mixture(s) => Some(&s.lattice.tail),
        }
    }

    /// Deepest reachable depth (1 when the tail carries no mass).
    pub fn max_depth(&self) -> usize {
        match self.tail_spec() {
            Some(tail) if self.theta() > 0.0 => tail.max_depth(),
            _ => 1,
        }
    }

    /// Depth-space tail `P(depth >= k)`, i.e. `P(xi <= -k)` for the lattice
    /// families and the probability of falling below the k-th affine level
    /// for the mixture. `tail_ge(n, 0) == 1` and the map is non-increasing.
    pub fn tail_ge(&self, n: u64, k: usize) -> f64 {
        match k {
            0 => 1.0,
            1 => 1.0 - self.p_zero(n),
            _ => match self.tail_spec() {
                Some(tail) => self.theta() * tail.suffix(k),
                None => 0.0,
            },
        }
    }

    /// Point masses by depth, `k = 0 ..= max_depth()`.
    pub fn depth_masses(&self, n: u64) -> Vec<f64> {
        let d = self.max_depth();
        let mut out = Vec::with_capacity(d + 1);
        out.push(self.p_zero(n));
        out.push(self.p_one(n));
        if let Some(tail) = self.tail_spec() {
            let theta = self.theta();
            if theta > 0.0 {
                for k in 2..=d {
                    out.push(theta * tail.prob_at(k));
                }
            }
        }
        out
    }

    /// Real value attached to depth `k`.
    pub fn value_of_depth(&self, k: usize) -> f64 {
        let (l0, l1) = self.levels();
        l0 - k as f64 * (l0 - l1)
    }

    /// Draw one depth. Consumes exactly one uniform from the stream.
    pub fn sample_depth<R: Rng + ?Sized>(
        &self,
        n: u64,
        rng: &mut R,
    ) -> Result<usize, DisorderError> {
        self.validate_at(n)?;
        let u: f64 = rng.random();
        let masses = self.depth_masses(n);
        let mut acc = 0.0;
        for (k, m) in masses.iter().enumerate() {
            acc += m;
            if u < acc {
                return Ok(k);
            }
        }
        Ok(masses.len() - 1)
    }

    /// Draw one increment value. Consumes exactly one uniform.
    pub fn sample_xi<R: Rng + ?Sized>(&self, n: u64, rng: &mut R) -> Result<f64, DisorderError> {
        Ok(self.value_of_depth(self.sample_depth(n, rng)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn two_state(rho: f64, r: f64) -> DisorderSpec {
        DisorderSpec::TwoState(TwoStateSpec::new(rho, Decay::value(r).unwrap()).unwrap())
    }

    fn lattice(rho: f64, r: f64, theta: f64, tail: TailSpec) -> DisorderSpec {
        DisorderSpec::Lattice(LatticeSpec::new(rho, Decay::value(r).unwrap(), theta, tail).unwrap())
    }

    #[test]
    fn p_zero_matches_direct_evaluation() {
        assert!((two_state(1.0, 1.0).p_zero(10) - 0.01).abs() < 1e-15);
        assert!((two_state(1.0, 0.0).p_zero(100) - 0.01).abs() < 1e-15);
        // clamped formula evaluated by hand: min(1, 3 * 4^-1.5) = 0.375
        assert!((two_state(3.0, 0.5).p_zero(4) - 0.375).abs() < 1e-15);
        // clamp engages for small N
        assert_eq!(two_state(10.0, 0.0).p_zero(5), 1.0);
    }

    #[test]
    fn two_state_with_zero_mass_always_drops() {
        // rho tiny enough that p0 underflows to ~0 is not the point here;
        // force p0 = 0 exactly via the clamp route: r huge makes p0 ~ 0.
        let spec = two_state(1e-300, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            assert_eq!(spec.sample_xi(10, &mut rng).unwrap(), -1.0);
        }
    }

    #[test]
    fn lattice_theta_zero_stays_on_top_levels() {
        let spec = lattice(1.0, 1.0, 0.0, TailSpec::point(2).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..200 {
            let v = spec.sample_xi(10, &mut rng).unwrap();
            assert!(v == 0.0 || v == -1.0);
        }
    }

    #[test]
    fn empirical_tail_frequency_matches_masses() {
        // q2 * P(depth 2) = 0.5 * 0.5 = 0.25 for the uniform {2,3} tail
        let tail = TailSpec::new(&[(2, 1.0), (3, 1.0)], 0.0).unwrap();
        let spec = lattice(1.0, 1.0, 0.5, tail);
        let n = 10;
        let draws = 1_000_000u64;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut hits = 0u64;
        for _ in 0..draws {
            if spec.sample_xi(n, &mut rng).unwrap() == -2.0 {
                hits += 1;
            }
        }
        let p = 0.25;
        let sigma = (p * (1.0 - p) / draws as f64).sqrt();
        let freq = hits as f64 / draws as f64;
        assert!(
            (freq - p).abs() < 3.0 * sigma,
            "freq {freq} vs 0.25 +/- {sigma}"
        );
    }

    #[test]
    fn empirical_tail_ge_matches_cumulative_masses() {
        let tail = TailSpec::new(&[(2, 0.4), (3, 0.4), (5, 0.2)], 0.0).unwrap();
        let spec = lattice(1.5, 0.5, 0.3, tail);
        let n = 50;
        let draws = 1_000_000u64;
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut counts = vec![0u64; spec.max_depth() + 1];
        for _ in 0..draws {
            counts[spec.sample_depth(n, &mut rng).unwrap()] += 1;
        }
        for k in 0..=spec.max_depth() {
            let expected = spec.tail_ge(n, k);
            let observed =
                counts[k..].iter().sum::<u64>() as f64 / draws as f64;
            let sigma = (expected * (1.0 - expected) / draws as f64).sqrt().max(1e-9);
            assert!(
                (observed - expected).abs() < 4.0 * sigma,
                "depth {k}: observed {observed}, expected {expected}"
            );
        }
    }

    #[test]
    fn tail_ge_edges() {
        let spec = two_state(1.0, 0.5);
        assert_eq!(spec.tail_ge(16, 0), 1.0);
        assert!((spec.tail_ge(16, 1) - (1.0 - spec.p_zero(16))).abs() < 1e-15);
        assert_eq!(spec.tail_ge(16, 2), 0.0);
        let lat = lattice(1.0, 1.0, 0.5, TailSpec::point(2).unwrap());
        assert!((lat.tail_ge(10, 2) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn mixture_identity_levels_reproduce_lattice_exactly() {
        let tail = TailSpec::new(&[(2, 1.0), (3, 1.0)], 0.0).unwrap();
        let lat = lattice(1.0, 1.0, 0.5, tail.clone());
        let mix = DisorderSpec::Mixture(
            MixtureSpec::new(
                0.0,
                -1.0,
                LatticeSpec::new(1.0, Decay::value(1.0).unwrap(), 0.5, tail).unwrap(),
            )
            .unwrap(),
        );
        let mut ra = ChaCha8Rng::seed_from_u64(7);
        let mut rb = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10_000 {
            let a = lat.sample_xi(12, &mut ra).unwrap();
            let b = mix.sample_xi(12, &mut rb).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn invalid_size_is_rejected_loudly() {
        // p0 clamps to 1, so p1 = -theta < 0 at this N
        let spec = lattice(10.0, 0.0, 0.5, TailSpec::point(2).unwrap());
        let err = spec.validate_at(5).unwrap_err();
        assert!(matches!(err, DisorderError::InvalidAtN { .. }));
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        assert!(spec.sample_xi(5, &mut rng).is_err());
    }

    #[test]
    fn decay_parses_both_forms() {
        let a: Decay = serde_json::from_str("0.4").unwrap();
        assert_eq!(a.as_f64(), 0.4);
        let b: Decay = serde_json::from_str("\"1/2\"").unwrap();
        assert_eq!(b, Decay::Ratio { num: 1, den: 2 });
        assert!(serde_json::from_str::<Decay>("\"1:2\"").is_err());
        assert_eq!(serde_json::to_string(&b).unwrap(), "\"1/2\"");
    }

    proptest! {
        #[test]
        fn masses_sum_to_one(
            rho in 0.2f64..4.0,
            r in 0.0f64..2.0,
            theta in 0.0f64..0.95,
            n in 1u64..1_000_000,
            family in 0usize..3,
        ) {
            let tail = TailSpec::new(&[(2, 0.5), (3, 0.3), (4, 0.2)], 0.0).unwrap();
            let spec = match family {
                0 => two_state(rho, r),
                1 => lattice(rho, r, theta, tail),
                _ => DisorderSpec::Mixture(MixtureSpec::new(
                    2.0,
                    0.5,
                    LatticeSpec::new(rho, Decay::value(r).unwrap(), theta, tail).unwrap(),
                ).unwrap()),
            };
            if spec.validate_at(n).is_ok() {
                let total: f64 = spec.depth_masses(n).iter().sum();
                prop_assert!((total - 1.0).abs() < 1e-12);
            }
        }

        #[test]
        fn tail_ge_is_monotone_and_consistent(
            rho in 0.2f64..4.0,
            r in 0.0f64..2.0,
            theta in 0.0f64..0.95,
            n in 1u64..1_000_000,
        ) {
            let tail = TailSpec::new(&[(2, 1.0), (4, 2.0), (6, 0.5)], 0.0).unwrap();
            let spec = lattice(rho, r, theta, tail);
            if spec.validate_at(n).is_ok() {
                let masses = spec.depth_masses(n);
                let mut prev = 1.0f64;
                for k in 0..=spec.max_depth() + 1 {
                    let t = spec.tail_ge(n, k);
                    prop_assert!(t <= prev + 1e-12);
                    let suffix: f64 = masses.iter().skip(k).sum();
                    prop_assert!((t - suffix).abs() < 1e-12);
                    prev = t;
                }
            }
        }
    }
}
