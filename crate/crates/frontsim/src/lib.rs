//! Simulation and verification toolkit for Brunet-Derrida-type selection
//! fronts: `N` particles on the line where every particle's next position is
//! the best of all current positions plus a random increment.
//!
//! Two engines compute the same process:
//!
//! * [`particle`] simulates positions directly (`N^2` draws per step) and
//!   doubles as an exhaustive ground-truth oracle at small `N`;
//! * [`counts`] evolves the vector of particle counts by depth behind the
//!   front with the exact multinomial kernel, at `O(active depths)` per
//!   step, which makes sizes like `10^6` routine.
//!
//! [`renewal`] turns either engine's runs into independent cycles and a
//! front-speed estimate with a delta-method error bar, and [`analytics`]
//! provides the closed-form and semi-analytic large-`N` limits the
//! estimates are validated against. [`cli`] wires everything into the
//! `frontsim` binary.

pub mod analytics;
pub mod cli;
pub mod config;
pub mod counts;
pub mod disorder;
pub mod particle;
pub mod renewal;
pub mod seeding;
pub mod stats;

pub use counts::{Configuration, CountsChain, KernelRow};
pub use disorder::{Decay, DisorderSpec, LatticeSpec, MixtureSpec, TailSpec, TwoStateSpec};
pub use renewal::{CycleRecord, SpeedEstimate};
