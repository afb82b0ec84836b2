//! Markov chain samplers for rooted plane curves (knot shadows).
//!
//! A plane curve is a generic immersion of a circle in the sphere, stored
//! here as a rooted combinatorial map: a permutation pair on flags. The
//! crate provides
//!
//! - the map structure with validation, canonical codes and Gauss codes
//!   ([`combmap`]);
//! - the five flat Reidemeister surgeries acting at the root ([`moves`]);
//! - a Boltzmann chain sampling curves with weight `z^n`
//!   ([`chain_boltzmann`]);
//! - a Wang-Landau flat-histogram sampler with a tuning phase that also
//!   estimates the counting sequence ([`chain_wanglandau`]);
//! - per-sample observables, Casson averages and knot-diagram export
//!   ([`observables`]);
//! - an exhaustive small-size oracle used to verify the chains exactly
//!   ([`oracle`]);
//! - asymptotic growth-rate fits ([`fitting`]);
//! - the command-line interface ([`cli`]).

pub mod chain_boltzmann;
pub mod chain_wanglandau;
pub mod cli;
pub mod combmap;
pub mod fitting;
pub mod moves;
pub mod observables;
pub mod oracle;
pub mod rng;
mod stepping;

pub use combmap::{CanonicalCode, CombMap, Flag};
pub use stepping::{Branch, MoveProbs, StepOutcome};
