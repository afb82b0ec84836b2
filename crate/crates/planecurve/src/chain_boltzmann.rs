//! Metropolis-style chain with stationary law proportional to `z^n`.
//!
//! Insertions are gated by `z` (loops) and `z^2` (bigons); deletions by the
//! structural site checks and, for bigons, the `1/(d-1)` factor matching the
//! uniform chord choice of the insertion. Curves of a fixed size are sampled
//! uniformly. With a size cap the chain stays ergodic for any `z >= 0`;
//! without one, `z` must stay below the reciprocal growth rate (about
//! 0.0876) for the law to normalise.

use thiserror::Error;

use crate::combmap::{CombMap, MapError};
use crate::observables::{self, RecordSink};
use crate::rng::{chain_rng, ChainRng};
use crate::stepping::{self, GatePolicy, MoveProbs, StepOutcome};

/// Reciprocal of the best-known exponential growth rate of rooted plane
/// curves; `z` at or above this with no size cap does not normalise.
pub const Z_CRITICAL: f64 = 0.0876;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParamError {
    #[error("move probabilities must be positive, got ({0}, {1}, {2})")]
    NonPositiveProbs(f64, f64, f64),
    #[error("p1+p2+p3 = {0} exceeds 1")]
    ProbSumTooLarge(f64),
    #[error("reroot_every_step requires p1+p2+p3 = 1, got {0}")]
    ProbSumNotOne(f64),
    #[error("z must be non-negative, got {0}")]
    NegativeZ(f64),
}

#[derive(Debug, Clone, Copy)]
pub struct BoltzmannParams {
    /// Fugacity per vertex.
    pub z: f64,
    pub p1: f64,
    pub p2: f64,
    pub p3: f64,
    /// Re-root uniformly around every move (the production configuration;
    /// requires p1+p2+p3 = 1, which removes the explicit re-root branch).
    pub reroot_every_step: bool,
    /// Hard size cap; insertions that would exceed it fail.
    pub max_size: Option<u32>,
    pub seed: u64,
}

impl BoltzmannParams {
    pub fn new(z: f64, max_size: Option<u32>, seed: u64) -> Self {
        let probs = MoveProbs::default_mix();
        BoltzmannParams {
            z,
            p1: probs.p1,
            p2: probs.p2,
            p3: probs.p3,
            reroot_every_step: probs.reroot_every_step,
            max_size,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        if self.z < 0.0 {
            return Err(ParamError::NegativeZ(self.z));
        }
        if self.p1 <= 0.0 || self.p2 <= 0.0 || self.p3 <= 0.0 {
            return Err(ParamError::NonPositiveProbs(self.p1, self.p2, self.p3));
        }
        let sum = self.p1 + self.p2 + self.p3;
        if sum > 1.0 + 1e-12 {
            return Err(ParamError::ProbSumTooLarge(sum));
        }
        if self.reroot_every_step && (sum - 1.0).abs() > 1e-12 {
            return Err(ParamError::ProbSumNotOne(sum));
        }
        Ok(())
    }

    pub(crate) fn probs(&self) -> MoveProbs {
        MoveProbs {
            p1: self.p1,
            p2: self.p2,
            p3: self.p3,
            reroot_every_step: self.reroot_every_step,
        }
    }
}

pub(crate) struct BoltzmannGates {
    pub z: f64,
    pub cap: Option<u32>,
}

impl GatePolicy for BoltzmannGates {
    fn gate(&self, _n: u32, delta: i32) -> Option<f64> {
        match delta {
            1 => Some(self.z),
            2 => Some(self.z * self.z),
            // Deletions draw no acceptance variate here; the z factors of
            // the insertions alone balance the size change.
            -1 | -2 => None,
            _ => unreachable!(),
        }
    }

    fn cap_blocks(&self, n_after: u32) -> bool {
        self.cap.is_some_and(|cap| n_after > cap)
    }
}

/// One transition of the chain.
pub fn step(map: &mut CombMap, params: &BoltzmannParams, rng: &mut ChainRng) -> StepOutcome {
    let gates = BoltzmannGates { z: params.z, cap: params.max_size };
    stepping::do_step(map, &params.probs(), &gates, rng)
}

/// Run a chain from the figure-eight, emitting one record every
/// `sample_interval` steps. Deterministic in `(params, chain_id)`.
pub fn run(
    params: &BoltzmannParams,
    total_steps: u64,
    sample_interval: u64,
    chain_id: u32,
    sink: &mut dyn RecordSink,
) {
    assert!(sample_interval >= 1);
    let mut map = CombMap::new_figure_eight();
    let mut rng = chain_rng(params.seed, u64::from(chain_id));
    for i in 1..=total_steps {
        step(&mut map, params, &mut rng);
        if i % sample_interval == 0 {
            sink.record(&observables::record(&map, chain_id, i));
        }
    }
}

/// Exact probability of a one-step transition from `d` to (the rooted
/// isomorphism class of) `target`, enumerating every move and re-root branch
/// including the identity contribution of failures. Desk-scale verification
/// only: cost grows with the square of the flag count.
pub fn transition_probability(
    d: &CombMap,
    target: &CombMap,
    params: &BoltzmannParams,
) -> Result<f64, MapError> {
    let gates = BoltzmannGates { z: params.z, cap: params.max_size };
    transition_probability_impl(d, target, &params.probs(), &gates)
}

pub(crate) fn transition_probability_impl<G: GatePolicy>(
    d: &CombMap,
    target: &CombMap,
    probs: &MoveProbs,
    gates: &G,
) -> Result<f64, MapError> {
    let target_code = target.canonical_code()?;
    let mut total = 0.0;
    if probs.reroot_every_step {
        // re-root, move, re-root
        for (code_b, p_b) in stepping::reroot_row(d) {
            let mid = CombMap::from_canonical(&code_b)?;
            for (code_c, p_c) in stepping::move_row(&mid, probs, gates) {
                let out = CombMap::from_canonical(&code_c)?;
                for (code_n, p_n) in stepping::reroot_row(&out) {
                    if code_n == target_code {
                        total += p_b * p_c * p_n;
                    }
                }
            }
        }
    } else {
        for (code_c, p_c) in stepping::move_row(d, probs, gates) {
            if code_c == target_code {
                total += p_c;
            }
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::combmap::Flag;

    fn params(z: f64) -> BoltzmannParams {
        BoltzmannParams::new(z, Some(50), 12345)
    }

    #[test]
    fn z_zero_never_grows() {
        let p = params(0.0);
        let mut map = CombMap::new_figure_eight();
        let mut rng = chain_rng(p.seed, 0);
        for _ in 0..20_000 {
            step(&mut map, &p, &mut rng);
            assert_eq!(map.n(), 1);
        }
    }

    #[test]
    fn self_transition_probability_positive() {
        let p = params(0.05);
        let fig8 = CombMap::new_figure_eight();
        let prob = transition_probability(&fig8, &fig8, &p).unwrap();
        assert!(prob > 0.0, "aperiodicity needs a positive self-loop");
    }

    #[test]
    fn loop_insertion_probability_matches_closed_form() {
        // Without re-rooting, the chance of arriving at the loop insertion
        // result is exactly z * p1 / 2.
        let p = BoltzmannParams {
            z: 0.05,
            p1: 0.3,
            p2: 0.3,
            p3: 0.2,
            reroot_every_step: false,
            max_size: Some(50),
            seed: 0,
        };
        p.validate().unwrap();
        let fig8 = CombMap::new_figure_eight();
        let mut grown = fig8.clone();
        grown.ri_plus().unwrap();
        let prob = transition_probability(&fig8, &grown, &p).unwrap();
        assert!((prob - 0.05 * 0.3 / 2.0).abs() < 1e-15, "got {prob}");
    }

    #[test]
    fn row_sums_to_one() {
        let p = params(0.05);
        let mut m = CombMap::new_figure_eight();
        m.ri_plus().unwrap();
        m.set_root(Flag(0)).unwrap();
        let gates = BoltzmannGates { z: p.z, cap: p.max_size };
        let row = stepping::move_row(&m, &p.probs(), &gates);
        let sum: f64 = row.iter().map(|(_, q)| q).sum();
        assert!((sum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn same_seed_same_records() {
        let p = params(0.05);
        let mut a: Vec<crate::observables::ObservableRecord> = Vec::new();
        let mut b: Vec<crate::observables::ObservableRecord> = Vec::new();
        run(&p, 5_000, 100, 0, &mut a);
        run(&p, 5_000, 100, 0, &mut b);
        assert_eq!(a, b);
    }
}
