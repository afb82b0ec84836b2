//! One-transition machinery shared by the Boltzmann and Wang-Landau chains.
//!
//! A step draws randomness in a fixed order so that runs are reproducible:
//!
//! 1. with `reroot_every_step`, a uniform live flag (re-root before);
//! 2. the branch selector `u in [0,1)`;
//! 3. for the selected branch, in order: the acceptance variate `alpha`
//!    (when the gate policy draws one), the chord index `k` (bigon
//!    insertion), the deletion variate `beta` (bigon deletion, drawn only
//!    once the site checks pass);
//! 4. with `reroot_every_step`, a uniform live flag (re-root after).
//!
//! Uniform variates are compared as "fail if u >= threshold". Re-rooting
//! both before and after makes the single-step kernel symmetric, which is
//! what the exact verification in the oracle checks.

use rand::Rng;

use crate::combmap::{CombMap, Flag};
use crate::rng::ChainRng;

/// Move-family probabilities shared by both chains.
#[derive(Debug, Clone, Copy)]
pub struct MoveProbs {
    pub p1: f64,
    pub p2: f64,
    pub p3: f64,
    pub reroot_every_step: bool,
}

impl MoveProbs {
    /// The production mix: (2/5, 2/5, 1/5) with a re-root around every move.
    pub fn default_mix() -> Self {
        MoveProbs { p1: 0.4, p2: 0.4, p3: 0.2, reroot_every_step: true }
    }

    pub fn sum(&self) -> f64 {
        self.p1 + self.p2 + self.p3
    }
}

/// Size-change acceptance policy. `gate(n, delta)` returns the threshold for
/// an attempted size change `delta` from size `n`, or `None` when the branch
/// draws no acceptance variate (the Boltzmann deletions). `cap_blocks` is a
/// hard ceiling applied after the draw.
pub(crate) trait GatePolicy {
    fn gate(&self, n: u32, delta: i32) -> Option<f64>;
    fn cap_blocks(&self, n_after: u32) -> bool;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    LoopInsert,
    LoopDelete,
    BigonInsert,
    BigonDelete,
    TriangleFlip,
    Reroot,
}

#[derive(Debug, Clone, Copy)]
pub struct StepOutcome {
    pub branch: Branch,
    pub applied: bool,
}

pub(crate) fn reroot_uniform(map: &mut CombMap, rng: &mut ChainRng) {
    let cap = map.capacity();
    loop {
        let f = Flag(rng.random_range(0..cap));
        if map.is_live(f) {
            map.set_root(f).expect("live flag");
            return;
        }
    }
}

pub(crate) fn do_step<G: GatePolicy>(
    map: &mut CombMap,
    probs: &MoveProbs,
    gates: &G,
    rng: &mut ChainRng,
) -> StepOutcome {
    if probs.reroot_every_step {
        reroot_uniform(map, rng);
    }
    let u: f64 = rng.random();
    let outcome = dispatch(map, probs, gates, rng, u);
    if probs.reroot_every_step {
        reroot_uniform(map, rng);
    }
    outcome
}

fn dispatch<G: GatePolicy>(
    map: &mut CombMap,
    probs: &MoveProbs,
    gates: &G,
    rng: &mut ChainRng,
    u: f64,
) -> StepOutcome {
    let n = map.n();
    let half1 = probs.p1 / 2.0;
    let half2 = probs.p2 / 2.0;
    if u < half1 {
        let applied = pass_gate(gates.gate(n, 1), rng)
            && !gates.cap_blocks(n + 1)
            && map.ri_plus().is_ok();
        StepOutcome { branch: Branch::LoopInsert, applied }
    } else if u < probs.p1 {
        let applied = pass_gate(gates.gate(n, -1), rng) && map.ri_minus().is_ok();
        StepOutcome { branch: Branch::LoopDelete, applied }
    } else if u < probs.p1 + half2 {
        let mut applied = false;
        if pass_gate(gates.gate(n, 2), rng) {
            let d = map.face_degree(map.root());
            if d > 1 {
                let k = rng.random_range(1..d);
                if !gates.cap_blocks(n + 2) {
                    applied = map.rii_plus(k).is_ok();
                }
            }
        }
        StepOutcome { branch: Branch::BigonInsert, applied }
    } else if u < probs.p1 + probs.p2 {
        let mut applied = false;
        if pass_gate(gates.gate(n, -2), rng) {
            if let Ok(d) = map.merged_bigon_degree() {
                if d >= 2 {
                    let beta: f64 = rng.random();
                    if beta < 1.0 / f64::from(d - 1) {
                        map.rii_minus().expect("site checks passed");
                        applied = true;
                    }
                }
            }
        }
        StepOutcome { branch: Branch::BigonDelete, applied }
    } else if u < probs.sum() {
        let applied = map.riii().is_ok();
        StepOutcome { branch: Branch::TriangleFlip, applied }
    } else {
        reroot_uniform(map, rng);
        StepOutcome { branch: Branch::Reroot, applied: true }
    }
}

#[inline]
fn pass_gate(gate: Option<f64>, rng: &mut ChainRng) -> bool {
    match gate {
        Some(thr) => rng.random::<f64>() < thr,
        None => true,
    }
}

/// Exact one-step distribution of the move kernel (no surrounding re-roots)
/// from `map`, as (rooted class, probability) pairs. Failure branches
/// accumulate on the input class. Used by the desk-scale verification.
pub(crate) fn move_row<G: GatePolicy>(
    map: &CombMap,
    probs: &MoveProbs,
    gates: &G,
) -> Vec<(crate::combmap::CanonicalCode, f64)> {
    use std::collections::HashMap;

    let n = map.n();
    let mut acc: HashMap<crate::combmap::CanonicalCode, f64> = HashMap::new();
    let mut added = 0.0_f64;
    let add = |acc: &mut HashMap<_, f64>, added: &mut f64, m: &CombMap, p: f64| {
        if p > 0.0 {
            *acc.entry(m.canonical_code().expect("valid state")).or_insert(0.0) += p;
            *added += p;
        }
    };

    let half1 = probs.p1 / 2.0;
    let half2 = probs.p2 / 2.0;

    // loop insertion
    let thr = gates.gate(n, 1).unwrap_or(1.0);
    if thr > 0.0 && !gates.cap_blocks(n + 1) {
        let mut m = map.clone();
        m.ri_plus().unwrap();
        add(&mut acc, &mut added, &m, half1 * thr);
    }

    // loop deletion
    let thr = gates.gate(n, -1).unwrap_or(1.0);
    if thr > 0.0 {
        let mut m = map.clone();
        if m.ri_minus().is_ok() {
            add(&mut acc, &mut added, &m, half1 * thr);
        }
    }

    // bigon insertion: uniform chord among the d-1 candidates
    let thr = gates.gate(n, 2).unwrap_or(1.0);
    if thr > 0.0 && !gates.cap_blocks(n + 2) {
        let d = map.face_degree(map.root());
        if d > 1 {
            for k in 1..d {
                let mut m = map.clone();
                m.rii_plus(k).unwrap();
                add(&mut acc, &mut added, &m, half2 * thr / f64::from(d - 1));
            }
        }
    }

    // bigon deletion
    let thr = gates.gate(n, -2).unwrap_or(1.0);
    if thr > 0.0 {
        if let Ok(d) = map.merged_bigon_degree() {
            if d >= 2 {
                let mut m = map.clone();
                m.rii_minus().unwrap();
                add(&mut acc, &mut added, &m, half2 * thr / f64::from(d - 1));
            }
        }
    }

    // triangle flip
    {
        let mut m = map.clone();
        if m.riii().is_ok() {
            add(&mut acc, &mut added, &m, probs.p3);
        }
    }

    // explicit re-root branch, present only when p1+p2+p3 < 1
    let p0 = 1.0 - probs.sum();
    if p0 > 1e-15 {
        let per_flag = p0 / f64::from(map.flag_count());
        for f in map.live_flags() {
            let mut m = map.clone();
            m.set_root(f).unwrap();
            add(&mut acc, &mut added, &m, per_flag);
        }
    }

    // everything else is a failed attempt: an identity transition
    let self_mass = 1.0 - added;
    if self_mass > 0.0 {
        *acc.entry(map.canonical_code().expect("valid state")).or_insert(0.0) += self_mass;
    }
    acc.into_iter().collect()
}

/// Distribution of the uniform re-root move from `map` over rooted classes.
pub(crate) fn reroot_row(map: &CombMap) -> Vec<(crate::combmap::CanonicalCode, f64)> {
    use std::collections::HashMap;
    let mut acc: HashMap<crate::combmap::CanonicalCode, f64> = HashMap::new();
    let per_flag = 1.0 / f64::from(map.flag_count());
    for f in map.live_flags() {
        let mut m = map.clone();
        m.set_root(f).unwrap();
        *acc.entry(m.canonical_code().expect("valid state")).or_insert(0.0) += per_flag;
    }
    acc.into_iter().collect()
}
