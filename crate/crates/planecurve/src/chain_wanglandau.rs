//! Flat-histogram sampling: Wang-Landau tuning of the log density of states
//! followed by fixed-weight ergodic sampling.
//!
//! During tuning, every size-changing move from size `n` to `m` is gated by
//! `tp(n, m) = min(1, exp(G_n - G_m))`, and `G` itself is adjusted upward at
//! the visited size. The update is done in log-space: `G` starts at zero and
//! the modification increment `f` is added to `G_n` directly (with `G_n =
//! log g_n`, incrementing in log space is the only reading consistent with
//! the zero initialisation). Each time the visit histogram becomes
//! `delta`-flat, `f` is halved; tuning stops once `f < epsilon`.
//!
//! While tuning, the chain is not in equilibrium. Once `G` is frozen the
//! chain is an ordinary reversible sampler with stationary weight
//! `exp(-G_n)` per rooted curve, so sizes are visited nearly uniformly and
//! curves of a fixed size exactly uniformly.

use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::combmap::{CombMap, MapError};
use crate::observables::{self, RecordSink};
use crate::rng::{chain_rng, ChainRng};
use crate::stepping::{self, GatePolicy, MoveProbs, StepOutcome};

#[derive(Debug, Error)]
pub enum WlError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad g-file: {0}")]
    Parse(String),
}

/// Tuning parameters. `s0` is the number of chain steps between histogram /
/// G updates, `s1` the number of steps between flatness checks.
#[derive(Debug, Clone, Copy)]
pub struct WlParams {
    pub max_size: u32,
    pub epsilon: f64,
    pub delta: f64,
    pub s0: u64,
    pub s1: u64,
    pub p1: f64,
    pub p2: f64,
    pub p3: f64,
    pub reroot_every_step: bool,
    pub seed: u64,
}

impl WlParams {
    pub fn new(max_size: u32, seed: u64) -> Self {
        let probs = MoveProbs::default_mix();
        WlParams {
            max_size,
            epsilon: 1e-8,
            delta: 0.99,
            s0: 10,
            s1: 10_000,
            p1: probs.p1,
            p2: probs.p2,
            p3: probs.p3,
            reroot_every_step: probs.reroot_every_step,
            seed,
        }
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

/// Size window `[ell, max_size]`, log-density estimates `G`, the current
/// modification increment `f` and the visit histogram. `ell` is always 1:
/// every curve reduces to the figure-eight through non-increasing moves, so
/// the floor keeps the chain ergodic.
#[derive(Debug, Clone)]
pub struct WangLandauState {
    pub ell: u32,
    pub max_size: u32,
    pub g: Vec<f64>,
    pub f: f64,
    pub h: Vec<u64>,
    pub s0: u64,
    pub s1: u64,
    pub delta: f64,
    pub epsilon: f64,
}

impl WangLandauState {
    pub fn new(params: &WlParams) -> Self {
        let bins = params.max_size as usize;
        WangLandauState {
            ell: 1,
            max_size: params.max_size,
            g: vec![0.0; bins],
            f: 1.0,
            h: vec![0; bins],
            s0: params.s0,
            s1: params.s1,
            delta: params.delta,
            epsilon: params.epsilon,
        }
    }

    /// `min(1, exp(G_n - G_m))`, and 0 whenever `m` leaves `[ell, max_size]`.
    pub fn tp(&self, n: u32, m: i64) -> f64 {
        tp_on(&self.g, self.ell, self.max_size, n, m)
    }

    #[inline]
    fn bin(&self, n: u32) -> usize {
        (n - self.ell) as usize
    }

    /// The flatness predicate: `min H / (1 - delta) > mean H > max H / (1 + delta)`
    /// with the mean taken over the number of bins.
    pub fn is_flat(&self) -> bool {
        let min = *self.h.iter().min().unwrap() as f64;
        let max = *self.h.iter().max().unwrap() as f64;
        let mean = self.h.iter().sum::<u64>() as f64 / self.h.len() as f64;
        min / (1.0 - self.delta) > mean && mean > max / (1.0 + self.delta)
    }

    /// Worst relative deviation of the histogram from its mean, as a
    /// fraction in [0, 1]; 1 is perfectly flat.
    pub fn flatness(&self) -> f64 {
        flatness_metric(&self.h)
    }
}

/// `min(minH/mean, 2 - maxH/mean)` over the bins of `h`.
pub fn flatness_metric(h: &[u64]) -> f64 {
    let sum: u64 = h.iter().sum();
    if sum == 0 || h.is_empty() {
        return 0.0;
    }
    let mean = sum as f64 / h.len() as f64;
    let min = *h.iter().min().unwrap() as f64;
    let max = *h.iter().max().unwrap() as f64;
    (min / mean).min(2.0 - max / mean)
}

fn tp_on(g: &[f64], ell: u32, max_size: u32, n: u32, m: i64) -> f64 {
    if m < i64::from(ell) || m > i64::from(max_size) {
        return 0.0;
    }
    let gn = g[(n - ell) as usize];
    let gm = g[(m as u32 - ell) as usize];
    (gn - gm).exp().min(1.0)
}

pub(crate) struct WlGates<'a> {
    pub g: &'a [f64],
    pub ell: u32,
    pub max_size: u32,
}

impl GatePolicy for WlGates<'_> {
    fn gate(&self, n: u32, delta: i32) -> Option<f64> {
        Some(tp_on(self.g, self.ell, self.max_size, n, i64::from(n) + i64::from(delta)))
    }

    fn cap_blocks(&self, _n_after: u32) -> bool {
        false // the window bounds are already inside tp
    }
}

/// One transition with the current (possibly still tuning) weights.
pub fn wl_step(
    map: &mut CombMap,
    wl: &WangLandauState,
    probs: &MoveProbs,
    rng: &mut ChainRng,
) -> StepOutcome {
    let gates = WlGates { g: &wl.g, ell: wl.ell, max_size: wl.max_size };
    stepping::do_step(map, probs, &gates, rng)
}

#[derive(Debug, Clone, Copy)]
pub struct TuneProgress {
    pub steps: u64,
    pub f: f64,
    pub rounds_done: u32,
    pub flatness: f64,
    pub current_size: u32,
}

/// Run the tuning loop to completion, invoking `on_checkpoint` at every
/// halving of `f` (the natural place to persist `G`) and `on_progress`
/// every `s1` steps. Returns the final state with `f < epsilon`.
pub fn tune_with(
    params: &WlParams,
    mut on_checkpoint: impl FnMut(&WangLandauState),
    mut on_progress: impl FnMut(&TuneProgress),
) -> WangLandauState {
    let mut wl = WangLandauState::new(params);
    let probs = params.probs();
    let mut map = CombMap::new_figure_eight();
    let mut rng = chain_rng(params.seed, 0);
    let mut steps: u64 = 0;
    let mut rounds: u32 = 0;
    loop {
        loop {
            wl_step(&mut map, &wl, &probs, &mut rng);
            steps += 1;
            if steps % wl.s0 == 0 {
                let b = wl.bin(map.n());
                wl.h[b] += 1;
                wl.g[b] += wl.f;
            }
            if steps % wl.s1 == 0 {
                on_progress(&TuneProgress {
                    steps,
                    f: wl.f,
                    rounds_done: rounds,
                    flatness: wl.flatness(),
                    current_size: map.n(),
                });
                if wl.is_flat() {
                    break;
                }
            }
        }
        wl.f /= 2.0;
        rounds += 1;
        wl.h.fill(0);
        on_checkpoint(&wl);
        if wl.f < wl.epsilon {
            return wl;
        }
    }
}

pub fn tune(params: &WlParams) -> WangLandauState {
    tune_with(params, |_| {}, |_| {})
}

/// Fixed-G ergodic sampling from the figure-eight. `g[i]` is the log weight
/// of size `i + 1`.
pub fn sample(
    g: &[f64],
    probs: &MoveProbs,
    seed: u64,
    total_steps: u64,
    sample_interval: u64,
    chain_id: u32,
    sink: &mut dyn RecordSink,
) {
    assert!(sample_interval >= 1);
    let max_size = g.len() as u32;
    let gates = WlGates { g, ell: 1, max_size };
    let mut map = CombMap::new_figure_eight();
    let mut rng = chain_rng(seed, u64::from(chain_id));
    for i in 1..=total_steps {
        stepping::do_step(&mut map, probs, &gates, &mut rng);
        if i % sample_interval == 0 {
            sink.record(&observables::record(&map, chain_id, i));
        }
    }
}

/// Estimated counts per size: `exp(G_n - G_1) * k1`, anchored at the exact
/// count of one-vertex curves.
pub fn counts_from_g(g: &[f64], k1: f64) -> Vec<f64> {
    g.iter().map(|&gn| (gn - g[0]).exp() * k1).collect()
}

/// Exact one-step transition probability of the fixed-G chain; the
/// Wang-Landau analogue of the Boltzmann routine, for desk-scale checks.
pub fn wl_transition_probability(
    d: &CombMap,
    target: &CombMap,
    g: &[f64],
    probs: &MoveProbs,
) -> Result<f64, MapError> {
    let gates = WlGates { g, ell: 1, max_size: g.len() as u32 };
    crate::chain_boltzmann::transition_probability_impl(d, target, probs, &gates)
}

/// Persist the weights: `# wl ell=.. L=.. epsilon=.. delta=..` then one
/// `n G_n` line per size at full precision.
pub fn write_g_file(path: &Path, wl: &WangLandauState) -> Result<(), WlError> {
    let mut out = String::new();
    writeln!(
        out,
        "# wl ell={} L={} epsilon={:e} delta={}",
        wl.ell, wl.max_size, wl.epsilon, wl.delta
    )
    .expect("string write");
    for (i, gn) in wl.g.iter().enumerate() {
        writeln!(out, "{} {:.17e}", wl.ell + i as u32, gn).expect("string write");
    }
    std::fs::write(path, out)?;
    Ok(())
}

#[derive(Debug, Clone)]
pub struct GFile {
    pub ell: u32,
    pub max_size: u32,
    pub epsilon: f64,
    pub delta: f64,
    pub g: Vec<f64>,
}

pub fn read_g_file(path: &Path) -> Result<GFile, WlError> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| WlError::Parse("empty file".into()))?;
    let rest = header
        .strip_prefix("# wl")
        .ok_or_else(|| WlError::Parse("missing '# wl' header".into()))?;
    let mut ell = None;
    let mut max_size = None;
    let mut epsilon = None;
    let mut delta = None;
    for tok in rest.split_whitespace() {
        let (key, val) = tok
            .split_once('=')
            .ok_or_else(|| WlError::Parse(format!("bad header token {tok:?}")))?;
        match key {
            "ell" => ell = Some(val.parse::<u32>().map_err(|e| WlError::Parse(e.to_string()))?),
            "L" => max_size = Some(val.parse::<u32>().map_err(|e| WlError::Parse(e.to_string()))?),
            "epsilon" => {
                epsilon = Some(val.parse::<f64>().map_err(|e| WlError::Parse(e.to_string()))?)
            }
            "delta" => delta = Some(val.parse::<f64>().map_err(|e| WlError::Parse(e.to_string()))?),
            _ => return Err(WlError::Parse(format!("unknown header key {key:?}"))),
        }
    }
    let (ell, max_size) = match (ell, max_size) {
        (Some(e), Some(l)) => (e, l),
        _ => return Err(WlError::Parse("header must set ell and L".into())),
    };
    if ell != 1 {
        return Err(WlError::Parse(format!("ell must be 1, got {ell}")));
    }
    let mut g = vec![f64::NAN; (max_size - ell + 1) as usize];
    for line in lines {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut it = line.split_whitespace();
        let n: u32 = it
            .next()
            .ok_or_else(|| WlError::Parse("missing size".into()))?
            .parse()
            .map_err(|e: std::num::ParseIntError| WlError::Parse(e.to_string()))?;
        let v: f64 = it
            .next()
            .ok_or_else(|| WlError::Parse(format!("missing value for n={n}")))?
            .parse()
            .map_err(|e: std::num::ParseFloatError| WlError::Parse(e.to_string()))?;
        if n < ell || n > max_size {
            return Err(WlError::Parse(format!("size {n} outside [{ell}, {max_size}]")));
        }
        g[(n - ell) as usize] = v;
    }
    if g.iter().any(|v| v.is_nan()) {
        return Err(WlError::Parse("missing sizes in g-file".into()));
    }
    Ok(GFile { ell, max_size, epsilon: epsilon.unwrap_or(0.0), delta: delta.unwrap_or(0.0), g })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tp_basics() {
        let params = WlParams::new(10, 0);
        let mut wl = WangLandauState::new(&params);
        wl.g[2] = 1.0;
        wl.g[3] = 1.0;
        assert_eq!(wl.tp(3, 4), 1.0); // equal weights
        assert_eq!(wl.tp(10, 11), 0.0); // beyond the window
        assert_eq!(wl.tp(1, 0), 0.0); // below the floor
        wl.g[0] = 0.0;
        wl.g[1] = std::f64::consts::LN_2;
        let got = wl.tp(1, 2);
        assert!((got - 0.5).abs() < 1e-15, "exp(-log 2) = 0.5, got {got}");
    }

    #[test]
    fn flat_g_gates_are_all_one() {
        let g = vec![0.0; 8];
        let gates = WlGates { g: &g, ell: 1, max_size: 8 };
        for n in 2..7 {
            for d in [-2, -1, 1, 2] {
                assert_eq!(gates.gate(n, d), Some(1.0));
            }
        }
    }

    #[test]
    fn flatness_monotone_in_delta() {
        let params = WlParams::new(4, 0);
        let mut wl = WangLandauState::new(&params);
        wl.h = vec![80, 100, 110, 120];
        wl.delta = 0.99;
        assert!(wl.is_flat());
        wl.delta = 0.05;
        assert!(!wl.is_flat());
    }

    #[test]
    fn g_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.txt");
        let params = WlParams::new(5, 7);
        let mut wl = WangLandauState::new(&params);
        for (i, v) in wl.g.iter_mut().enumerate() {
            *v = (i as f64) * std::f64::consts::PI + 0.125;
        }
        write_g_file(&path, &wl).unwrap();
        let back = read_g_file(&path).unwrap();
        assert_eq!(back.max_size, 5);
        assert_eq!(back.g, wl.g);
    }

    #[test]
    fn f_halves_until_epsilon() {
        let mut params = WlParams::new(3, 1);
        params.epsilon = 0.2;
        params.s1 = 200;
        let mut fs = Vec::new();
        let wl = tune_with(&params, |state| fs.push(state.f), |_| {});
        assert!(wl.f < 0.2);
        assert_eq!(fs, vec![0.5, 0.25, 0.125]);
    }
}
