//! Brute-force ground truth at desk scale: exhaustive enumeration of rooted
//! plane curves, exact one-step transition matrices, stationarity and
//! detailed-balance checks, and exact Casson averages by full sign
//! enumeration. Everything here trades time for independence from the fast
//! paths it verifies.

use std::collections::HashMap;
use std::fmt::Write as _;

use num_rational::Rational64;
use thiserror::Error;

use crate::chain_boltzmann::{BoltzmannGates, BoltzmannParams};
use crate::chain_wanglandau::WlGates;
use crate::combmap::{CanonicalCode, CombMap, Flag, MapError};
use crate::observables::{v2_of_diagram, KnotDiagram};
use crate::stepping::{self, MoveProbs};

/// State spaces grow roughly elevenfold per size; past this the table no
/// longer fits a desk machine.
pub const MAX_ENUM_SIZE: u32 = 7;

/// Exact sign enumeration is 2^n diagrams.
pub const MAX_BRUTE_V2_SIZE: u32 = 16;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("enumeration capped at n <= {max}, requested {requested}")]
    SizeGuard { requested: u32, max: u32 },
    #[error("table of max size {have} cannot serve a request at size {want}")]
    TableTooSmall { have: u32, want: u32 },
    #[error("power iteration did not reach {tol:e} after {iters} iterations (residual {residual:e})")]
    NoConvergence { tol: f64, iters: usize, residual: f64 },
    #[error(transparent)]
    Map(#[from] MapError),
}

/// Every rooted plane curve up to a maximum size, one canonical code per
/// rooted isomorphism class.
#[derive(Debug, Clone)]
pub struct EnumTable {
    max_size: u32,
    classes: Vec<Vec<CanonicalCode>>,
}

impl EnumTable {
    pub fn max_size(&self) -> u32 {
        self.max_size
    }

    /// Number of rooted classes of size `n` (the counting sequence entry).
    pub fn count(&self, n: u32) -> usize {
        self.classes[(n - 1) as usize].len()
    }

    pub fn counts(&self) -> Vec<(u32, usize)> {
        (1..=self.max_size).map(|n| (n, self.count(n))).collect()
    }

    pub fn classes(&self, n: u32) -> &[CanonicalCode] {
        &self.classes[(n - 1) as usize]
    }

    pub fn total(&self) -> usize {
        self.classes.iter().map(Vec::len).sum()
    }

    pub fn all_codes(&self) -> impl Iterator<Item = &CanonicalCode> {
        self.classes.iter().flatten()
    }

    /// `<n> <count>` lines, then optionally one indented canonical code per
    /// class in text form.
    pub fn to_file_text(&self, with_classes: bool) -> String {
        let mut out = String::new();
        for (n, count) in self.counts() {
            writeln!(out, "{n} {count}").expect("string write");
        }
        if with_classes {
            for n in 1..=self.max_size {
                for code in self.classes(n) {
                    let words: Vec<String> =
                        code.as_slice().iter().map(|w| w.to_string()).collect();
                    writeln!(out, "  {}", words.join(" ")).expect("string write");
                }
            }
        }
        out
    }
}

/// Breadth-first closure of the figure-eight under the five moves and all
/// re-rootings, truncated at `max_size` and deduplicated by canonical code.
/// Since every curve reduces to the figure-eight through non-increasing
/// moves, this reaches every rooted plane curve with at most `max_size`
/// vertices.
pub fn enumerate_rooted_plane_curves(max_size: u32) -> Result<EnumTable, OracleError> {
    if max_size == 0 || max_size > MAX_ENUM_SIZE {
        return Err(OracleError::SizeGuard { requested: max_size, max: MAX_ENUM_SIZE });
    }
    Ok(enumerate_unchecked(max_size))
}

fn enumerate_unchecked(max_size: u32) -> EnumTable {
    let mut classes: Vec<Vec<CanonicalCode>> = vec![Vec::new(); max_size as usize];
    let mut seen: HashMap<CanonicalCode, ()> = HashMap::new();
    let start = CombMap::new_figure_eight().canonical_code().expect("figure eight");
    seen.insert(start.clone(), ());
    classes[0].push(start.clone());
    let mut queue = vec![start];
    let mut head = 0;
    while head < queue.len() {
        let map = CombMap::from_canonical(&queue[head]).expect("enumerated code");
        head += 1;
        let push = |m: &CombMap, seen: &mut HashMap<CanonicalCode, ()>,
                        classes: &mut Vec<Vec<CanonicalCode>>,
                        queue: &mut Vec<CanonicalCode>| {
            debug_assert!(m.validate().ok(), "move produced invalid state");
            let code = m.canonical_code().expect("valid state");
            if !seen.contains_key(&code) {
                seen.insert(code.clone(), ());
                classes[(m.n() - 1) as usize].push(code.clone());
                queue.push(code);
            }
        };
        // all rootings
        for f in map.live_flags() {
            if f == map.root() {
                continue;
            }
            let mut m = map.clone();
            m.set_root(f).expect("live flag");
            push(&m, &mut seen, &mut classes, &mut queue);
        }
        let n = map.n();
        if n + 1 <= max_size {
            let mut m = map.clone();
            m.ri_plus().expect("always possible");
            push(&m, &mut seen, &mut classes, &mut queue);
        }
        {
            let mut m = map.clone();
            if m.ri_minus().is_ok() {
                push(&m, &mut seen, &mut classes, &mut queue);
            }
        }
        if n + 2 <= max_size {
            let d = map.face_degree(map.root());
            for k in 1..d {
                let mut m = map.clone();
                m.rii_plus(k).expect("guarded by face degree");
                push(&m, &mut seen, &mut classes, &mut queue);
            }
        }
        {
            let mut m = map.clone();
            if m.rii_minus().is_ok() {
                push(&m, &mut seen, &mut classes, &mut queue);
            }
        }
        {
            let mut m = map.clone();
            if m.riii().is_ok() {
                push(&m, &mut seen, &mut classes, &mut queue);
            }
        }
    }
    for bucket in &mut classes {
        bucket.sort_unstable();
    }
    EnumTable { max_size, classes }
}

/// Independent count of rooted classes of size `n`: run over every
/// fixed-point-free involution `tau` against the standard vertex-block
/// `sigma`, keep the ones that validate, and deduplicate all rootings by
/// canonical code. Exponential in `n`; meant for n <= 3 cross-checks.
pub fn count_rooted_by_raw_generation(n: u32) -> usize {
    let flags = 4 * n as usize;
    let mut sigma = vec![0u32; flags];
    for v in 0..n as usize {
        for i in 0..4 {
            sigma[4 * v + i] = (4 * v + (i + 1) % 4) as u32;
        }
    }
    let mut codes: HashMap<CanonicalCode, ()> = HashMap::new();
    let mut tau = vec![u32::MAX; flags];
    pair_up(&mut tau, 0, &mut |tau| {
        let m = CombMap::from_arrays(sigma.clone(), tau.to_vec(), 0).expect("arrays");
        if !m.validate().ok() {
            return;
        }
        for f in m.live_flags() {
            let mut m2 = m.clone();
            m2.set_root(f).expect("live");
            codes.entry(m2.canonical_code().expect("valid")).or_insert(());
        }
    });
    codes.len()
}

fn pair_up(tau: &mut Vec<u32>, from: usize, visit: &mut impl FnMut(&[u32])) {
    let Some(i) = (from..tau.len()).find(|&i| tau[i] == u32::MAX) else {
        visit(tau);
        return;
    };
    for j in i + 1..tau.len() {
        if tau[j] != u32::MAX {
            continue;
        }
        tau[i] = j as u32;
        tau[j] = i as u32;
        pair_up(tau, i + 1, visit);
        tau[i] = u32::MAX;
        tau[j] = u32::MAX;
    }
}

/// Which chain's exact kernel to build over an [`EnumTable`].
pub enum KernelKind<'a> {
    Boltzmann(&'a BoltzmannParams),
    WangLandau { g: &'a [f64], probs: MoveProbs },
}

/// Dense one-step transition matrix over the rooted classes of a table.
pub struct Kernel {
    pub states: Vec<CanonicalCode>,
    pub sizes: Vec<u32>,
    pub dim: usize,
    /// Row-major transition probabilities.
    pub p: Vec<f64>,
}

impl Kernel {
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.p[i * self.dim + j]
    }

    pub fn row_sum_error(&self) -> f64 {
        (0..self.dim)
            .map(|i| ((0..self.dim).map(|j| self.at(i, j)).sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

/// Build the full one-step matrix. With `reroot_every_step` the step is the
/// symmetric composition re-root / move / re-root, matching what the chains
/// execute.
pub fn exact_kernel(table: &EnumTable, kind: KernelKind) -> Result<Kernel, OracleError> {
    let states: Vec<CanonicalCode> = table.all_codes().cloned().collect();
    let dim = states.len();
    let index: HashMap<&CanonicalCode, usize> =
        states.iter().enumerate().map(|(i, c)| (c, i)).collect();
    let sizes: Vec<u32> = states.iter().map(|c| c.n()).collect();

    let (probs, row_fn): (MoveProbs, Box<dyn Fn(&CombMap) -> Vec<(CanonicalCode, f64)>>) =
        match kind {
            KernelKind::Boltzmann(params) => {
                let cap = params.max_size.unwrap_or(table.max_size());
                if cap > table.max_size() {
                    return Err(OracleError::TableTooSmall {
                        have: table.max_size(),
                        want: cap,
                    });
                }
                let z = params.z;
                let probs = params.probs();
                (
                    probs,
                    Box::new(move |m: &CombMap| {
                        stepping::move_row(m, &probs, &BoltzmannGates { z, cap: Some(cap) })
                    }),
                )
            }
            KernelKind::WangLandau { g, probs } => {
                if (g.len() as u32) < table.max_size() {
                    return Err(OracleError::TableTooSmall {
                        have: g.len() as u32,
                        want: table.max_size(),
                    });
                }
                let g = g.to_vec();
                let max_size = table.max_size();
                (
                    probs,
                    Box::new(move |m: &CombMap| {
                        stepping::move_row(m, &probs, &WlGates { g: &g, ell: 1, max_size })
                    }),
                )
            }
        };

    let mut move_matrix = vec![0.0; dim * dim];
    for (i, code) in states.iter().enumerate() {
        let map = CombMap::from_canonical(code)?;
        for (target, p) in row_fn(&map) {
            let j = *index.get(&target).expect("moves stay within the capped table");
            move_matrix[i * dim + j] += p;
        }
    }

    let p = if probs.reroot_every_step {
        let mut reroot = vec![0.0; dim * dim];
        for (i, code) in states.iter().enumerate() {
            let map = CombMap::from_canonical(code)?;
            for (target, p) in stepping::reroot_row(&map) {
                let j = *index.get(&target).expect("re-rooting stays in the table");
                reroot[i * dim + j] += p;
            }
        }
        let rm = mat_mul(&reroot, &move_matrix, dim);
        mat_mul(&rm, &reroot, dim)
    } else {
        move_matrix
    };

    Ok(Kernel { states, sizes, dim, p })
}

fn mat_mul(a: &[f64], b: &[f64], dim: usize) -> Vec<f64> {
    let mut out = vec![0.0; dim * dim];
    for i in 0..dim {
        for k in 0..dim {
            let aik = a[i * dim + k];
            if aik == 0.0 {
                continue;
            }
            let row_b = &b[k * dim..(k + 1) * dim];
            let row_o = &mut out[i * dim..(i + 1) * dim];
            for (o, &bv) in row_o.iter_mut().zip(row_b) {
                *o += aik * bv;
            }
        }
    }
    out
}

/// Left fixed vector of a stochastic matrix by power iteration from the
/// uniform start, to an L1 self-consistency residual below `tol`.
pub fn stationary_distribution(
    kernel: &Kernel,
    tol: f64,
    max_iters: usize,
) -> Result<Vec<f64>, OracleError> {
    let dim = kernel.dim;
    let mut x = vec![1.0 / dim as f64; dim];
    let mut residual = f64::INFINITY;
    for _ in 0..max_iters {
        let mut next = vec![0.0; dim];
        for i in 0..dim {
            let xi = x[i];
            if xi == 0.0 {
                continue;
            }
            let row = &kernel.p[i * dim..(i + 1) * dim];
            for (nj, &pij) in next.iter_mut().zip(row) {
                *nj += xi * pij;
            }
        }
        let norm: f64 = next.iter().sum();
        for v in &mut next {
            *v /= norm;
        }
        residual = x.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum();
        x = next;
        if residual < tol {
            return Ok(x);
        }
    }
    Err(OracleError::NoConvergence { tol, iters: max_iters, residual })
}

/// Worst relative violation of `P(i->j) pi(i) = P(j->i) pi(j)` over all
/// pairs with nonzero flow.
pub fn detailed_balance_residual(kernel: &Kernel, pi: &[f64]) -> f64 {
    let dim = kernel.dim;
    let mut worst = 0.0_f64;
    for i in 0..dim {
        for j in (i + 1)..dim {
            let fwd = kernel.at(i, j) * pi[i];
            let bwd = kernel.at(j, i) * pi[j];
            if fwd == 0.0 && bwd == 0.0 {
                continue;
            }
            let scale = fwd.abs().max(bwd.abs());
            worst = worst.max((fwd - bwd).abs() / scale);
        }
    }
    worst
}

/// Exact average of the Casson invariant over all 2^n crossing assignments,
/// as an exact rational. Guarded: the enumeration is exponential.
pub fn brute_force_mean_v2(map: &CombMap) -> Result<Rational64, OracleError> {
    let n = map.n();
    if n > MAX_BRUTE_V2_SIZE {
        return Err(OracleError::SizeGuard { requested: n, max: MAX_BRUTE_V2_SIZE });
    }
    let mut sum = 0i64;
    for mask in 0u32..(1 << n) {
        let signs = (0..n).map(|i| mask >> i & 1 == 1).collect();
        let d = KnotDiagram { shadow: map.clone(), signs };
        sum += v2_of_diagram(&d)?;
    }
    Ok(Rational64::new(sum, 1i64 << n))
}

/// Positive self-loop probability for every state (aperiodicity witness).
pub fn min_self_loop(kernel: &Kernel) -> f64 {
    (0..kernel.dim).map(|i| kernel.at(i, i)).fold(f64::INFINITY, f64::min)
}

/// True when applying any move or re-rooting to any state of the table
/// lands inside the table (or would exceed the cap). A closure failure
/// means the enumeration missed states.
pub fn verify_bfs_closure(table: &EnumTable) -> Result<bool, OracleError> {
    let index: HashMap<&CanonicalCode, ()> = table.all_codes().map(|c| (c, ())).collect();
    for code in table.all_codes() {
        let map = CombMap::from_canonical(code)?;
        let check = |m: &CombMap| -> bool {
            m.n() > table.max_size()
                || index.contains_key(&m.canonical_code().expect("valid state"))
        };
        for f in map.live_flags() {
            let mut m = map.clone();
            m.set_root(f).expect("live");
            if !check(&m) {
                return Ok(false);
            }
        }
        let mut m = map.clone();
        m.ri_plus().expect("always ok");
        if !check(&m) {
            return Ok(false);
        }
        let mut m = map.clone();
        if m.ri_minus().is_ok() && !check(&m) {
            return Ok(false);
        }
        let d = map.face_degree(map.root());
        for k in 1..d {
            let mut m = map.clone();
            m.rii_plus(k).expect("guarded");
            if !check(&m) {
                return Ok(false);
            }
        }
        let mut m = map.clone();
        if m.rii_minus().is_ok() && !check(&m) {
            return Ok(false);
        }
        let mut m = map.clone();
        if m.riii().is_ok() && !check(&m) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// All distinct flag relabelings fixing the root are forced by propagation
/// from the root, so a root-preserving isomorphism exists iff propagating
/// `root -> root` through sigma and tau is consistent. Independent of the
/// canonical-code path; used to validate it.
pub fn rooted_isomorphic_by_propagation(a: &CombMap, b: &CombMap) -> bool {
    if a.n() != b.n() {
        return false;
    }
    let cap = a.capacity() as usize;
    let mut image: Vec<Option<Flag>> = vec![None; cap];
    let mut stack = vec![(a.root(), b.root())];
    image[a.root().0 as usize] = Some(b.root());
    while let Some((x, y)) = stack.pop() {
        for (xn, yn) in [(a.sigma(x), b.sigma(y)), (a.tau(x), b.tau(y))] {
            if !a.is_live(xn) || !b.is_live(yn) {
                return false;
            }
            match image[xn.0 as usize] {
                None => {
                    image[xn.0 as usize] = Some(yn);
                    stack.push((xn, yn));
                }
                Some(img) if img == yn => {}
                Some(_) => return false,
            }
        }
    }
    // surjectivity follows from equal live counts and injectivity of the
    // forced assignment; check injectivity
    let mut seen = vec![false; b.capacity() as usize];
    let mut mapped = 0;
    for img in image.iter().flatten() {
        if seen[img.0 as usize] {
            return false;
        }
        seen[img.0 as usize] = true;
        mapped += 1;
    }
    mapped == a.flag_count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moves::trefoil_shadow;

    #[test]
    fn enumeration_small_counts_match_raw_generation() {
        let table = enumerate_rooted_plane_curves(3).unwrap();
        for n in 1..=3 {
            assert_eq!(
                table.count(n),
                count_rooted_by_raw_generation(n),
                "count mismatch at n = {n}"
            );
        }
    }

    #[test]
    fn figure_eight_has_two_rooted_one_vertex_classes() {
        let table = enumerate_rooted_plane_curves(2).unwrap();
        assert_eq!(table.count(1), 2);
    }

    #[test]
    fn every_enumerated_state_is_valid() {
        let table = enumerate_rooted_plane_curves(4).unwrap();
        for code in table.all_codes() {
            let m = CombMap::from_canonical(code).unwrap();
            assert!(m.validate().ok());
        }
    }

    #[test]
    fn bfs_closure_holds() {
        let table = enumerate_rooted_plane_curves(4).unwrap();
        assert!(verify_bfs_closure(&table).unwrap());
    }

    #[test]
    fn canonical_code_agrees_with_propagation_isomorphism() {
        let table = enumerate_rooted_plane_curves(3).unwrap();
        let maps: Vec<CombMap> =
            table.all_codes().map(|c| CombMap::from_canonical(c).unwrap()).collect();
        // distinct codes must not be isomorphic; equal codes already merged
        for (i, a) in maps.iter().enumerate() {
            for b in maps.iter().skip(i + 1) {
                assert!(!rooted_isomorphic_by_propagation(a, b));
            }
            assert!(rooted_isomorphic_by_propagation(a, a));
        }
    }

    #[test]
    fn trefoil_brute_force_mean_v2() {
        let m = trefoil_shadow();
        assert_eq!(brute_force_mean_v2(&m).unwrap(), Rational64::new(1, 4));
    }

    #[test]
    fn round_trips_on_enumerated_states() {
        let table = enumerate_rooted_plane_curves(4).unwrap();
        for code in table.all_codes() {
            let map = CombMap::from_canonical(code).unwrap();

            let mut m = map.clone();
            m.ri_plus().unwrap();
            m.ri_minus().unwrap();
            assert_eq!(&m.canonical_code().unwrap(), code);

            let mut m = map.clone();
            if m.ri_minus().is_ok() {
                m.ri_plus().unwrap();
                assert_eq!(&m.canonical_code().unwrap(), code);
            }

            let d = map.face_degree(map.root());
            for k in 1..d {
                let mut m = map.clone();
                m.rii_plus(k).unwrap();
                m.rii_minus().unwrap();
                assert_eq!(&m.canonical_code().unwrap(), code);
            }

            let mut m = map.clone();
            if m.rii_minus().is_ok() {
                // the deletion re-roots onto a flag from which some insertion
                // restores the original rooted curve
                let d = m.face_degree(m.root());
                let mut found = false;
                for k in 1..d {
                    let mut m2 = m.clone();
                    m2.rii_plus(k).unwrap();
                    if &m2.canonical_code().unwrap() == code {
                        found = true;
                        break;
                    }
                }
                assert!(found, "bigon deletion without matching insertion");
            }

            let mut m = map.clone();
            if m.riii().is_ok() {
                m.riii().unwrap();
                assert_eq!(&m.canonical_code().unwrap(), code);
            }
        }
    }
}
