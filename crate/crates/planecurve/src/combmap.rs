//! Rooted plane curves stored as combinatorial maps.
//!
//! A curve with `n` double points is a pair of permutations `(sigma, tau)`
//! acting on `4n` flags. `sigma` cycles the four flags of each vertex
//! counterclockwise, `tau` swaps the two flags of each edge. Faces are the
//! orbits of `sigma . tau` (apply `tau` first), and the two orientations of
//! the underlying closed curve are the orbits of `sigma^2 . tau`. One flag is
//! distinguished as the root.
//!
//! Flags are dense `u32` indices with a free list so that move surgeries can
//! recycle slots without compacting the permutation arrays.

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

/// Sentinel stored in `sigma`/`tau` slots that are on the free list.
const DEAD: u32 = u32::MAX;

/// Index of one of the `4n` flags of a map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Flag(pub u32);

impl fmt::Display for Flag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MapError {
    #[error("dead flag {0}")]
    DeadFlag(u32),
    #[error("curve condition violated: sigma^2 tau orbit of the root has length {got}, expected {expected}")]
    CurveConditionViolated { got: usize, expected: usize },
    #[error("invalid map: {0}")]
    InvalidMap(String),
    #[error("parse error: {0}")]
    Parse(String),
}

/// A rooted plane curve (or candidate for one; see [`CombMap::validate`]).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CombMap {
    sigma: Vec<u32>,
    tau: Vec<u32>,
    root: u32,
    live: u32,
    free: Vec<u32>,
}

impl CombMap {
    /// The 1-vertex figure-eight twist curve, the minimal state of every
    /// chain. Four flags, one sigma 4-cycle `(0 1 2 3)`, edges `{0,1}` and
    /// `{2,3}`, root flag 0. This is the unique tau pairing (up to
    /// relabeling) that satisfies both the planarity and curve conditions.
    pub fn new_figure_eight() -> Self {
        CombMap {
            sigma: vec![1, 2, 3, 0],
            tau: vec![1, 0, 3, 2],
            root: 0,
            live: 4,
            free: Vec::new(),
        }
    }

    /// Build a map from raw permutation arrays (no validation beyond length
    /// checks; run [`validate`](Self::validate) afterwards).
    pub fn from_arrays(sigma: Vec<u32>, tau: Vec<u32>, root: u32) -> Result<Self, MapError> {
        if sigma.len() != tau.len() {
            return Err(MapError::InvalidMap("sigma/tau length mismatch".into()));
        }
        let live = sigma.iter().filter(|&&s| s != DEAD).count() as u32;
        let free = (0..sigma.len() as u32).filter(|&f| sigma[f as usize] == DEAD).collect();
        Ok(CombMap { sigma, tau, root, live, free })
    }

    /// Number of vertices (sigma 4-cycles).
    pub fn n(&self) -> u32 {
        self.live / 4
    }

    /// Number of live flags, `4n`.
    pub fn flag_count(&self) -> u32 {
        self.live
    }

    /// Total allocated slots including recycled ones.
    pub fn capacity(&self) -> u32 {
        self.sigma.len() as u32
    }

    pub fn root(&self) -> Flag {
        Flag(self.root)
    }

    pub fn is_live(&self, f: Flag) -> bool {
        (f.0 as usize) < self.sigma.len() && self.sigma[f.0 as usize] != DEAD
    }

    pub fn live_flags(&self) -> impl Iterator<Item = Flag> + '_ {
        self.sigma
            .iter()
            .enumerate()
            .filter(|(_, &s)| s != DEAD)
            .map(|(i, _)| Flag(i as u32))
    }

    #[inline]
    pub fn sigma(&self, f: Flag) -> Flag {
        Flag(self.sigma[f.0 as usize])
    }

    #[inline]
    pub fn tau(&self, f: Flag) -> Flag {
        Flag(self.tau[f.0 as usize])
    }

    /// `sigma^{-1}`, computed as `sigma^3` since every orbit is a 4-cycle.
    #[inline]
    pub fn sigma_inv(&self, f: Flag) -> Flag {
        self.sigma(self.sigma(self.sigma(f)))
    }

    /// Next flag around the face of `f`: `sigma(tau(f))`.
    #[inline]
    pub fn face_next(&self, f: Flag) -> Flag {
        self.sigma(self.tau(f))
    }

    /// Next flag along the curve orientation: `sigma^2(tau(f))`.
    #[inline]
    pub fn curve_next(&self, f: Flag) -> Flag {
        let t = self.tau(f);
        self.sigma(self.sigma(t))
    }

    /// Degree of the face containing `f`.
    pub fn face_degree(&self, f: Flag) -> u32 {
        let mut d = 1;
        let mut g = self.face_next(f);
        while g != f {
            d += 1;
            g = self.face_next(g);
        }
        d
    }

    /// Re-root the map at `b`. The underlying curve is unchanged.
    pub fn set_root(&mut self, b: Flag) -> Result<(), MapError> {
        if !self.is_live(b) {
            return Err(MapError::DeadFlag(b.0));
        }
        self.root = b.0;
        Ok(())
    }

    /// The `sigma tau` orbit of `a` in cyclic order; its length is the face degree.
    pub fn face_of(&self, a: Flag) -> Result<Vec<Flag>, MapError> {
        if !self.is_live(a) {
            return Err(MapError::DeadFlag(a.0));
        }
        let mut cyc = vec![a];
        let mut g = self.face_next(a);
        while g != a {
            cyc.push(g);
            g = self.face_next(g);
        }
        Ok(cyc)
    }

    /// The sigma orbit of `a` (always a 4-cycle on a valid map).
    pub fn vertex_of(&self, a: Flag) -> Result<Vec<Flag>, MapError> {
        if !self.is_live(a) {
            return Err(MapError::DeadFlag(a.0));
        }
        Ok(vec![a, self.sigma(a), self.sigma(self.sigma(a)), self.sigma_inv(a)])
    }

    /// The tau orbit of `a`: the two flags of its edge.
    pub fn edge_of(&self, a: Flag) -> Result<Vec<Flag>, MapError> {
        if !self.is_live(a) {
            return Err(MapError::DeadFlag(a.0));
        }
        Ok(vec![a, self.tau(a)])
    }

    /// Smallest flag of the sigma cycle of `f`; used as a vertex identity.
    pub fn vertex_rep(&self, f: Flag) -> Flag {
        let a = f.0;
        let b = self.sigma[a as usize];
        let c = self.sigma[b as usize];
        let d = self.sigma[c as usize];
        Flag(a.min(b).min(c).min(d))
    }

    /// All orbits of `sigma^2 tau`. A valid plane curve has exactly two,
    /// each of length `2n` (the two orientations of the immersed circle).
    pub fn components(&self) -> Vec<Vec<Flag>> {
        let cap = self.sigma.len();
        let mut seen = vec![false; cap];
        let mut out = Vec::new();
        for f in 0..cap as u32 {
            if self.sigma[f as usize] == DEAD || seen[f as usize] {
                continue;
            }
            let mut cyc = Vec::new();
            let mut g = Flag(f);
            loop {
                seen[g.0 as usize] = true;
                cyc.push(g);
                g = self.curve_next(g);
                if g.0 == f {
                    break;
                }
            }
            out.push(cyc);
        }
        out
    }

    /// Gauss code of the curve: the sequence of vertices visited by the
    /// `sigma^2 tau` orbit of the root, labelled 1.. in first-visit order.
    /// Every label appears exactly twice.
    pub fn gauss_code(&self) -> Result<Vec<u32>, MapError> {
        if !self.is_live(self.root()) {
            return Err(MapError::DeadFlag(self.root));
        }
        let expected = 2 * self.n() as usize;
        let mut labels: HashMap<u32, u32> = HashMap::new();
        let mut out = Vec::with_capacity(expected);
        let mut cur = self.root();
        for _ in 0..expected {
            let arrival = self.tau(cur);
            let rep = self.vertex_rep(arrival).0;
            let next_label = labels.len() as u32 + 1;
            let label = *labels.entry(rep).or_insert(next_label);
            out.push(label);
            cur = Flag(self.sigma(self.sigma(arrival)).0);
        }
        if cur != self.root() {
            return Err(MapError::CurveConditionViolated { got: out.len(), expected });
        }
        Ok(out)
    }

    pub(crate) fn alloc_flag(&mut self) -> u32 {
        self.live += 1;
        if let Some(f) = self.free.pop() {
            f
        } else {
            self.sigma.push(DEAD);
            self.tau.push(DEAD);
            (self.sigma.len() - 1) as u32
        }
    }

    pub(crate) fn free_flag(&mut self, f: u32) {
        debug_assert!(self.sigma[f as usize] != DEAD);
        self.sigma[f as usize] = DEAD;
        self.tau[f as usize] = DEAD;
        self.free.push(f);
        self.live -= 1;
    }

    #[inline]
    pub(crate) fn set_sigma(&mut self, f: u32, g: u32) {
        self.sigma[f as usize] = g;
    }

    /// Install the edge `{a, b}`.
    #[inline]
    pub(crate) fn set_edge(&mut self, a: u32, b: u32) {
        self.tau[a as usize] = b;
        self.tau[b as usize] = a;
    }

    #[inline]
    pub(crate) fn set_root_raw(&mut self, f: u32) {
        self.root = f;
    }

    /// Check every structural invariant, reporting each violation
    /// individually. Total: never panics on malformed permutation data.
    pub fn validate(&self) -> ValidityReport {
        let mut v = Vec::new();
        let cap = self.sigma.len();
        let live: Vec<u32> = (0..cap as u32).filter(|&f| self.sigma[f as usize] != DEAD).collect();

        if live.is_empty() {
            v.push(Violation::NoLiveFlags);
            return ValidityReport { violations: v };
        }

        // sigma and tau must restrict to permutations of the live set.
        let mut structural_ok = true;
        for (perm, which) in [(&self.sigma, PermKind::Sigma), (&self.tau, PermKind::Tau)] {
            let mut hit = vec![false; cap];
            let mut ok = true;
            for &f in &live {
                let g = perm[f as usize];
                if g as usize >= cap || self.sigma[g as usize] == DEAD || hit[g as usize] {
                    ok = false;
                    break;
                }
                hit[g as usize] = true;
            }
            if !ok {
                v.push(Violation::NotPermutation(which));
                structural_ok = false;
            }
        }
        if !structural_ok {
            return ValidityReport { violations: v };
        }

        let mut sigma_ok = true;
        for &f in &live {
            let mut g = f;
            let mut len = 0;
            loop {
                g = self.sigma[g as usize];
                len += 1;
                if g == f || len > 4 {
                    break;
                }
            }
            if len != 4 {
                sigma_ok = false;
                break;
            }
        }
        if !sigma_ok {
            v.push(Violation::SigmaOrbitNot4);
        }

        let mut tau_ok = true;
        for &f in &live {
            let g = self.tau[f as usize];
            if g == f || self.tau[g as usize] != f {
                tau_ok = false;
                break;
            }
        }
        if !tau_ok {
            v.push(Violation::TauNotFixedPointFreeInvolution);
        }

        if self.sigma.get(self.root as usize).map_or(true, |&s| s == DEAD) {
            v.push(Violation::RootDead);
        }

        // Connectivity under the group generated by sigma and tau.
        {
            let mut seen = vec![false; cap];
            let mut stack = vec![live[0]];
            seen[live[0] as usize] = true;
            let mut count = 0usize;
            while let Some(f) = stack.pop() {
                count += 1;
                for g in [self.sigma[f as usize], self.tau[f as usize]] {
                    if (g as usize) < cap && self.sigma[g as usize] != DEAD && !seen[g as usize] {
                        seen[g as usize] = true;
                        stack.push(g);
                    }
                }
            }
            if count != live.len() {
                v.push(Violation::NotConnected);
            }
        }

        if !sigma_ok || !tau_ok {
            return ValidityReport { violations: v };
        }

        let n = live.len() / 4;
        let faces = self.count_orbits(&live, |f| self.face_next(Flag(f)).0);
        if faces != n + 2 {
            v.push(Violation::NotPlanar { faces, expected: n + 2 });
        }

        let comps = self.components();
        if comps.len() != 2 || comps.iter().any(|c| c.len() != 2 * n) {
            v.push(Violation::CurveCondition { components: comps.len() });
        }

        ValidityReport { violations: v }
    }

    fn count_orbits(&self, live: &[u32], next: impl Fn(u32) -> u32) -> usize {
        let mut seen = vec![false; self.sigma.len()];
        let mut count = 0;
        for &f in live {
            if seen[f as usize] {
                continue;
            }
            count += 1;
            let mut g = f;
            loop {
                seen[g as usize] = true;
                g = next(g);
                if g == f {
                    break;
                }
            }
        }
        count
    }

    /// Canonical code: a breadth-first relabeling starting from the root,
    /// walking `sigma` then `tau`, emitting `[n, sigma', tau']`. Invariant
    /// under flag relabeling but not under re-rooting, so equality of codes
    /// is rooted isomorphism. The root always relabels to 0.
    pub fn canonical_code(&self) -> Result<CanonicalCode, MapError> {
        if !self.is_live(self.root()) {
            return Err(MapError::DeadFlag(self.root));
        }
        let cap = self.sigma.len();
        let mut label = vec![DEAD; cap];
        let mut order: Vec<u32> = Vec::with_capacity(self.live as usize);
        label[self.root as usize] = 0;
        order.push(self.root);
        let mut head = 0;
        while head < order.len() {
            let f = order[head] as usize;
            head += 1;
            for g in [self.sigma[f], self.tau[f]] {
                if g as usize >= cap || self.sigma[g as usize] == DEAD {
                    return Err(MapError::InvalidMap("permutation leaves live set".into()));
                }
                if label[g as usize] == DEAD {
                    label[g as usize] = order.len() as u32;
                    order.push(g);
                }
            }
        }
        if order.len() != self.live as usize {
            return Err(MapError::InvalidMap("map is not connected".into()));
        }
        let m = order.len();
        let mut code = Vec::with_capacity(1 + 2 * m);
        code.push(self.n());
        for &f in &order {
            code.push(label[self.sigma[f as usize] as usize]);
        }
        for &f in &order {
            code.push(label[self.tau[f as usize] as usize]);
        }
        Ok(CanonicalCode(code))
    }

    /// Rebuild a map from a canonical code. The result is rooted at flag 0
    /// and rooted-isomorphic to the encoded map.
    pub fn from_canonical(code: &CanonicalCode) -> Result<Self, MapError> {
        let body = &code.0;
        if body.is_empty() {
            return Err(MapError::Parse("empty code".into()));
        }
        let n = body[0] as usize;
        let m = 4 * n;
        if body.len() != 1 + 2 * m {
            return Err(MapError::Parse("code length mismatch".into()));
        }
        let sigma = body[1..1 + m].to_vec();
        let tau = body[1 + m..].to_vec();
        if sigma.iter().chain(&tau).any(|&x| x as usize >= m) {
            return Err(MapError::Parse("flag index out of range".into()));
        }
        Ok(CombMap { sigma, tau, root: 0, live: m as u32, free: Vec::new() })
    }

    /// Line-oriented text form: `n`, the sigma array, the tau array, then the
    /// root index, base-10 and space-separated. Flags are compacted to
    /// `0..4n` in increasing live order.
    pub fn to_text(&self) -> String {
        let live: Vec<u32> = self.live_flags().map(|f| f.0).collect();
        let mut label = vec![DEAD; self.sigma.len()];
        for (i, &f) in live.iter().enumerate() {
            label[f as usize] = i as u32;
        }
        let sig: Vec<String> =
            live.iter().map(|&f| label[self.sigma[f as usize] as usize].to_string()).collect();
        let tau: Vec<String> =
            live.iter().map(|&f| label[self.tau[f as usize] as usize].to_string()).collect();
        format!(
            "{}\n{}\n{}\n{}\n",
            self.n(),
            sig.join(" "),
            tau.join(" "),
            label[self.root as usize]
        )
    }

    pub fn from_text(text: &str) -> Result<Self, MapError> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty() && !l.starts_with('#'));
        let n: usize = lines
            .next()
            .ok_or_else(|| MapError::Parse("missing size line".into()))?
            .trim()
            .parse()
            .map_err(|e| MapError::Parse(format!("bad size: {e}")))?;
        let parse_row = |line: Option<&str>, what: &str| -> Result<Vec<u32>, MapError> {
            let row: Result<Vec<u32>, _> =
                line.ok_or_else(|| MapError::Parse(format!("missing {what} line")))?
                    .split_whitespace()
                    .map(|t| t.parse::<u32>())
                    .collect();
            let row = row.map_err(|e| MapError::Parse(format!("bad {what}: {e}")))?;
            if row.len() != 4 * n {
                return Err(MapError::Parse(format!("{what} has {} entries, expected {}", row.len(), 4 * n)));
            }
            if row.iter().any(|&x| x as usize >= 4 * n) {
                return Err(MapError::Parse(format!("{what} index out of range")));
            }
            Ok(row)
        };
        let sigma = parse_row(lines.next(), "sigma")?;
        let tau = parse_row(lines.next(), "tau")?;
        let root: u32 = lines
            .next()
            .ok_or_else(|| MapError::Parse("missing root line".into()))?
            .trim()
            .parse()
            .map_err(|e| MapError::Parse(format!("bad root: {e}")))?;
        if root as usize >= 4 * n {
            return Err(MapError::Parse("root out of range".into()));
        }
        Ok(CombMap { sigma, tau, root, live: 4 * n as u32, free: Vec::new() })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PermKind {
    Sigma,
    Tau,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    NoLiveFlags,
    NotPermutation(PermKind),
    SigmaOrbitNot4,
    TauNotFixedPointFreeInvolution,
    RootDead,
    NotConnected,
    NotPlanar { faces: usize, expected: usize },
    CurveCondition { components: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NoLiveFlags => write!(f, "no live flags (n must be at least 1)"),
            Violation::NotPermutation(PermKind::Sigma) => write!(f, "sigma is not a permutation of the live flags"),
            Violation::NotPermutation(PermKind::Tau) => write!(f, "tau is not a permutation of the live flags"),
            Violation::SigmaOrbitNot4 => write!(f, "sigma is not a product of disjoint 4-cycles"),
            Violation::TauNotFixedPointFreeInvolution => write!(f, "tau not fixed-point-free involution"),
            Violation::RootDead => write!(f, "root is not a live flag"),
            Violation::NotConnected => write!(f, "map is not connected"),
            Violation::NotPlanar { faces, expected } => {
                write!(f, "planarity: sigma tau has {faces} cycles, expected {expected}")
            }
            Violation::CurveCondition { components } => {
                write!(f, "curve condition: sigma^2 tau has {components} cycles, expected 2")
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct ValidityReport {
    pub violations: Vec<Violation>,
}

impl ValidityReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Relabeling-invariant encoding of a rooted map; see
/// [`CombMap::canonical_code`].
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CanonicalCode(Vec<u32>);

impl CanonicalCode {
    pub fn n(&self) -> u32 {
        self.0[0]
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.0
    }

    /// Little-endian byte form for external storage.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(4 * self.0.len());
        for &w in &self.0 {
            out.extend_from_slice(&w.to_le_bytes());
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn figure_eight_is_valid() {
        let m = CombMap::new_figure_eight();
        let report = m.validate();
        assert!(report.ok(), "violations: {:?}", report.violations);
        assert_eq!(m.n(), 1);
        assert_eq!(m.flag_count(), 4);
    }

    #[test]
    fn figure_eight_counts() {
        let m = CombMap::new_figure_eight();
        // n + 2 = 3 faces with degree multiset {1, 1, 2}.
        let mut degs: Vec<u32> = Vec::new();
        let mut seen = std::collections::HashSet::new();
        for f in m.live_flags() {
            let face = m.face_of(f).unwrap();
            let key = face.iter().map(|g| g.0).min().unwrap();
            if seen.insert(key) {
                degs.push(face.len() as u32);
            }
        }
        degs.sort_unstable();
        assert_eq!(degs, vec![1, 1, 2]);

        let comps = m.components();
        assert_eq!(comps.len(), 2);
        assert!(comps.iter().all(|c| c.len() == 2));
    }

    #[test]
    fn figure_eight_gauss_code() {
        let m = CombMap::new_figure_eight();
        assert_eq!(m.gauss_code().unwrap(), vec![1, 1]);
    }

    #[test]
    fn face_sizes_sum_to_flag_count() {
        let m = CombMap::new_figure_eight();
        let total: usize = {
            let mut seen = std::collections::HashSet::new();
            let mut sum = 0;
            for f in m.live_flags() {
                let face = m.face_of(f).unwrap();
                let key = face.iter().map(|g| g.0).min().unwrap();
                if seen.insert(key) {
                    sum += face.len();
                }
            }
            sum
        };
        assert_eq!(total, 4 * m.n() as usize);
    }

    #[test]
    fn tau_fixed_point_is_reported() {
        // tau with a fixed point on flag 0
        let m = CombMap::from_arrays(vec![1, 2, 3, 0], vec![0, 2, 1, 3], 0).unwrap();
        let report = m.validate();
        assert!(report
            .violations
            .contains(&Violation::TauNotFixedPointFreeInvolution));
    }

    #[test]
    fn hopf_link_shadow_fails_curve_condition() {
        // Two vertices joined by four parallel edges in a cyclic pattern:
        // a valid 4-valent planar map but with four sigma^2 tau cycles.
        let sigma = vec![1, 2, 3, 0, 5, 6, 7, 4];
        let tau = vec![4, 7, 6, 5, 0, 3, 2, 1];
        let m = CombMap::from_arrays(sigma, tau, 0).unwrap();
        let report = m.validate();
        assert!(report
            .violations
            .iter()
            .any(|v| matches!(v, Violation::CurveCondition { .. })),
            "violations: {:?}", report.violations);
    }

    #[test]
    fn reroot_round_trip_preserves_code() {
        let mut m = CombMap::new_figure_eight();
        let code0 = m.canonical_code().unwrap();
        let r = m.root();
        m.set_root(Flag(2)).unwrap();
        m.set_root(r).unwrap();
        assert_eq!(m.canonical_code().unwrap(), code0);
    }

    #[test]
    fn figure_eight_has_two_rooted_classes() {
        let m = CombMap::new_figure_eight();
        let mut codes = std::collections::HashSet::new();
        for f in 0..4 {
            let mut m2 = m.clone();
            m2.set_root(Flag(f)).unwrap();
            codes.insert(m2.canonical_code().unwrap());
        }
        // |Aut| = 2, so 4 rootings / 2 = 2 rooted isomorphism classes.
        assert_eq!(codes.len(), 2);
    }

    #[test]
    fn canonical_code_round_trip() {
        let m = CombMap::new_figure_eight();
        let code = m.canonical_code().unwrap();
        let m2 = CombMap::from_canonical(&code).unwrap();
        assert!(m2.validate().ok());
        assert_eq!(m2.canonical_code().unwrap(), code);
    }

    #[test]
    fn text_round_trip_is_isomorphic() {
        let m = CombMap::new_figure_eight();
        let m2 = CombMap::from_text(&m.to_text()).unwrap();
        assert_eq!(m2.canonical_code().unwrap(), m.canonical_code().unwrap());
    }
}
