//! Per-sample statistics and knot-diagram export.
//!
//! Everything here is a read-only function of a map snapshot, evaluated at
//! sampling instants, so records can be computed in parallel across samples.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::{BigRational, Rational64};
use num_traits::{One, Zero};
use serde::Serialize;
use thiserror::Error;

use crate::combmap::{CombMap, Flag, MapError};
use crate::rng::ChainRng;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ObservableError {
    #[error("gao formula needs n >= 2, got {0}")]
    GaoDomain(u64),
    #[error(transparent)]
    Map(#[from] MapError),
}

/// One sampled data point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ObservableRecord {
    pub chain_id: u32,
    pub step: u64,
    pub n: u32,
    pub max_face: u32,
    #[serde(serialize_with = "ser_ratio")]
    pub mean_v2: Rational64,
    pub face_hist: BTreeMap<u32, u32>,
}

fn ser_ratio<S: serde::Serializer>(r: &Rational64, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_f64(*r.numer() as f64 / *r.denom() as f64)
}

impl ObservableRecord {
    /// CSV cell for the face histogram: `deg:count` pairs joined by `;`.
    pub fn face_hist_cell(&self) -> String {
        let parts: Vec<String> =
            self.face_hist.iter().map(|(d, c)| format!("{d}:{c}")).collect();
        parts.join(";")
    }

    pub fn mean_v2_f64(&self) -> f64 {
        *self.mean_v2.numer() as f64 / *self.mean_v2.denom() as f64
    }
}

/// Where sampled records go. Implementations must be order-preserving so
/// that runs stay byte-reproducible.
pub trait RecordSink {
    fn record(&mut self, rec: &ObservableRecord);
}

impl RecordSink for Vec<ObservableRecord> {
    fn record(&mut self, rec: &ObservableRecord) {
        self.push(rec.clone());
    }
}

/// Snapshot the observables of `map` into a record.
pub fn record(map: &CombMap, chain_id: u32, step: u64) -> ObservableRecord {
    let face_hist = face_degree_histogram(map);
    let max_face = face_hist.keys().next_back().copied().unwrap_or(0);
    ObservableRecord {
        chain_id,
        step,
        n: map.n(),
        max_face,
        mean_v2: mean_v2(map).expect("valid sampled curve"),
        face_hist,
    }
}

/// Count faces by degree. Each flag is visited once, so this is O(n).
pub fn face_degree_histogram(map: &CombMap) -> BTreeMap<u32, u32> {
    let cap = map.capacity();
    let mut seen = vec![false; cap as usize];
    let mut hist = BTreeMap::new();
    for f in map.live_flags() {
        if seen[f.0 as usize] {
            continue;
        }
        let mut deg = 0u32;
        let mut g = f;
        loop {
            seen[g.0 as usize] = true;
            deg += 1;
            g = map.face_next(g);
            if g == f {
                break;
            }
        }
        *hist.entry(deg).or_insert(0) += 1;
    }
    hist
}

pub fn max_face_degree(map: &CombMap) -> u32 {
    face_degree_histogram(map).keys().next_back().copied().unwrap_or(0)
}

/// Expected maximum face degree of a random (arbitrary) 4-valent map:
/// `(ln n - ln ln n / 2) / ln(6/5)`. The baseline plane curves are compared
/// against; defined for n >= 2.
pub fn gao_max_face_expectation(n: u64) -> Result<f64, ObservableError> {
    if n < 2 {
        return Err(ObservableError::GaoDomain(n));
    }
    let ln_n = (n as f64).ln();
    Ok((ln_n - 0.5 * ln_n.ln()) / (6.0_f64 / 5.0).ln())
}

/// Limiting probability that a face of a random 4-valent planar map has
/// degree `k`, as an exact rational:
/// `[y^(k-1)] (1 + y/2)^(-1/2) (1 - 5y/6)^(-3/2) / (3k)`.
pub fn theoretical_face_density_4valent(k: u32) -> BigRational {
    assert!(k >= 1);
    let coeffs = face_density_series(k as usize);
    coeffs[(k - 1) as usize].clone() / BigRational::from(BigInt::from(3 * i64::from(k)))
}

/// First `len` coefficients of `(1 + y/2)^(-1/2) * (1 - 5y/6)^(-3/2)`.
fn face_density_series(len: usize) -> Vec<BigRational> {
    let mut a = Vec::with_capacity(len); // (1 + y/2)^(-1/2)
    let mut b = Vec::with_capacity(len); // (1 - 5y/6)^(-3/2)
    a.push(BigRational::one());
    b.push(BigRational::one());
    for j in 1..len {
        let ja = a[j - 1].clone()
            * BigRational::new(BigInt::from(-(2 * j as i64 - 1)), BigInt::from(4 * j as i64));
        a.push(ja);
        let jb = b[j - 1].clone()
            * BigRational::new(BigInt::from(5 * (2 * j as i64 + 1)), BigInt::from(12 * j as i64));
        b.push(jb);
    }
    let mut c = vec![BigRational::zero(); len];
    for (i, ai) in a.iter().enumerate() {
        for (j, bj) in b.iter().enumerate() {
            if i + j < len {
                c[i + j] += ai * bj;
            }
        }
    }
    c
}

/// Per-vertex traversal data: positions of the two passages along the based
/// curve and the local crossing handedness.
struct Passages {
    first: Vec<u32>,
    second: Vec<u32>,
    /// +1 when the second arrival flag is `sigma` of the first, -1 when it
    /// is `sigma^3`. Intrinsic to the curve's orientation at the vertex.
    w: Vec<i64>,
}

fn passages(map: &CombMap) -> Result<Passages, MapError> {
    let n = map.n() as usize;
    let steps = 2 * n;
    let mut vertex_index: std::collections::HashMap<u32, usize> = std::collections::HashMap::new();
    let mut first = vec![u32::MAX; n];
    let mut second = vec![u32::MAX; n];
    let mut first_arrival = vec![Flag(u32::MAX); n];
    let mut w = vec![0i64; n];
    let mut cur = map.root();
    for pos in 0..steps {
        let arrival = map.tau(cur);
        let rep = map.vertex_rep(arrival).0;
        let next_id = vertex_index.len();
        let id = *vertex_index.entry(rep).or_insert(next_id);
        if first[id] == u32::MAX {
            first[id] = pos as u32;
            first_arrival[id] = arrival;
        } else if second[id] == u32::MAX {
            second[id] = pos as u32;
            let fa = first_arrival[id];
            if map.sigma(fa) == arrival {
                w[id] = 1;
            } else {
                debug_assert_eq!(map.sigma_inv(fa), arrival);
                w[id] = -1;
            }
        } else {
            return Err(MapError::CurveConditionViolated { got: pos + 1, expected: steps });
        }
        cur = Flag(map.sigma(map.sigma(arrival)).0);
    }
    if cur != map.root() || vertex_index.len() != n || second.iter().any(|&s| s == u32::MAX) {
        return Err(MapError::CurveConditionViolated { got: vertex_index.len(), expected: n });
    }
    Ok(Passages { first, second, w })
}

#[inline]
fn interlaced(p1: u32, p2: u32, q1: u32, q2: u32) -> bool {
    (p1 < q1 && q1 < p2 && p2 < q2) || (q1 < p1 && p1 < q2 && q2 < p2)
}

/// The integer curve invariant obtained by summing the handedness products
/// `-w_u w_v` over interlaced vertex pairs of the Gauss diagram, in O(n^2).
/// Equals four times the mean Casson invariant over all crossing
/// assignments of the shadow.
pub fn interlacement_invariant(map: &CombMap) -> Result<i64, MapError> {
    let p = passages(map)?;
    let n = p.first.len();
    let mut total = 0i64;
    for u in 0..n {
        for v in (u + 1)..n {
            if interlaced(p.first[u], p.second[u], p.first[v], p.second[v]) {
                total -= p.w[u] * p.w[v];
            }
        }
    }
    Ok(total)
}

/// Expected Casson invariant `v2` over the 2^n crossing assignments of the
/// shadow: [`interlacement_invariant`] divided by four.
pub fn mean_v2(map: &CombMap) -> Result<Rational64, MapError> {
    Ok(Rational64::new(interlacement_invariant(map)?, 4))
}

/// A shadow plus one over/under choice per vertex. `signs[i]` refers to the
/// i-th vertex in traversal first-visit order; `true` means the strand
/// passing first goes over.
#[derive(Debug, Clone)]
pub struct KnotDiagram {
    pub shadow: CombMap,
    pub signs: Vec<bool>,
}

/// Independent uniform over/under choice at every vertex: each of the 2^n
/// diagrams of the shadow is equally likely.
pub fn assign_crossings(map: &CombMap, rng: &mut ChainRng) -> KnotDiagram {
    use rand::Rng;
    let signs = (0..map.n()).map(|_| rng.random::<bool>()).collect();
    KnotDiagram { shadow: map.clone(), signs }
}

/// Casson invariant of one diagram via a Gauss-diagram pair count: for each
/// interlaced pair, walking from the basepoint, count `eps_x * eps_y` when
/// the earlier chord starts with its overpass and the later chord starts
/// with its underpass. Independent of the basepoint and of which of the two
/// curve orientations is traversed.
pub fn v2_of_diagram(diagram: &KnotDiagram) -> Result<i64, MapError> {
    let map = &diagram.shadow;
    let p = passages(map)?;
    let n = p.first.len();
    assert_eq!(diagram.signs.len(), n, "one sign per vertex");
    let mut total = 0i64;
    for u in 0..n {
        for v in 0..n {
            if u == v {
                continue;
            }
            // x is the chord met first
            let (x, y) = (u, v);
            if p.first[x] > p.first[y] {
                continue;
            }
            if !interlaced(p.first[x], p.second[x], p.first[y], p.second[y]) {
                continue;
            }
            // x tail-first (first passage over), y head-first (first passage under)
            if diagram.signs[x] && !diagram.signs[y] {
                let eps_x = p.w[x]; // first passage over
                let eps_y = -p.w[y]; // second passage over
                total += eps_x * eps_y;
            }
        }
    }
    Ok(total)
}

/// PD code: edges are labelled 1..2n along the traversal of the root's
/// curve orientation; each vertex lists its four incident edge labels in
/// sigma order starting from the incoming edge of the under-strand.
pub fn pd_code(diagram: &KnotDiagram) -> Result<String, MapError> {
    let map = &diagram.shadow;
    let n = map.n() as usize;
    let steps = 2 * n;
    let mut edge_label = vec![0u32; map.capacity() as usize];
    let mut vertex_index: std::collections::HashMap<u32, usize> = std::collections::HashMap::new();
    let mut arrivals: Vec<[Option<Flag>; 2]> = vec![[None, None]; n];
    let mut cur = map.root();
    for pos in 0..steps {
        // label the edge being traversed
        let label = pos as u32 + 1;
        edge_label[cur.0 as usize] = label;
        edge_label[map.tau(cur).0 as usize] = label;
        let arrival = map.tau(cur);
        let rep = map.vertex_rep(arrival).0;
        let next_id = vertex_index.len();
        let id = *vertex_index.entry(rep).or_insert(next_id);
        if arrivals[id][0].is_none() {
            arrivals[id][0] = Some(arrival);
        } else if arrivals[id][1].is_none() {
            arrivals[id][1] = Some(arrival);
        } else {
            return Err(MapError::CurveConditionViolated { got: pos, expected: steps });
        }
        cur = Flag(map.sigma(map.sigma(arrival)).0);
    }
    if cur != map.root() || vertex_index.len() != n {
        return Err(MapError::CurveConditionViolated { got: vertex_index.len(), expected: n });
    }
    let mut parts = Vec::with_capacity(n);
    for id in 0..n {
        let (first, second) = (arrivals[id][0].unwrap(), arrivals[id][1].unwrap());
        // the under passage's incoming flag starts the tuple
        let start = if diagram.signs[id] { second } else { first };
        let mut flags = [start; 4];
        for i in 1..4 {
            flags[i] = map.sigma(flags[i - 1]);
        }
        let labels: Vec<String> =
            flags.iter().map(|f| edge_label[f.0 as usize].to_string()).collect();
        parts.push(format!("X({})", labels.join(",")));
    }
    Ok(parts.join(","))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moves::trefoil_shadow;

    #[test]
    fn figure_eight_histogram() {
        let m = CombMap::new_figure_eight();
        let h = face_degree_histogram(&m);
        assert_eq!(h, BTreeMap::from([(1, 2), (2, 1)]));
        assert_eq!(max_face_degree(&m), 2);
    }

    #[test]
    fn histogram_totals() {
        let mut m = trefoil_shadow();
        m.ri_plus().unwrap();
        m.rii_plus(1).unwrap();
        let h = face_degree_histogram(&m);
        let faces: u32 = h.values().sum();
        let flags: u32 = h.iter().map(|(d, c)| d * c).sum();
        assert_eq!(faces, m.n() + 2);
        assert_eq!(flags, 4 * m.n());
    }

    #[test]
    fn gao_values() {
        let v = gao_max_face_expectation(100).unwrap();
        assert!((v - 21.0704).abs() < 5e-4, "got {v}");
        // ln ln n = 1 at n = e^e, so the value is (e - 1/2)/ln(6/5)
        let n = std::f64::consts::E.exp();
        let v = gao_max_face_expectation(n.round() as u64).unwrap();
        let expect = (std::f64::consts::E - 0.5) / (1.2_f64).ln();
        assert!((v - expect).abs() < 0.05, "got {v} want about {expect}");
        assert!(gao_max_face_expectation(1).is_err());
        // strictly increasing from n = 3 on
        let mut prev = gao_max_face_expectation(3).unwrap();
        for n in 4..200 {
            let cur = gao_max_face_expectation(n).unwrap();
            assert!(cur > prev);
            prev = cur;
        }
    }

    #[test]
    fn face_density_table_values() {
        let q = |n: i64, d: i64| BigRational::new(BigInt::from(n), BigInt::from(d));
        assert_eq!(theoretical_face_density_4valent(1), q(1, 3));
        assert_eq!(theoretical_face_density_4valent(2), q(1, 6));
        assert_eq!(theoretical_face_density_4valent(3), q(13, 108));
        assert_eq!(theoretical_face_density_4valent(4), q(55, 648));
        assert_eq!(theoretical_face_density_4valent(5), q(83, 1296));
        assert_eq!(theoretical_face_density_4valent(6), q(377, 7776));
        assert_eq!(theoretical_face_density_4valent(7), q(1751, 46656));
        assert_eq!(theoretical_face_density_4valent(8), q(101, 3456));
        assert_eq!(theoretical_face_density_4valent(9), q(115825, 5038848));
    }

    #[test]
    fn face_density_sums_to_one() {
        use num_traits::ToPrimitive;
        let total: f64 = (1..=200)
            .map(|k| theoretical_face_density_4valent(k).to_f64().unwrap())
            .sum();
        assert!((total - 1.0).abs() < 1e-6, "partial sum {total}");
    }

    #[test]
    fn figure_eight_invariants_vanish() {
        let m = CombMap::new_figure_eight();
        assert_eq!(interlacement_invariant(&m).unwrap(), 0);
        assert_eq!(mean_v2(&m).unwrap(), Rational64::new(0, 1));
    }

    #[test]
    fn trefoil_mean_v2() {
        let m = trefoil_shadow();
        assert_eq!(interlacement_invariant(&m).unwrap(), 1);
        assert_eq!(mean_v2(&m).unwrap(), Rational64::new(1, 4));
    }

    #[test]
    fn trefoil_diagram_v2_values() {
        // Exactly the two alternating assignments knot; the rest are unknots.
        let m = trefoil_shadow();
        let mut ones = 0;
        let mut zeros = 0;
        for mask in 0..8u32 {
            let signs = (0..3).map(|i| mask >> i & 1 == 1).collect();
            let d = KnotDiagram { shadow: m.clone(), signs };
            match v2_of_diagram(&d).unwrap() {
                1 => ones += 1,
                0 => zeros += 1,
                other => panic!("unexpected v2 {other}"),
            }
        }
        assert_eq!((ones, zeros), (2, 6));
    }

    #[test]
    fn v2_independent_of_basepoint() {
        let m = trefoil_shadow();
        for mask in 0..8u32 {
            let signs: Vec<bool> = (0..3).map(|i| mask >> i & 1 == 1).collect();
            let d1 = KnotDiagram { shadow: m.clone(), signs: signs.clone() };
            let v1 = v2_of_diagram(&d1).unwrap();
            // re-root on every flag: both orientations and all basepoints
            for f in m.live_flags() {
                let mut m2 = m.clone();
                m2.set_root(f).unwrap();
                let d2 = KnotDiagram { signs: transport_signs(&m, &signs, &m2), shadow: m2 };
                assert_eq!(v2_of_diagram(&d2).unwrap(), v1, "mask {mask} root {f}");
            }
        }
    }

    /// Re-express first-passage-over bits relative to another rooting of the
    /// same map. A physical passage through a vertex is the flag pair
    /// `{a, sigma^2 a}`; when the new first visit is the other passage, the
    /// bit flips.
    pub(crate) fn transport_signs(m_ref: &CombMap, signs: &[bool], m_new: &CombMap) -> Vec<bool> {
        let a_ref = first_arrivals(m_ref);
        let a_new = first_arrivals(m_new);
        a_new
            .iter()
            .map(|(rep, fa_new)| {
                let (pos, &(_, fa_ref)) =
                    a_ref.iter().enumerate().find(|(_, (r, _))| r == rep).unwrap();
                let opposite = m_ref.sigma(m_ref.sigma(Flag(fa_ref))).0;
                if *fa_new == fa_ref || *fa_new == opposite {
                    signs[pos]
                } else {
                    !signs[pos]
                }
            })
            .collect()
    }

    fn first_arrivals(m: &CombMap) -> Vec<(u32, u32)> {
        let mut order: Vec<(u32, u32)> = Vec::new();
        let mut cur = m.root();
        for _ in 0..2 * m.n() {
            let arrival = m.tau(cur);
            let rep = m.vertex_rep(arrival).0;
            if !order.iter().any(|(r, _)| *r == rep) {
                order.push((rep, arrival.0));
            }
            cur = Flag(m.sigma(m.sigma(arrival)).0);
        }
        order
    }

    #[test]
    fn pd_code_shape() {
        let m = trefoil_shadow();
        let d = KnotDiagram { shadow: m, signs: vec![true, false, true] };
        let pd = pd_code(&d).unwrap();
        let tuples: Vec<&str> = pd.split("),").collect();
        assert_eq!(tuples.len(), 3);
        // every label 1..=6 appears exactly twice
        let mut counts = [0u32; 7];
        for t in pd.split(|c| c == '(' || c == ')' || c == ',' || c == 'X') {
            if let Ok(v) = t.parse::<usize>() {
                counts[v] += 1;
            }
        }
        assert_eq!(&counts[1..], &[2, 2, 2, 2, 2, 2]);
    }
}
