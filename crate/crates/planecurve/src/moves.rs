//! The five flat Reidemeister surgeries, acting at the root flag.
//!
//! Every move either rewrites the permutation pair in place (updating the
//! root) or fails with a structured reason and leaves the map untouched.
//! Failed moves are how the Markov chains realise identity transitions, so
//! failure here is cheap and copy-free.
//!
//! Each deletion is the exact inverse of the matching insertion: the round
//! trips `ri_minus(ri_plus(D)) == D`, `rii_minus(rii_plus(D, k)) == D` and
//! `riii(riii(D)) == D` hold flag-for-flag, including the root.

use thiserror::Error;

use crate::combmap::{CombMap, Flag};

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum MoveFailure {
    #[error("monogon-required: the root face is not a monogon")]
    MonogonRequired,
    #[error("bigon-required: the root face is not a bigon")]
    BigonRequired,
    #[error("degenerate-triangle: the root face is not a nondegenerate triangle")]
    DegenerateTriangle,
    #[error("exterior-faces-not-distinct: merging would disconnect the curve or change genus")]
    ExteriorFacesNotDistinct,
    #[error("size-cap: move would leave the allowed size range")]
    SizeCap,
    #[error("merged-face-too-small: no bigon insertion produces this site")]
    MergedFaceTooSmall,
    #[error("face-is-monogon: bigon insertion needs a second flag on the root face")]
    FaceIsMonogon,
}

/// Everything `rii_minus` needs once the preconditions hold: the eight flags
/// of the two bigon vertices, the four outward flags, and the degree of the
/// face a deletion would produce.
struct BigonSite {
    inner: [u32; 8],
    outward: [u32; 4],
    merged_degree: u32,
}

impl CombMap {
    /// Loop insertion at the root edge. Adds one vertex and re-roots onto a
    /// flag whose face is the new monogon. Always possible; the size cap is
    /// the chain's responsibility.
    pub fn ri_plus(&mut self) -> Result<(), MoveFailure> {
        let r = self.root().0;
        let s = self.tau(Flag(r)).0;
        let c0 = self.alloc_flag();
        let c1 = self.alloc_flag();
        let c2 = self.alloc_flag();
        let c3 = self.alloc_flag();
        // new vertex (c0 c1 c2 c3)
        self.set_sigma(c0, c1);
        self.set_sigma(c1, c2);
        self.set_sigma(c2, c3);
        self.set_sigma(c3, c0);
        // the old edge {r, s} becomes the path r - c1 | c0 - s plus the loop {c2, c3}
        self.set_edge(r, c1);
        self.set_edge(c2, c3);
        self.set_edge(c0, s);
        self.set_root_raw(c3);
        Ok(())
    }

    /// Loop deletion. Requires the root face to be a monogon, and refuses to
    /// shrink below the one-vertex figure-eight (the chain's size floor).
    pub fn ri_minus(&mut self) -> Result<(), MoveFailure> {
        let r = self.root().0;
        if self.face_next(Flag(r)).0 != r {
            return Err(MoveFailure::MonogonRequired);
        }
        if self.n() <= 1 {
            return Err(MoveFailure::SizeCap);
        }
        let c0 = self.sigma(Flag(r)).0;
        let c1 = self.sigma(Flag(c0)).0;
        let c2 = self.sigma(Flag(c1)).0;
        debug_assert_eq!(self.tau(Flag(r)).0, c2, "monogon loop must close on the root vertex");
        let u = self.tau(Flag(c1)).0;
        let w = self.tau(Flag(c0)).0;
        // A loop vertex with a second loop would be a detached figure-eight;
        // connectivity plus n >= 2 rules that out.
        debug_assert!(![r, c0, c1, c2].contains(&u) && ![r, c0, c1, c2].contains(&w));
        self.free_flag(c0);
        self.free_flag(c1);
        self.free_flag(c2);
        self.free_flag(r);
        self.set_edge(u, w);
        self.set_root_raw(u);
        Ok(())
    }

    /// Bigon insertion between the root edge and the edge of the k-th next
    /// flag around the root face, `1 <= k <= d-1`. Adds two vertices and
    /// re-roots onto the new bigon.
    pub fn rii_plus(&mut self, k: u32) -> Result<(), MoveFailure> {
        let r = self.root().0;
        let d = self.face_degree(Flag(r));
        if d == 1 {
            return Err(MoveFailure::FaceIsMonogon);
        }
        assert!(k >= 1 && k < d, "rii_plus: k = {k} outside 1..{d}");
        let mut tf = Flag(r);
        for _ in 0..k {
            tf = self.face_next(tf);
        }
        let t = tf.0;
        let s = self.tau(Flag(r)).0;
        let u = self.tau(Flag(t)).0;
        // A curve's underlying graph is Eulerian hence bridgeless, so an edge
        // never borders its own face twice: the chord flag cannot be tau(r).
        debug_assert!(t != s);

        let f5 = self.alloc_flag();
        let f6 = self.alloc_flag();
        let f7 = self.alloc_flag();
        let f8 = self.alloc_flag();
        let f9 = self.alloc_flag();
        let f10 = self.alloc_flag();
        let f11 = self.alloc_flag();
        let f12 = self.alloc_flag();
        // vertices (f6 f10 f9 f7) and (f5 f8 f12 f11)
        self.set_sigma(f6, f10);
        self.set_sigma(f10, f9);
        self.set_sigma(f9, f7);
        self.set_sigma(f7, f6);
        self.set_sigma(f5, f8);
        self.set_sigma(f8, f12);
        self.set_sigma(f12, f11);
        self.set_sigma(f11, f5);
        // the edges {r,s} and {t,u} become two crossings and the bigon edges
        self.set_edge(s, f9);
        self.set_edge(t, f10);
        self.set_edge(f7, f8);
        self.set_edge(f5, f6);
        self.set_edge(r, f12);
        self.set_edge(u, f11);
        self.set_root_raw(f6);
        Ok(())
    }

    fn bigon_site(&self) -> Result<BigonSite, MoveFailure> {
        let r = self.root().0;
        let f8 = self.face_next(Flag(r)).0;
        if f8 == r || self.face_next(Flag(f8)).0 != r {
            return Err(MoveFailure::BigonRequired);
        }
        let f5 = self.tau(Flag(r)).0;
        let f10 = self.sigma(Flag(r)).0;
        let f9 = self.sigma(Flag(f10)).0;
        let f7 = self.sigma(Flag(f9)).0;
        // Both bigon edges on one vertex means the whole component is the
        // figure-eight; deletion would drop below the floor.
        if [r, f10, f9, f7].contains(&f5) {
            return Err(MoveFailure::ExteriorFacesNotDistinct);
        }
        debug_assert_eq!(self.sigma(Flag(f5)).0, f8);
        let f12 = self.sigma(Flag(f8)).0;
        let f11 = self.sigma(Flag(f12)).0;
        let inner = [r, f10, f9, f7, f5, f8, f12, f11];
        let outward = [
            self.tau(Flag(f9)).0,
            self.tau(Flag(f10)).0,
            self.tau(Flag(f12)).0,
            self.tau(Flag(f11)).0,
        ];
        // An outward edge folding back onto the bigon pair (a spiral) means
        // the deletion would split off the inner loop as a separate circle.
        if outward.iter().any(|o| inner.contains(o)) {
            return Err(MoveFailure::ExteriorFacesNotDistinct);
        }
        // The two faces the deletion would merge: the face of tau(sigma(r))
        // and the face of sigma^3(tau(r)). They must be distinct orbits or
        // the merge changes the face count and with it the genus.
        let e1 = self.tau(Flag(f10)).0;
        let e2 = f11;
        let mut len1 = 1u32;
        let mut g = self.face_next(Flag(e1));
        while g.0 != e1 {
            if g.0 == e2 {
                return Err(MoveFailure::ExteriorFacesNotDistinct);
            }
            len1 += 1;
            g = self.face_next(g);
        }
        let len2 = self.face_degree(Flag(e2));
        let merged = len1 + len2 - 2;
        Ok(BigonSite { inner, outward, merged_degree: merged })
    }

    /// Degree `d` of the face a bigon deletion at the root would produce;
    /// both chains gate the deletion with probability `1/(d-1)`. Fails with
    /// the same reasons as [`rii_minus`](Self::rii_minus) short of `d < 2`.
    pub fn merged_bigon_degree(&self) -> Result<u32, MoveFailure> {
        Ok(self.bigon_site()?.merged_degree)
    }

    /// Bigon deletion, the inverse of [`rii_plus`](Self::rii_plus). Removes
    /// the two root-bigon vertices and rejoins the four outward edges.
    pub fn rii_minus(&mut self) -> Result<(), MoveFailure> {
        let site = self.bigon_site()?;
        if site.merged_degree < 2 {
            // No bigon insertion can produce a site like this, so the
            // deletion must fail to keep the chain reversible.
            return Err(MoveFailure::MergedFaceTooSmall);
        }
        let [s, t, p, q] = site.outward;
        for f in site.inner {
            self.free_flag(f);
        }
        self.set_edge(p, s);
        self.set_edge(t, q);
        self.set_root_raw(p);
        Ok(())
    }

    /// Triangle flip. Requires the root face to have exactly three flags on
    /// three distinct vertices. Keeps tau and the root flag fixed and
    /// rebuilds the three sigma cycles on the far side of the triangle, so
    /// applying it twice at the same root is the identity.
    pub fn riii(&mut self) -> Result<(), MoveFailure> {
        let r = self.root().0;
        let s = self.face_next(Flag(r)).0;
        if s == r {
            return Err(MoveFailure::DegenerateTriangle);
        }
        let t = self.face_next(Flag(s)).0;
        if t == r || self.face_next(Flag(t)).0 != r {
            return Err(MoveFailure::DegenerateTriangle);
        }
        let vr = self.vertex_rep(Flag(r));
        let vs = self.vertex_rep(Flag(s));
        let vt = self.vertex_rep(Flag(t));
        if vr == vs || vr == vt || vs == vt {
            return Err(MoveFailure::DegenerateTriangle);
        }
        // Corner flags around the triangle (r, s, t) and their vertices.
        let a7 = self.sigma_inv(Flag(r)).0;
        let a1 = self.sigma(Flag(r)).0;
        let a2 = self.sigma(Flag(a1)).0;
        let a9 = self.tau(Flag(r)).0;
        debug_assert_eq!(self.sigma(Flag(a9)).0, s);
        let a4 = self.sigma(Flag(s)).0;
        let a3 = self.sigma(Flag(a4)).0;
        let a12 = self.tau(Flag(s)).0;
        debug_assert_eq!(self.sigma(Flag(a12)).0, t);
        let a5 = self.sigma(Flag(t)).0;
        let a11 = self.sigma(Flag(a5)).0;
        debug_assert_eq!(self.tau(Flag(t)).0, a7);
        // Slide each strand across the opposite crossing: the same twelve
        // flags and the same edges, with the three vertices rebuilt.
        self.set_sigma(a4, t);
        self.set_sigma(t, r);
        self.set_sigma(r, a11);
        self.set_sigma(a11, a4);
        self.set_sigma(a2, a5);
        self.set_sigma(a5, a9);
        self.set_sigma(a9, a12);
        self.set_sigma(a12, a2);
        self.set_sigma(a1, s);
        self.set_sigma(s, a7);
        self.set_sigma(a7, a3);
        self.set_sigma(a3, a1);
        Ok(())
    }
}

/// Standard 3-crossing trefoil shadow, rooted so the root face is the
/// nondegenerate central triangle. A handy fixture for tests and docs.
pub fn trefoil_shadow() -> CombMap {
    let sigma = vec![1, 2, 3, 0, 5, 6, 7, 4, 9, 10, 11, 8];
    let tau = vec![7, 6, 9, 8, 11, 10, 1, 0, 3, 2, 5, 4];
    let m = CombMap::from_arrays(sigma, tau, 0).expect("static arrays");
    debug_assert!(m.validate().ok());
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    fn code(m: &CombMap) -> crate::combmap::CanonicalCode {
        m.canonical_code().unwrap()
    }

    #[test]
    fn ri_plus_then_minus_round_trip() {
        let fig8 = CombMap::new_figure_eight();
        let before = code(&fig8);
        let mut m = fig8.clone();
        m.ri_plus().unwrap();
        assert!(m.validate().ok());
        assert_eq!(m.n(), 2);
        // the new root face is a monogon
        assert_eq!(m.face_degree(m.root()), 1);
        m.ri_minus().unwrap();
        assert!(m.validate().ok());
        assert_eq!(code(&m), before);
        assert_eq!(m.root(), fig8.root());
    }

    #[test]
    fn ri_minus_requires_monogon_and_size_floor() {
        let mut m = CombMap::new_figure_eight();
        // root 0 sits on the bigon
        assert_eq!(m.ri_minus(), Err(MoveFailure::MonogonRequired));
        m.set_root(Flag(1)).unwrap(); // monogon, but n would drop to 0
        assert_eq!(m.ri_minus(), Err(MoveFailure::SizeCap));
    }

    #[test]
    fn rii_plus_then_minus_round_trip() {
        let fig8 = CombMap::new_figure_eight();
        let before = code(&fig8);
        let mut m = fig8.clone();
        m.rii_plus(1).unwrap();
        assert!(m.validate().ok(), "{:?}", m.validate().violations);
        assert_eq!(m.n(), 3);
        assert_eq!(m.face_degree(m.root()), 2);
        // inverse consistency: the merged degree equals the original face degree
        assert_eq!(m.merged_bigon_degree().unwrap(), 2);
        m.rii_minus().unwrap();
        assert!(m.validate().ok());
        assert_eq!(code(&m), before);
        assert_eq!(m.root().0, 0);
    }

    #[test]
    fn rii_plus_fails_on_monogon_face() {
        let mut m = CombMap::new_figure_eight();
        m.set_root(Flag(1)).unwrap();
        assert_eq!(m.rii_plus(1), Err(MoveFailure::FaceIsMonogon));
    }

    #[test]
    fn rii_minus_on_figure_eight_bigon_fails() {
        // Both bigon edges lie on the single vertex: the exterior faces
        // coincide and the deletion is impossible.
        let mut m = CombMap::new_figure_eight();
        assert_eq!(m.rii_minus(), Err(MoveFailure::ExteriorFacesNotDistinct));
    }

    #[test]
    fn rii_minus_rejects_spiral_attachment() {
        // Two nested curls forming an S: the root bigon's outward edges fold
        // back onto the bigon vertices. Deleting it would split off a circle.
        let sigma = vec![1, 2, 3, 0, 5, 6, 7, 4, 9, 10, 11, 8, 13, 14, 15, 12];
        let tau = vec![4, 2, 1, 5, 0, 3, 14, 15, 12, 10, 9, 13, 8, 11, 6, 7];
        let mut m = CombMap::from_arrays(sigma, tau, 0).unwrap();
        assert!(m.validate().ok(), "{:?}", m.validate().violations);
        assert_eq!(m.face_degree(Flag(0)), 2);
        assert_eq!(m.rii_minus(), Err(MoveFailure::ExteriorFacesNotDistinct));
    }

    #[test]
    fn trefoil_gauss_code_interleaves() {
        let m = trefoil_shadow();
        assert!(m.validate().ok());
        assert_eq!(m.gauss_code().unwrap(), vec![1, 2, 3, 1, 2, 3]);
    }

    #[test]
    fn riii_round_trip_on_trefoil() {
        let tre = trefoil_shadow();
        let before = code(&tre);
        let mut m = tre.clone();
        m.riii().unwrap();
        assert!(m.validate().ok(), "{:?}", m.validate().violations);
        assert_eq!(m.n(), 3);
        assert_ne!(code(&m), before, "the flip changes the curve");
        m.riii().unwrap();
        assert!(m.validate().ok());
        assert_eq!(code(&m), before);
        assert_eq!(m.root().0, 0);
    }

    #[test]
    fn riii_requires_nondegenerate_triangle() {
        let mut m = CombMap::new_figure_eight();
        m.set_root(Flag(1)).unwrap(); // monogon
        assert_eq!(m.riii(), Err(MoveFailure::DegenerateTriangle));
        m.set_root(Flag(0)).unwrap(); // bigon
        assert_eq!(m.riii(), Err(MoveFailure::DegenerateTriangle));
    }

    #[test]
    fn move_deltas_match_face_count() {
        // RI+ adds one face, RII+ adds two, RIII keeps the count.
        let count_faces = |m: &CombMap| -> usize {
            let mut seen = std::collections::HashSet::new();
            let mut c = 0;
            for f in m.live_flags() {
                let face = m.face_of(f).unwrap();
                if seen.insert(face.iter().map(|g| g.0).min().unwrap()) {
                    c += 1;
                }
            }
            c
        };
        let mut m = CombMap::new_figure_eight();
        assert_eq!(count_faces(&m), 3);
        m.ri_plus().unwrap();
        assert_eq!(count_faces(&m), 4);
        m.rii_plus(1).unwrap();
        assert_eq!(count_faces(&m), 6);
        let mut t = trefoil_shadow();
        t.riii().unwrap();
        assert_eq!(count_faces(&t), 5);
    }
}
