//! Exact nearest-neighbour index over 3D points.
//!
//! An axis-aligned splitting tree whose query results are *defined* to be
//! identical to a brute-force scan: the reported neighbour is the
//! lexicographic minimum of `(squared distance, original index)` over all
//! points, with squared distances computed by the same `dist2` everywhere.
//!
//! Pruning is strict (`gap² > best`), and because IEEE rounding is
//! monotone, the computed squared distance of any far-side point is
//! always `>=` the computed squared gap — so pruning never discards a
//! point the brute-force scan would have chosen, even at the rounding
//! margin.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Squared Euclidean distance with a fixed evaluation order.
#[inline]
pub(crate) fn dist2<S: Scalar>(a: &[S; 3], b: &[S; 3]) -> S {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    (dx * dx + dy * dy) + dz * dz
}

enum Node<S> {
    Leaf {
        start: u32,
        end: u32,
    },
    Split {
        axis: u8,
        /// Maximum coordinate of the left subtree on `axis`.
        lo_max: S,
        /// Minimum coordinate of the right subtree on `axis`.
        hi_min: S,
        left: u32,
        right: u32,
    },
}

/// Nearest-neighbour index over a fixed point set.
///
/// Below a configurable size threshold (default 64) the structure is a
/// plain exhaustive scan; above it, an axis-aligned splitting tree with a
/// configurable leaf size (default 16).
pub struct NnTree<S> {
    pts: Vec<[S; 3]>,
    /// Permutation of original indices; leaves own contiguous ranges.
    order: Vec<u32>,
    nodes: Vec<Node<S>>,
    root: u32,
    brute: bool,
}

/// Size at or below which the index is a plain scan.
pub const DEFAULT_BRUTE_THRESHOLD: usize = 64;
/// Points per tree leaf.
pub const DEFAULT_LEAF_SIZE: usize = 16;

impl<S: Scalar> NnTree<S> {
    /// Build with default leaf size and brute-force threshold.
    pub fn build(points: Vec<[S; 3]>) -> Result<Self> {
        Self::build_with(points, DEFAULT_LEAF_SIZE, DEFAULT_BRUTE_THRESHOLD)
    }

    /// Build with explicit leaf size (min 1) and brute-force threshold.
    pub fn build_with(points: Vec<[S; 3]>, leaf_size: usize, brute_threshold: usize) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyCloud("NnTree::build"));
        }
        if points.iter().any(|p| !p.iter().all(|c| c.is_finite())) {
            return Err(Error::NonFinite("NnTree::build input".into()));
        }
        let n = points.len();
        let mut tree = NnTree {
            pts: points,
            order: (0..n as u32).collect(),
            nodes: Vec::new(),
            root: 0,
            brute: n <= brute_threshold,
        };
        if !tree.brute {
            tree.root = tree.build_range(0, n, leaf_size.max(1));
        }
        Ok(tree)
    }

    /// Number of indexed points.
    pub fn len(&self) -> usize {
        self.pts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pts.is_empty()
    }

    /// Indexed points, in original order.
    pub fn points(&self) -> &[[S; 3]] {
        &self.pts
    }

    fn coord(&self, oi: u32, axis: usize) -> S {
        self.pts[oi as usize][axis]
    }

    fn build_range(&mut self, start: usize, end: usize, leaf_size: usize) -> u32 {
        let len = end - start;
        if len <= leaf_size {
            self.nodes.push(Node::Leaf {
                start: start as u32,
                end: end as u32,
            });
            return (self.nodes.len() - 1) as u32;
        }
        // Split on the axis with the largest coordinate spread (lowest
        // axis index on ties) for balanced boxes regardless of input order.
        let mut axis = 0usize;
        let mut best_spread = S::neg_infinity();
        for a in 0..3 {
            let mut lo = S::infinity();
            let mut hi = S::neg_infinity();
            for &oi in &self.order[start..end] {
                let c = self.coord(oi, a);
                if c < lo {
                    lo = c;
                }
                if c > hi {
                    hi = c;
                }
            }
            let spread = hi - lo;
            if spread > best_spread {
                best_spread = spread;
                axis = a;
            }
        }
        // Total order (coordinate, original index) makes the layout
        // deterministic even with duplicate coordinates.
        let pts = &self.pts;
        self.order[start..end].sort_unstable_by(|&a, &b| {
            let ca = pts[a as usize][axis];
            let cb = pts[b as usize][axis];
            ca.partial_cmp(&cb)
                .expect("finite coordinates are totally ordered")
                .then(a.cmp(&b))
        });
        let mid = start + len / 2;
        let lo_max = self.coord(self.order[mid - 1], axis);
        let hi_min = self.coord(self.order[mid], axis);
        let left = self.build_range(start, mid, leaf_size);
        let right = self.build_range(mid, end, leaf_size);
        self.nodes.push(Node::Split {
            axis: axis as u8,
            lo_max,
            hi_min,
            left,
            right,
        });
        (self.nodes.len() - 1) as u32
    }

    /// Index and squared distance of the nearest point to `q`.
    ///
    /// Exactly equal — index and distance — to an ascending brute-force
    /// scan keeping strictly smaller distances.
    pub fn nearest(&self, q: &[S; 3]) -> (usize, S) {
        let mut best = (usize::MAX, S::infinity());
        if self.brute {
            self.scan_range(0, self.pts.len(), q, &mut best);
        } else {
            self.search(self.root, q, &mut best);
        }
        best
    }

    fn scan_range(&self, start: usize, end: usize, q: &[S; 3], best: &mut (usize, S)) {
        for &oi in &self.order[start..end] {
            let i = oi as usize;
            let d = dist2(&self.pts[i], q);
            if d < best.1 || (d == best.1 && i < best.0) {
                *best = (i, d);
            }
        }
    }

    fn search(&self, node: u32, q: &[S; 3], best: &mut (usize, S)) {
        match &self.nodes[node as usize] {
            &Node::Leaf { start, end } => {
                self.scan_range(start as usize, end as usize, q, best);
            }
            &Node::Split {
                axis,
                lo_max,
                hi_min,
                left,
                right,
            } => {
                let qa = q[axis as usize];
                let zero = S::zero();
                // Lower bounds on the axis distance to each side,
                // computed with the same `a - b` form as dist2 so that
                // monotone rounding keeps pruning conservative.
                let gap_left = {
                    let g = qa - lo_max;
                    if g > zero {
                        g
                    } else {
                        zero
                    }
                };
                let gap_right = {
                    let g = hi_min - qa;
                    if g > zero {
                        g
                    } else {
                        zero
                    }
                };
                let (first, gfirst, second, gsecond) = if gap_left <= gap_right {
                    (left, gap_left, right, gap_right)
                } else {
                    (right, gap_right, left, gap_left)
                };
                if !(gfirst * gfirst > best.1) {
                    self.search(first, q, best);
                }
                if !(gsecond * gsecond > best.1) {
                    self.search(second, q, best);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent reference: ascending scan, strictly-smaller updates.
    fn brute_nearest(pts: &[[f64; 3]], q: &[f64; 3]) -> (usize, f64) {
        let mut bi = usize::MAX;
        let mut bd = f64::INFINITY;
        for (i, p) in pts.iter().enumerate() {
            let dx = p[0] - q[0];
            let dy = p[1] - q[1];
            let dz = p[2] - q[2];
            let d = (dx * dx + dy * dy) + dz * dz;
            if d < bd {
                bd = d;
                bi = i;
            }
        }
        (bi, bd)
    }

    fn pseudo_points(n: usize, salt: u64) -> Vec<[f64; 3]> {
        // Deterministic, irregular, with some duplicates mixed in.
        let mut out = Vec::with_capacity(n);
        let mut state = salt.wrapping_mul(0x9E3779B97F4A7C15).wrapping_add(1);
        let mut next = || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
        };
        for i in 0..n {
            if i % 17 == 16 && i > 0 {
                out.push(out[i - 3]); // exact duplicate
            } else {
                out.push([next(), next(), next()]);
            }
        }
        out
    }

    #[test]
    fn empty_input_is_an_error() {
        assert!(NnTree::<f64>::build(vec![]).is_err());
    }

    #[test]
    fn stored_points_are_their_own_neighbours() {
        let pts = pseudo_points(300, 7);
        let tree = NnTree::build(pts.clone()).unwrap();
        for (i, p) in pts.iter().enumerate() {
            let (bi, bd) = tree.nearest(p);
            // A duplicate earlier in the list may win the tie; either way
            // the distance is exactly zero and matches brute force.
            let (ri, rd) = brute_nearest(&pts, p);
            assert_eq!(bd, 0.0, "point {} not found at distance 0", i);
            assert_eq!((bi, bd), (ri, rd));
        }
    }

    #[test]
    fn matches_brute_force_on_random_queries() {
        // Big enough for real tree structure (well above the scan threshold).
        let pts = pseudo_points(1500, 42);
        let tree = NnTree::build(pts.clone()).unwrap();
        let queries = pseudo_points(1000, 1337);
        for q in &queries {
            let got = tree.nearest(q);
            let want = brute_nearest(&pts, q);
            assert_eq!(got.0, want.0, "index mismatch for query {:?}", q);
            assert_eq!(got.1.to_bits(), want.1.to_bits(), "distance bits differ");
        }
        // Far-away and axis-aligned queries stress the pruning bounds.
        for q in [
            [100.0, 0.0, 0.0],
            [-100.0, -100.0, -100.0],
            [0.0, 0.0, 1e6],
            [0.5, 0.5, 0.5],
        ] {
            assert_eq!(tree.nearest(&q), brute_nearest(&pts, &q));
        }
    }

    #[test]
    fn equidistant_pair_resolves_to_lower_index() {
        // Two points symmetric about the query; several padding points.
        let mut pts = vec![[2.0, 0.0, 0.0], [-2.0, 0.0, 0.0]];
        for k in 0..100 {
            pts.push([5.0 + k as f64, 5.0, 5.0]);
        }
        let tree = NnTree::build_with(pts.clone(), 4, 8).unwrap();
        let (i, d) = tree.nearest(&[0.0, 0.0, 0.0]);
        assert_eq!(i, 0);
        assert_eq!(d, 4.0);
        // And brute agrees.
        assert_eq!(brute_nearest(&pts, &[0.0, 0.0, 0.0]), (0, 4.0));
    }

    #[test]
    fn small_inputs_use_the_scan_and_agree_too() {
        let pts = pseudo_points(48, 5); // at or below the scan threshold
        let tree = NnTree::build(pts.clone()).unwrap();
        for q in pseudo_points(200, 99) {
            assert_eq!(tree.nearest(&q), brute_nearest(&pts, &q));
        }
    }

    #[test]
    fn works_in_single_precision_as_well() {
        let pts64 = pseudo_points(700, 11);
        let pts32: Vec<[f32; 3]> = pts64
            .iter()
            .map(|p| [p[0] as f32, p[1] as f32, p[2] as f32])
            .collect();
        let tree = NnTree::build(pts32.clone()).unwrap();
        for q64 in pseudo_points(300, 23) {
            let q = [q64[0] as f32, q64[1] as f32, q64[2] as f32];
            // f32 brute reference.
            let mut bi = usize::MAX;
            let mut bd = f32::INFINITY;
            for (i, p) in pts32.iter().enumerate() {
                let dx = p[0] - q[0];
                let dy = p[1] - q[1];
                let dz = p[2] - q[2];
                let d = (dx * dx + dy * dy) + dz * dz;
                if d < bd {
                    bd = d;
                    bi = i;
                }
            }
            assert_eq!(tree.nearest(&q), (bi, bd));
        }
    }
}
