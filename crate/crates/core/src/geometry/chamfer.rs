//! Symmetric Chamfer distance between point sets.

use crate::error::{Error, Result};
use crate::exec;
use crate::linalg::Matrix;
use crate::scalar::Scalar;

use super::cloud::PointCloud;
use super::kdtree::{dist2, NnTree};

/// How nearest neighbours are found inside Chamfer computations.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NnStrategy {
    /// Splitting-tree index (exact; the default).
    Accelerated,
    /// Plain exhaustive scan.
    Exhaustive,
}

impl NnStrategy {
    fn build_tree<S: Scalar>(self, pts: Vec<[S; 3]>) -> Result<NnTree<S>> {
        match self {
            // Forcing the threshold to usize::MAX keeps the index a scan.
            NnStrategy::Exhaustive => NnTree::build_with(pts, 1, usize::MAX),
            NnStrategy::Accelerated => NnTree::build(pts),
        }
    }
}

fn rows3<S: Scalar>(m: &Matrix<S>) -> Result<Vec<[S; 3]>> {
    if m.cols() != 3 {
        return Err(Error::Shape {
            op: "chamfer rows",
            detail: format!("expected 3 columns, got {}", m.cols()),
        });
    }
    Ok((0..m.rows())
        .map(|r| {
            let row = m.row(r);
            [row[0], row[1], row[2]]
        })
        .collect())
}

fn one_direction<S: Scalar>(from: &[[S; 3]], to_tree: &NnTree<S>) -> S {
    // Parallel map in point order, then a sequential in-order reduction:
    // bit-identical across thread counts.
    let dists = exec::map_slice(from, |p| to_tree.nearest(p).1);
    let mut acc = S::zero();
    for d in dists {
        acc = acc + d;
    }
    acc
}

/// Symmetric sum-form Chamfer distance, in `f64`:
/// `Σ_a min_b |a-b|² + Σ_b min_a |b-a|²`.
///
/// Grows with point count; see [`chamfer_mean`] for the per-point form.
/// Zero for identical point sets. Fails on empty inputs.
pub fn chamfer(a: &PointCloud, b: &PointCloud, strategy: NnStrategy) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyCloud("chamfer"));
    }
    let ap = a.points_f64();
    let bp = b.points_f64();
    let at = strategy.build_tree(ap.clone())?;
    let bt = strategy.build_tree(bp.clone())?;
    Ok(one_direction(&ap, &bt) + one_direction(&bp, &at))
}

/// Mean-per-point Chamfer distance, in `f64`:
/// `(1/|A|) Σ_a min_b |a-b|² + (1/|B|) Σ_b min_a |b-a|²`.
///
/// Each direction is normalized by its own point count, so values are
/// comparable across clouds of different sizes (used when swapping
/// templates of different resolutions).
pub fn chamfer_mean(a: &PointCloud, b: &PointCloud, strategy: NnStrategy) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyCloud("chamfer_mean"));
    }
    let ap = a.points_f64();
    let bp = b.points_f64();
    let at = strategy.build_tree(ap.clone())?;
    let bt = strategy.build_tree(bp.clone())?;
    let fwd = one_direction(&ap, &bt) / ap.len() as f64;
    let rev = one_direction(&bp, &at) / bp.len() as f64;
    Ok(fwd + rev)
}

/// Sum-form Chamfer distance between two `n x 3` matrices in the model's
/// working precision. Used on hot paths (rotation grid search) where the
/// deformed points are already in `S`.
pub fn chamfer_rows<S: Scalar>(a: &Matrix<S>, b: &Matrix<S>, strategy: NnStrategy) -> Result<S> {
    let ap = rows3(a)?;
    let bp = rows3(b)?;
    if ap.is_empty() || bp.is_empty() {
        return Err(Error::EmptyCloud("chamfer_rows"));
    }
    let at = strategy.build_tree(ap.clone())?;
    let bt = strategy.build_tree(bp.clone())?;
    Ok(one_direction(&ap, &bt) + one_direction(&bp, &at))
}

/// Nearest-neighbour index in `to` for every row of `from`.
///
/// The returned indices are what gradient-carrying Chamfer losses freeze
/// at forward time (the matching is piecewise constant in the points).
pub fn nn_indices_rows<S: Scalar>(from: &Matrix<S>, to_tree: &NnTree<S>) -> Result<Vec<usize>> {
    let fp = rows3(from)?;
    Ok(exec::map_slice(&fp, |p| to_tree.nearest(p).0))
}

/// Squared distance helper shared with the tree (fixed evaluation order).
pub(crate) fn point_dist2<S: Scalar>(a: &[S; 3], b: &[S; 3]) -> S {
    dist2(a, b)
}
