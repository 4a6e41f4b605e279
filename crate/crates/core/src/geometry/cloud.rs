//! Point-cloud storage and centroid normalization.

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Scalar;

/// One 3D point in single precision.
pub type Point3 = [f32; 3];

/// An unordered set of 3D points (stored in a stable order).
///
/// Coordinates are kept in `f32` — the interchange precision of the file
/// formats — while all geometric arithmetic (centroids, distances,
/// rotations) runs in `f64` before rounding back. Every constructor
/// rejects non-finite coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct PointCloud {
    points: Vec<Point3>,
}

impl PointCloud {
    /// Build from points, rejecting NaN/infinite coordinates.
    pub fn new(points: Vec<Point3>) -> Result<Self> {
        for (i, p) in points.iter().enumerate() {
            if !p.iter().all(|c| c.is_finite()) {
                return Err(Error::NonFinite(format!("point {} of point cloud", i)));
            }
        }
        Ok(PointCloud { points })
    }

    /// Number of points.
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point3] {
        &self.points
    }

    /// Arithmetic mean of the points, accumulated in `f64`.
    ///
    /// Fails on an empty cloud.
    pub fn centroid(&self) -> Result<[f64; 3]> {
        if self.points.is_empty() {
            return Err(Error::EmptyCloud("centroid"));
        }
        let mut acc = [0.0f64; 3];
        for p in &self.points {
            for k in 0..3 {
                acc[k] += p[k] as f64;
            }
        }
        let n = self.points.len() as f64;
        Ok([acc[0] / n, acc[1] / n, acc[2] / n])
    }

    /// Translate all points so the centroid moves to the origin.
    ///
    /// Returns the normalized cloud and the original centroid, so the
    /// normalization can be inverted with [`PointCloud::translate`].
    pub fn normalize_centroid(&self) -> Result<(PointCloud, [f64; 3])> {
        let c = self.centroid()?;
        let moved = self.translate([-c[0], -c[1], -c[2]])?;
        Ok((moved, c))
    }

    /// Translate all points by `t` (computed in `f64`, rounded to `f32`).
    pub fn translate(&self, t: [f64; 3]) -> Result<PointCloud> {
        let points = self
            .points
            .iter()
            .map(|p| {
                [
                    (p[0] as f64 + t[0]) as f32,
                    (p[1] as f64 + t[1]) as f32,
                    (p[2] as f64 + t[2]) as f32,
                ]
            })
            .collect();
        PointCloud::new(points)
    }

    /// Rows of the cloud as an `n x 3` matrix in the model's precision.
    pub fn to_matrix<S: Scalar>(&self) -> Matrix<S> {
        let mut data = Vec::with_capacity(self.points.len() * 3);
        for p in &self.points {
            data.push(S::from_f64(p[0] as f64));
            data.push(S::from_f64(p[1] as f64));
            data.push(S::from_f64(p[2] as f64));
        }
        Matrix::from_vec(self.points.len(), 3, data).expect("3 entries pushed per point")
    }

    /// Build from an `n x 3` matrix, rounding through `f64` to `f32`.
    pub fn from_matrix<S: Scalar>(m: &Matrix<S>) -> Result<PointCloud> {
        if m.cols() != 3 {
            return Err(Error::Shape {
                op: "PointCloud::from_matrix",
                detail: format!("expected 3 columns, got {}", m.cols()),
            });
        }
        let points = (0..m.rows())
            .map(|r| {
                let row = m.row(r);
                [
                    row[0].to_f64() as f32,
                    row[1].to_f64() as f32,
                    row[2].to_f64() as f32,
                ]
            })
            .collect();
        PointCloud::new(points)
    }

    /// Rows as `f64` triples (for exact geometric arithmetic).
    pub fn points_f64(&self) -> Vec<[f64; 3]> {
        self.points
            .iter()
            .map(|p| [p[0] as f64, p[1] as f64, p[2] as f64])
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_finite_points() {
        assert!(PointCloud::new(vec![[0.0, f32::NAN, 1.0]]).is_err());
        assert!(PointCloud::new(vec![[f32::INFINITY, 0.0, 1.0]]).is_err());
    }

    #[test]
    fn centroid_of_empty_cloud_is_an_error() {
        let c = PointCloud::new(vec![]).unwrap();
        assert!(c.centroid().is_err());
        assert!(c.normalize_centroid().is_err());
    }

    #[test]
    fn centroid_hand_example() {
        let c = PointCloud::new(vec![[0.0, 0.0, 0.0], [2.0, 4.0, -2.0]]).unwrap();
        assert_eq!(c.centroid().unwrap(), [1.0, 2.0, -1.0]);
    }

    #[test]
    fn normalized_centroid_is_at_origin() {
        let pts: Vec<Point3> = (0..257)
            .map(|i| {
                let x = (i as f32 * 0.37).sin() * 5.0 + 100.0;
                let y = (i as f32 * 0.11).cos() * 3.0 - 40.0;
                let z = (i as f32 * 0.91).sin() * 7.0;
                [x, y, z]
            })
            .collect();
        let cloud = PointCloud::new(pts).unwrap();
        let (norm, c) = cloud.normalize_centroid().unwrap();
        let nc = norm.centroid().unwrap();
        for k in 0..3 {
            assert!(nc[k].abs() < 1e-6, "residual centroid {:?}", nc);
        }
        // Translating back recovers the original to f32 rounding.
        let back = norm.translate(c).unwrap();
        for (p, q) in back.points().iter().zip(cloud.points().iter()) {
            for k in 0..3 {
                assert!((p[k] - q[k]).abs() <= 2.0 * (q[k].abs() * 1e-7 + 1e-7));
            }
        }
    }

    #[test]
    fn matrix_round_trip_preserves_f32_bits() {
        let cloud = PointCloud::new(vec![[0.1, -2.5, 3.25], [1e-20, 7.0, -0.0]]).unwrap();
        let m: Matrix<f64> = cloud.to_matrix();
        let back = PointCloud::from_matrix(&m).unwrap();
        for (p, q) in back.points().iter().zip(cloud.points().iter()) {
            for k in 0..3 {
                assert_eq!(p[k].to_bits(), q[k].to_bits());
            }
        }
    }
}
