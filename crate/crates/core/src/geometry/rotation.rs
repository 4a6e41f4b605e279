//! Rotations used for pose alignment: a yaw about the y axis followed by
//! a roll about the z axis.

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Scalar;

use super::cloud::PointCloud;

/// Half-open bound magnitudes for the two angles.
pub const ALPHA_MAX: f64 = std::f64::consts::FRAC_PI_2;
pub const BETA_MAX: f64 = std::f64::consts::FRAC_PI_4;

/// A rotation `R = R_z(beta) · R_y(alpha)`: first a counterclockwise
/// rotation by `alpha` about the y axis, then by `beta` about the z axis.
///
/// `alpha` is restricted to `[-pi/2, pi/2]` and `beta` to `[-pi/4, pi/4]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RotationPair {
    alpha: f64,
    beta: f64,
}

impl RotationPair {
    /// Validated constructor; rejects out-of-range or non-finite angles.
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !alpha.is_finite() || !beta.is_finite() {
            return Err(Error::NonFinite("rotation angles".into()));
        }
        if alpha.abs() > ALPHA_MAX {
            return Err(Error::Contract(format!(
                "alpha {} outside [-pi/2, pi/2]",
                alpha
            )));
        }
        if beta.abs() > BETA_MAX {
            return Err(Error::Contract(format!(
                "beta {} outside [-pi/4, pi/4]",
                beta
            )));
        }
        Ok(RotationPair { alpha, beta })
    }

    /// The identity rotation.
    pub fn identity() -> Self {
        RotationPair {
            alpha: 0.0,
            beta: 0.0,
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Row-major 3x3 matrix of `R_z(beta) · R_y(alpha)`.
    ///
    /// Counterclockwise convention (right-handed axes):
    /// `R_y(a)` maps `(1,0,0)` to `(cos a, 0, -sin a)`, and
    /// `R_z(b)` maps `(1,0,0)` to `(cos b, sin b, 0)`.
    pub fn matrix(&self) -> [[f64; 3]; 3] {
        let (sa, ca) = self.alpha.sin_cos();
        let (sb, cb) = self.beta.sin_cos();
        // R_y = [[ca, 0, sa], [0, 1, 0], [-sa, 0, ca]]
        // R_z = [[cb, -sb, 0], [sb, cb, 0], [0, 0, 1]]
        [
            [cb * ca, -sb, cb * sa],
            [sb * ca, cb, sb * sa],
            [-sa, 0.0, ca],
        ]
    }
}

/// Rotate one point (exact `f64` arithmetic).
pub fn rotate_point(m: &[[f64; 3]; 3], p: [f64; 3]) -> [f64; 3] {
    [
        m[0][0] * p[0] + m[0][1] * p[1] + m[0][2] * p[2],
        m[1][0] * p[0] + m[1][1] * p[1] + m[1][2] * p[2],
        m[2][0] * p[0] + m[2][1] * p[1] + m[2][2] * p[2],
    ]
}

/// Apply the rotation to every point of a cloud (math in `f64`,
/// storage rounded back to `f32`).
pub fn rotation_apply(cloud: &PointCloud, rot: &RotationPair) -> PointCloud {
    let m = rot.matrix();
    let pts = cloud
        .points_f64()
        .iter()
        .map(|&p| {
            let q = rotate_point(&m, p);
            [q[0] as f32, q[1] as f32, q[2] as f32]
        })
        .collect();
    PointCloud::new(pts).expect("rotation of finite points is finite")
}

/// Apply the inverse rotation (the transpose, since rotations are
/// orthogonal). `rotation_apply_inverse(rotation_apply(c, r), r)` recovers
/// `c` up to `f32` rounding.
pub fn rotation_apply_inverse(cloud: &PointCloud, rot: &RotationPair) -> PointCloud {
    let m = rot.matrix();
    let mt = [
        [m[0][0], m[1][0], m[2][0]],
        [m[0][1], m[1][1], m[2][1]],
        [m[0][2], m[1][2], m[2][2]],
    ];
    let pts = cloud
        .points_f64()
        .iter()
        .map(|&p| {
            let q = rotate_point(&mt, p);
            [q[0] as f32, q[1] as f32, q[2] as f32]
        })
        .collect();
    PointCloud::new(pts).expect("rotation of finite points is finite")
}

/// Rotate the rows of an `n x 3` matrix in the model's precision
/// (rotation entries converted once, per-point math in `S`).
pub fn rotate_rows<S: Scalar>(pts: &Matrix<S>, rot: &RotationPair) -> Result<Matrix<S>> {
    if pts.cols() != 3 {
        return Err(Error::Shape {
            op: "rotate_rows",
            detail: format!("expected 3 columns, got {}", pts.cols()),
        });
    }
    let m64 = rot.matrix();
    let mut m = [[S::zero(); 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            m[i][j] = S::from_f64(m64[i][j]);
        }
    }
    let mut out = Matrix::zeros(pts.rows(), 3);
    for r in 0..pts.rows() {
        let p = pts.row(r);
        let q = [
            m[0][0] * p[0] + m[0][1] * p[1] + m[0][2] * p[2],
            m[1][0] * p[0] + m[1][1] * p[1] + m[1][2] * p[2],
            m[2][0] * p[0] + m[2][1] * p[1] + m[2][2] * p[2],
        ];
        out.row_mut(r).copy_from_slice(&q);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constructor_enforces_angle_ranges() {
        assert!(RotationPair::new(0.0, 0.0).is_ok());
        assert!(RotationPair::new(ALPHA_MAX, BETA_MAX).is_ok());
        assert!(RotationPair::new(1.6, 0.0).is_err());
        assert!(RotationPair::new(0.0, 0.8).is_err());
        assert!(RotationPair::new(f64::NAN, 0.0).is_err());
    }

    #[test]
    fn quarter_turn_about_y_maps_x_to_minus_z() {
        let r = RotationPair::new(std::f64::consts::FRAC_PI_2, 0.0).unwrap();
        let q = rotate_point(&r.matrix(), [1.0, 0.0, 0.0]);
        assert!((q[0] - 0.0).abs() < 1e-15);
        assert!((q[1] - 0.0).abs() < 1e-15);
        assert!((q[2] - (-1.0)).abs() < 1e-15);
    }

    #[test]
    fn z_rotation_maps_x_towards_y() {
        let r = RotationPair::new(0.0, std::f64::consts::FRAC_PI_4).unwrap();
        let q = rotate_point(&r.matrix(), [1.0, 0.0, 0.0]);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((q[0] - s).abs() < 1e-15);
        assert!((q[1] - s).abs() < 1e-15);
        assert!(q[2].abs() < 1e-15);
    }

    #[test]
    fn identity_rotation_changes_nothing() {
        let c = PointCloud::new(vec![[0.3, -0.7, 2.0], [1.0, 2.0, 3.0]]).unwrap();
        let r = RotationPair::identity();
        let rc = rotation_apply(&c, &r);
        for (p, q) in rc.points().iter().zip(c.points().iter()) {
            assert_eq!(p, q);
        }
    }

    #[test]
    fn rotation_is_an_isometry_of_pairwise_distances() {
        let pts = vec![
            [0.1f32, 0.2, 0.3],
            [-0.5, 0.9, -0.1],
            [0.7, -0.3, 0.4],
            [0.0, 0.0, 1.0],
        ];
        let c = PointCloud::new(pts).unwrap();
        let r = RotationPair::new(0.83, -0.41).unwrap();
        let rc = rotation_apply(&c, &r);
        let a = c.points_f64();
        let b = rc.points_f64();
        for i in 0..a.len() {
            for j in (i + 1)..a.len() {
                let d0 = super::super::kdtree::dist2(&a[i], &a[j]);
                let d1 = super::super::kdtree::dist2(&b[i], &b[j]);
                assert!((d0 - d1).abs() < 1e-6, "pairwise distance changed: {} vs {}", d0, d1);
            }
        }
    }

    #[test]
    fn inverse_recovers_original_to_rounding() {
        let c = PointCloud::new(vec![[0.25, -1.5, 0.75], [2.0, 0.5, -3.0]]).unwrap();
        let r = RotationPair::new(-1.1, 0.6).unwrap();
        let back = rotation_apply_inverse(&rotation_apply(&c, &r), &r);
        for (p, q) in back.points().iter().zip(c.points().iter()) {
            for k in 0..3 {
                assert!((p[k] - q[k]).abs() < 1e-5, "{} vs {}", p[k], q[k]);
            }
        }
    }

    #[test]
    fn rotate_rows_matches_cloud_rotation_closely() {
        let c = PointCloud::new(vec![[0.3, 0.1, -0.2], [0.9, -0.8, 0.7]]).unwrap();
        let r = RotationPair::new(0.5, -0.25).unwrap();
        let m = rotate_rows::<f64>(&c.to_matrix(), &r).unwrap();
        let rc = rotation_apply(&c, &r);
        for (i, p) in rc.points().iter().enumerate() {
            for k in 0..3 {
                assert!((m.get(i, k) - p[k] as f64).abs() < 1e-6);
            }
        }
    }
}
