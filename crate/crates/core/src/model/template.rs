//! The learnable template: a fixed base cloud plus trainable per-point
//! offsets. The decoder always deforms `base + offsets`.

use crate::error::{Error, Result};
use crate::geometry::PointCloud;
use crate::linalg::Matrix;
use crate::scalar::Scalar;

/// Template point set `q = base + offsets`.
#[derive(Clone, Debug)]
pub struct Template<S: Scalar> {
    /// Fixed starting geometry, `n x 3`.
    pub base: Matrix<S>,
    /// Trainable displacement of every template point, `n x 3`.
    pub offsets: Matrix<S>,
}

impl<S: Scalar> Template<S> {
    /// Start from a cloud with zero offsets.
    pub fn from_cloud(cloud: &PointCloud) -> Result<Self> {
        if cloud.len() == 0 {
            return Err(Error::EmptyCloud("Template::from_cloud"));
        }
        let base: Matrix<S> = cloud.to_matrix();
        let offsets = Matrix::zeros(base.rows(), 3);
        Ok(Template { base, offsets })
    }

    /// Number of template points.
    pub fn len(&self) -> usize {
        self.base.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.base.rows() == 0
    }

    /// Current template points, `base + offsets` elementwise.
    pub fn points(&self) -> Matrix<S> {
        let mut out = self.base.clone();
        for (o, d) in out.data_mut().iter_mut().zip(self.offsets.data()) {
            *o = *o + *d;
        }
        out
    }

    /// Check the two matrices agree in shape.
    pub fn validate(&self) -> Result<()> {
        if self.base.rows() != self.offsets.rows()
            || self.base.cols() != 3
            || self.offsets.cols() != 3
        {
            return Err(Error::Shape {
                op: "Template::validate",
                detail: format!(
                    "base is {} x {}, offsets is {} x {}",
                    self.base.rows(),
                    self.base.cols(),
                    self.offsets.rows(),
                    self.offsets.cols()
                ),
            });
        }
        Ok(())
    }
}
