//! Point-cloud encoder: a shared per-point MLP, a column max-pool, and a
//! refinement head producing one fixed-length embedding per cloud.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::model::LinearLayer;
use crate::scalar::Scalar;

/// All encoder weights.
#[derive(Clone, Debug)]
pub struct EncoderParams<S: Scalar> {
    /// Per-point layers, applied with a shared weight to every point.
    pub point_layers: Vec<LinearLayer<S>>,
    /// Refinement layers applied to the pooled feature vector.
    pub refine_layers: Vec<LinearLayer<S>>,
}

/// Sample a `fan_out x fan_in` layer with weights and biases drawn
/// uniformly from `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`.
pub fn init_linear<S: Scalar>(
    fan_in: usize,
    fan_out: usize,
    rng: &mut ChaCha8Rng,
) -> LinearLayer<S> {
    let bound = 1.0 / (fan_in as f64).sqrt();
    let mut sample = || S::from_f64(rng.gen_range(-bound..bound));
    let w_data: Vec<S> = (0..fan_in * fan_out).map(|_| sample()).collect();
    let b: Vec<S> = (0..fan_out).map(|_| sample()).collect();
    LinearLayer {
        w: Matrix::from_vec(fan_out, fan_in, w_data).expect("init shape is consistent"),
        b,
    }
}

/// Add `b[c]` to every entry of column `c`.
pub(crate) fn add_row_bias<S: Scalar>(m: &mut Matrix<S>, b: &[S]) {
    debug_assert_eq!(m.cols(), b.len());
    for r in 0..m.rows() {
        for (v, bi) in m.row_mut(r).iter_mut().zip(b) {
            *v = *v + *bi;
        }
    }
}

/// Rectify every entry, preserving the shape.
pub(crate) fn relu_matrix<S: Scalar>(m: &Matrix<S>) -> Matrix<S> {
    Matrix::from_vec(m.rows(), m.cols(), linalg::relu(m.data())).expect("shape unchanged")
}

impl<S: Scalar> EncoderParams<S> {
    /// Random initialisation for the given widths.
    pub fn init(
        encoder_widths: [usize; 3],
        refine_widths: [usize; 2],
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let mut point_layers = Vec::with_capacity(3);
        let mut fan_in = 3;
        for &w in &encoder_widths {
            point_layers.push(init_linear(fan_in, w, rng));
            fan_in = w;
        }
        let mut refine_layers = Vec::with_capacity(2);
        let mut fan_in = encoder_widths[2];
        for &w in &refine_widths {
            refine_layers.push(init_linear(fan_in, w, rng));
            fan_in = w;
        }
        EncoderParams {
            point_layers,
            refine_layers,
        }
    }

    /// Length of the embedding this encoder produces.
    pub fn embed_dim(&self) -> usize {
        self.refine_layers.last().map(|l| l.b.len()).unwrap_or(0)
    }

    /// Encode an `n x 3` point matrix into one embedding vector.
    ///
    /// Every point goes through the shared per-point layers (ReLU after
    /// each), the per-point features are max-pooled column-wise, and the
    /// pooled vector passes through the refinement layers (ReLU after all
    /// but the last).
    pub fn encode(&self, pts: &Matrix<S>) -> Result<Vec<S>> {
        if pts.cols() != 3 {
            return Err(Error::Shape {
                op: "encode",
                detail: format!("expected n x 3 input, got {} x {}", pts.rows(), pts.cols()),
            });
        }
        if pts.rows() == 0 {
            return Err(Error::EmptyCloud("encode"));
        }
        let mut x = pts.clone();
        for layer in &self.point_layers {
            let mut y = linalg::matmul_nt(&x, &layer.w)?;
            add_row_bias(&mut y, &layer.b);
            x = relu_matrix(&y);
        }
        let (pooled, _) = linalg::maxpool_columns(&x)?;
        let mut v = pooled;
        for (i, layer) in self.refine_layers.iter().enumerate() {
            let y = linalg::affine_forward(&layer.w, &layer.b, &v)?;
            v = if i + 1 < self.refine_layers.len() {
                linalg::relu(&y)
            } else {
                y
            };
        }
        Ok(v)
    }
}
