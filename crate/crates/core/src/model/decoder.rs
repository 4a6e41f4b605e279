//! Dynamic deformation decoder.
//!
//! The decoder owns no trained weights of its own: every weight, scale,
//! and bias below is predicted per-shape by the hypernetwork. A point `x`
//! passes through a chain of scaled-affine layers `(W_i . x) * s_i + b_i`
//! with ReLU between layers, and the final 3D output is added to the
//! input point as a residual displacement.

use crate::error::{Error, Result};
use crate::exec;
use crate::linalg::{self, Matrix};
use crate::scalar::Scalar;

/// Predicted parameters of one scaled-affine decoder layer.
#[derive(Clone, Debug)]
pub struct DecoderLayerParams<S: Scalar> {
    /// `fan_out x fan_in` weight matrix.
    pub w: Matrix<S>,
    /// Per-output multiplicative scale, length `fan_out`.
    pub s: Vec<S>,
    /// Per-output bias, length `fan_out`.
    pub b: Vec<S>,
}

/// The full predicted decoder: one parameter set per layer.
#[derive(Clone, Debug)]
pub struct MetaDecoderParams<S: Scalar> {
    pub layers: Vec<DecoderLayerParams<S>>,
}

impl<S: Scalar> MetaDecoderParams<S> {
    /// Validate the layer chain: 3 in, 3 out, matching shapes throughout.
    pub fn validate(&self) -> Result<()> {
        if self.layers.len() < 2 {
            return Err(Error::Contract(format!(
                "decoder needs at least 2 layers, got {}",
                self.layers.len()
            )));
        }
        let mut fan_in = 3;
        for (i, layer) in self.layers.iter().enumerate() {
            if layer.w.cols() != fan_in {
                return Err(Error::Shape {
                    op: "meta_decode",
                    detail: format!(
                        "layer {i} expects fan-in {fan_in}, weight is {} x {}",
                        layer.w.rows(),
                        layer.w.cols()
                    ),
                });
            }
            if layer.s.len() != layer.w.rows() || layer.b.len() != layer.w.rows() {
                return Err(Error::Shape {
                    op: "meta_decode",
                    detail: format!(
                        "layer {i} scale/bias lengths {}/{} do not match fan-out {}",
                        layer.s.len(),
                        layer.b.len(),
                        layer.w.rows()
                    ),
                });
            }
            fan_in = layer.w.rows();
        }
        if fan_in != 3 {
            return Err(Error::Shape {
                op: "meta_decode",
                detail: format!("final layer fan-out is {fan_in}, expected 3"),
            });
        }
        Ok(())
    }

    /// True if every predicted value is finite.
    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(|l| {
            l.w.is_finite()
                && l.s.iter().all(|v| v.is_finite())
                && l.b.iter().all(|v| v.is_finite())
        })
    }
}

/// Run the decoder on a block of points (rows of `pts`), returning the
/// deformed block `pts + delta`.
///
/// Row-independent: every output row depends only on the matching input
/// row, so block boundaries never change values.
pub fn deform_rows<S: Scalar>(params: &MetaDecoderParams<S>, pts: &Matrix<S>) -> Result<Matrix<S>> {
    if pts.cols() != 3 {
        return Err(Error::Shape {
            op: "deform_rows",
            detail: format!("expected n x 3 input, got {} x {}", pts.rows(), pts.cols()),
        });
    }
    let last = params.layers.len().saturating_sub(1);
    let mut out = Matrix::zeros(pts.rows(), 3);
    for r in 0..pts.rows() {
        let mut v: Vec<S> = pts.row(r).to_vec();
        for (i, layer) in params.layers.iter().enumerate() {
            v = linalg::scaled_affine_forward(&layer.w, &layer.s, &layer.b, &v)?;
            if i != last {
                v = linalg::relu(&v);
            }
        }
        let p = pts.row(r);
        let o = out.row_mut(r);
        for c in 0..3 {
            o[c] = p[c] + v[c];
        }
    }
    Ok(out)
}

/// Decode a single point: returns `(displacement, deformed_point)`.
pub fn meta_decode<S: Scalar>(params: &MetaDecoderParams<S>, p: [S; 3]) -> Result<([S; 3], [S; 3])> {
    let m = Matrix::from_vec(1, 3, p.to_vec())?;
    let out = deform_rows(params, &m)?;
    let q = [out.get(0, 0), out.get(0, 1), out.get(0, 2)];
    let d = [q[0] - p[0], q[1] - p[1], q[2] - p[2]];
    Ok((d, q))
}

/// Number of template rows each parallel work item covers.
pub(crate) const DEFORM_CHUNK: usize = 512;

/// Deform a full template (or any `n x 3` matrix) through the predicted
/// decoder, validating the parameter chain once up front.
///
/// Rows are processed in fixed-size chunks that may run in parallel;
/// results are identical to a sequential pass bit for bit.
pub fn deform_template<S: Scalar>(
    params: &MetaDecoderParams<S>,
    pts: &Matrix<S>,
) -> Result<Matrix<S>> {
    params.validate()?;
    if !params.is_finite() {
        return Err(Error::NonFinite("predicted decoder parameters".into()));
    }
    if pts.rows() == 0 {
        return Err(Error::EmptyCloud("deform_template"));
    }
    if pts.rows() <= DEFORM_CHUNK {
        return deform_rows(params, pts);
    }
    let n_chunks = pts.rows().div_ceil(DEFORM_CHUNK);
    let blocks = exec::map_indices(n_chunks, |c| {
        let start = c * DEFORM_CHUNK;
        let end = (start + DEFORM_CHUNK).min(pts.rows());
        let block = Matrix::from_vec(end - start, 3, pts.data()[start * 3..end * 3].to_vec())
            .expect("chunk slicing preserves shape");
        deform_rows(params, &block)
    });
    let mut out = Matrix::zeros(pts.rows(), 3);
    let mut row = 0;
    for block in blocks {
        let block = block?;
        out.data_mut()[row * 3..(row + block.rows()) * 3].copy_from_slice(block.data());
        row += block.rows();
    }
    Ok(out)
}
