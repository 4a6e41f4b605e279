//! Hypernetwork: maps a shape embedding to the full parameter set of the
//! deformation decoder.
//!
//! One linear map per decoder layer emits that layer's flat parameter
//! vector, laid out as the weight matrix in row-major order, then the
//! scale vector, then the bias vector. Weights and biases of every map
//! start at exactly zero, so an untrained model predicts the all-zero
//! decoder — which is exactly the identity deformation.

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::model::arch::{layer_param_count, Architecture};
use crate::model::decoder::{DecoderLayerParams, MetaDecoderParams};
use crate::model::LinearLayer;
use crate::scalar::Scalar;

/// Hypernetwork weights: one map per decoder layer.
#[derive(Clone, Debug)]
pub struct HyperNetParams<S: Scalar> {
    /// `maps[i]` sends the embedding to decoder layer `i`'s parameters.
    pub maps: Vec<LinearLayer<S>>,
    /// `(fan_in, fan_out)` of each decoder layer, fixed at construction.
    pub dims: Vec<(usize, usize)>,
}

impl<S: Scalar> HyperNetParams<S> {
    /// Zero-initialised hypernetwork for the given architecture.
    pub fn init_zero(arch: &Architecture) -> Self {
        let dims = arch.decoder_dims();
        let embed = arch.embed_dim();
        let maps = dims
            .iter()
            .map(|&(fan_in, fan_out)| {
                let count = layer_param_count(fan_in, fan_out);
                LinearLayer {
                    w: Matrix::zeros(count, embed),
                    b: vec![S::zero(); count],
                }
            })
            .collect();
        HyperNetParams { maps, dims }
    }

    /// Embedding length the maps expect.
    pub fn embed_dim(&self) -> usize {
        self.maps.first().map(|m| m.w.cols()).unwrap_or(0)
    }

    /// Total number of hypernetwork weights (all maps, weights + biases).
    pub fn weight_count(&self) -> usize {
        self.maps
            .iter()
            .map(|m| m.w.rows() * m.w.cols() + m.b.len())
            .sum()
    }

    /// Predict the decoder parameters for one embedding.
    ///
    /// Each map's output vector is unpacked as: weight matrix
    /// (`fan_out x fan_in`, row-major), then scale, then bias.
    pub fn predict(&self, e: &[S]) -> Result<MetaDecoderParams<S>> {
        if e.len() != self.embed_dim() {
            return Err(Error::Shape {
                op: "hypernet_predict",
                detail: format!(
                    "embedding has length {}, maps expect {}",
                    e.len(),
                    self.embed_dim()
                ),
            });
        }
        let mut layers = Vec::with_capacity(self.maps.len());
        for (map, &(fan_in, fan_out)) in self.maps.iter().zip(&self.dims) {
            let theta = linalg::affine_forward(&map.w, &map.b, e)?;
            layers.push(unpack_layer(&theta, fan_in, fan_out)?);
        }
        Ok(MetaDecoderParams { layers })
    }
}

/// Split one flat parameter vector into a decoder layer.
pub fn unpack_layer<S: Scalar>(
    theta: &[S],
    fan_in: usize,
    fan_out: usize,
) -> Result<DecoderLayerParams<S>> {
    let expect = layer_param_count(fan_in, fan_out);
    if theta.len() != expect {
        return Err(Error::Shape {
            op: "unpack_layer",
            detail: format!(
                "{fan_in}->{fan_out} layer needs {expect} values, got {}",
                theta.len()
            ),
        });
    }
    let wn = fan_in * fan_out;
    Ok(DecoderLayerParams {
        w: Matrix::from_vec(fan_out, fan_in, theta[..wn].to_vec())?,
        s: theta[wn..wn + fan_out].to_vec(),
        b: theta[wn + fan_out..].to_vec(),
    })
}
