//! Network architecture description and parameter accounting.

use crate::error::{Error, Result};

/// Sizes of every component of the model.
///
/// The decoder is a chain of `decoder_layers` scaled-affine layers mapping
/// a 3D point through `decoder_hidden`-wide hidden layers back to 3D. The
/// hypernetwork emits one flat parameter vector per decoder layer.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Architecture {
    /// Widths of the three per-point encoder layers.
    pub encoder_widths: [usize; 3],
    /// Widths of the two refinement layers after pooling; the second is
    /// the embedding length.
    pub refine_widths: [usize; 2],
    /// Hidden width of the deformation decoder.
    pub decoder_hidden: usize,
    /// Number of decoder layers (at least 2: input and output).
    pub decoder_layers: usize,
    /// Number of template points.
    pub template_points: usize,
}

impl Default for Architecture {
    /// Full network widths with a medium-resolution template.
    fn default() -> Self {
        Architecture {
            encoder_widths: [64, 128, 1024],
            refine_widths: [1024, 1024],
            decoder_hidden: 64,
            decoder_layers: 6,
            template_points: 1024,
        }
    }
}

impl Architecture {
    /// Full widths and a high-resolution template.
    pub fn full_scale() -> Self {
        Architecture {
            template_points: 6890,
            ..Architecture::default()
        }
    }

    /// Small configuration for fast experiments and tests.
    pub fn compact() -> Self {
        Architecture {
            encoder_widths: [16, 32, 128],
            refine_widths: [128, 128],
            decoder_hidden: 32,
            decoder_layers: 6,
            template_points: 512,
        }
    }

    /// Length of the feature embedding produced by the encoder.
    pub fn embed_dim(&self) -> usize {
        self.refine_widths[1]
    }

    /// `(fan_in, fan_out)` of every decoder layer, in order.
    pub fn decoder_dims(&self) -> Vec<(usize, usize)> {
        let h = self.decoder_hidden;
        let l = self.decoder_layers;
        let mut dims = Vec::with_capacity(l);
        dims.push((3, h));
        for _ in 1..l.saturating_sub(1) {
            dims.push((h, h));
        }
        if l >= 2 {
            dims.push((h, 3));
        }
        dims
    }

    /// Check internal consistency.
    pub fn validate(&self) -> Result<()> {
        if self.decoder_layers < 2 {
            return Err(Error::Contract(format!(
                "decoder needs at least 2 layers, got {}",
                self.decoder_layers
            )));
        }
        let all_widths = self
            .encoder_widths
            .iter()
            .chain(self.refine_widths.iter())
            .chain([&self.decoder_hidden, &self.template_points]);
        for &w in all_widths {
            if w == 0 {
                return Err(Error::Contract("architecture contains a zero width".into()));
            }
        }
        Ok(())
    }
}

/// Parameters of one decoder layer: a `fan_out x fan_in` weight matrix
/// plus a scale and a bias vector of length `fan_out`.
pub fn layer_param_count(fan_in: usize, fan_out: usize) -> usize {
    fan_in * fan_out + fan_out + fan_out
}

/// Per-layer and total decoder parameter counts for a layer-dimension
/// chain as produced by [`Architecture::decoder_dims`].
pub fn count_params(dims: &[(usize, usize)]) -> (Vec<usize>, usize) {
    let per: Vec<usize> = dims.iter().map(|&(i, o)| layer_param_count(i, o)).collect();
    let total = per.iter().sum();
    (per, total)
}
