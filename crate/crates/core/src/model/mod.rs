//! The deformation model: encoder, hypernetwork, dynamic decoder, and
//! learnable template, plus the concatenation baseline.
//!
//! A query cloud is encoded to an embedding; the hypernetwork turns that
//! embedding into the full weight set of a small decoder; the decoder
//! displaces every template point toward the query. Because every query
//! is explained as a deformation of the same template, two clouds are
//! put in correspondence through their template alignments.

pub mod arch;
pub mod decoder;
pub mod encoder;
pub mod graph;
pub mod hypernet;
pub mod lvc;
pub mod template;

pub use arch::{count_params, layer_param_count, Architecture};
pub use decoder::{deform_template, meta_decode, DecoderLayerParams, MetaDecoderParams};
pub use encoder::EncoderParams;
pub use hypernet::HyperNetParams;
pub use lvc::{dynamic_bias_decomposition, lvc_decode, lvc_deform, BiasDecomposition, LvcDecoderParams};
pub use template::Template;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::PointCloud;
use crate::linalg::Matrix;
use crate::scalar::Scalar;

/// One dense layer: `fan_out x fan_in` weights and a bias per output.
#[derive(Clone, Debug)]
pub struct LinearLayer<S: Scalar> {
    pub w: Matrix<S>,
    pub b: Vec<S>,
}

/// A named view of one tensor, used by the checkpoint and training code.
pub struct TensorView<'a, S> {
    pub name: String,
    pub data: &'a [S],
}

/// The complete trainable model.
#[derive(Clone, Debug)]
pub struct ModelBundle<S: Scalar> {
    pub arch: Architecture,
    pub encoder: EncoderParams<S>,
    pub hypernet: HyperNetParams<S>,
    pub template: Template<S>,
}

impl<S: Scalar> ModelBundle<S> {
    /// Build a fresh model: encoder weights from the seed, hypernetwork
    /// at exact zero, template offsets at zero.
    pub fn init(arch: Architecture, template_base: &PointCloud, seed: u64) -> Result<Self> {
        arch.validate()?;
        if template_base.len() != arch.template_points {
            return Err(Error::Contract(format!(
                "architecture expects {} template points, cloud has {}",
                arch.template_points,
                template_base.len()
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let encoder = EncoderParams::init(arch.encoder_widths, arch.refine_widths, &mut rng);
        let hypernet = HyperNetParams::init_zero(&arch);
        let template = Template::from_cloud(template_base)?;
        Ok(ModelBundle {
            arch,
            encoder,
            hypernet,
            template,
        })
    }

    /// Visit every tensor, trainable or not, in the fixed canonical
    /// order used by checkpoints: encoder point layers (w then b),
    /// encoder refine layers, hypernetwork maps, template base,
    /// template offsets.
    pub fn for_each_tensor(&self, mut f: impl FnMut(&str, &[S])) {
        for (i, l) in self.encoder.point_layers.iter().enumerate() {
            f(&format!("encoder.point.{i}.w"), l.w.data());
            f(&format!("encoder.point.{i}.b"), &l.b);
        }
        for (i, l) in self.encoder.refine_layers.iter().enumerate() {
            f(&format!("encoder.refine.{i}.w"), l.w.data());
            f(&format!("encoder.refine.{i}.b"), &l.b);
        }
        for (i, l) in self.hypernet.maps.iter().enumerate() {
            f(&format!("hypernet.{i}.w"), l.w.data());
            f(&format!("hypernet.{i}.b"), &l.b);
        }
        f("template.base", self.template.base.data());
        f("template.offsets", self.template.offsets.data());
    }

    /// Mutable visit in the same canonical order as [`Self::for_each_tensor`].
    pub fn for_each_tensor_mut(&mut self, mut f: impl FnMut(&str, &mut [S])) {
        for (i, l) in self.encoder.point_layers.iter_mut().enumerate() {
            f(&format!("encoder.point.{i}.w"), l.w.data_mut());
            f(&format!("encoder.point.{i}.b"), &mut l.b);
        }
        for (i, l) in self.encoder.refine_layers.iter_mut().enumerate() {
            f(&format!("encoder.refine.{i}.w"), l.w.data_mut());
            f(&format!("encoder.refine.{i}.b"), &mut l.b);
        }
        for (i, l) in self.hypernet.maps.iter_mut().enumerate() {
            f(&format!("hypernet.{i}.w"), l.w.data_mut());
            f(&format!("hypernet.{i}.b"), &mut l.b);
        }
        f("template.base", self.template.base.data_mut());
        f("template.offsets", self.template.offsets.data_mut());
    }

    /// Visit only the trainable tensors, in canonical order. This is the
    /// same order as [`Self::for_each_tensor`] minus the fixed
    /// `template.base`.
    pub fn for_each_param(&self, mut f: impl FnMut(&str, &[S])) {
        self.for_each_tensor(|name, data| {
            if name != "template.base" {
                f(name, data);
            }
        });
    }

    /// Mutable visit over trainable tensors in canonical order.
    pub fn for_each_param_mut(&mut self, mut f: impl FnMut(&str, &mut [S])) {
        self.for_each_tensor_mut(|name, data| {
            if name != "template.base" {
                f(name, data);
            }
        });
    }

    /// Total number of trainable values.
    pub fn param_count(&self) -> usize {
        let mut n = 0;
        self.for_each_param(|_, d| n += d.len());
        n
    }

    /// Concatenate all trainable tensors into one flat vector.
    pub fn flatten_params(&self) -> Vec<S> {
        let mut out = Vec::with_capacity(self.param_count());
        self.for_each_param(|_, d| out.extend_from_slice(d));
        out
    }

    /// Write a flat vector (as produced by [`Self::flatten_params`])
    /// back into the trainable tensors.
    pub fn set_params(&mut self, flat: &[S]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(Error::Shape {
                op: "set_params",
                detail: format!(
                    "flat vector has {} values, model has {}",
                    flat.len(),
                    self.param_count()
                ),
            });
        }
        let mut at = 0;
        self.for_each_param_mut(|_, d| {
            d.copy_from_slice(&flat[at..at + d.len()]);
            at += d.len();
        });
        Ok(())
    }

    /// True if every tensor is finite.
    pub fn is_finite(&self) -> bool {
        let mut ok = true;
        self.for_each_tensor(|_, d| ok &= d.iter().all(|v| v.is_finite()));
        ok
    }

    /// Convert every tensor through `f64` to another working precision.
    pub fn cast<T: Scalar>(&self) -> ModelBundle<T> {
        let conv_layer = |l: &LinearLayer<S>| LinearLayer {
            w: l.w.cast::<T>(),
            b: l.b.iter().map(|&v| T::from_f64(v.to_f64())).collect(),
        };
        ModelBundle {
            arch: self.arch,
            encoder: EncoderParams {
                point_layers: self.encoder.point_layers.iter().map(conv_layer).collect(),
                refine_layers: self.encoder.refine_layers.iter().map(conv_layer).collect(),
            },
            hypernet: HyperNetParams {
                maps: self.hypernet.maps.iter().map(conv_layer).collect(),
                dims: self.hypernet.dims.clone(),
            },
            template: Template {
                base: self.template.base.cast::<T>(),
                offsets: self.template.offsets.cast::<T>(),
            },
        }
    }
}

/// The baseline model: same encoder and template treatment, but the
/// decoder consumes the embedding by concatenation instead of having
/// its weights predicted.
#[derive(Clone, Debug)]
pub struct LvcModel<S: Scalar> {
    pub arch: Architecture,
    pub encoder: EncoderParams<S>,
    pub decoder: LvcDecoderParams<S>,
    pub template: Template<S>,
}

impl<S: Scalar> LvcModel<S> {
    /// Fresh baseline model from the same seed discipline as
    /// [`ModelBundle::init`].
    pub fn init(arch: Architecture, template_base: &PointCloud, seed: u64) -> Result<Self> {
        arch.validate()?;
        if template_base.len() != arch.template_points {
            return Err(Error::Contract(format!(
                "architecture expects {} template points, cloud has {}",
                arch.template_points,
                template_base.len()
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let encoder = EncoderParams::init(arch.encoder_widths, arch.refine_widths, &mut rng);
        let decoder = LvcDecoderParams::init(&arch, &mut rng);
        let template = Template::from_cloud(template_base)?;
        Ok(LvcModel {
            arch,
            encoder,
            decoder,
            template,
        })
    }

    /// Visit trainable tensors in canonical order: encoder layers,
    /// decoder layers, template offsets.
    pub fn for_each_param(&self, mut f: impl FnMut(&str, &[S])) {
        for (i, l) in self.encoder.point_layers.iter().enumerate() {
            f(&format!("encoder.point.{i}.w"), l.w.data());
            f(&format!("encoder.point.{i}.b"), &l.b);
        }
        for (i, l) in self.encoder.refine_layers.iter().enumerate() {
            f(&format!("encoder.refine.{i}.w"), l.w.data());
            f(&format!("encoder.refine.{i}.b"), &l.b);
        }
        for (i, l) in self.decoder.layers.iter().enumerate() {
            f(&format!("decoder.{i}.w"), l.w.data());
            f(&format!("decoder.{i}.b"), &l.b);
        }
        f("template.offsets", self.template.offsets.data());
    }

    /// Mutable visit in the same order as [`Self::for_each_param`].
    pub fn for_each_param_mut(&mut self, mut f: impl FnMut(&str, &mut [S])) {
        for (i, l) in self.encoder.point_layers.iter_mut().enumerate() {
            f(&format!("encoder.point.{i}.w"), l.w.data_mut());
            f(&format!("encoder.point.{i}.b"), &mut l.b);
        }
        for (i, l) in self.encoder.refine_layers.iter_mut().enumerate() {
            f(&format!("encoder.refine.{i}.w"), l.w.data_mut());
            f(&format!("encoder.refine.{i}.b"), &mut l.b);
        }
        for (i, l) in self.decoder.layers.iter_mut().enumerate() {
            f(&format!("decoder.{i}.w"), l.w.data_mut());
            f(&format!("decoder.{i}.b"), &mut l.b);
        }
        f("template.offsets", self.template.offsets.data_mut());
    }

    /// Total number of trainable values.
    pub fn param_count(&self) -> usize {
        let mut n = 0;
        self.for_each_param(|_, d| n += d.len());
        n
    }
}
