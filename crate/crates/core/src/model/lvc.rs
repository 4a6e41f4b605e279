//! Baseline decoder that concatenates the shape embedding onto every
//! input point ("latent vector concatenation"), plus the first-layer
//! identity connecting it to the dynamic decoder: with the input split
//! `[p; e]`, the first-layer pre-activation `W.[p; e] + b` equals
//! `W_p.p + (W_e.e + b)` — the embedding only contributes a bias that is
//! constant per shape. [`dynamic_bias_decomposition`] evaluates both
//! sides of that identity with one final rounding each.

use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::exec;
use crate::linalg::{self, Matrix};
use crate::model::arch::Architecture;
use crate::model::encoder::init_linear;
use crate::model::LinearLayer;
use crate::scalar::{dd, Scalar};

/// Weights of the concatenation decoder. Layer 0 consumes `3 + embed`
/// inputs; later layers are ordinary `hidden -> hidden -> 3` maps.
#[derive(Clone, Debug)]
pub struct LvcDecoderParams<S: Scalar> {
    pub layers: Vec<LinearLayer<S>>,
}

impl<S: Scalar> LvcDecoderParams<S> {
    /// Random hidden layers, final layer exactly zero so the initial
    /// residual displacement is zero (matching the dynamic decoder's
    /// zero-start).
    pub fn init(arch: &Architecture, rng: &mut ChaCha8Rng) -> Self {
        let embed = arch.embed_dim();
        let h = arch.decoder_hidden;
        let l = arch.decoder_layers;
        let mut layers = Vec::with_capacity(l);
        let mut fan_in = 3 + embed;
        for _ in 0..l.saturating_sub(1) {
            layers.push(init_linear(fan_in, h, rng));
            fan_in = h;
        }
        layers.push(LinearLayer {
            w: Matrix::zeros(3, fan_in),
            b: vec![S::zero(); 3],
        });
        LvcDecoderParams { layers }
    }

    /// Embedding length the first layer expects.
    pub fn embed_dim(&self) -> usize {
        self.layers
            .first()
            .map(|l| l.w.cols().saturating_sub(3))
            .unwrap_or(0)
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.w.is_finite() && l.b.iter().all(|v| v.is_finite()))
    }
}

/// Decode one point against an embedding: `(displacement, deformed)`.
pub fn lvc_decode<S: Scalar>(
    params: &LvcDecoderParams<S>,
    p: [S; 3],
    e: &[S],
) -> Result<([S; 3], [S; 3])> {
    if e.len() != params.embed_dim() {
        return Err(Error::Shape {
            op: "lvc_decode",
            detail: format!(
                "embedding has length {}, decoder expects {}",
                e.len(),
                params.embed_dim()
            ),
        });
    }
    let last = params.layers.len().saturating_sub(1);
    let mut v = Vec::with_capacity(3 + e.len());
    v.extend_from_slice(&p);
    v.extend_from_slice(e);
    for (i, layer) in params.layers.iter().enumerate() {
        v = linalg::affine_forward(&layer.w, &layer.b, &v)?;
        if i != last {
            v = linalg::relu(&v);
        }
    }
    if v.len() != 3 {
        return Err(Error::Shape {
            op: "lvc_decode",
            detail: format!("final layer produced {} outputs, expected 3", v.len()),
        });
    }
    let d = [v[0], v[1], v[2]];
    let q = [p[0] + d[0], p[1] + d[1], p[2] + d[2]];
    Ok((d, q))
}

/// Deform every row of `pts` against one embedding. Chunks of rows may
/// run in parallel; results equal the sequential pass bit for bit.
pub fn lvc_deform<S: Scalar>(
    params: &LvcDecoderParams<S>,
    pts: &Matrix<S>,
    e: &[S],
) -> Result<Matrix<S>> {
    if pts.cols() != 3 {
        return Err(Error::Shape {
            op: "lvc_deform",
            detail: format!("expected n x 3 input, got {} x {}", pts.rows(), pts.cols()),
        });
    }
    if pts.rows() == 0 {
        return Err(Error::EmptyCloud("lvc_deform"));
    }
    if !params.is_finite() {
        return Err(Error::NonFinite("concatenation decoder parameters".into()));
    }
    let chunk = crate::model::decoder::DEFORM_CHUNK;
    let n_chunks = pts.rows().div_ceil(chunk);
    let blocks = exec::map_indices(n_chunks, |c| -> Result<Vec<S>> {
        let start = c * chunk;
        let end = (start + chunk).min(pts.rows());
        let mut block = Vec::with_capacity((end - start) * 3);
        for r in start..end {
            let row = pts.row(r);
            let (_, q) = lvc_decode(params, [row[0], row[1], row[2]], e)?;
            block.extend_from_slice(&q);
        }
        Ok(block)
    });
    let mut data = Vec::with_capacity(pts.rows() * 3);
    for b in blocks {
        data.extend_from_slice(&b?);
    }
    Matrix::from_vec(pts.rows(), 3, data)
}

/// Both sides of the first-layer identity, each rounded exactly once.
#[derive(Clone, Debug)]
pub struct BiasDecomposition<S: Scalar> {
    /// `W.[p; e] + b`: the whole pre-activation in one accumulation.
    pub combined: Vec<S>,
    /// `W_p.p`: contribution of the point columns.
    pub point_term: Vec<S>,
    /// `W_e.e + b`: the shape-dependent "dynamic bias".
    pub dynamic_bias: Vec<S>,
    /// `(W_p.p) + (W_e.e + b)` combined before the final rounding.
    pub split_total: Vec<S>,
}

/// Accumulate `sum(a[i] * b[i])` onto `acc` in double-double, in index
/// order, without intermediate rounding to the working precision.
fn acc_products<S: Scalar>(mut acc: (f64, f64), a: &[S], b: &[S]) -> (f64, f64) {
    for (&x, &y) in a.iter().zip(b) {
        acc = dd::add(acc, dd::two_prod(x.to_f64(), y.to_f64()));
    }
    acc
}

/// Evaluate the first-layer pre-activation two ways: as one product over
/// the concatenated input, and split into point term plus dynamic bias.
///
/// Every route accumulates in double-double and rounds to the working
/// precision exactly once at the end, so `combined` and `split_total`
/// agree to within a few units in the last place (they are two
/// accumulations of the same real number).
pub fn dynamic_bias_decomposition<S: Scalar>(
    w: &Matrix<S>,
    b: &[S],
    p: &[S],
    e: &[S],
) -> Result<BiasDecomposition<S>> {
    if p.len() != 3 {
        return Err(Error::Shape {
            op: "dynamic_bias_decomposition",
            detail: format!("point must have 3 components, got {}", p.len()),
        });
    }
    if w.cols() != p.len() + e.len() || b.len() != w.rows() {
        return Err(Error::Shape {
            op: "dynamic_bias_decomposition",
            detail: format!(
                "weight is {} x {}, input splits as {} + {}, bias has length {}",
                w.rows(),
                w.cols(),
                p.len(),
                e.len(),
                b.len()
            ),
        });
    }
    let n = w.rows();
    let mut out = BiasDecomposition {
        combined: Vec::with_capacity(n),
        point_term: Vec::with_capacity(n),
        dynamic_bias: Vec::with_capacity(n),
        split_total: Vec::with_capacity(n),
    };
    for j in 0..n {
        let row = w.row(j);
        let bj = b[j].to_f64();

        let mut full = acc_products((0.0, 0.0), &row[..3], p);
        full = acc_products(full, &row[3..], e);
        full = dd::add_f64(full, bj);

        let point = acc_products((0.0, 0.0), &row[..3], p);
        let dynamic = dd::add_f64(acc_products((0.0, 0.0), &row[3..], e), bj);
        let split = dd::add(point, dynamic);

        out.combined.push(S::from_f64(dd::round(full)));
        out.point_term.push(S::from_f64(dd::round(point)));
        out.dynamic_bias.push(S::from_f64(dd::round(dynamic)));
        out.split_total.push(S::from_f64(dd::round(split)));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::with_sequential;
    use rand::{Rng, SeedableRng};

    fn tiny_arch() -> Architecture {
        Architecture {
            encoder_widths: [4, 8, 16],
            refine_widths: [16, 6],
            decoder_hidden: 8,
            decoder_layers: 4,
            template_points: 32,
        }
    }

    #[test]
    fn fresh_decoder_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let params: LvcDecoderParams<f64> = LvcDecoderParams::init(&tiny_arch(), &mut rng);
        let e = vec![0.4; 6];
        let (d, q) = lvc_decode(&params, [0.1, -0.2, 0.7], &e).unwrap();
        assert_eq!(d, [0.0, 0.0, 0.0], "zero final layer means zero residual");
        assert_eq!(q, [0.1, -0.2, 0.7]);
    }

    #[test]
    fn layer_shapes_follow_architecture() {
        let arch = tiny_arch();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let params: LvcDecoderParams<f32> = LvcDecoderParams::init(&arch, &mut rng);
        assert_eq!(params.layers.len(), 4);
        assert_eq!(params.layers[0].w.cols(), 3 + 6);
        assert_eq!(params.layers[0].w.rows(), 8);
        assert_eq!(params.layers[3].w.rows(), 3);
        assert_eq!(params.embed_dim(), 6);
    }

    #[test]
    fn batched_deform_matches_pointwise_and_sequential() {
        let arch = tiny_arch();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut params: LvcDecoderParams<f64> = LvcDecoderParams::init(&arch, &mut rng);
        // Give the final layer structure so outputs are non-trivial.
        for (k, v) in params.layers[3].w.data_mut().iter_mut().enumerate() {
            *v = ((k as f64) * 0.19).sin() * 0.4;
        }
        params.layers[3].b = vec![0.01, -0.02, 0.03];
        let n = crate::model::decoder::DEFORM_CHUNK + 41;
        let pts = Matrix::from_vec(
            n,
            3,
            (0..n * 3).map(|i| ((i as f64) * 0.23).cos()).collect(),
        )
        .unwrap();
        let e: Vec<f64> = (0..6).map(|i| 0.1 * i as f64 - 0.2).collect();
        let batched = lvc_deform(&params, &pts, &e).unwrap();
        for r in (0..n).step_by(97) {
            let row = pts.row(r);
            let (_, q) = lvc_decode(&params, [row[0], row[1], row[2]], &e).unwrap();
            assert_eq!(batched.row(r), &q);
        }
        let seq = with_sequential(|| lvc_deform(&params, &pts, &e).unwrap());
        assert_eq!(seq.data(), batched.data());
    }

    #[test]
    fn decomposition_routes_agree_to_a_few_ulps() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let embed = 32;
        let rows = 24;
        let mut worst = 0u64;
        for _ in 0..200 {
            let w = Matrix::from_vec(
                rows,
                3 + embed,
                (0..rows * (3 + embed))
                    .map(|_| rng.gen_range(-1.5..1.5))
                    .collect::<Vec<f64>>(),
            )
            .unwrap();
            let b: Vec<f64> = (0..rows).map(|_| rng.gen_range(-0.5..0.5)).collect();
            let p = [
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            ];
            let e: Vec<f64> = (0..embed).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let d = dynamic_bias_decomposition(&w, &b, &p, &e).unwrap();
            for j in 0..rows {
                worst = worst.max(f64::ulps_diff(d.combined[j], d.split_total[j]));
            }
        }
        assert!(worst <= 4, "routes drifted {worst} ulps apart");
    }

    #[test]
    fn decomposition_matches_plain_forward_closely() {
        // The combined route is a correctly-rounded version of what the
        // decoder's first layer computes in working precision.
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let params: LvcDecoderParams<f64> = LvcDecoderParams::init(&tiny_arch(), &mut rng);
        let first = &params.layers[0];
        let p = [0.3, -0.6, 0.2];
        let e: Vec<f64> = (0..6).map(|i| (i as f64 * 0.7).sin()).collect();
        let mut x = p.to_vec();
        x.extend_from_slice(&e);
        let plain = linalg::affine_forward(&first.w, &first.b, &x).unwrap();
        let d = dynamic_bias_decomposition(&first.w, &first.b, &p, &e).unwrap();
        for j in 0..plain.len() {
            let rel = (plain[j] - d.combined[j]).abs() / d.combined[j].abs().max(1e-12);
            assert!(rel < 1e-12, "row {j}: plain {} vs dd {}", plain[j], d.combined[j]);
        }
    }

    #[test]
    fn decomposition_rejects_bad_shapes() {
        let w = Matrix::<f64>::zeros(4, 10);
        let b = vec![0.0; 4];
        let e7 = vec![0.0; 7];
        let e6 = vec![0.0; 6];
        assert!(dynamic_bias_decomposition(&w, &b, &[0.0; 3], &e7).is_ok());
        assert!(dynamic_bias_decomposition(&w, &b, &[0.0; 3], &e6).is_err());
        assert!(dynamic_bias_decomposition(&w, &b[..3].to_vec(), &[0.0; 3], &e7).is_err());
        assert!(dynamic_bias_decomposition(&w, &b, &[0.0; 2], &e7).is_err());
    }
}
