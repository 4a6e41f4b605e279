//! Recording model forward passes on the gradient tape.
//!
//! The plain evaluation paths in [`encoder`](crate::model::encoder),
//! [`hypernet`](crate::model::hypernet), [`decoder`](crate::model::decoder)
//! and [`lvc`](crate::model::lvc) use exactly the same kernels in exactly
//! the same order as the recorders here, so a taped forward pass and a
//! plain forward pass agree bit for bit. Tests pin that equivalence.
//!
//! Losses that involve nearest neighbours (the chamfer distance) freeze
//! the matches found at the current values and differentiate through the
//! frozen selection, which is the usual subgradient treatment.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::geometry::NnTree;
use crate::linalg::Matrix;
use crate::model::{HyperNetParams, ModelBundle};
use crate::scalar::Scalar;
use crate::tape::{BufId, GradTape};

/// Buffer handles of a registered model, in the same canonical order as
/// [`ModelBundle::for_each_param`].
pub struct TapedModel {
    /// `(w, b)` per encoder point layer.
    pub enc_point: Vec<(BufId, BufId)>,
    /// `(w, b)` per encoder refinement layer.
    pub enc_refine: Vec<(BufId, BufId)>,
    /// `(w, b)` per hypernetwork map.
    pub hyper_maps: Vec<(BufId, BufId)>,
    /// `(fan_in, fan_out)` of each decoder layer.
    pub dims: Vec<(usize, usize)>,
    /// Template base (always a constant).
    pub base: BufId,
    /// Template offsets (trainable when the model is).
    pub offsets: BufId,
}

impl TapedModel {
    /// Trainable buffers in canonical order.
    pub fn param_bufs(&self) -> Vec<BufId> {
        let mut out = Vec::new();
        for &(w, b) in self.enc_point.iter().chain(&self.enc_refine) {
            out.push(w);
            out.push(b);
        }
        for &(w, b) in &self.hyper_maps {
            out.push(w);
            out.push(b);
        }
        out.push(self.offsets);
        out
    }

    /// Flat gradient vector in canonical order (zeros where no gradient
    /// reached a tensor). Call after `backward`.
    pub fn grad_vector<S: Scalar>(&self, tape: &GradTape<S>) -> Vec<S> {
        let mut out = Vec::new();
        for id in self.param_bufs() {
            out.extend_from_slice(&tape.grad_or_zeros(id));
        }
        out
    }
}

/// Register every model tensor on the tape. With `trainable` the
/// trainable tensors become parameter leaves; otherwise everything is a
/// constant. The template base is always a constant.
pub fn register_model<S: Scalar>(
    tape: &mut GradTape<S>,
    model: &ModelBundle<S>,
    trainable: bool,
) -> TapedModel {
    fn reg_mat<S: Scalar>(t: &mut GradTape<S>, m: &Matrix<S>, p: bool) -> BufId {
        if p {
            t.param(m.data().to_vec(), m.rows(), m.cols())
        } else {
            t.constant(m.data().to_vec(), m.rows(), m.cols())
        }
    }
    fn reg_vec<S: Scalar>(t: &mut GradTape<S>, v: &[S], p: bool) -> BufId {
        if p {
            t.param_vec(v.to_vec())
        } else {
            t.constant_vec(v.to_vec())
        }
    }
    let mut enc_point = Vec::new();
    for l in &model.encoder.point_layers {
        enc_point.push((reg_mat(tape, &l.w, trainable), reg_vec(tape, &l.b, trainable)));
    }
    let mut enc_refine = Vec::new();
    for l in &model.encoder.refine_layers {
        enc_refine.push((reg_mat(tape, &l.w, trainable), reg_vec(tape, &l.b, trainable)));
    }
    let mut hyper_maps = Vec::new();
    for l in &model.hypernet.maps {
        hyper_maps.push((reg_mat(tape, &l.w, trainable), reg_vec(tape, &l.b, trainable)));
    }
    let base = reg_mat(tape, &model.template.base, false);
    let offsets = reg_mat(tape, &model.template.offsets, trainable);
    TapedModel {
        enc_point,
        enc_refine,
        hyper_maps,
        dims: model.hypernet.dims.clone(),
        base,
        offsets,
    }
}

/// Hypernetwork tensors copied once into shared storage so they can be
/// re-registered on a fresh tape every iteration without copying again.
pub struct FrozenHypernet<S: Scalar> {
    maps: Vec<(Arc<[S]>, usize, usize, Arc<[S]>)>,
    /// `(fan_in, fan_out)` of each decoder layer.
    pub dims: Vec<(usize, usize)>,
}

impl<S: Scalar> FrozenHypernet<S> {
    pub fn new(h: &HyperNetParams<S>) -> Self {
        FrozenHypernet {
            maps: h
                .maps
                .iter()
                .map(|l| {
                    (
                        Arc::from(l.w.data()),
                        l.w.rows(),
                        l.w.cols(),
                        Arc::from(l.b.as_slice()),
                    )
                })
                .collect(),
            dims: h.dims.clone(),
        }
    }

    /// Register all maps as shared constants; no tensor data is copied.
    pub fn register(&self, tape: &mut GradTape<S>) -> Vec<(BufId, BufId)> {
        self.maps
            .iter()
            .map(|(w, r, c, b)| {
                let wb = tape.constant_shared(w.clone(), *r, *c);
                let bb = tape.constant_shared(b.clone(), b.len(), 1);
                (wb, bb)
            })
            .collect()
    }
}

/// A matrix copied once into shared storage for repeated registration.
pub struct SharedMatrix<S: Scalar> {
    data: Arc<[S]>,
    rows: usize,
    cols: usize,
}

impl<S: Scalar> SharedMatrix<S> {
    pub fn new(m: &Matrix<S>) -> Self {
        SharedMatrix {
            data: Arc::from(m.data()),
            rows: m.rows(),
            cols: m.cols(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Register as a constant leaf; no data is copied.
    pub fn register(&self, tape: &mut GradTape<S>) -> BufId {
        tape.constant_shared(self.data.clone(), self.rows, self.cols)
    }
}

/// Record the encoder on `pts` (`n x 3`), producing the embedding as an
/// `embed x 1` buffer.
pub fn record_encode<S: Scalar>(
    tape: &mut GradTape<S>,
    enc_point: &[(BufId, BufId)],
    enc_refine: &[(BufId, BufId)],
    pts: BufId,
) -> Result<BufId> {
    let (n, c) = tape.shape(pts);
    if c != 3 {
        return Err(Error::Shape {
            op: "record_encode",
            detail: format!("expected n x 3 input, got {n} x {c}"),
        });
    }
    if n == 0 {
        return Err(Error::EmptyCloud("record_encode"));
    }
    let mut x = pts;
    for &(w, b) in enc_point {
        let y = tape.matmul_nt(x, w)?;
        let y = tape.add_row_broadcast(y, b)?;
        x = tape.relu(y);
    }
    let mut v = tape.maxpool_cols(x)?;
    for (i, &(w, b)) in enc_refine.iter().enumerate() {
        let y = tape.matvec(w, v)?;
        let y = tape.add(y, b)?;
        v = if i + 1 < enc_refine.len() {
            tape.relu(y)
        } else {
            y
        };
    }
    Ok(v)
}

/// Record the hypernetwork prediction for embedding `e` (`embed x 1`),
/// returning `(w, s, b)` buffers per decoder layer. Each map's output
/// vector is sliced as weights (row-major), then scale, then bias —
/// the same layout as [`HyperNetParams::predict`].
pub fn record_hypernet<S: Scalar>(
    tape: &mut GradTape<S>,
    maps: &[(BufId, BufId)],
    dims: &[(usize, usize)],
    e: BufId,
) -> Result<Vec<(BufId, BufId, BufId)>> {
    if maps.len() != dims.len() {
        return Err(Error::Contract(format!(
            "{} hypernetwork maps for {} decoder layers",
            maps.len(),
            dims.len()
        )));
    }
    let mut layers = Vec::with_capacity(maps.len());
    for (&(w_map, b_map), &(fan_in, fan_out)) in maps.iter().zip(dims) {
        let lin = tape.matvec(w_map, e)?;
        let theta = tape.add(lin, b_map)?;
        let wn = fan_in * fan_out;
        let w = tape.slice(theta, 0, fan_out, fan_in)?;
        let s = tape.slice(theta, wn, fan_out, 1)?;
        let b = tape.slice(theta, wn + fan_out, fan_out, 1)?;
        layers.push((w, s, b));
    }
    Ok(layers)
}

/// Record the dynamic decoder over `pts` (`n x 3`): scaled-affine chain
/// with ReLU between layers, then the residual `pts + delta`.
pub fn record_deform<S: Scalar>(
    tape: &mut GradTape<S>,
    layers: &[(BufId, BufId, BufId)],
    pts: BufId,
) -> Result<BufId> {
    if layers.is_empty() {
        return Err(Error::Contract("decoder has no layers".into()));
    }
    let last = layers.len() - 1;
    let mut x = pts;
    for (i, &(w, s, b)) in layers.iter().enumerate() {
        let y = tape.matmul_nt(x, w)?;
        let y = tape.mul_row_broadcast(y, s)?;
        let y = tape.add_row_broadcast(y, b)?;
        x = if i == last { y } else { tape.relu(y) };
    }
    tape.add(pts, x)
}

/// Record current template points `base + offsets`.
pub fn record_template_points<S: Scalar>(
    tape: &mut GradTape<S>,
    base: BufId,
    offsets: BufId,
) -> Result<BufId> {
    tape.add(base, offsets)
}

/// Record the concatenation decoder over `pts` (`n x 3`) with embedding
/// `e` (`embed x 1`): affine chain on `[p; e]` with ReLU between layers,
/// then the residual `pts + delta`.
pub fn record_lvc_deform<S: Scalar>(
    tape: &mut GradTape<S>,
    layers: &[(BufId, BufId)],
    pts: BufId,
    e: BufId,
) -> Result<BufId> {
    if layers.is_empty() {
        return Err(Error::Contract("decoder has no layers".into()));
    }
    let last = layers.len() - 1;
    let mut x = tape.concat_cols_vec(pts, e)?;
    for (i, &(w, b)) in layers.iter().enumerate() {
        let y = tape.matmul_nt(x, w)?;
        let y = tape.add_row_broadcast(y, b)?;
        x = if i == last { y } else { tape.relu(y) };
    }
    tape.add(pts, x)
}

/// Mean squared residual between `pred` and `target` (same shape),
/// normalised by the number of rows.
pub fn record_supervised_loss<S: Scalar>(
    tape: &mut GradTape<S>,
    pred: BufId,
    target: BufId,
) -> Result<BufId> {
    let (n, _) = tape.shape(pred);
    if n == 0 {
        return Err(Error::EmptyCloud("record_supervised_loss"));
    }
    let d = tape.sub(pred, target)?;
    let ss = tape.sum_squares(d);
    Ok(tape.scale(ss, S::from_f64(1.0 / n as f64)))
}

/// Nearest-neighbour matches for a chamfer loss between the current
/// values of `deformed` and `query`: forward matches (one query row per
/// deformed row) and reverse matches (one deformed row per query row).
///
/// `query_tree` must be built over exactly the rows stored in `query`.
pub fn chamfer_matches<S: Scalar>(
    tape: &GradTape<S>,
    deformed: BufId,
    query: BufId,
    query_tree: &NnTree<S>,
) -> Result<(Vec<usize>, Vec<usize>)> {
    let (n_t, c1) = tape.shape(deformed);
    let (n_q, c2) = tape.shape(query);
    if c1 != 3 || c2 != 3 {
        return Err(Error::Shape {
            op: "chamfer_matches",
            detail: format!("need n x 3 buffers, got {n_t} x {c1} and {n_q} x {c2}"),
        });
    }
    if query_tree.len() != n_q {
        return Err(Error::Contract(format!(
            "query tree holds {} points, query buffer has {} rows",
            query_tree.len(),
            n_q
        )));
    }
    let dv = tape.value(deformed);
    let fwd: Vec<usize> = (0..n_t)
        .map(|r| {
            query_tree
                .nearest(&[dv[r * 3], dv[r * 3 + 1], dv[r * 3 + 2]])
                .0
        })
        .collect();
    let rows: Vec<[S; 3]> = (0..n_t)
        .map(|r| [dv[r * 3], dv[r * 3 + 1], dv[r * 3 + 2]])
        .collect();
    let dtree = NnTree::build(rows)?;
    let qv = tape.value(query);
    let rev: Vec<usize> = (0..n_q)
        .map(|r| dtree.nearest(&[qv[r * 3], qv[r * 3 + 1], qv[r * 3 + 2]]).0)
        .collect();
    Ok((fwd, rev))
}

/// Record the two-sided chamfer sum with the given frozen matches:
/// `sum |deformed - query[fwd]|^2 + sum |deformed[rev] - query|^2`.
pub fn record_chamfer_with_matches<S: Scalar>(
    tape: &mut GradTape<S>,
    deformed: BufId,
    query: BufId,
    fwd: Vec<usize>,
    rev: Vec<usize>,
) -> Result<BufId> {
    let matched = tape.gather_rows(query, fwd)?;
    let d1 = tape.sub(deformed, matched)?;
    let l1 = tape.sum_squares(d1);
    let sel = tape.gather_rows(deformed, rev)?;
    let d2 = tape.sub(sel, query)?;
    let l2 = tape.sum_squares(d2);
    tape.add(l1, l2)
}

/// Two-sided chamfer loss between `deformed` and `query`, with matches
/// found at the current values and frozen for the gradient.
pub fn record_chamfer_loss<S: Scalar>(
    tape: &mut GradTape<S>,
    deformed: BufId,
    query: BufId,
    query_tree: &NnTree<S>,
) -> Result<BufId> {
    let (fwd, rev) = chamfer_matches(tape, deformed, query, query_tree)?;
    record_chamfer_with_matches(tape, deformed, query, fwd, rev)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{chamfer_rows, NnStrategy, PointCloud};
    use crate::model::{deform_template, lvc_deform, Architecture, LvcModel};

    fn tiny_arch() -> Architecture {
        Architecture {
            encoder_widths: [4, 8, 16],
            refine_widths: [16, 8],
            decoder_hidden: 6,
            decoder_layers: 3,
            template_points: 10,
        }
    }

    fn test_cloud(n: usize, phase: f32) -> PointCloud {
        PointCloud::new(
            (0..n)
                .map(|i| {
                    let t = i as f32 * 0.41 + phase;
                    [t.sin() * 0.6, t.cos() * 0.6, (t * 0.7).sin() * 0.4]
                })
                .collect(),
        )
        .unwrap()
    }

    /// A model whose hypernetwork has deterministic non-zero weights, so
    /// forward passes exercise every code path.
    fn seasoned_model() -> ModelBundle<f64> {
        let mut m = ModelBundle::<f64>::init(tiny_arch(), &test_cloud(10, 0.0), 31).unwrap();
        for (mi, map) in m.hypernet.maps.iter_mut().enumerate() {
            for (k, v) in map.w.data_mut().iter_mut().enumerate() {
                *v = ((k as f64 * 0.13 + mi as f64) * 1.7).sin() * 0.05;
            }
            for (k, v) in map.b.iter_mut().enumerate() {
                *v = ((k as f64 * 0.29 + mi as f64) * 0.9).cos() * 0.02;
            }
        }
        for (k, v) in m.template.offsets.data_mut().iter_mut().enumerate() {
            *v = (k as f64 * 0.17).sin() * 0.01;
        }
        m
    }

    #[test]
    fn taped_encode_matches_plain_bitwise() {
        let m = seasoned_model();
        let query = test_cloud(14, 1.3).to_matrix::<f64>();
        let plain = m.encoder.encode(&query).unwrap();
        let mut tape = GradTape::new();
        let tm = register_model(&mut tape, &m, true);
        let q = tape.constant(query.data().to_vec(), query.rows(), query.cols());
        let e = record_encode(&mut tape, &tm.enc_point, &tm.enc_refine, q).unwrap();
        assert_eq!(tape.value(e), plain.as_slice());
    }

    #[test]
    fn taped_full_forward_matches_plain_bitwise() {
        let m = seasoned_model();
        let query = test_cloud(14, 1.3).to_matrix::<f64>();
        // Plain route.
        let e_plain = m.encoder.encode(&query).unwrap();
        let dec = m.hypernet.predict(&e_plain).unwrap();
        let tpl = m.template.points();
        let deformed_plain = deform_template(&dec, &tpl).unwrap();
        // Taped route.
        let mut tape = GradTape::new();
        let tm = register_model(&mut tape, &m, true);
        let q = tape.constant(query.data().to_vec(), query.rows(), query.cols());
        let e = record_encode(&mut tape, &tm.enc_point, &tm.enc_refine, q).unwrap();
        let layers = record_hypernet(&mut tape, &tm.hyper_maps, &tm.dims, e).unwrap();
        let t = record_template_points(&mut tape, tm.base, tm.offsets).unwrap();
        let out = record_deform(&mut tape, &layers, t).unwrap();
        assert_eq!(tape.value(out), deformed_plain.data());
    }

    #[test]
    fn taped_lvc_forward_matches_plain_bitwise() {
        let arch = tiny_arch();
        let m = LvcModel::<f64>::init(arch, &test_cloud(10, 0.0), 77).unwrap();
        let query = test_cloud(12, 0.6).to_matrix::<f64>();
        let e_plain = m.encoder.encode(&query).unwrap();
        let tpl = m.template.points();
        let plain = lvc_deform(&m.decoder, &tpl, &e_plain).unwrap();
        let mut tape = GradTape::new();
        let layers: Vec<(BufId, BufId)> = m
            .decoder
            .layers
            .iter()
            .map(|l| {
                (
                    tape.constant(l.w.data().to_vec(), l.w.rows(), l.w.cols()),
                    tape.constant_vec(l.b.clone()),
                )
            })
            .collect();
        let t = tape.constant(tpl.data().to_vec(), tpl.rows(), 3);
        let e = tape.constant_vec(e_plain.clone());
        let out = record_lvc_deform(&mut tape, &layers, t, e).unwrap();
        assert_eq!(tape.value(out), plain.data());
    }

    /// Evaluate the supervised training loss for a given parameter vector
    /// by a plain (untaped) forward pass.
    fn eval_supervised(
        m: &ModelBundle<f64>,
        flat: &[f64],
        query: &Matrix<f64>,
        target: &Matrix<f64>,
    ) -> f64 {
        let mut probe = m.clone();
        probe.set_params(flat).unwrap();
        let e = probe.encoder.encode(query).unwrap();
        let dec = probe.hypernet.predict(&e).unwrap();
        let tpl = probe.template.points();
        let out = deform_template(&dec, &tpl).unwrap();
        let mut ss = 0.0;
        for (o, t) in out.data().iter().zip(target.data()) {
            let d = o - t;
            ss += d * d;
        }
        ss * (1.0 / out.rows() as f64)
    }

    #[test]
    fn end_to_end_gradient_matches_finite_differences() {
        let m = seasoned_model();
        let query = test_cloud(14, 1.3).to_matrix::<f64>();
        let target = test_cloud(10, 2.1).to_matrix::<f64>();

        let mut tape = GradTape::new();
        let tm = register_model(&mut tape, &m, true);
        let q = tape.constant(query.data().to_vec(), query.rows(), query.cols());
        let tgt = tape.constant(target.data().to_vec(), target.rows(), target.cols());
        let e = record_encode(&mut tape, &tm.enc_point, &tm.enc_refine, q).unwrap();
        let layers = record_hypernet(&mut tape, &tm.hyper_maps, &tm.dims, e).unwrap();
        let t = record_template_points(&mut tape, tm.base, tm.offsets).unwrap();
        let out = record_deform(&mut tape, &layers, t).unwrap();
        let loss = record_supervised_loss(&mut tape, out, tgt).unwrap();
        tape.backward(loss).unwrap();
        let grad = tm.grad_vector(&tape);

        let flat = m.flatten_params();
        assert_eq!(grad.len(), flat.len());
        assert_eq!(
            tape.scalar_value(loss),
            eval_supervised(&m, &flat, &query, &target),
            "taped and plain losses must agree exactly"
        );

        // Probe a spread of parameters across all tensor families.
        let n = flat.len();
        let probes: Vec<usize> = vec![
            0,
            37,
            n / 5,
            2 * n / 5,
            n / 2,
            3 * n / 5,
            4 * n / 5,
            n - 31,
            n - 1,
        ];
        let h = 1e-6;
        for &i in &probes {
            let mut lo = flat.clone();
            let mut hi = flat.clone();
            lo[i] -= h;
            hi[i] += h;
            let fd = (eval_supervised(&m, &hi, &query, &target)
                - eval_supervised(&m, &lo, &query, &target))
                / (2.0 * h);
            let g = grad[i];
            // Combined tolerance: relative where the gradient is
            // resolvable, absolute below the finite-difference noise
            // floor (~1e-10 for these loss magnitudes).
            assert!(
                (fd - g).abs() <= 1e-8 + 1e-5 * fd.abs().max(g.abs()),
                "param {i}: analytic {g} vs finite difference {fd}"
            );
        }
        // The loss actually depends on a good share of the parameters.
        assert!(grad.iter().filter(|g| g.abs() > 0.0).count() > grad.len() / 4);
    }

    #[test]
    fn chamfer_loss_value_matches_reference() {
        let m = seasoned_model();
        let query = test_cloud(17, 0.9).to_matrix::<f64>();
        let mut tape = GradTape::new();
        let tm = register_model(&mut tape, &m, true);
        let qbuf = tape.constant(query.data().to_vec(), query.rows(), query.cols());
        let e = tape.constant_vec(vec![0.2; 8]);
        let layers = record_hypernet(&mut tape, &tm.hyper_maps, &tm.dims, e).unwrap();
        let t = record_template_points(&mut tape, tm.base, tm.offsets).unwrap();
        let out = record_deform(&mut tape, &layers, t).unwrap();

        let qrows: Vec<[f64; 3]> = (0..query.rows())
            .map(|r| [query.get(r, 0), query.get(r, 1), query.get(r, 2)])
            .collect();
        let qtree = NnTree::build(qrows).unwrap();
        let loss = record_chamfer_loss(&mut tape, out, qbuf, &qtree).unwrap();

        // Independent reference on the same values.
        let dv = Matrix::from_vec(10, 3, tape.value(out).to_vec()).unwrap();
        let reference = chamfer_rows(&dv, &query, NnStrategy::Accelerated).unwrap();
        let got = tape.scalar_value(loss);
        let rel = (got - reference).abs() / reference.abs().max(1e-12);
        assert!(
            rel < 1e-10,
            "taped chamfer {got} vs reference {reference} (rel {rel})"
        );
    }

    #[test]
    fn chamfer_gradient_with_frozen_matches_passes_finite_differences() {
        // Treat the deformed points themselves as the parameter: freeze
        // the matches, then check d(loss)/d(point) against central
        // differences of the same frozen-match expression.
        let query = test_cloud(9, 0.4).to_matrix::<f64>();
        let pts = test_cloud(7, 1.9).to_matrix::<f64>();
        let qrows: Vec<[f64; 3]> = (0..query.rows())
            .map(|r| [query.get(r, 0), query.get(r, 1), query.get(r, 2)])
            .collect();
        let qtree = NnTree::build(qrows).unwrap();

        let mut tape = GradTape::new();
        let p = tape.param(pts.data().to_vec(), pts.rows(), 3);
        let qbuf = tape.constant(query.data().to_vec(), query.rows(), 3);
        let (fwd, rev) = chamfer_matches(&tape, p, qbuf, &qtree).unwrap();
        let loss =
            record_chamfer_with_matches(&mut tape, p, qbuf, fwd.clone(), rev.clone()).unwrap();
        tape.backward(loss).unwrap();
        let grad = tape.grad(p).unwrap().to_vec();

        let eval = |data: &[f64]| -> f64 {
            let mut acc = 0.0;
            for (r, &m) in fwd.iter().enumerate() {
                for c in 0..3 {
                    let d = data[r * 3 + c] - query.get(m, c);
                    acc += d * d;
                }
            }
            for (r, &m) in rev.iter().enumerate() {
                for c in 0..3 {
                    let d = data[m * 3 + c] - query.get(r, c);
                    acc += d * d;
                }
            }
            acc
        };
        let base: Vec<f64> = pts.data().to_vec();
        let h = 1e-6;
        for i in 0..base.len() {
            let mut lo = base.clone();
            let mut hi = base.clone();
            lo[i] -= h;
            hi[i] += h;
            let fd = (eval(&hi) - eval(&lo)) / (2.0 * h);
            let g = grad[i];
            let denom = fd.abs().max(g.abs()).max(1e-8);
            assert!(
                ((fd - g) / denom).abs() < 1e-6,
                "coordinate {i}: analytic {g} vs finite difference {fd}"
            );
        }
    }

    #[test]
    fn frozen_registration_matches_owned_and_grads_reach_embedding() {
        let m = seasoned_model();
        let e0: Vec<f64> = vec![0.1, -0.2, 0.3, 0.05, -0.15, 0.0, 0.2, -0.1];

        // Owned registration.
        let mut t1 = GradTape::new();
        let tm = register_model(&mut t1, &m, false);
        let e1 = t1.param_vec(e0.clone());
        let layers1 = record_hypernet(&mut t1, &tm.hyper_maps, &tm.dims, e1).unwrap();
        let tp1 = record_template_points(&mut t1, tm.base, tm.offsets).unwrap();
        let out1 = record_deform(&mut t1, &layers1, tp1).unwrap();

        // Shared-storage registration of the same tensors.
        let frozen = FrozenHypernet::new(&m.hypernet);
        let tpl_shared = SharedMatrix::new(&m.template.points());
        let mut t2 = GradTape::new();
        let maps = frozen.register(&mut t2);
        let e2 = t2.param_vec(e0.clone());
        let layers2 = record_hypernet(&mut t2, &maps, &frozen.dims, e2).unwrap();
        let tp2 = tpl_shared.register(&mut t2);
        let out2 = record_deform(&mut t2, &layers2, tp2).unwrap();

        assert_eq!(t2.value(out2), t1.value(out1));

        let loss = t2.sum_squares(out2);
        t2.backward(loss).unwrap();
        assert!(
            t2.grad(e2).is_some(),
            "gradient must reach the embedding parameter"
        );
        assert!(
            t2.grad(maps[0].0).is_none(),
            "frozen tensors accumulate no gradient"
        );
        let ge = t2.grad(e2).unwrap();
        assert!(ge.iter().any(|v| v.abs() > 0.0));
    }
}
