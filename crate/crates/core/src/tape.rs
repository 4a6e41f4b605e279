//! Buffer-level reverse-mode gradient tape.
//!
//! Forward operations append value buffers and an op record; `backward`
//! replays the records in reverse, accumulating adjoints. The op set is
//! deliberately small — exactly what the encoder, hypernetwork, decoders
//! and losses need — and every accumulation loop has a fixed iteration
//! order, so gradients are reproducible bit-for-bit.
//!
//! Buffers are matrices in row-major order; vectors are `n x 1` columns.
//! Leaves are either *parameters* (gradients accumulated) or *constants*
//! (no gradient). A buffer's `needs_grad` flag propagates through ops so
//! backward work is skipped for subgraphs that cannot reach a parameter —
//! e.g. during embedding optimization only the embedding receives work.
//!
//! After `backward`, gradients remain readable for leaf buffers; the
//! adjoint storage of intermediate buffers is consumed by the reverse
//! pass itself.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg;
use crate::scalar::Scalar;

/// Handle to a buffer on the tape.
pub type BufId = usize;

enum Storage<S> {
    Owned(Vec<S>),
    /// Shared constant storage; lets hot loops re-register large frozen
    /// tensors every iteration without copying them.
    Shared(Arc<[S]>),
}

impl<S> Storage<S> {
    fn as_slice(&self) -> &[S] {
        match self {
            Storage::Owned(v) => v,
            Storage::Shared(a) => a,
        }
    }
}

struct Buf<S> {
    data: Storage<S>,
    rows: usize,
    cols: usize,
    needs_grad: bool,
}

enum Op<S> {
    /// out = a · bᵀ, a: m x k, b: n x k.
    MatMulNt { a: BufId, b: BufId, out: BufId },
    /// out = w · x, w: r x c, x: c x 1.
    MatVec { w: BufId, x: BufId, out: BufId },
    Add { a: BufId, b: BufId, out: BufId },
    Sub { a: BufId, b: BufId, out: BufId },
    Mul { a: BufId, b: BufId, out: BufId },
    /// out[r, :] = x[r, :] + v, v: d x 1.
    AddRowBroadcast { x: BufId, v: BufId, out: BufId },
    /// out[r, :] = x[r, :] ∘ v, v: d x 1.
    MulRowBroadcast { x: BufId, v: BufId, out: BufId },
    Relu { x: BufId, out: BufId },
    /// Column-wise max with recorded argmax rows.
    MaxPoolCols { x: BufId, out: BufId, argmax: Vec<usize> },
    /// out = x.data[offset .. offset + len] reshaped to rows x cols.
    Slice { x: BufId, offset: usize, out: BufId },
    /// out = [x | 1 ⊗ vᵀ]: append the vector v to every row of x.
    ConcatColsVec { x: BufId, v: BufId, out: BufId },
    /// out[i, :] = x[idx[i], :].
    GatherRows { x: BufId, idx: Vec<usize>, out: BufId },
    Scale { x: BufId, factor: S, out: BufId },
    /// Sum of all entries (scalar out).
    Sum { x: BufId, out: BufId },
    /// Sum of squared entries (scalar out).
    SumSquares { x: BufId, out: BufId },
}

/// Reverse-mode tape. Build a graph with the recording methods, call
/// [`GradTape::backward`] on a scalar loss, then read gradients with
/// [`GradTape::grad`].
pub struct GradTape<S: Scalar> {
    bufs: Vec<Buf<S>>,
    ops: Vec<Op<S>>,
    grads: Vec<Option<Vec<S>>>,
}

impl<S: Scalar> Default for GradTape<S> {
    fn default() -> Self {
        Self::new()
    }
}

fn val<S: Scalar>(bufs: &[Buf<S>], id: BufId) -> &[S] {
    bufs[id].data.as_slice()
}

fn numel<S>(bufs: &[Buf<S>], id: BufId) -> usize {
    bufs[id].rows * bufs[id].cols
}

/// Mutable gradient slot for `id`, created zero-filled on first touch.
fn grad_slot<'g, S: Scalar>(
    bufs: &[Buf<S>],
    grads: &'g mut [Option<Vec<S>>],
    id: BufId,
) -> &'g mut [S] {
    let n = numel(bufs, id);
    grads[id].get_or_insert_with(|| vec![S::zero(); n])
}

impl<S: Scalar> GradTape<S> {
    pub fn new() -> Self {
        GradTape {
            bufs: Vec::new(),
            ops: Vec::new(),
            grads: Vec::new(),
        }
    }

    fn push_buf(&mut self, data: Storage<S>, rows: usize, cols: usize, needs_grad: bool) -> BufId {
        debug_assert_eq!(data.as_slice().len(), rows * cols);
        self.bufs.push(Buf {
            data,
            rows,
            cols,
            needs_grad,
        });
        self.grads.push(None);
        self.bufs.len() - 1
    }

    /// Register a constant leaf (no gradient), shaped `rows x cols`.
    pub fn constant(&mut self, data: Vec<S>, rows: usize, cols: usize) -> BufId {
        self.push_buf(Storage::Owned(data), rows, cols, false)
    }

    /// Register a constant leaf backed by shared storage (no copy).
    pub fn constant_shared(&mut self, data: Arc<[S]>, rows: usize, cols: usize) -> BufId {
        self.push_buf(Storage::Shared(data), rows, cols, false)
    }

    /// Register a constant column vector.
    pub fn constant_vec(&mut self, data: Vec<S>) -> BufId {
        let n = data.len();
        self.constant(data, n, 1)
    }

    /// Register a parameter leaf (gradient accumulated), shaped `rows x cols`.
    pub fn param(&mut self, data: Vec<S>, rows: usize, cols: usize) -> BufId {
        self.push_buf(Storage::Owned(data), rows, cols, true)
    }

    /// Register a parameter column vector.
    pub fn param_vec(&mut self, data: Vec<S>) -> BufId {
        let n = data.len();
        self.param(data, n, 1)
    }

    /// Value of a buffer.
    pub fn value(&self, id: BufId) -> &[S] {
        val(&self.bufs, id)
    }

    /// Shape of a buffer as `(rows, cols)`.
    pub fn shape(&self, id: BufId) -> (usize, usize) {
        (self.bufs[id].rows, self.bufs[id].cols)
    }

    /// Scalar value of a `1 x 1` buffer.
    pub fn scalar_value(&self, id: BufId) -> S {
        debug_assert_eq!(numel(&self.bufs, id), 1);
        self.value(id)[0]
    }

    /// Gradient of the last `backward` pass for `id` (leaves only; see
    /// the module docs), if any was accumulated.
    pub fn grad(&self, id: BufId) -> Option<&[S]> {
        self.grads[id].as_deref()
    }

    /// Gradient for `id`, or zeros of the right length if none reached it.
    pub fn grad_or_zeros(&self, id: BufId) -> Vec<S> {
        match &self.grads[id] {
            Some(g) => g.clone(),
            None => vec![S::zero(); numel(&self.bufs, id)],
        }
    }

    fn out_needs_grad(&self, inputs: &[BufId]) -> bool {
        inputs.iter().any(|&i| self.bufs[i].needs_grad)
    }

    fn shape_err(&self, op: &'static str, inputs: &[BufId]) -> Error {
        let detail = inputs
            .iter()
            .map(|&i| format!("buf{}: {}x{}", i, self.bufs[i].rows, self.bufs[i].cols))
            .collect::<Vec<_>>()
            .join(", ");
        Error::Shape { op, detail }
    }

    /// `a · bᵀ` for `a: m x k`, `b: n x k`, giving `m x n`.
    pub fn matmul_nt(&mut self, a: BufId, b: BufId) -> Result<BufId> {
        let (m, ka) = self.shape(a);
        let (n, kb) = self.shape(b);
        if ka != kb {
            return Err(self.shape_err("tape matmul_nt", &[a, b]));
        }
        let mut out = vec![S::zero(); m * n];
        {
            let av = self.value(a);
            let bv = self.value(b);
            for i in 0..m {
                let ar = &av[i * ka..(i + 1) * ka];
                for j in 0..n {
                    out[i * n + j] = linalg::dot(ar, &bv[j * ka..(j + 1) * ka]);
                }
            }
        }
        let ng = self.out_needs_grad(&[a, b]);
        let id = self.push_buf(Storage::Owned(out), m, n, ng);
        self.ops.push(Op::MatMulNt { a, b, out: id });
        Ok(id)
    }

    /// `w · x` for `w: r x c`, `x: c x 1`, giving `r x 1`.
    pub fn matvec(&mut self, w: BufId, x: BufId) -> Result<BufId> {
        let (r, c) = self.shape(w);
        let (xr, xc) = self.shape(x);
        if xc != 1 || c != xr {
            return Err(self.shape_err("tape matvec", &[w, x]));
        }
        let y = {
            let wv = self.value(w);
            let xv = self.value(x);
            (0..r)
                .map(|i| linalg::dot(&wv[i * c..(i + 1) * c], xv))
                .collect::<Vec<S>>()
        };
        let ng = self.out_needs_grad(&[w, x]);
        let id = self.push_buf(Storage::Owned(y), r, 1, ng);
        self.ops.push(Op::MatVec { w, x, out: id });
        Ok(id)
    }

    fn binary_elementwise(
        &mut self,
        opname: &'static str,
        a: BufId,
        b: BufId,
        f: impl Fn(S, S) -> S,
    ) -> Result<Vec<S>> {
        if self.shape(a) != self.shape(b) {
            return Err(self.shape_err(opname, &[a, b]));
        }
        Ok(self
            .value(a)
            .iter()
            .zip(self.value(b).iter())
            .map(|(&u, &v)| f(u, v))
            .collect())
    }

    pub fn add(&mut self, a: BufId, b: BufId) -> Result<BufId> {
        let out = self.binary_elementwise("tape add", a, b, |u, v| u + v)?;
        let (r, c) = self.shape(a);
        let ng = self.out_needs_grad(&[a, b]);
        let id = self.push_buf(Storage::Owned(out), r, c, ng);
        self.ops.push(Op::Add { a, b, out: id });
        Ok(id)
    }

    pub fn sub(&mut self, a: BufId, b: BufId) -> Result<BufId> {
        let out = self.binary_elementwise("tape sub", a, b, |u, v| u - v)?;
        let (r, c) = self.shape(a);
        let ng = self.out_needs_grad(&[a, b]);
        let id = self.push_buf(Storage::Owned(out), r, c, ng);
        self.ops.push(Op::Sub { a, b, out: id });
        Ok(id)
    }

    pub fn mul(&mut self, a: BufId, b: BufId) -> Result<BufId> {
        let out = self.binary_elementwise("tape mul", a, b, |u, v| u * v)?;
        let (r, c) = self.shape(a);
        let ng = self.out_needs_grad(&[a, b]);
        let id = self.push_buf(Storage::Owned(out), r, c, ng);
        self.ops.push(Op::Mul { a, b, out: id });
        Ok(id)
    }

    /// Add the column vector `v` (`d x 1`) to every row of `x` (`n x d`).
    pub fn add_row_broadcast(&mut self, x: BufId, v: BufId) -> Result<BufId> {
        let (n, d) = self.shape(x);
        let (vr, vc) = self.shape(v);
        if vc != 1 || vr != d {
            return Err(self.shape_err("tape add_row_broadcast", &[x, v]));
        }
        let mut out = self.value(x).to_vec();
        {
            let vv = self.value(v);
            for r in 0..n {
                for c in 0..d {
                    out[r * d + c] = out[r * d + c] + vv[c];
                }
            }
        }
        let ng = self.out_needs_grad(&[x, v]);
        let id = self.push_buf(Storage::Owned(out), n, d, ng);
        self.ops.push(Op::AddRowBroadcast { x, v, out: id });
        Ok(id)
    }

    /// Multiply every row of `x` (`n x d`) elementwise by `v` (`d x 1`).
    pub fn mul_row_broadcast(&mut self, x: BufId, v: BufId) -> Result<BufId> {
        let (n, d) = self.shape(x);
        let (vr, vc) = self.shape(v);
        if vc != 1 || vr != d {
            return Err(self.shape_err("tape mul_row_broadcast", &[x, v]));
        }
        let mut out = self.value(x).to_vec();
        {
            let vv = self.value(v);
            for r in 0..n {
                for c in 0..d {
                    out[r * d + c] = out[r * d + c] * vv[c];
                }
            }
        }
        let ng = self.out_needs_grad(&[x, v]);
        let id = self.push_buf(Storage::Owned(out), n, d, ng);
        self.ops.push(Op::MulRowBroadcast { x, v, out: id });
        Ok(id)
    }

    /// Elementwise rectifier; the backward pass uses the convention
    /// `relu'(0) = 0` (mask taken from the stored input values).
    pub fn relu(&mut self, x: BufId) -> BufId {
        let out = linalg::relu(self.value(x));
        let (r, c) = self.shape(x);
        let ng = self.bufs[x].needs_grad;
        let id = self.push_buf(Storage::Owned(out), r, c, ng);
        self.ops.push(Op::Relu { x, out: id });
        id
    }

    /// Column-wise max over `x` (`n x d`) giving `d x 1`; argmax rows are
    /// recorded (lowest index on ties) and backward routes each entry's
    /// adjoint to exactly that row.
    pub fn maxpool_cols(&mut self, x: BufId) -> Result<BufId> {
        let (n, d) = self.shape(x);
        if n == 0 || d == 0 {
            return Err(Error::EmptyCloud("tape maxpool_cols"));
        }
        let (vals, argmax) = {
            let xv = self.value(x);
            let mut vals: Vec<S> = xv[..d].to_vec();
            let mut arg = vec![0usize; d];
            for r in 1..n {
                for c in 0..d {
                    if xv[r * d + c] > vals[c] {
                        vals[c] = xv[r * d + c];
                        arg[c] = r;
                    }
                }
            }
            (vals, arg)
        };
        let ng = self.bufs[x].needs_grad;
        let id = self.push_buf(Storage::Owned(vals), d, 1, ng);
        self.ops.push(Op::MaxPoolCols { x, out: id, argmax });
        Ok(id)
    }

    /// Contiguous slice of a buffer's row-major data, reshaped to
    /// `rows x cols`. Backward scatter-adds into the source range.
    pub fn slice(&mut self, x: BufId, offset: usize, rows: usize, cols: usize) -> Result<BufId> {
        let len = rows * cols;
        let total = numel(&self.bufs, x);
        if offset + len > total {
            return Err(Error::Shape {
                op: "tape slice",
                detail: format!(
                    "slice {}..{} out of buffer of {} entries",
                    offset,
                    offset + len,
                    total
                ),
            });
        }
        let out = self.value(x)[offset..offset + len].to_vec();
        let ng = self.bufs[x].needs_grad;
        let id = self.push_buf(Storage::Owned(out), rows, cols, ng);
        self.ops.push(Op::Slice { x, offset, out: id });
        Ok(id)
    }

    /// Append the column vector `v` (`b x 1`) to every row of `x`
    /// (`n x a`), giving `n x (a+b)`.
    pub fn concat_cols_vec(&mut self, x: BufId, v: BufId) -> Result<BufId> {
        let (n, a) = self.shape(x);
        let (b, vc) = self.shape(v);
        if vc != 1 {
            return Err(self.shape_err("tape concat_cols_vec", &[x, v]));
        }
        let mut out = Vec::with_capacity(n * (a + b));
        {
            let xv = self.value(x);
            let vv = self.value(v);
            for r in 0..n {
                out.extend_from_slice(&xv[r * a..(r + 1) * a]);
                out.extend_from_slice(vv);
            }
        }
        let ng = self.out_needs_grad(&[x, v]);
        let id = self.push_buf(Storage::Owned(out), n, a + b, ng);
        self.ops.push(Op::ConcatColsVec { x, v, out: id });
        Ok(id)
    }

    /// Gather rows of `x` by index; repeated indices are allowed and their
    /// adjoints accumulate.
    pub fn gather_rows(&mut self, x: BufId, idx: Vec<usize>) -> Result<BufId> {
        let (n, d) = self.shape(x);
        if let Some(&bad) = idx.iter().find(|&&i| i >= n) {
            return Err(Error::Shape {
                op: "tape gather_rows",
                detail: format!("row index {} out of range for {} rows", bad, n),
            });
        }
        let mut out = Vec::with_capacity(idx.len() * d);
        {
            let xv = self.value(x);
            for &i in &idx {
                out.extend_from_slice(&xv[i * d..(i + 1) * d]);
            }
        }
        let k = idx.len();
        let ng = self.bufs[x].needs_grad;
        let id = self.push_buf(Storage::Owned(out), k, d, ng);
        self.ops.push(Op::GatherRows { x, idx, out: id });
        Ok(id)
    }

    /// Multiply every entry by a constant factor.
    pub fn scale(&mut self, x: BufId, factor: S) -> BufId {
        let out: Vec<S> = self.value(x).iter().map(|&v| v * factor).collect();
        let (r, c) = self.shape(x);
        let ng = self.bufs[x].needs_grad;
        let id = self.push_buf(Storage::Owned(out), r, c, ng);
        self.ops.push(Op::Scale { x, factor, out: id });
        id
    }

    /// Sum of all entries, in row-major order, giving a scalar buffer.
    pub fn sum(&mut self, x: BufId) -> BufId {
        let mut acc = S::zero();
        for &v in self.value(x) {
            acc = acc + v;
        }
        let ng = self.bufs[x].needs_grad;
        let id = self.push_buf(Storage::Owned(vec![acc]), 1, 1, ng);
        self.ops.push(Op::Sum { x, out: id });
        id
    }

    /// Sum of squared entries, in row-major order, giving a scalar buffer.
    pub fn sum_squares(&mut self, x: BufId) -> BufId {
        let mut acc = S::zero();
        for &v in self.value(x) {
            acc = acc + v * v;
        }
        let ng = self.bufs[x].needs_grad;
        let id = self.push_buf(Storage::Owned(vec![acc]), 1, 1, ng);
        self.ops.push(Op::SumSquares { x, out: id });
        id
    }

    /// Reverse pass from the scalar buffer `loss`, seeding its adjoint
    /// with 1 and replaying all recorded ops in reverse order.
    ///
    /// Clears gradients from any previous pass. Fails if `loss` is not
    /// `1 x 1` or if its value is non-finite.
    pub fn backward(&mut self, loss: BufId) -> Result<()> {
        if numel(&self.bufs, loss) != 1 {
            return Err(Error::Contract(format!(
                "backward requires a scalar loss buffer; buf{} is {}x{}",
                loss, self.bufs[loss].rows, self.bufs[loss].cols
            )));
        }
        if !self.value(loss)[0].is_finite() {
            return Err(Error::NonFinite("backward loss".into()));
        }
        for g in self.grads.iter_mut() {
            *g = None;
        }
        self.grads[loss] = Some(vec![S::one()]);

        let bufs = &self.bufs;
        let grads = &mut self.grads;

        for op in self.ops.iter().rev() {
            match op {
                &Op::MatMulNt { a, b, out } => {
                    let Some(go) = std::mem::take(&mut grads[out]) else { continue };
                    let (m, k) = (bufs[a].rows, bufs[a].cols);
                    let n = bufs[b].rows;
                    if bufs[a].needs_grad {
                        let bv = val(bufs, b);
                        let da = grad_slot(bufs, grads, a);
                        for i in 0..m {
                            for j in 0..n {
                                let g = go[i * n + j];
                                for c in 0..k {
                                    da[i * k + c] = da[i * k + c] + g * bv[j * k + c];
                                }
                            }
                        }
                    }
                    if bufs[b].needs_grad {
                        let av = val(bufs, a);
                        let db = grad_slot(bufs, grads, b);
                        for i in 0..m {
                            for j in 0..n {
                                let g = go[i * n + j];
                                for c in 0..k {
                                    db[j * k + c] = db[j * k + c] + g * av[i * k + c];
                                }
                            }
                        }
                    }
                }
                &Op::MatVec { w, x, out } => {
                    let Some(go) = std::mem::take(&mut grads[out]) else { continue };
                    let (r, c) = (bufs[w].rows, bufs[w].cols);
                    if bufs[w].needs_grad {
                        let xv = val(bufs, x);
                        let dw = grad_slot(bufs, grads, w);
                        for i in 0..r {
                            let g = go[i];
                            for j in 0..c {
                                dw[i * c + j] = dw[i * c + j] + g * xv[j];
                            }
                        }
                    }
                    if bufs[x].needs_grad {
                        let wv = val(bufs, w);
                        let dx = grad_slot(bufs, grads, x);
                        for i in 0..r {
                            let g = go[i];
                            for j in 0..c {
                                dx[j] = dx[j] + g * wv[i * c + j];
                            }
                        }
                    }
                }
                &Op::Add { a, b, out } => {
                    let Some(go) = std::mem::take(&mut grads[out]) else { continue };
                    if bufs[a].needs_grad {
                        let da = grad_slot(bufs, grads, a);
                        for (d, &g) in da.iter_mut().zip(go.iter()) {
                            *d = *d + g;
                        }
                    }
                    if bufs[b].needs_grad {
                        let db = grad_slot(bufs, grads, b);
                        for (d, &g) in db.iter_mut().zip(go.iter()) {
                            *d = *d + g;
                        }
                    }
                }
                &Op::Sub { a, b, out } => {
                    let Some(go) = std::mem::take(&mut grads[out]) else { continue };
                    if bufs[a].needs_grad {
                        let da = grad_slot(bufs, grads, a);
                        for (d, &g) in da.iter_mut().zip(go.iter()) {
                            *d = *d + g;
                        }
                    }
                    if bufs[b].needs_grad {
                        let db = grad_slot(bufs, grads, b);
                        for (d, &g) in db.iter_mut().zip(go.iter()) {
                            *d = *d - g;
                        }
                    }
                }
                &Op::Mul { a, b, out } => {
                    let Some(go) = std::mem::take(&mut grads[out]) else { continue };
                    if bufs[a].needs_grad {
                        let bv = val(bufs, b);
                        let da = grad_slot(bufs, grads, a);
                        for i in 0..go.len() {
                            da[i] = da[i] + go[i] * bv[i];
                        }
                    }
                    if bufs[b].needs_grad {
                        let av = val(bufs, a);
                        let db = grad_slot(bufs, grads, b);
                        for i in 0..go.len() {
                            db[i] = db[i] + go[i] * av[i];
                        }
                    }
                }
                &Op::AddRowBroadcast { x, v, out } => {
                    let Some(go) = std::mem::take(&mut grads[out]) else { continue };
                    let (n, d) = (bufs[x].rows, bufs[x].cols);
                    if bufs[x].needs_grad {
                        let dx = grad_slot(bufs, grads, x);
                        for (di, &g) in dx.iter_mut().zip(go.iter()) {
                            *di = *di + g;
                        }
                    }
                    if bufs[v].needs_grad {
                        let dv = grad_slot(bufs, grads, v);
                        for r in 0..n {
                            for c in 0..d {
                                dv[c] = dv[c] + go[r * d + c];
                            }
                        }
                    }
                }
                &Op::MulRowBroadcast { x, v, out } => {
                    let Some(go) = std::mem::take(&mut grads[out]) else { continue };
                    let (n, d) = (bufs[x].rows, bufs[x].cols);
                    if bufs[x].needs_grad {
                        let vv = val(bufs, v);
                        let dx = grad_slot(bufs, grads, x);
                        for r in 0..n {
                            for c in 0..d {
                                dx[r * d + c] = dx[r * d + c] + go[r * d + c] * vv[c];
                            }
                        }
                    }
                    if bufs[v].needs_grad {
                        let xv = val(bufs, x);
                        let dv = grad_slot(bufs, grads, v);
                        for r in 0..n {
                            for c in 0..d {
                                dv[c] = dv[c] + go[r * d + c] * xv[r * d + c];
                            }
                        }
                    }
                }
                &Op::Relu { x, out } => {
                    let Some(go) = std::mem::take(&mut grads[out]) else { continue };
                    let xv = val(bufs, x);
                    let dx = grad_slot(bufs, grads, x);
                    for i in 0..go.len() {
                        if xv[i] > S::zero() {
                            dx[i] = dx[i] + go[i];
                        }
                    }
                }
                Op::MaxPoolCols { x, out, argmax } => {
                    let x = *x;
                    let Some(go) = std::mem::take(&mut grads[*out]) else { continue };
                    let d = bufs[x].cols;
                    let dx = grad_slot(bufs, grads, x);
                    for c in 0..d {
                        dx[argmax[c] * d + c] = dx[argmax[c] * d + c] + go[c];
                    }
                }
                &Op::Slice { x, offset, out } => {
                    let Some(go) = std::mem::take(&mut grads[out]) else { continue };
                    let dx = grad_slot(bufs, grads, x);
                    for (i, &g) in go.iter().enumerate() {
                        dx[offset + i] = dx[offset + i] + g;
                    }
                }
                &Op::ConcatColsVec { x, v, out } => {
                    let Some(go) = std::mem::take(&mut grads[out]) else { continue };
                    let (n, a) = (bufs[x].rows, bufs[x].cols);
                    let b = bufs[v].rows;
                    if bufs[x].needs_grad {
                        let dx = grad_slot(bufs, grads, x);
                        for r in 0..n {
                            for c in 0..a {
                                dx[r * a + c] = dx[r * a + c] + go[r * (a + b) + c];
                            }
                        }
                    }
                    if bufs[v].needs_grad {
                        let dv = grad_slot(bufs, grads, v);
                        for r in 0..n {
                            for j in 0..b {
                                dv[j] = dv[j] + go[r * (a + b) + a + j];
                            }
                        }
                    }
                }
                Op::GatherRows { x, idx, out } => {
                    let x = *x;
                    let Some(go) = std::mem::take(&mut grads[*out]) else { continue };
                    let d = bufs[x].cols;
                    let dx = grad_slot(bufs, grads, x);
                    for (i, &src) in idx.iter().enumerate() {
                        for c in 0..d {
                            dx[src * d + c] = dx[src * d + c] + go[i * d + c];
                        }
                    }
                }
                &Op::Scale { x, factor, out } => {
                    let Some(go) = std::mem::take(&mut grads[out]) else { continue };
                    let dx = grad_slot(bufs, grads, x);
                    for (d, &g) in dx.iter_mut().zip(go.iter()) {
                        *d = *d + g * factor;
                    }
                }
                &Op::Sum { x, out } => {
                    let Some(go) = std::mem::take(&mut grads[out]) else { continue };
                    let g = go[0];
                    let dx = grad_slot(bufs, grads, x);
                    for d in dx.iter_mut() {
                        *d = *d + g;
                    }
                }
                &Op::SumSquares { x, out } => {
                    let Some(go) = std::mem::take(&mut grads[out]) else { continue };
                    let g = go[0];
                    let two = S::from_f64(2.0);
                    let xv = val(bufs, x);
                    let dx = grad_slot(bufs, grads, x);
                    for i in 0..dx.len() {
                        dx[i] = dx[i] + two * g * xv[i];
                    }
                }
            }
        }
        Ok(())
    }
}
