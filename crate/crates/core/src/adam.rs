//! ADAM optimizer with bias-corrected moment estimates.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Per-parameter first/second moment state for ADAM.
///
/// Moments are stored flat; callers keep their parameters flattened in a
/// fixed canonical order. Defaults: `beta1 = 0.9`, `beta2 = 0.999`,
/// `eps = 1e-8`.
#[derive(Clone, Debug)]
pub struct AdamState<S> {
    m: Vec<S>,
    v: Vec<S>,
    t: u64,
    pub beta1: S,
    pub beta2: S,
    pub eps: S,
}

impl<S: Scalar> AdamState<S> {
    /// Fresh state for `n` parameters with default hyperparameters.
    pub fn new(n: usize) -> Self {
        AdamState {
            m: vec![S::zero(); n],
            v: vec![S::zero(); n],
            t: 0,
            beta1: S::from_f64(0.9),
            beta2: S::from_f64(0.999),
            eps: S::from_f64(1e-8),
        }
    }

    /// Number of steps taken so far.
    pub fn steps(&self) -> u64 {
        self.t
    }

    /// Number of parameters this state tracks.
    pub fn len(&self) -> usize {
        self.m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m.is_empty()
    }

    /// One in-place update of `params` from `grads` with learning rate `lr`.
    ///
    /// With zero moments (the first step), the update direction is
    /// `lr * g / (|g| + eps)` per coordinate — i.e. the first step has
    /// magnitude just under `lr` wherever the gradient is nonzero.
    pub fn step(&mut self, params: &mut [S], grads: &[S], lr: S) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::Shape {
                op: "adam step",
                detail: format!(
                    "state tracks {} parameters, got {} params and {} grads",
                    self.m.len(),
                    params.len(),
                    grads.len()
                ),
            });
        }
        if grads.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite("adam gradient".into()));
        }
        self.t += 1;
        let one = S::one();
        let b1 = self.beta1;
        let b2 = self.beta2;
        // Bias corrections 1 - beta^t.
        let b1t = one - b1.powi(self.t as i32);
        let b2t = one - b2.powi(self.t as i32);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = b1 * self.m[i] + (one - b1) * g;
            self.v[i] = b2 * self.v[i] + (one - b2) * g * g;
            let mhat = self.m[i] / b1t;
            let vhat = self.v[i] / b2t;
            params[i] = params[i] - lr * mhat / (vhat.sqrt() + self.eps);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_has_closed_form() {
        // After one step from zero moments: mhat = g, vhat = g², so the
        // update is lr * g / (|g| + eps).
        let mut st = AdamState::<f64>::new(3);
        let mut p = vec![1.0, -2.0, 0.5];
        let g = vec![0.4, -0.3, 0.0];
        st.step(&mut p, &g, 0.1).unwrap();
        for i in 0..3 {
            let expect = [1.0, -2.0, 0.5][i] - 0.1 * g[i] / (g[i].abs() + 1e-8);
            assert!((p[i] - expect).abs() < 1e-12, "{} vs {}", p[i], expect);
        }
        // Zero gradient leaves the parameter untouched.
        assert_eq!(p[2], 0.5);
    }

    #[test]
    fn second_step_matches_recurrence_by_hand() {
        let mut st = AdamState::<f64>::new(1);
        let mut p = vec![0.0];
        let lr = 0.01;
        let (b1, b2, eps) = (0.9, 0.999, 1e-8);
        let g1 = 0.5;
        let g2 = -0.2;
        st.step(&mut p, &[g1], lr).unwrap();
        st.step(&mut p, &[g2], lr).unwrap();

        // Independent recomputation of two steps.
        let mut m = 0.0;
        let mut v = 0.0;
        let mut q = 0.0;
        for (t, g) in [(1, g1), (2, g2)] {
            m = b1 * m + (1.0 - b1) * g;
            v = b2 * v + (1.0 - b2) * g * g;
            let mhat = m / (1.0 - b1f(b1, t));
            let vhat = v / (1.0 - b1f(b2, t));
            q -= lr * mhat / (vhat.sqrt() + eps);
        }
        assert!((p[0] - q).abs() < 1e-15, "{} vs {}", p[0], q);

        fn b1f(b: f64, t: i32) -> f64 {
            b.powi(t)
        }
    }

    #[test]
    fn rejects_mismatched_lengths_and_nonfinite_grads() {
        let mut st = AdamState::<f64>::new(2);
        let mut p = vec![0.0, 0.0];
        assert!(st.step(&mut p, &[1.0], 0.1).is_err());
        assert!(st.step(&mut p, &[1.0, f64::NAN], 0.1).is_err());
        // Failed steps must not advance the step counter.
        assert_eq!(st.steps(), 0);
    }

    #[test]
    fn identical_inputs_give_identical_bits() {
        let run = || {
            let mut st = AdamState::<f32>::new(4);
            let mut p = vec![0.1f32, -0.2, 0.3, -0.4];
            for k in 0..25 {
                let g: Vec<f32> = p.iter().map(|&x| 2.0 * x + k as f32 * 1e-3).collect();
                st.step(&mut p, &g, 1e-2).unwrap();
            }
            p
        };
        let a = run();
        let b = run();
        for (x, y) in a.iter().zip(b.iter()) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }
}
