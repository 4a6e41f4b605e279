//! Scalar abstraction over `f32`/`f64`, ULP comparison, and compensated
//! (double-double) accumulation primitives.

use std::fmt;

/// Floating-point scalar the numeric core is generic over.
///
/// Implemented for `f32` and `f64`. Beyond `num_traits::Float`, this adds
/// byte-level little-endian serialization (for checkpoints), exact
/// round-trips through `f64`, and ULP distance (for bit-level tests).
pub trait Scalar:
    num_traits::Float
    + num_traits::NumAssign
    + fmt::Debug
    + fmt::Display
    + fmt::LowerExp
    + std::iter::Sum
    + Send
    + Sync
    + 'static
{
    /// Size of one value in bytes.
    const BYTES: usize;
    /// Short precision name, e.g. `"f32"`.
    const NAME: &'static str;

    /// Lossy conversion from `f64` (exact when `Self = f64`).
    fn from_f64(x: f64) -> Self;
    /// Widening conversion to `f64` (always exact).
    fn to_f64(self) -> f64;
    /// Append the little-endian byte representation to `out`.
    fn write_le(self, out: &mut Vec<u8>);
    /// Read one value from the first `Self::BYTES` bytes of `bytes`.
    ///
    /// # Panics
    /// Panics if `bytes` is shorter than `Self::BYTES`.
    fn read_le(bytes: &[u8]) -> Self;
    /// Distance between `a` and `b` in units of last place.
    ///
    /// Returns `u64::MAX` if either value is NaN. Signed values are mapped
    /// onto a monotone integer line so that the distance across zero is
    /// meaningful (e.g. `-0.0` and `+0.0` are 0 apart).
    fn ulps_diff(a: Self, b: Self) -> u64;
}

impl Scalar for f32 {
    const BYTES: usize = 4;
    const NAME: &'static str = "f32";

    #[inline]
    fn from_f64(x: f64) -> Self {
        x as f32
    }
    #[inline]
    fn to_f64(self) -> f64 {
        self as f64
    }
    fn write_le(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }
    fn read_le(bytes: &[u8]) -> Self {
        f32::from_le_bytes(bytes[..4].try_into().unwrap())
    }
    fn ulps_diff(a: Self, b: Self) -> u64 {
        if a.is_nan() || b.is_nan() {
            return u64::MAX;
        }
        let to_ordered = |x: f32| -> i64 {
            let bits = x.to_bits() as i32;
            // Map sign-magnitude onto a monotone line.
            let v = if bits < 0 { i32::MIN.wrapping_sub(bits) } else { bits };
            v as i64
        };
        (to_ordered(a) - to_ordered(b)).unsigned_abs()
    }
}

impl Scalar for f64 {
    const BYTES: usize = 8;
    const NAME: &'static str = "f64";

    #[inline]
    fn from_f64(x: f64) -> Self {
        x
    }
    #[inline]
    fn to_f64(self) -> f64 {
        self
    }
    fn write_le(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }
    fn read_le(bytes: &[u8]) -> Self {
        f64::from_le_bytes(bytes[..8].try_into().unwrap())
    }
    fn ulps_diff(a: Self, b: Self) -> u64 {
        if a.is_nan() || b.is_nan() {
            return u64::MAX;
        }
        let to_ordered = |x: f64| -> i128 {
            let bits = x.to_bits() as i64;
            let v = if bits < 0 { i64::MIN.wrapping_sub(bits) } else { bits };
            v as i128
        };
        let d = (to_ordered(a) - to_ordered(b)).unsigned_abs();
        u64::try_from(d).unwrap_or(u64::MAX)
    }
}

/// Double-double (compensated) arithmetic on `f64` pairs `(hi, lo)` with
/// `hi + lo` representing the value and `|lo| <= ulp(hi)/2`.
///
/// Used where two algebraically equal evaluation orders must agree to a
/// handful of ULPs even for ill-conditioned sums: each route is
/// accumulated without intermediate rounding and rounded exactly once at
/// the end.
pub mod dd {
    /// Error-free sum: returns `(s, e)` with `s = fl(a+b)` and `a+b = s+e` exactly.
    #[inline]
    pub fn two_sum(a: f64, b: f64) -> (f64, f64) {
        let s = a + b;
        let bb = s - a;
        let e = (a - (s - bb)) + (b - bb);
        (s, e)
    }

    /// Error-free product: returns `(p, e)` with `p = fl(a*b)` and `a*b = p+e` exactly.
    #[inline]
    pub fn two_prod(a: f64, b: f64) -> (f64, f64) {
        let p = a * b;
        let (ah, al) = split(a);
        let (bh, bl) = split(b);
        let e = ((ah * bh - p) + ah * bl + al * bh) + al * bl;
        (p, e)
    }

    /// Dekker split of `a` into high and low parts with non-overlapping mantissas.
    #[inline]
    pub fn split(a: f64) -> (f64, f64) {
        // 2^27 + 1 for the 53-bit significand of f64.
        const SPLITTER: f64 = 134_217_729.0;
        let c = SPLITTER * a;
        let hi = c - (c - a);
        (hi, a - hi)
    }

    /// Sum of two double-doubles.
    #[inline]
    pub fn add(a: (f64, f64), b: (f64, f64)) -> (f64, f64) {
        let (s, e) = two_sum(a.0, b.0);
        let e = e + a.1 + b.1;
        quick_renorm(s, e)
    }

    /// Add a plain `f64` to a double-double.
    #[inline]
    pub fn add_f64(a: (f64, f64), b: f64) -> (f64, f64) {
        let (s, e) = two_sum(a.0, b);
        quick_renorm(s, e + a.1)
    }

    /// Round a double-double to the nearest `f64`.
    #[inline]
    pub fn round(a: (f64, f64)) -> f64 {
        a.0 + a.1
    }

    #[inline]
    fn quick_renorm(hi: f64, lo: f64) -> (f64, f64) {
        let s = hi + lo;
        (s, lo - (s - hi))
    }

    /// Dot product of `a` and `b` accumulated in double-double, returned
    /// unrounded so callers can keep composing exactly.
    pub fn dot(a: &[f64], b: &[f64]) -> (f64, f64) {
        debug_assert_eq!(a.len(), b.len());
        let mut acc = (0.0, 0.0);
        for (&x, &y) in a.iter().zip(b.iter()) {
            acc = add(acc, two_prod(x, y));
        }
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ulps_adjacent_values() {
        let a = 1.0f32;
        let b = f32::from_bits(a.to_bits() + 1);
        assert_eq!(f32::ulps_diff(a, b), 1);
        assert_eq!(f32::ulps_diff(a, a), 0);
        assert_eq!(f32::ulps_diff(-0.0, 0.0), 0);

        let a = 1.0f64;
        let b = f64::from_bits(a.to_bits() + 3);
        assert_eq!(f64::ulps_diff(a, b), 3);
        assert_eq!(f64::ulps_diff(f64::NAN, 1.0), u64::MAX);
    }

    #[test]
    fn ulps_across_zero_is_small() {
        let a = f32::from_bits(1); // smallest positive subnormal
        let b = -f32::from_bits(1);
        assert_eq!(f32::ulps_diff(a, b), 2);
    }

    #[test]
    fn le_round_trip_is_bit_exact() {
        let values64 = [0.0f64, -0.0, 1.5, -3.25e-200, f64::MAX, 1.0 / 3.0];
        for &v in &values64 {
            let mut buf = Vec::new();
            v.write_le(&mut buf);
            assert_eq!(buf.len(), 8);
            assert_eq!(f64::read_le(&buf).to_bits(), v.to_bits());
        }
        let values32 = [0.0f32, -0.0, 1.5, 7.0e-30, f32::MAX, 1.0 / 3.0];
        for &v in &values32 {
            let mut buf = Vec::new();
            v.write_le(&mut buf);
            assert_eq!(buf.len(), 4);
            assert_eq!(f32::read_le(&buf).to_bits(), v.to_bits());
        }
    }

    #[test]
    fn two_sum_is_error_free() {
        // 1.0 + 2^-60 rounds to 1.0; the error term must recover 2^-60 exactly.
        let (s, e) = dd::two_sum(1.0, 2f64.powi(-60));
        assert_eq!(s, 1.0);
        assert_eq!(e, 2f64.powi(-60));
    }

    #[test]
    fn two_prod_is_error_free() {
        // (1 + 2^-30)^2 = 1 + 2^-29 + 2^-60: the tail does not fit in one f64.
        let a = 1.0 + 2f64.powi(-30);
        let (p, e) = dd::two_prod(a, a);
        // p + e must equal the exact product.
        let exact_hi = 1.0 + 2f64.powi(-29);
        let exact_lo = 2f64.powi(-60);
        assert_eq!(p, exact_hi);
        assert_eq!(e, exact_lo);
    }

    #[test]
    fn dd_dot_matches_exact_rational_example() {
        // Catastrophic cancellation: naive sum loses all precision, dd keeps it.
        let a = [1.0, 1e16, -1e16];
        let b = [1.0, 1.0, 1.0];
        let naive: f64 = a.iter().sum();
        // Naive left-to-right: (1 + 1e16) = 1e16 (1 absorbed), - 1e16 = 0.
        assert_eq!(naive, 0.0);
        assert_eq!(dd::round(dd::dot(&a, &b)), 1.0);
    }
}
