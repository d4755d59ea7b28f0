use crate::error::{Error, Result};

/// Smallest width of an activation range; narrower calibrated ranges are
/// widened symmetrically to this.
pub const MIN_RANGE: f32 = 1e-3;

/// Affine int8 mapping `real = scale · (q − zero_point)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantParams {
    pub scale: f32,
    pub zero_point: i32,
}

impl QuantParams {
    /// Asymmetric parameters covering `[min, max]` (extended to include 0).
    pub fn asymmetric(min: f32, max: f32) -> Result<Self> {
        if !(min.is_finite() && max.is_finite()) || min > max {
            return Err(Error::arg(format!("invalid activation range [{min}, {max}]")));
        }
        let (mut lo, mut hi) = (min.min(0.0), max.max(0.0));
        if hi - lo < MIN_RANGE {
            let mid = 0.5 * (lo + hi);
            lo = mid - 0.5 * MIN_RANGE;
            hi = mid + 0.5 * MIN_RANGE;
        }
        let scale = (hi - lo) / 255.0;
        let zero_point = (-128.0 - lo / scale).round().clamp(-128.0, 127.0) as i32;
        Ok(Self { scale, zero_point })
    }

    /// Symmetric parameters for a tensor with largest magnitude `max_abs`.
    pub fn symmetric(max_abs: f32) -> Self {
        let scale = if max_abs > 0.0 { max_abs / 127.0 } else { 1.0 };
        Self { scale, zero_point: 0 }
    }

    pub fn quantize(&self, v: f32) -> i8 {
        (round_half_away(v / self.scale) + self.zero_point as f32).clamp(-128.0, 127.0) as i8
    }

    pub fn dequantize(&self, q: i8) -> f32 {
        self.scale * (q as i32 - self.zero_point) as f32
    }
}

pub fn round_half_away(v: f32) -> f32 {
    // f32::round already rounds half away from zero
    v.round()
}

/// Symmetric per-tensor int8 weights in `[-127, 127]`.
pub fn quantize_weights(w: &[f32]) -> (Vec<i8>, QuantParams) {
    let qp = QuantParams::symmetric(w.iter().fold(0.0f32, |m, v| m.max(v.abs())));
    let q = w
        .iter()
        .map(|&v| round_half_away(v / qp.scale).clamp(-127.0, 127.0) as i8)
        .collect();
    (q, qp)
}

/// A positive real multiplier as `m0 · 2^(shift − 31)` with
/// `m0 ∈ [2^30, 2^31)`, applied with round-half-up integer arithmetic.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FixedMultiplier {
    pub m0: i32,
    pub shift: i32,
}

impl FixedMultiplier {
    pub fn new(real: f64) -> Result<Self> {
        if !(real > 0.0 && real.is_finite()) {
            return Err(Error::arg(format!("requantization multiplier {real} must be positive")));
        }
        let mut shift = real.log2().floor() as i32 + 1;
        let mut m0 = (real / 2f64.powi(shift) * 2f64.powi(31)).round() as i64;
        // correct for log2 rounding at exact powers of two
        while m0 >= 1 << 31 {
            m0 /= 2;
            shift += 1;
        }
        while m0 < 1 << 30 {
            m0 *= 2;
            shift -= 1;
        }
        if !(-31..=30).contains(&shift) {
            return Err(Error::arg(format!("requantization multiplier {real} is out of range")));
        }
        Ok(Self { m0: m0 as i32, shift })
    }

    pub fn apply(&self, acc: i32) -> i32 {
        let prod = acc as i64 * self.m0 as i64;
        let total = 31 - self.shift;
        let v = if total > 0 {
            (prod + (1i64 << (total - 1))) >> total
        } else {
            prod << -total
        };
        v.clamp(i32::MIN as i64, i32::MAX as i64) as i32
    }

    pub fn to_f64(&self) -> f64 {
        self.m0 as f64 * 2f64.powi(self.shift - 31)
    }
}
