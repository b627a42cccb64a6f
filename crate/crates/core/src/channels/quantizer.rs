//! Scalar output quantizers.

use crate::error::{arg, Result};
use crate::special::normal_interval;

/// Partition of the real line by thresholds `t_1 < ... < t_{K-1}`.
///
/// Bin `k` covers `(t_k, t_{k+1}]` with the outer bins unbounded, so a value
/// exactly on a threshold falls into the lower bin.
#[derive(Debug, Clone, PartialEq)]
pub struct Quantizer {
    thresholds: Vec<f64>,
}

impl Quantizer {
    pub fn bins(&self) -> usize {
        self.thresholds.len() + 1
    }

    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }

    pub fn quantize(&self, v: f64) -> usize {
        self.thresholds.partition_point(|&t| t < v)
    }

    /// Lower and upper edge of bin `k`.
    pub fn edges(&self, k: usize) -> (f64, f64) {
        let lo = if k == 0 { f64::NEG_INFINITY } else { self.thresholds[k - 1] };
        let hi = self.thresholds.get(k).copied().unwrap_or(f64::INFINITY);
        (lo, hi)
    }

    /// Bin probabilities of `Normal(mean, sd^2)`.
    pub fn gaussian_pmf(&self, mean: f64, sd: f64, out: &mut [f64]) {
        for (k, o) in out.iter_mut().enumerate().take(self.bins()) {
            let (lo, hi) = self.edges(k);
            *o = normal_interval(lo, hi, mean, sd);
        }
    }

    /// Mirror image of bin `k` when the thresholds are symmetric about zero.
    pub fn mirror(&self, k: usize) -> usize {
        self.bins() - 1 - k
    }

    pub fn is_symmetric(&self) -> bool {
        let n = self.thresholds.len();
        (0..n).all(|i| (self.thresholds[i] + self.thresholds[n - 1 - i]).abs() <= 1e-12 * (1.0 + self.thresholds[i].abs()))
    }
}

/// Builds a quantizer from strictly increasing finite thresholds.
pub fn make_quantizer(thresholds: &[f64]) -> Result<Quantizer> {
    if thresholds.iter().any(|t| !t.is_finite()) {
        return arg("thresholds must be finite");
    }
    if thresholds.windows(2).any(|w| w[0] >= w[1]) {
        return arg("thresholds must be strictly increasing");
    }
    Ok(Quantizer { thresholds: thresholds.to_vec() })
}

/// Builds a quantizer from an unordered set of distinct thresholds.
pub fn quantizer_from_set(thresholds: &[f64]) -> Result<Quantizer> {
    let mut t = thresholds.to_vec();
    t.sort_by(f64::total_cmp);
    make_quantizer(&t)
}

/// 8-level quantizer `{0, ±0.75, ±1.5, ±2.25}` used with the CH3 channel.
pub fn ch3_quantizer() -> Quantizer {
    quantizer_from_set(&[0.75, -0.75, 1.5, -1.5, 2.25, -2.25, 0.0]).expect("static thresholds")
}

/// 12-level quantizer `{0, ±0.5, ..., ±2.5}` used with EPR4.
pub fn epr4_quantizer() -> Quantizer {
    let t: Vec<f64> = (-5..=5).map(|k| 0.5 * k as f64).collect();
    make_quantizer(&t).expect("static thresholds")
}

/// Thresholds at `k * step * sigma_y` for `|k * step| <= limit`.
pub fn scaled_uniform(step: f64, limit: f64, sigma_y: f64) -> Quantizer {
    let n = (limit / step).round() as i64;
    let t: Vec<f64> = (-n..=n).map(|k| k as f64 * step * sigma_y).collect();
    make_quantizer(&t).expect("uniform grid")
}

/// 10-level per-dimension fading quantizer `{0, ±0.5, ..., ±2.0} * sigma_y`.
pub fn fading_quantizer(sigma_y: f64) -> Quantizer {
    scaled_uniform(0.5, 2.0, sigma_y)
}

/// Fine quantizer with thresholds every `0.05 sigma_y` up to `±2.5 sigma_y`.
pub fn eleven_tap_quantizer(sigma_y: f64) -> Quantizer {
    scaled_uniform(0.05, 2.5, sigma_y)
}
