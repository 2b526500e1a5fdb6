use super::{MetricsError, Result};
use crate::network::WindowedAdjacency;
use crate::numeric::compensated_sum;

/// Which incident edges make up a node's strength.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StrengthMode {
    In,
    Out,
    Total,
}

pub fn strengths(w: &WindowedAdjacency, mode: StrengthMode) -> Vec<f64> {
    let n = w.len();
    (0..n)
        .map(|i| {
            let out = || (0..n).map(move |j| w.weight(i, j));
            let inc = || (0..n).map(move |j| w.weight(j, i));
            match mode {
                StrengthMode::Out => compensated_sum(out()),
                StrengthMode::In => compensated_sum(inc()),
                StrengthMode::Total => compensated_sum(out().chain(inc())),
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerLawFit {
    pub alpha: f64,
    pub k_min: f64,
    /// Observations at or above `k_min`.
    pub n_tail: usize,
    /// Kolmogorov–Smirnov distance of the selected fit.
    pub ks: f64,
}

/// Smallest tail used when scanning `k_min`.
const MIN_TAIL: usize = 10;

/// Continuous power-law fit: for each candidate `k_min` among the observed
/// values, `α = 1 + n / Σ ln(k_i / k_min)` over the tail, keeping the
/// candidate with the smallest Kolmogorov–Smirnov distance (ties go to the
/// smaller `k_min`).
pub fn fit_power_law(values: &[f64]) -> Result<PowerLawFit> {
    let mut x: Vec<f64> = values.iter().copied().filter(|v| *v > 0.0 && v.is_finite()).collect();
    x.sort_by(f64::total_cmp);
    let n = x.len();
    if n < MIN_TAIL {
        return Err(MetricsError::InsufficientDegrees(n));
    }
    let mut best: Option<PowerLawFit> = None;
    let mut m = 0;
    while m + MIN_TAIL <= n {
        let k_min = x[m];
        let tail = &x[m..];
        let nt = tail.len();
        let s = compensated_sum(tail.iter().map(|v| (v / k_min).ln()));
        if s > 0.0 {
            let alpha = 1.0 + nt as f64 / s;
            let ks = ks_distance(tail, k_min, alpha);
            if best.is_none_or(|b| ks < b.ks) {
                best = Some(PowerLawFit { alpha, k_min, n_tail: nt, ks });
            }
        }
        // next distinct value
        m += 1;
        while m < n && x[m] == x[m - 1] {
            m += 1;
        }
    }
    best.ok_or(MetricsError::InsufficientDegrees(n))
}

/// Maximum gap between the empirical tail CDF and `1 − (x/k_min)^(1−α)`,
/// evaluated on both sides of each step.
fn ks_distance(tail: &[f64], k_min: f64, alpha: f64) -> f64 {
    let n = tail.len() as f64;
    let mut d: f64 = 0.0;
    let mut i = 0;
    while i < tail.len() {
        let mut j = i;
        while j < tail.len() && tail[j] == tail[i] {
            j += 1;
        }
        let model = 1.0 - (tail[i] / k_min).powf(1.0 - alpha);
        d = d.max((model - i as f64 / n).abs()).max((j as f64 / n - model).abs());
        i = j;
    }
    d
}

/// Power-law exponent of node strengths.
pub fn scale_free_alpha(w: &WindowedAdjacency, mode: StrengthMode) -> Result<PowerLawFit> {
    fit_power_law(&strengths(w, mode))
}
