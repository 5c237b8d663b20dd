use super::{AnalysisError, BandwidthSpec, SampleSet};
use crate::scalar::Scalar;

/// Kernel width used when the spread cannot be estimated: one vertical chart spacing at the
/// default font size and density.
pub const DEFAULT_FALLBACK_BANDWIDTH: f64 = 40.0;

/// Scott's rule per axis, `h = σ̂ n^(-1/6)`, with [`DEFAULT_FALLBACK_BANDWIDTH`] for axes whose
/// spread is zero or unestimable.
pub fn estimate_bandwidth<T: Scalar>(samples: &SampleSet<T>) -> Result<BandwidthSpec<T>, AnalysisError> {
    estimate_bandwidth_or(samples, T::of(DEFAULT_FALLBACK_BANDWIDTH))
}

pub fn estimate_bandwidth_or<T: Scalar>(
    samples: &SampleSet<T>,
    fallback: T,
) -> Result<BandwidthSpec<T>, AnalysisError> {
    let n = samples.len();
    if n == 0 {
        return Err(AnalysisError::Empty);
    }
    if n == 1 {
        return BandwidthSpec::new(fallback, fallback);
    }
    let factor = T::of(n as f64).powf(T::of(-1.0 / 6.0));
    let sx = sample_std(samples.points.iter().map(|p| p.x), n);
    let sy = sample_std(samples.points.iter().map(|p| p.y), n);
    let pick = |s: T| if s > T::zero() { s * factor } else { fallback };
    BandwidthSpec::new(pick(sx), pick(sy))
}

fn sample_std<T: Scalar>(values: impl Iterator<Item = T> + Clone, n: usize) -> T {
    let nf = T::of(n as f64);
    let mean = values.clone().fold(T::zero(), |a, v| a + v) / nf;
    let ss = values.fold(T::zero(), |a, v| a + (v - mean) * (v - mean));
    (ss / T::of(n as f64 - 1.0)).sqrt()
}
