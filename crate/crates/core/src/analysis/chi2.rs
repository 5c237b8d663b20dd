use super::{AnalysisError, DensityGrid};
use crate::scalar::Scalar;

/// `½ Σ (P − Q)² / (P + Q)` over all cells, skipping cells where both are zero.
pub fn chi2_distance<T: Scalar>(p: &DensityGrid<T>, q: &DensityGrid<T>) -> Result<T, AnalysisError> {
    if !p.same_shape(q) {
        return Err(AnalysisError::DimensionMismatch(p.width, p.height, q.width, q.height));
    }
    let half = T::of(0.5);
    let sum = p
        .values
        .iter()
        .zip(&q.values)
        .fold(T::zero(), |acc, (&a, &b)| {
            let s = a + b;
            if s > T::zero() {
                acc + (a - b) * (a - b) / s
            } else {
                acc
            }
        });
    Ok(half * sum)
}
