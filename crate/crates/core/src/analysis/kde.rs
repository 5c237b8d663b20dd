use super::{grid_size, AnalysisError, BandwidthSpec, DensityGrid, SampleSet};
use crate::scalar::Scalar;

/// Per-pixel Gaussian kernel density, normalized to total mass 1.
pub fn kde<T: Scalar>(
    samples: &SampleSet<T>,
    bandwidth: &BandwidthSpec<T>,
) -> Result<DensityGrid<T>, AnalysisError> {
    kde_downsampled(samples, bandwidth, 1)
}

/// Kernel density on a grid of `downsample × downsample` pixel blocks.
///
/// The kernel `exp(−Δx²/2h_x² − Δy²/2h_y²)` factors into an x and a y term, so each point
/// contributes the outer product of two precomputed 1D profiles. Kernel mass falling outside
/// the frame is redistributed by the final renormalization. Cells sum their contributions in
/// input order.
pub fn kde_downsampled<T: Scalar>(
    samples: &SampleSet<T>,
    bandwidth: &BandwidthSpec<T>,
    downsample: u32,
) -> Result<DensityGrid<T>, AnalysisError> {
    if samples.is_empty() {
        return Err(AnalysisError::Empty);
    }
    if downsample == 0 {
        return Err(AnalysisError::Parameter("downsample factor must be at least 1".into()));
    }
    let (width, height) = grid_size(samples.frame(), downsample);
    let mut grid = DensityGrid {
        width,
        height,
        downsample,
        values: vec![T::zero(); width as usize * height as usize],
    };
    let xs: Vec<T> = (0..width).map(|i| grid.cell_center(i, 0).x).collect();
    let ys: Vec<T> = (0..height).map(|j| grid.cell_center(0, j).y).collect();

    let profile = |centers: &[T], at: T, h: T| -> Vec<T> {
        let scale = T::of(-0.5) / (h * h);
        centers.iter().map(|&c| ((c - at) * (c - at) * scale).exp()).collect()
    };
    let x_profiles: Vec<Vec<T>> = samples
        .points
        .iter()
        .map(|p| profile(&xs, p.x, bandwidth.h_x))
        .collect();
    let y_profiles: Vec<Vec<T>> = samples
        .points
        .iter()
        .map(|p| profile(&ys, p.y, bandwidth.h_y))
        .collect();

    for (j, row) in grid.values.chunks_mut(width as usize).enumerate() {
        for (gx, gy) in x_profiles.iter().zip(&y_profiles) {
            let wy = gy[j];
            if wy == T::zero() {
                continue;
            }
            for (cell, &wx) in row.iter_mut().zip(gx) {
                *cell += wx * wy;
            }
        }
    }

    let total = grid.total();
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    if !(total > T::zero()) || !total.is_finite() {
        return Err(AnalysisError::Underflow);
    }
    for v in &mut grid.values {
        *v /= total;
    }
    Ok(grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{FrameSize, Point};

    #[test]
    fn single_sample_peaks_at_its_pixel() {
        let frame = FrameSize::new(64, 36);
        let set = SampleSet::new(frame, vec![Point::new(32.0, 18.0)]).unwrap();
        let bw = BandwidthSpec::new(5.0, 5.0).unwrap();
        let g: DensityGrid<f64> = kde(&set, &bw).unwrap();
        assert_eq!(g.argmax(), (32, 18));
        assert!((g.total() - 1.0).abs() < 1e-9);
        // radial symmetry away from the borders
        assert!((g.get(32 + 3, 18) - g.get(32, 18 + 3)).abs() < 1e-15);
        assert!((g.get(32 - 4, 18) - g.get(32 + 4, 18)).abs() < 1e-15);
    }

    #[test]
    fn mirrored_pair_is_flip_symmetric() {
        let frame = FrameSize::new(64, 36);
        // pixel i mirrors to 63 - i
        let set = SampleSet::new(frame, vec![Point::new(20.0, 10.0), Point::new(43.0, 10.0)]).unwrap();
        let g: DensityGrid<f64> = kde(&set, &BandwidthSpec::new(6.0, 4.0).unwrap()).unwrap();
        for j in 0..36 {
            for i in 0..64 {
                assert!((g.get(i, j) - g.get(63 - i, j)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn shift_moves_argmax() {
        let frame = FrameSize::new(200, 120);
        let base = vec![Point::new(60.0, 50.0), Point::new(70.0, 55.0), Point::new(64.0, 45.0)];
        let shifted: Vec<_> = base.iter().map(|p| Point::new(p.x + 10.0, p.y + 10.0)).collect();
        let bw = BandwidthSpec::new(8.0, 8.0).unwrap();
        let a = kde(&SampleSet::new(frame, base).unwrap(), &bw).unwrap().argmax();
        let b = kde(&SampleSet::new(frame, shifted).unwrap(), &bw).unwrap().argmax();
        assert_eq!((a.0 + 10, a.1 + 10), b);
    }

    #[test]
    fn downsampled_grid() {
        let frame = FrameSize::new(100, 50);
        let set = SampleSet::new(frame, vec![Point::new(41.5, 21.5)]).unwrap();
        let g = kde_downsampled(&set, &BandwidthSpec::new(10.0, 10.0).unwrap(), 4).unwrap();
        assert_eq!((g.width, g.height, g.downsample), (25, 13, 4));
        assert_eq!(g.argmax(), (10, 5));
        assert!(kde_downsampled(&set, &BandwidthSpec::new(1.0, 1.0).unwrap(), 0).is_err());
    }

    #[test]
    fn underflow_is_reported() {
        let frame = FrameSize::new(64, 64);
        let set = SampleSet::new(frame, vec![Point::new(0.0, 0.0)]).unwrap();
        let g = kde_downsampled(&set, &BandwidthSpec::new(0.01, 0.01).unwrap(), 16);
        assert!(matches!(g, Err(AnalysisError::Underflow)));
    }

    #[test]
    fn f32_grid_normalized() {
        let set = SampleSet::<f32>::new(FrameSize::new(32, 16), vec![Point::new(3.0, 4.0)]).unwrap();
        let g = kde(&set, &BandwidthSpec::new(3.0, 3.0).unwrap()).unwrap();
        assert!((g.total() - 1.0).abs() < 1e-5);
    }
}
