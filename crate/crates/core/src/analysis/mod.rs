//! Gaze densities and their comparison.
//!
//! Point sets are smoothed into per-pixel probability grids with a Gaussian kernel (diagonal
//! bandwidth from Scott's rule) and compared with the symmetric χ² histogram distance
//! `½ Σ (P − Q)² / (P + Q)`, which is 0 for identical and 1 for disjoint densities. Everything
//! here is generic over the float type; see the `f64`/`f32` aliases at the crate root.

mod bandwidth;
mod chi2;
mod heatmap;
mod io;
mod kde;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use bandwidth::{estimate_bandwidth, estimate_bandwidth_or, DEFAULT_FALLBACK_BANDWIDTH};
pub use chi2::chi2_distance;
pub use heatmap::{render_heatmap, GrayImage};
pub use io::{
    ingest_reference, read_density_json, read_samples, write_samples, IngestedSamples,
};
pub use kde::{kde, kde_downsampled};

use crate::geometry::{FrameSize, Point};
use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("sample set is empty")]
    Empty,
    #[error("grid dimensions differ: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(u32, u32, u32, u32),
    #[error("frames differ: {0}x{1} vs {2}x{3}")]
    FrameMismatch(u32, u32, u32, u32),
    #[error("point ({x}, {y}) lies outside the {width}x{height} frame")]
    OutOfFrame { x: f64, y: f64, width: u32, height: u32 },
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("kernel mass underflowed on every cell; bandwidth too small for the grid")]
    Underflow,
    #[error("malformed input on line(s) {lines:?}: {message}")]
    Parse { lines: Vec<usize>, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Points in frame pixel coordinates for one frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSet<T: Scalar = f64> {
    pub width: u32,
    pub height: u32,
    pub points: Vec<Point<T>>,
}

impl<T: Scalar> SampleSet<T> {
    /// Checks that every point lies in `[0, width) × [0, height)`.
    pub fn new(frame: FrameSize, points: Vec<Point<T>>) -> Result<Self, AnalysisError> {
        let set = Self {
            width: frame.width,
            height: frame.height,
            points,
        };
        if let Some(p) = set.points.iter().find(|p| !set.contains(p)) {
            return Err(AnalysisError::OutOfFrame {
                x: p.x.as_f64(),
                y: p.y.as_f64(),
                width: set.width,
                height: set.height,
            });
        }
        Ok(set)
    }

    pub fn empty(frame: FrameSize) -> Self {
        Self {
            width: frame.width,
            height: frame.height,
            points: Vec::new(),
        }
    }

    pub fn frame(&self) -> FrameSize {
        FrameSize::new(self.width, self.height)
    }

    pub fn contains(&self, p: &Point<T>) -> bool {
        p.x >= T::zero()
            && p.y >= T::zero()
            && p.x < T::of(self.width as f64)
            && p.y < T::of(self.height as f64)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Standard deviations of the Gaussian kernel along each axis, in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandwidthSpec<T: Scalar = f64> {
    pub h_x: T,
    pub h_y: T,
}

impl<T: Scalar> BandwidthSpec<T> {
    pub fn new(h_x: T, h_y: T) -> Result<Self, AnalysisError> {
        if !(h_x > T::zero() && h_y > T::zero() && h_x.is_finite() && h_y.is_finite()) {
            return Err(AnalysisError::Parameter(
                "bandwidths must be positive and finite".into(),
            ));
        }
        Ok(Self { h_x, h_y })
    }
}

/// Probability mass per cell, row-major with the origin at the top-left.
///
/// With a downsample factor `k`, cell `(i, j)` covers pixels `[ik, (i+1)k) × [jk, (j+1)k)` and
/// is evaluated at the center of that block; with `k = 1` cell `(i, j)` is evaluated at pixel
/// coordinate `(i, j)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityGrid<T: Scalar = f64> {
    pub width: u32,
    pub height: u32,
    pub downsample: u32,
    pub values: Vec<T>,
}

impl<T: Scalar> DensityGrid<T> {
    pub fn get(&self, column: u32, row: u32) -> T {
        self.values[(row * self.width + column) as usize]
    }

    pub fn total(&self) -> T {
        self.values.iter().fold(T::zero(), |acc, &v| acc + v)
    }

    /// Cell holding the largest value; the first one in row-major order on ties.
    pub fn argmax(&self) -> (u32, u32) {
        let mut best = 0;
        for (i, v) in self.values.iter().enumerate() {
            if *v > self.values[best] {
                best = i;
            }
        }
        (best as u32 % self.width, best as u32 / self.width)
    }

    /// Pixel coordinate at which a cell is evaluated.
    pub fn cell_center(&self, column: u32, row: u32) -> Point<T> {
        let k = self.downsample as f64;
        let offset = (k - 1.0) / 2.0;
        Point::new(
            T::of(column as f64 * k + offset),
            T::of(row as f64 * k + offset),
        )
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.width == other.width && self.height == other.height
    }
}

/// Grid dimensions for a frame at a downsample factor.
pub fn grid_size(frame: FrameSize, downsample: u32) -> (u32, u32) {
    (frame.width.div_ceil(downsample), frame.height.div_ceil(downsample))
}

/// Flat density over a `width × height` grid.
pub fn uniform_density<T: Scalar>(width: u32, height: u32) -> DensityGrid<T> {
    assert!(width > 0 && height > 0, "uniform density needs a non-empty grid");
    let n = width as usize * height as usize;
    DensityGrid {
        width,
        height,
        downsample: 1,
        values: vec![T::one() / T::of(n as f64); n],
    }
}

/// Uniform density on the same grid as `like`.
pub fn uniform_like<T: Scalar>(like: &DensityGrid<T>) -> DensityGrid<T> {
    DensityGrid {
        downsample: like.downsample,
        ..uniform_density(like.width, like.height)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport<T: Scalar = f64> {
    pub chi2_vs_reference: T,
    pub chi2_uniform_vs_reference: T,
    pub n_samples_ours: usize,
    pub n_samples_reference: usize,
}

/// Smooths both sets with their own estimated bandwidths and measures how far ours and the flat
/// baseline are from the reference density.
pub fn compare<T: Scalar>(
    ours: &SampleSet<T>,
    reference: &SampleSet<T>,
    downsample: u32,
) -> Result<ComparisonReport<T>, AnalysisError> {
    if ours.is_empty() || reference.is_empty() {
        return Err(AnalysisError::Empty);
    }
    if ours.frame() != reference.frame() {
        return Err(AnalysisError::FrameMismatch(
            ours.width,
            ours.height,
            reference.width,
            reference.height,
        ));
    }
    let ours_density = kde_downsampled(ours, &estimate_bandwidth(ours)?, downsample)?;
    let reference_density = kde_downsampled(reference, &estimate_bandwidth(reference)?, downsample)?;
    let uniform = uniform_like(&reference_density);
    Ok(ComparisonReport {
        chi2_vs_reference: chi2_distance(&ours_density, &reference_density)?,
        chi2_uniform_vs_reference: chi2_distance(&uniform, &reference_density)?,
        n_samples_ours: ours.len(),
        n_samples_reference: reference.len(),
    })
}
