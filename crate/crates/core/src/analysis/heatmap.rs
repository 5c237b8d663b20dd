use std::io::Write;

use super::DensityGrid;
use crate::scalar::Scalar;

/// 8-bit grayscale raster, row-major, origin at the top-left.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    pub width: u32,
    pub height: u32,
    pub pixels: Vec<u8>,
}

impl GrayImage {
    pub fn pixel(&self, x: u32, y: u32) -> u8 {
        self.pixels[(y * self.width + x) as usize]
    }

    /// Binary PGM (`P5`, maxval 255).
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.pixels);
        out
    }

    pub fn write_pgm<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        out.write_all(&self.to_pgm())
    }
}

/// Linear gray map with the grid maximum at 255 and zero at 0.
pub fn render_heatmap<T: Scalar>(grid: &DensityGrid<T>) -> GrayImage {
    let max = grid.values.iter().fold(T::zero(), |m, &v| if v > m { v } else { m });
    let pixels = grid
        .values
        .iter()
        .map(|&v| {
            if max > T::zero() {
                (v / max * T::of(255.0)).round().as_f64().clamp(0.0, 255.0) as u8
            } else {
                0
            }
        })
        .collect();
    GrayImage {
        width: grid.width,
        height: grid.height,
        pixels,
    }
}
