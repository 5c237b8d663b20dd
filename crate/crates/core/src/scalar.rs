use std::fmt::Debug;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Floating point scalar used by the density and distance routines: `f32` or `f64`.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + NumAssign + Debug + Default + Send + Sync + 'static
{
    /// Lossy conversion from `f64`, used for constants and pixel coordinates.
    fn of(value: f64) -> Self {
        Self::from_f64(value).expect("f64 is representable in every float scalar")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl<T> Scalar for T where
    T: Float + FromPrimitive + ToPrimitive + NumAssign + Debug + Default + Send + Sync + 'static
{
}
