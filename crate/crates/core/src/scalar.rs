use std::fmt::{Debug, Display};
use std::iter::Sum;

use rand::distributions::uniform::SampleUniform;

/// Scalar type for all model math: `f32` or `f64`.
///
/// Everything numeric in this crate (networks, losses, clustering,
/// augmentation) is generic over this trait; concrete aliases live at the
/// crate root.
pub trait Float:
    num_traits::Float
    + num_traits::FromPrimitive
    + num_traits::ToPrimitive
    + num_traits::NumAssignOps
    + SampleUniform
    + Sum
    + Default
    + Display
    + Debug
    + Send
    + Sync
    + 'static
{
    /// Shorthand for converting an `f64` constant.
    fn c(v: f64) -> Self {
        Self::from_f64(v).expect("constant not representable by scalar type")
    }

    /// Shorthand for converting a count.
    fn of_usize(n: usize) -> Self {
        Self::from_usize(n).expect("count not representable by scalar type")
    }
}

impl Float for f32 {}
impl Float for f64 {}
