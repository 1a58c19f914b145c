use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, MulAssign, SubAssign};
use std::str::FromStr;

use num_traits::{Float, NumCast};
use serde::Serialize;

/// Floating-point precision a model is stored and computed in.
pub trait Real:
    Float
    + FromStr
    + Display
    + Debug
    + Default
    + Sum
    + AddAssign
    + SubAssign
    + MulAssign
    + Serialize
    + Send
    + Sync
    + 'static
{
    /// Name written into parameter files.
    const PRECISION: &'static str;

    fn of(x: f64) -> Self {
        <Self as NumCast>::from(x).expect("f64 converts to any Real")
    }

    fn f64(self) -> f64 {
        self.to_f64().expect("Real converts to f64")
    }
}

impl Real for f32 {
    const PRECISION: &'static str = "f32";
}

impl Real for f64 {
    const PRECISION: &'static str = "f64";
}
