//! Scalar abstraction for the numerical kernels.
//!
//! Everything numeric in this crate is generic over [`Scalar`], implemented
//! for `f32` and `f64`. `f64` is what the pipeline actually runs on; the
//! finite-difference verification suites in particular need the precision,
//! since FD noise at `f32` resolution would mask real gradient bugs.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::{Float, FromPrimitive};

pub trait Scalar:
    Float
    + FromPrimitive
    + Debug
    + Display
    + Sum
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Send
    + Sync
    + 'static
{
}

impl Scalar for f32 {}
impl Scalar for f64 {}
