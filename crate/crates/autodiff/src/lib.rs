//! Tape-based reverse-mode automatic differentiation over `ndarray` tensors.
//!
//! A [`Graph`] records every operation applied to its [`Var`]s together with
//! a closure computing the vector-Jacobian product. Calling
//! [`Graph::backward`] walks the tape in reverse and returns gradients for
//! every leaf that requires them.
//!
//! Besides the usual elementwise, reduction and shape operations the crate
//! ships fused kernels for the sequence layers the separation model needs
//! (LSTM, multi-head attention core, layer normalization) so that a single
//! tape node replaces hundreds of small ones.

mod graph;
mod ops;

pub mod gradcheck;

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use ndarray::{LinalgScalar, ScalarOperand};
use num_traits::{Float, FromPrimitive, ToPrimitive};

pub use graph::{BackwardCtx, Gradients, Graph, Var};
pub use ops::LstmWeights;

/// Dense n-dimensional tensor used for every value on the tape.
pub type Tensor<F> = ndarray::ArrayD<F>;

/// Floating point element type the engine is generic over (`f32`, `f64`).
pub trait Real:
    Float
    + FromPrimitive
    + ToPrimitive
    + LinalgScalar
    + ScalarOperand
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    fn from_f64_lossy(x: f64) -> Self {
        Self::from_f64(x).expect("finite f64 representable")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}
