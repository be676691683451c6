//! Dense matrices and reverse-mode differentiation.

pub mod gradcheck;
mod matrix;
mod tape;

pub use matrix::{sigmoid_scalar, Matrix};
pub use tape::{Gradients, Graph, Var};
