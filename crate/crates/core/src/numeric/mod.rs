//! Tensors, the autodiff tape, and a finite-difference oracle.

mod fd;
mod tape;
mod tensor;

pub use fd::{finite_difference_gradient, relative_error};
pub use tape::{BackwardFn, Gradients, Tape, Var};
pub use tensor::Tensor;
