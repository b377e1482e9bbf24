//! Minimal neural-network kernels with exact analytical gradients.
//!
//! Everything is built on flat row-major tensors over a scalar type `R`
//! (f64 for the gradient checks, f32 for training). Convolutions run through
//! im2col plus small matrix products; the transposed convolution is the exact
//! adjoint of the forward convolution with shared kernel layout. No autodiff:
//! each layer exposes `forward` returning a cache and `backward` accumulating
//! parameter gradients.

mod act;
mod adam;
mod conv;
mod dense;
pub mod gradcheck;
mod init;
mod linalg;
mod loss;
mod lstm;
mod real;
mod tensor;

pub use act::{logistic as logistic_scalar, Activation};
pub use adam::{Adam, AdamConfig};
pub use conv::{Conv2d, Conv2dCache, ConvTranspose2d, ConvTranspose2dCache};
pub use dense::{Dense, DenseCache};
pub use init::fan_in_uniform;
pub use loss::{bce_loss, bce_with_logits};
pub use lstm::{LstmCell, LstmWindowCache};
pub use real::Real;
pub use tensor::Tensor;
