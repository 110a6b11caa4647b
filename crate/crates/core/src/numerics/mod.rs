//! Dense 2-D tensors, matrix kernels, a reverse-mode tape, and the optimizer
//! primitives used by the trainer.

pub mod kernels;
pub mod loss;
pub mod optim;
mod real;
pub mod tape;
mod tensor;

pub use loss::{per_token_losses, softmax, softmax_xent};
pub use optim::{clip_global_norm, global_norm, sgd_step};
pub use real::{sigmoid, softplus, Real};
pub use tape::{Grads, Tape, Var};
pub use tensor::Tensor;
