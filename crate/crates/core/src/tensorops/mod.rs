//! Dense tensors and the per-sample kernels shared by ANN and SNN execution.
//!
//! Layout is row-major. Images and feature maps are `[H, W, C]`, convolution
//! kernels `[k, k, C_in, C_out]` and linear weights `[D_in, D_out]`. A batch is
//! a slice of tensors; kernels never see a batch axis.

pub(crate) mod conv;
mod dropout;
pub(crate) mod linear;
mod pool;
mod tensor;

pub use conv::{conv2d_backward, conv2d_forward, ConvSpec};
pub use dropout::dropout_mask;
pub use linear::{linear_backward, linear_forward, linear_flops};
pub use pool::{avgpool_backward, avgpool_forward};
pub use tensor::Tensor;
