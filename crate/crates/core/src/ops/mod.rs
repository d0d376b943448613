//! Forward-pass kernels: convolution, max-pooling, activations and
//! batch-norm folding.

pub mod activation;
pub mod conv;
pub mod pool;

pub use activation::{leaky, leaky_relu, logistic, softmax, DEFAULT_LEAKY_SLOPE};
pub use conv::{
    conv2d, conv2d_direct, conv_output_dim, fold_batch_norm, im2col, BatchNorm, ConvKernel,
};
pub use pool::{maxpool2d, maxpool2d_with_indices, pool_output_dim};
