//! Layer primitives with their vector-Jacobian products.
//!
//! Forward functions are pure; train-mode variants return whatever the
//! backward pass needs (masks, argmax indices, normalized activations).

pub mod activation;
pub mod batchnorm;
pub mod conv;
pub mod loss;
pub mod pool;
pub mod shuffle;

pub use activation::{relu, relu_backward, Dropout};
pub use batchnorm::{
    batchnorm_backward, batchnorm_forward_eval, batchnorm_forward_train, update_running_stats, BatchNormConfig,
    BatchStats, BnCache, BnParams,
};
pub use conv::{
    conv2d_backward, conv2d_forward, depthwise_conv_backward, depthwise_conv_forward, pointwise_group_conv_backward,
    pointwise_group_conv_forward, ConvGeometry,
};
pub use loss::{argmax_rows, softmax_cross_entropy};
pub use pool::{global_avgpool, global_avgpool_backward, MaxPool};
pub use shuffle::{channel_shuffle_halfswap, ChannelShuffle};
