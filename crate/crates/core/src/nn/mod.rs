//! Minimal tensor engine: the layers the VAD network needs, each with an
//! analytic backward pass, plus SGD with momentum and the learning-rate
//! schedule.

mod layers;
mod optim;
mod tensor;

pub use layers::{
    global_avg_pool, global_avg_pool_backward, relu, relu_backward, sigmoid, sigmoid_backward,
    BatchNorm2d, BnCache, BnMode, DepthwiseConv3x3, GroupedPointwise, Linear, PatchifyConv,
    BN_EPS, BN_MOMENTUM,
};
pub use optim::{sgd_step, LrSchedule, SgdConfig};
pub use tensor::{ParamSlot, Tensor};
