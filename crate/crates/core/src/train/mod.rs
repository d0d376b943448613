//! Detection loss, backpropagation, finite-difference checks and a
//! single-image training loop.

pub mod backprop;
pub mod gradcheck;
pub mod loss;
pub mod targets;
pub mod toy;

pub use backprop::{
    backward, flatten_grads, flatten_params, forward_trace, unflatten_params, Gradients,
    KernelGrad, Trace,
};
pub use gradcheck::{
    check_loss_gradients, check_network_gradients, grad_check, relative_error, GradCheckReport,
    GRADCHECK_NET, MIN_SAMPLES,
};
pub use loss::{yolo_loss, LossOutput, LossParams};
pub use targets::{assign_targets, shape_iou, Assignment, TargetMap};
pub use toy::{
    find_divergence, synthetic_image, train_toy, TrainOptions, TrainOutcome, DEFAULT_INIT_SCALE,
    DEFAULT_LEARNING_RATE,
};
