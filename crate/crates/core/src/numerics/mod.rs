//! Dense tensors, perceptrons with exact reverse-mode gradients, optimizers
//! and a central-difference gradient checker.
//!
//! All arithmetic is `f64`. Matrix products go through `matrixmultiply`,
//! whose single-threaded kernels accumulate each output element in a fixed
//! order that does not depend on the number of rows, so a batch of one and a
//! batch of many give bitwise-identical rows.

mod gradcheck;
mod mlp;
mod optim;
mod tensor;

pub use gradcheck::{
    finite_difference_check, finite_difference_check_with, relative_error, GradCheckReport,
    FD_STEP, KINK_MARGIN, REL_ERROR_FLOOR,
};
pub use mlp::{Activation, Mlp, MlpCache, MlpGrads, MlpSpec, LEAKY_SLOPE};
pub use optim::{OptimizerKind, OptimizerState};
pub use tensor::Tensor;
