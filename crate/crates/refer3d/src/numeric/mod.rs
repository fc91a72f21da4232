//! Minimal differentiable kernel set: matrices, MLPs, AdamW, and the
//! finite-difference gradient checker that every module is verified against.

pub mod adam;
pub mod gradcheck;
pub mod matrix;
pub mod mlp;

pub use adam::{AdamConfig, AdamW};
pub use gradcheck::{grad_check, GradCheckReport, GradCheckSettings, ParamCollection};
pub use matrix::{
    elem_add, elem_mul, matmul_backward, maxpool_rows, relu, relu_backward, row_softmax,
    row_softmax_backward, sigmoid, sigmoid_backward, sigmoid_scalar, softplus, softplus_grad,
    Matrix, MASK_OFF,
};
pub use mlp::{Activation, Mlp, MlpCache, MlpSpec, Param, ParamGroup};
