//! Numerical substrate: dense matrices, layer passes, Adam, gradient checks.

pub mod adam;
pub mod gradcheck;
pub mod layers;
pub mod matrix;

pub use adam::{adam_step, AdamState};
pub use gradcheck::{central_difference, grad_check, GradCheckOptions, GradCheckReport, Parameterized};
pub use layers::{
    affine_backward, affine_forward, l2_normalize_backward, l2_normalize_rows, relu_backward,
    relu_forward, softmax_backward, softmax_rows, Affine, Parameter,
};
pub use matrix::{argmax, dot, norm, Matrix};
