//! Dense arithmetic, the fully-connected classifier, and Hessian-vector products.

mod matrix;
mod network;
mod objective;
mod params;
mod quadratic;

pub use matrix::{dot, norm2, norm_inf, DenseMatrix};
pub use network::{Activation, LossKind, NetworkSpec};
pub use objective::{
    finite_difference_hvp, forward_loss, hvp, loss_grad, EpsPolicy, Minibatch, Objective,
};
pub use params::{Layout, ParamKind, ParamVector, Segment};
pub use quadratic::Quadratic;
