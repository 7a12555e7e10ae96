//! Surrogate-gradient learning through look-up transforms.

pub mod backward;
pub mod cache;
pub mod hyperplane;
pub mod rule;
pub mod uncertainty;
pub mod update;

pub use backward::SparseGrad;
pub use cache::{LayerCache, TableCache};
pub use hyperplane::{hyperplane_anchor_grad, PlaneGrad};
pub use rule::{Backprop, ForwardMode, LearningRule};
pub use uncertainty::{uncertainty, uncertainty_deriv, ReciprocalAbs, UncertaintyFn};
pub use update::{apply_update, RowGrads};
