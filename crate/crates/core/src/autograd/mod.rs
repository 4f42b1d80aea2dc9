//! Minimal reverse-mode automatic differentiation over dense matrices, with
//! the two optimizers used for training.

mod gradcheck;
mod optim;
mod params;
mod tape;

pub use gradcheck::{finite_difference_check, GradCheckEntry, GradCheckReport};
pub use optim::{Adam, SgdMomentum};
pub use params::{Group, ParamId, ParamStore, Parameter};
pub use tape::{dropout_mask, DropoutKey, Mode, NodeId, Tape};
