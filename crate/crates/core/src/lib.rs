//! Interpolation consistency training (ICT) for semi-supervised classification.
//!
//! The crate contains a small dense network with exact backpropagation
//! ([`nn`]), Nesterov SGD and the moving-average teacher ([`optim`]), the
//! training algorithm itself ([`ict`]), synthetic and CSV datasets ([`data`])
//! and evaluation helpers ([`eval`]). The `ict` binary wraps all of it in an
//! experiment CLI ([`cli`]).

pub mod cli;
pub mod data;
pub mod error;
pub mod eval;
pub mod hash;
pub mod ict;
pub mod matrix;
pub mod nn;
pub mod optim;
pub mod seed;

pub use error::{Error, Result};
pub use matrix::Matrix;
pub use nn::{Activation, GradientSet, Layer, Network};
