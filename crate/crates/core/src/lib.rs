//! Orthogonal multilabel Fisher discriminant analysis.
//!
//! Multilabel scatter matrices, the four Fisher objectives and their
//! optimizers under Stiefel and total-scatter orthogonality, population
//! quantities of the linear label-effect model, and the distance,
//! concentration and interaction bounds built on top of them.

pub mod bounds;
pub mod discriminant;
pub mod error;
pub mod population;
pub mod scatter;
pub mod spectral;
pub mod synth;

pub use error::{Error, Result};
