//! Small ReLU networks trained with Adam, with the trajectory instrumented
//! so region crossings, margins, second-moment floors and step geometry can
//! be audited against closed-form bounds.

pub mod arrangement;
pub mod barrier;
pub mod bounds;
pub mod error;
pub mod fmt;
pub mod harness;
pub mod kakeya;
mod linalg;
pub mod optim;
pub mod relunet;
pub mod trace;

pub use error::{Error, Result};
pub use linalg::{spectral_norm, SpectralNorm};
