//! Density estimation for shift-invariant distributions through low-frequency
//! Fourier coefficients of a mollified density.

pub mod cli;
pub mod domain;
pub mod error;
pub mod fourier;
pub mod json;
pub mod learn_bounded;
pub mod logconcave;
pub mod lowerbound;
pub mod mollifier;
pub mod oracle;
pub mod par;
pub mod pipeline;
pub mod quad;
pub mod rng;
pub mod select;
pub mod synthetic;
pub mod transform;

pub use domain::{ClassParams, Point, SampleSet, TailBound, TailKind, TailTable};
pub use error::{Error, Result};
pub use fourier::{FourierHypothesis, FrequencySet};
pub use oracle::Oracle;
pub use rng::Stream;
pub use transform::AffineFrame;
