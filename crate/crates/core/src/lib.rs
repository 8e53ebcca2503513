//! Grading-curve classification of aggregate images with the AggNet
//! multi-scale CNN, written from first principles in double precision.
//!
//! The crate covers the whole pipeline: marker-based rectification to a
//! constant ground sampling distance ([`geometry`]), the network and its
//! reverse-mode gradients ([`model`], [`tape`]), augmentation ([`augment`]),
//! dataset handling and a synthetic aggregate generator ([`data`]), training
//! ([`train`]) and evaluation ([`eval`]).

pub mod augment;
pub mod data;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod gradcheck;
pub mod model;
pub mod ops;
pub mod tape;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};

/// Crate version, recorded in run provenance.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub use tape::{GradTape, Gradients, NodeId};
pub use tensor::{ConvSpec, FeatureMap, Padding, Tensor};

/// Guide chapters, compiled so their examples stay in sync with the code.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/rectification.md")]
    mod rectification {}
    #[doc = include_str!("../../../book/src/network.md")]
    mod network {}
    #[doc = include_str!("../../../book/src/gradients.md")]
    mod gradients {}
    #[doc = include_str!("../../../book/src/training.md")]
    mod training {}
    #[doc = include_str!("../../../book/src/synthetic-data.md")]
    mod synthetic_data {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    mod evaluation {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
    #[doc = include_str!("../../../book/src/acceptance.md")]
    mod acceptance {}
}
