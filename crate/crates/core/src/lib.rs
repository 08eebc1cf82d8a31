//! Memory-ability indicators for recurrent language models.
//!
//! Sequences and hidden-state traces are represented as convex hulls in a
//! shared semantic space; coverage, centroid-offset and hit-ratio indicators
//! compare the two as a function of window length.

pub mod corpus;
pub mod error;
pub mod experiment;
pub mod geometry;
pub mod indicators;
pub mod reduction;
pub mod rnn;

pub use error::{Error, Result};
