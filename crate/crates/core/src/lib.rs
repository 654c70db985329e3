//! Distributed Delta-coloring on a simulated bandwidth-limited network.

pub mod acd;
pub mod brooks;
pub mod classify;
pub mod colorset;
pub mod coloring;
pub mod congest;
pub mod error;
pub mod generate;
pub mod graph;
pub mod lll;
pub mod matching;
pub mod pipeline;
pub mod report;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
pub use graph::{Graph, NodeId};
