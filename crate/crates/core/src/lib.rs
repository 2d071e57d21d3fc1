//! Online map matching against SD road networks with a multi-factor hidden
//! Markov model.
//!
//! The crate is `no_std` (it needs `alloc`). File formats, the simulator and
//! the command line live in the `mapmatch` crate.
#![no_std]
// `!(x > 0.0)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod error;
pub mod geom;
pub mod graph;
pub mod grid;
pub mod hmm;
pub mod icp;
pub mod lane;
pub mod metrics;
pub mod pipeline;
pub mod scenario;

pub use error::Error;
pub use geom::{heading_diff, PointXY, Pose};
pub use graph::{Road, RoadClass, RoadGraph, RoadId};
