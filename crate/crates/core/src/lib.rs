//! Twin-beam absolute calibration of CCD cameras.
//!
//! The crate has two halves. [`stats`] synthesizes frame stacks of pairwise
//! correlated multimode photon counts with configurable losses and noise.
//! [`geometry`] and [`estimators`] implement the measurement chain: region
//! placement and mode counting, balancing factor and noise reduction factors,
//! the spatial cross-correlation map and coherence radius, the centering scan,
//! and single-point and multi-size quantum-efficiency extraction with a
//! bootstrap covariance. [`io`] holds the frame store, config, and CSV
//! formats used by the `twinbeam` command-line tool.

pub mod cli;
pub mod error;
pub mod estimators;
pub mod exec;
pub mod geometry;
pub mod io;
pub mod rng;
pub mod stats;

pub use error::{Error, ErrorKind, Result};
pub use exec::Exec;
