//! Intensity and density estimation for point processes on geometric
//! networks with penalized linear B-splines.
//!
//! The crate is `no_std` (with `alloc`) so the numerical core can be
//! embedded anywhere; file formats, the command line and parallel study
//! runners live in the `netspline` companion crate.
//!
//! Pipeline:
//!
//! 1. [`network::Network`] holds the polyline edges and the network metric.
//! 2. [`basis::NetworkBasis`] places near-equidistant knots on every edge and
//!    builds edge splines plus one hat-shaped spline per vertex.
//! 3. [`penalty::PenaltySet`] derives first/second order difference
//!    penalties from the adjacency graph of the basis.
//! 4. [`model`] bins the observations, fits the penalized Poisson model by
//!    damped Newton iterations and selects the smoothing parameter with
//!    Fellner–Schall updates.
//! 5. [`sim`] simulates point patterns and measures integrated squared error.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod basis;
pub mod builtin;
pub mod error;
pub mod linalg;
pub(crate) mod math;
pub mod model;
pub mod network;
pub mod penalty;
pub mod sim;

pub use basis::{BasisRow, KnotLayout, NetworkBasis};
pub use error::{Error, Result};
pub use model::{fit_intensity, BinLayout, BinnedCounts, FitConfig, FitResult, IntensityRatio};
pub use network::{Coord, EdgeInput, Network, NetworkPoint};
pub use penalty::{PenaltyOrder, PenaltySet};
pub use sim::{IntensitySpec, StudyReport, TargetIntensity};
