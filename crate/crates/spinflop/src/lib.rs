//! Hidden-spin models obtained by decimating classical rotator lattices.
//!
//! Freezing the visible (even-sublattice) spins of an XY model into the
//! doubly-alternating N/S pattern turns the hidden spins into a rotator
//! system in a periodic external field. This crate builds those constrained
//! models, computes the induced fields exactly, finds the two spin-flop
//! ground states (mostly-East and mostly-West), and runs Metropolis Monte
//! Carlo probes of the conditional-expectation gap between the two
//! boundary dressings.
//!
//! The `spinflop` binary exposes every experiment as a subcommand driven by
//! a JSON config; see the crate README for the file formats.

pub mod angle;
pub mod constraint;
pub mod couplings;
pub mod energy;
pub mod error;
pub mod groundstate;
pub mod lattice;
pub mod probes;
pub mod runner;
pub mod sampler;

pub use angle::Angle;
pub use couplings::{CouplingModel, Family};
pub use error::{Error, Result};
pub use lattice::{build_box, decimate, LatticeBox, Site, SiteClass, SpinConfig};
