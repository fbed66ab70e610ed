//! Coded demixing for unsourced random access.
//!
//! Devices pick one of `B` bins with the first `w0` bits of their message,
//! encode the remaining bits with a triadic non-binary LDPC outer code,
//! index every section into a one-hot block and transmit `d·A_b m` through
//! the bin's sampled-Hadamard sensing matrix, preceded by a one-hot pilot
//! announcing the bin. The receiver estimates bin occupancies from the
//! pilot, recovers every bin's state with AMP and a BP-aware denoiser, and
//! list-decodes the outer code per bin to produce the message list.
//!
//! Module map:
//! - [`outer_code`]: factor graph, systematic encoding, FWHT belief propagation, list decoding.
//! - [`encoder`]: bin selection, indexing, amplitudes, per-device signals.
//! - [`sensing`]: per-bin sampled Hadamard operators.
//! - [`channel`]: superposition and AWGN.
//! - [`occupancy`]: LMMSE pilot estimator and the effective-observation estimators.
//! - [`amp`]: the AMP iteration and its denoiser.
//! - [`disambiguation`]: per-bin list decoding merged into one ranked list.
//! - [`harness`]: seeded trials, PUPE, sweeps and CSV output.

pub mod amp;
pub mod channel;
pub mod config;
pub mod disambiguation;
pub mod encoder;
pub mod error;
pub mod harness;
pub mod occupancy;
pub mod outer_code;
pub mod sensing;
mod wht;

pub use config::{Preset, Refinement, SystemConfig};
pub use error::{Error, Result};
pub use wht::{fwht_in_place, hadamard_entry};
