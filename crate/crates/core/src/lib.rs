//! Error-floor analysis toolkit for row-layered QC-LDPC decoders.
//!
//! The crate covers the full pipeline: code construction, a saturating
//! layered decoder with a Monte Carlo harness, LETS enumeration, linear
//! state-space models of LETSs under layered schedules, their spectral
//! analysis, quantized density evolution and the resulting failure
//! probability estimates and schedule search.

pub mod channel;
pub mod code_model;
pub mod codes;
pub mod decoder;
pub mod density_evolution;
pub mod error;
pub mod estimator;
pub mod fixtures;
pub mod lets;
pub mod mc_harness;
pub mod scheduler;
pub mod spectral;
pub mod state_space;
pub mod verify;

pub use channel::ChannelSpec;
pub use code_model::{ExponentMatrix, LayerPermutation, ParityCheckMatrix, TannerGraph};
pub use decoder::{box_plus, CheckRule, DecodeOutcome, Decoder, DecoderConfig, Schedule};
pub use error::{Error, Result};
pub use lets::{enumerate_lets, Catalog, EnumerationConfig, Lets};
