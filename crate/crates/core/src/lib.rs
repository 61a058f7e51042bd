//! Early warning of vibration localization in a ring of coupled Duffing
//! oscillators, from directed functional networks inferred with
//! inter-system recurrence measures.

pub mod calibration;
pub mod error;
pub mod experiment;
pub mod graph;
pub mod integrator;
pub mod model;
pub mod netinfer;
pub mod output;
pub mod recurrence;

pub use error::{Error, Result};
