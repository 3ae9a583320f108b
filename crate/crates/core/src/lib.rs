//! Vernier-averaged quantum phase estimation toolkit: exact dimer model,
//! statevector simulation of physical and Steane-encoded QPE circuits,
//! shift-averaged fitting and spectral reconstruction.

pub mod circuits;
pub mod error;
pub mod fci;
pub mod fit;
pub mod histogram;
pub mod model;
pub mod pipeline;
pub mod simulator;
pub mod spectra;
pub mod steane;

pub use error::{Error, Result};
