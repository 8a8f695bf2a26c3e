//! Differentially private synthetic voltage phasors for distribution feeders.
//!
//! Loads are drawn from a privately fitted log-normal model and pushed
//! through the AC power flow of the true network; the randomness of the
//! loads masks the admittance matrix. The crate covers network reduction,
//! the power flow, the load model, the privacy accountant, the release
//! mechanisms and the evaluation harness.

pub mod error;
pub mod eval;
pub mod grid;
pub mod linalg;
pub mod load;
pub mod mechanism;
pub mod powerflow;
pub mod privacy;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::Real;
