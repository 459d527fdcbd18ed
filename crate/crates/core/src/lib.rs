//! Link-level simulation of an LTE-style MIMO-OFDM downlink, comparing
//! pilot-aided channel estimators (LS, LMMSE, low-rank LMMSE) under
//! cyclic-prefix and zero-padding guard intervals.

pub mod channel;
pub mod error;
pub mod estimation;
pub mod grid;
pub mod harness;
pub mod mimo_link;
pub mod ofdm;

pub use error::{Error, Result};
pub use num_complex::Complex64;
