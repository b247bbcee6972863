//! Consistent price systems, arbitrage and superreplication on finite event
//! trees under proportional transaction costs, Halmos–Savage type
//! equivalent-measure selection, and the closed forms of a drifted
//! geometric Brownian market used to compare price sequences.

pub mod cps;
pub mod error;
pub mod halmos_savage;
pub mod io;
pub mod lp;
pub mod market;
pub mod normal;
pub mod report;
pub mod sde;
pub mod sequence;
pub mod subsets;

pub use error::{Error, Result};
