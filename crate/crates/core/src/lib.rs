//! Tabular laboratory for token-level credit assignment in reinforcement
//! learning with verifiable rewards.

pub mod credit;
pub mod env;
pub mod error;
pub mod evaluation;
pub mod infotheory;
pub mod io;
pub mod objective;
pub mod policy;
pub mod trainer;

pub use error::{LabError, Result};
