//! Error exponents for distributed hypothesis testing over noisy channels.

pub mod bc;
pub mod dmc;
pub mod error;
pub mod gaussian;
pub mod iproject;
pub mod mac;
pub mod probkit;
pub mod problem;
pub mod repro;
pub mod search;
pub mod simcode;

pub use error::{Error, Result};
