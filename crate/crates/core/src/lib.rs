pub mod classifier;
pub mod config;
pub mod dataset;
pub mod error;
pub mod features;
pub mod filterbank;
pub mod monogenic;
pub mod pipeline;
pub mod scattering;
pub mod spectral;
pub mod tensor;
pub mod viz;

pub use error::{Error, Result};
