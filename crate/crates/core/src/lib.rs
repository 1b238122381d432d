pub mod channel;
pub mod config;
pub mod dsp;
pub mod error;
pub mod estimate;
pub mod pipeline;
pub mod recon;
pub mod rx;
pub mod security;
pub mod snu;
pub mod stats;
pub mod tx;

pub use error::{Error, Result};
