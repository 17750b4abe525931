pub mod classify;
pub mod connectivity;
pub mod coupling;
pub mod dsp;
pub mod error;
pub mod features;
pub mod ingest;
pub mod preprocess;
pub mod recording;
pub mod report;
pub mod seed;
pub mod spectral;
pub mod stats;
pub mod synth;

pub use error::{Error, Result};
pub use recording::*;
