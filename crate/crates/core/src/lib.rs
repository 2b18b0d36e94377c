pub mod binio;
pub mod cli;
pub mod config;
pub mod data_model;
pub mod dsp;
pub mod error;
pub mod ingest;
pub mod net;
pub mod par;
pub mod pipeline;
pub mod rng;
pub mod runconfig;
pub mod train;

pub use error::{Error, Result};
