pub mod annotation;
pub mod autolabel;
pub mod config;
pub mod error;
pub mod imgcore;
pub mod io;
pub mod metrics;
pub mod ood;
pub mod pipeline;
pub mod quality;
pub mod synth;
pub mod textregion;

pub use error::{Error, Result};
