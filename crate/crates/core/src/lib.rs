pub mod bench;
pub mod bounds;
pub mod cli;
pub mod error;
pub mod gradients;
pub mod latent;
pub mod math;
pub mod mcqa;
pub mod oracle;
pub mod retrieval;
pub mod rng;
pub mod sampling;
pub mod scoring;
pub mod training;

pub use error::{Result, VodError};
