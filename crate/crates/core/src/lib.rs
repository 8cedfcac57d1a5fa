pub mod cli;
pub mod error;
pub mod gld;
pub mod lab;
pub mod metrics;
pub mod ml;
pub mod opt;
pub mod prob;
pub mod rc;
pub mod verify;

pub use error::{Error, Result};
