pub mod audio;
pub mod error;
pub mod features;
pub mod seed;
pub mod store;
pub mod stream;

pub use error::{Error, Result};
pub mod corpus;
pub mod dataset;
pub mod gru;
pub mod metrics;
