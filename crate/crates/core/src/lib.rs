pub mod checkpoint;
pub mod cli;
pub mod corpus;
pub mod error;
pub mod metrics;
pub mod models;
pub mod nn;
pub mod preprocess;
pub mod toy;
pub mod trainer;

pub use error::{Error, Result};

/// Generator used for every seeded random choice (initialization, shuffling, dropout).
pub type SeededRng = rand_chacha::ChaCha8Rng;
