pub mod cli;
pub mod criteria;
pub mod error;
pub mod rng;
pub mod rubin;
pub mod stats;
pub mod tree;
pub mod walk;
