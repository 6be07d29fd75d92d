pub mod agent;
pub mod env;
pub mod metrics;
pub mod nn;
pub mod runner;
pub mod transfer;
