//! Command implementations and synthetic data generation behind the
//! `rehab` binary. Kept as a library so integration tests can drive the
//! same code paths directly.

pub mod commands;
pub mod config;
pub mod synth;
