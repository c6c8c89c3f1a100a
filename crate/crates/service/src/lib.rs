//! HTTP survey API and operator CLI over `perceptmap-core`.

pub mod api;
pub mod cli;
