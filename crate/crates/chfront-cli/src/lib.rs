//! Configuration, output and verification plumbing behind the `chfront` binary.

pub mod config;
pub mod output;
pub mod verify;
