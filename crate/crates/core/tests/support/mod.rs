//! Shared by the core integration tests and the acceptance suite.
#![allow(dead_code)]

pub mod checks;
pub mod oracles;
