//! Command-line front end for `curveflow`.
//!
//! The text parsers live in [`parse`] and [`config`] so they can be fuzzed
//! without going through the binary.

pub mod app;
pub mod checks;
pub mod config;
pub mod parse;

pub use app::{main_with_args, Status};
