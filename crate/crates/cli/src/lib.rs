//! Library side of the `stefan-kit` command-line tool.

pub mod export;
pub mod scenario;
pub mod suites;
