//! Disk-facing half of stubshrink: package loading, report files, the
//! command line and the client benchmark.

pub mod bench;
pub mod cli;
pub mod json;
pub mod load;
pub mod ops;
pub mod output;

pub use ops::{with_stack, Error};
