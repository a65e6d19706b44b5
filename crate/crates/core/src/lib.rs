//! Core of the stubshrink debloating toolchain.
//!
//! Everything here is pure computation over source text and in-memory
//! package graphs; file-system access, JSON formats and the command line
//! live in the `stubshrink` crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod lang;
pub mod host;
pub mod interp;

pub mod callgraph;
pub mod stubbify;
pub mod bundler;
