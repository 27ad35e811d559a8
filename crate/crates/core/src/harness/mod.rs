//! Command-line plumbing: configuration, run directories, field files,
//! plots and the verification suites.

pub mod cli;
pub mod fieldfile;
pub mod manifest;
pub mod svg;
pub mod verify;
