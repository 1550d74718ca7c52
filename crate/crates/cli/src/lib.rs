//! Library surface of the command line harness: benchmark execution and
//! report formats, the assumption-check wrapper, configuration parsing and
//! field export. The `hdgmg` binary is a thin shell over these.

pub mod bench;
pub mod check;
pub mod config;
pub mod solve;
pub mod vtk;
