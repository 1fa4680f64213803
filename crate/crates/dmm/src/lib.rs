//! File formats, traces and the command-line front end for `dmm-core`.

pub mod cli;
pub mod files;
pub mod json;
pub mod text;
pub mod trace;
