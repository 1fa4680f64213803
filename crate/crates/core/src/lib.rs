//! Dataflow matrix machines over sparse recursive maps.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, traces and the
//! command-line front end live in the `dmm` crate.

#![no_std]

extern crate alloc;

pub mod compiler;
pub mod network;
pub mod neuron_lib;
pub mod samples;
pub mod selfref;
pub mod vvalue;

pub use network::{
    ActivityRule, Engine, EngineError, NetworkMatrix, NetworkState, NeuronId, NeuronRegistry, TickRecord,
};
pub use samples::{SampleLeaf, SampleRng, Sign};
pub use selfref::SelfConfig;
pub use vvalue::{Label, Path, RawValue, VError, VValue};
