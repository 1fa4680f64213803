//! JSON Lines execution traces.
//!
//! The first line is a header; every following line is one tick. The matrix
//! is written on tick 1, whenever it changes, and every `snapshot_every`
//! ticks when that is nonzero.

use std::io::{self, Write};

use dmm_core::network::TraceSink;
use dmm_core::samples::RNG_ALGORITHM;
use dmm_core::{ActivityRule, TickRecord};
use serde_json::{json, Map, Value};

use crate::json::to_json;

pub const TRACE_FORMAT: &str = "dmm-trace";
pub const TRACE_VERSION: u64 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct TraceHeader {
    pub seed: u64,
    pub activity_rule: ActivityRule,
    pub self_referential: bool,
}

impl TraceHeader {
    pub fn to_json(&self) -> Value {
        json!({
            "format": TRACE_FORMAT,
            "version": TRACE_VERSION,
            "seed": self.seed,
            "rng": RNG_ALGORITHM,
            "activity_rule": self.activity_rule.name(),
            "self": self.self_referential,
        })
    }
}

pub fn record_to_json(record: &TickRecord, with_matrix: bool) -> Value {
    let mut map = Map::new();
    map.insert("tick".into(), Value::from(record.tick));
    if with_matrix {
        if let Some(m) = &record.matrix {
            map.insert("matrix".into(), to_json(m.as_vvalue()));
        }
    }
    map.insert("outputs".into(), to_json(record.outputs.as_vvalue()));
    if !record.sinks.is_empty() {
        let sinks = record
            .sinks
            .iter()
            .map(|(id, v)| json!({"fn": id.function.as_str(), "neuron": id.neuron.as_str(), "value": to_json(v)}))
            .collect();
        map.insert("sinks".into(), Value::Array(sinks));
    }
    Value::Object(map)
}

pub struct JsonlTrace<W: Write> {
    out: W,
    snapshot_every: u64,
}

impl<W: Write> JsonlTrace<W> {
    pub fn new(mut out: W, header: &TraceHeader, snapshot_every: u64) -> io::Result<Self> {
        writeln!(out, "{}", header.to_json())?;
        Ok(JsonlTrace { out, snapshot_every })
    }

    pub fn finish(mut self) -> io::Result<W> {
        self.out.flush()?;
        Ok(self.out)
    }
}

impl<W: Write> TraceSink for JsonlTrace<W> {
    type Error = io::Error;

    fn record(&mut self, record: &TickRecord) -> io::Result<()> {
        let periodic = self.snapshot_every > 0 && record.tick.is_multiple_of(self.snapshot_every);
        let line = record_to_json(record, record.matrix_changed || periodic);
        writeln!(self.out, "{line}")
    }
}
