//! Network, graph and events files.
//!
//! Network file:
//!
//! ```json
//! {"activity_rule": "input_or_output", "seed": 42,
//!  "matrix": { ...rank-6 V-value... },
//!  "initial_outputs": { "accum": { "n": { ... } } },
//!  "inputs": "events.jsonl",
//!  "self": {"enabled": true, "fn": "accum", "neuron": "self", "output": "single"}}
//! ```
//!
//! Graph file: `{"nodes": [{"name", "fn"}], "edges": [{"from": [node, out], "to": [node, in]}]}`.
//!
//! Events file: JSON Lines, one V-value per line.

use std::fs;
use std::path::{Path as FsPath, PathBuf};

use dmm_core::compiler::{GraphEdge, GraphNode, TransformerGraph};
use dmm_core::network::check_registry;
use dmm_core::selfref::bootstrap_self;
use dmm_core::{
    ActivityRule, Engine, Label, NetworkMatrix, NetworkState, NeuronId, NeuronRegistry, SelfConfig, VValue,
};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::json::{from_json, to_json};

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}:{column}: {message}")]
    Syntax {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{path}: {location}: {message}")]
    Invalid {
        path: PathBuf,
        location: String,
        message: String,
    },
}

fn read(path: &FsPath) -> Result<String, LoadError> {
    fs::read_to_string(path).map_err(|source| LoadError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn syntax(path: &FsPath, e: serde_json::Error, line_offset: usize) -> LoadError {
    LoadError::Syntax {
        path: path.to_path_buf(),
        line: e.line() + line_offset,
        column: e.column(),
        message: e.to_string().split(" at line").next().unwrap_or_default().to_string(),
    }
}

fn invalid(path: &FsPath, location: impl Into<String>, message: impl ToString) -> LoadError {
    LoadError::Invalid {
        path: path.to_path_buf(),
        location: location.into(),
        message: message.to_string(),
    }
}

fn default_true() -> bool {
    true
}
fn default_fn() -> String {
    "accum".into()
}
fn default_neuron() -> String {
    "self".into()
}
fn default_output() -> String {
    "single".into()
}
fn default_loop_input() -> String {
    "accum".into()
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SelfSection {
    #[serde(default = "default_true")]
    pub enabled: bool,
    #[serde(rename = "fn", default = "default_fn")]
    pub function: String,
    #[serde(default = "default_neuron")]
    pub neuron: String,
    #[serde(default = "default_output")]
    pub output: String,
    #[serde(default = "default_loop_input")]
    pub loop_input: String,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct NetworkFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub activity_rule: Option<String>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "empty_object")]
    pub matrix: Value,
    #[serde(default = "empty_object")]
    pub initial_outputs: Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inputs: Option<String>,
    #[serde(rename = "self", default, skip_serializing_if = "Option::is_none")]
    pub self_ref: Option<SelfSection>,
}

fn empty_object() -> Value {
    Value::Object(Default::default())
}

impl NetworkFile {
    pub fn new(matrix: &NetworkMatrix) -> Self {
        NetworkFile {
            activity_rule: Some(ActivityRule::InputOrOutput.name().into()),
            seed: 0,
            matrix: to_json(matrix.as_vvalue()),
            initial_outputs: empty_object(),
            inputs: None,
            self_ref: None,
        }
    }

    pub fn to_pretty_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("network files serialize")
    }
}

/// A fully checked network, ready to build an engine from.
#[derive(Clone, Debug)]
pub struct NetworkSpec {
    pub rule: ActivityRule,
    pub seed: u64,
    pub matrix: NetworkMatrix,
    pub outputs: NetworkState,
    pub events: Vec<VValue>,
    pub self_config: Option<SelfConfig>,
}

#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub events: Option<PathBuf>,
}

impl NetworkSpec {
    pub fn into_engine(self, registry: NeuronRegistry) -> Engine {
        let mut engine = Engine::new(registry, self.matrix, self.outputs, self.seed)
            .with_activity_rule(self.rule)
            .with_events(self.events);
        if let Some(cfg) = self.self_config {
            engine = engine.with_self_reference(cfg);
        }
        engine
    }
}

/// Reads and checks a network file. Everything `run` needs is checked here,
/// so a file accepted by this function cannot fail before the first tick.
pub fn load_network(path: &FsPath, registry: &NeuronRegistry, overrides: &Overrides) -> Result<NetworkSpec, LoadError> {
    let text = read(path)?;
    let file: NetworkFile = serde_json::from_str(&text).map_err(|e| syntax(path, e, 0))?;
    let base = path.parent().unwrap_or(FsPath::new("."));
    check_network(path, base, &file, registry, overrides)
}

pub fn check_network(
    path: &FsPath,
    base: &FsPath,
    file: &NetworkFile,
    registry: &NeuronRegistry,
    overrides: &Overrides,
) -> Result<NetworkSpec, LoadError> {
    let rule = match &file.activity_rule {
        None => ActivityRule::default(),
        Some(name) => ActivityRule::from_name(name).ok_or_else(|| {
            invalid(
                path,
                "activity_rule",
                format!("unknown activity rule `{name}` (expected input_driven or input_or_output)"),
            )
        })?,
    };
    let matrix_value = from_json(&file.matrix).map_err(|e| invalid(path, "matrix", e))?;
    let matrix = NetworkMatrix::new(matrix_value)
        .map_err(|e| invalid(path, format!("matrix{}", e.path.trim_start_matches('$')), e.reason))?;
    let outputs_value = from_json(&file.initial_outputs).map_err(|e| invalid(path, "initial_outputs", e))?;
    let mut outputs = NetworkState::from_vvalue(outputs_value).map_err(|e| {
        invalid(
            path,
            format!("initial_outputs{}", e.path.trim_start_matches('$')),
            e.reason,
        )
    })?;

    let self_config = match &file.self_ref {
        Some(s) if s.enabled => {
            let label = |field: &str, v: &str| Label::new(v).map_err(|e| invalid(path, format!("self.{field}"), e));
            Some(SelfConfig {
                neuron: NeuronId::new(label("fn", &s.function)?, label("neuron", &s.neuron)?),
                output: label("output", &s.output)?,
                loop_input: label("loop_input", &s.loop_input)?,
                enabled: true,
            })
        }
        _ => None,
    };
    let mut matrix = matrix;
    if let Some(cfg) = &self_config {
        if !registry.contains(cfg.neuron.function.as_str()) {
            return Err(invalid(
                path,
                "self.fn",
                format!("unknown neuron type `{}`", cfg.neuron.function),
            ));
        }
        let (state, w) = bootstrap_self(&matrix, &outputs, cfg).map_err(|e| invalid(path, "self", e))?;
        outputs = state;
        matrix = w;
    }
    check_registry(registry, &matrix, &outputs)
        .map_err(|name| invalid(path, "matrix", format!("unknown neuron type `{name}`")))?;

    let events_path = overrides
        .events
        .clone()
        .or_else(|| file.inputs.as_ref().map(|p| base.join(p)));
    let events = match events_path {
        Some(p) => load_events(&p)?,
        None => Vec::new(),
    };
    Ok(NetworkSpec {
        rule,
        seed: overrides.seed.unwrap_or(file.seed),
        matrix,
        outputs,
        events,
        self_config,
    })
}

pub fn load_events(path: &FsPath) -> Result<Vec<VValue>, LoadError> {
    parse_events(path, &read(path)?)
}

pub fn parse_events(path: &FsPath, text: &str) -> Result<Vec<VValue>, LoadError> {
    let mut events = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let value: Value = serde_json::from_str(line).map_err(|e| syntax(path, e, i))?;
        let event = from_json(&value).map_err(|e| invalid(path, format!("line {}", i + 1), e))?;
        events.push(event);
    }
    Ok(events)
}

pub fn events_to_jsonl(events: &[VValue]) -> String {
    let mut out = String::new();
    for e in events {
        out.push_str(&serde_json::to_string(&to_json(e)).expect("values serialize"));
        out.push('\n');
    }
    out
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NodeRecord {
    name: String,
    #[serde(rename = "fn")]
    function: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EdgeRecord {
    from: (String, String),
    to: (String, String),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GraphRecord {
    #[serde(default)]
    nodes: Vec<NodeRecord>,
    #[serde(default)]
    edges: Vec<EdgeRecord>,
}

pub fn load_graph(path: &FsPath) -> Result<TransformerGraph, LoadError> {
    parse_graph(path, &read(path)?)
}

pub fn parse_graph(path: &FsPath, text: &str) -> Result<TransformerGraph, LoadError> {
    let record: GraphRecord = serde_json::from_str(text).map_err(|e| syntax(path, e, 0))?;
    let label = |loc: String, s: &str| Label::new(s).map_err(|e| invalid(path, loc, e));
    let nodes = record
        .nodes
        .iter()
        .enumerate()
        .map(|(i, n)| {
            Ok(GraphNode {
                name: label(format!("nodes[{i}].name"), &n.name)?,
                function: label(format!("nodes[{i}].fn"), &n.function)?,
            })
        })
        .collect::<Result<_, LoadError>>()?;
    let edges = record
        .edges
        .iter()
        .enumerate()
        .map(|(i, e)| {
            Ok(GraphEdge {
                from: (
                    label(format!("edges[{i}].from"), &e.from.0)?,
                    label(format!("edges[{i}].from"), &e.from.1)?,
                ),
                to: (
                    label(format!("edges[{i}].to"), &e.to.0)?,
                    label(format!("edges[{i}].to"), &e.to.1)?,
                ),
            })
        })
        .collect::<Result<_, LoadError>>()?;
    Ok(TransformerGraph { nodes, edges })
}

pub fn graph_to_json(graph: &TransformerGraph) -> String {
    let record = GraphRecord {
        nodes: graph
            .nodes
            .iter()
            .map(|n| NodeRecord {
                name: n.name.to_string(),
                function: n.function.to_string(),
            })
            .collect(),
        edges: graph
            .edges
            .iter()
            .map(|e| EdgeRecord {
                from: (e.from.0.to_string(), e.from.1.to_string()),
                to: (e.to.0.to_string(), e.to.1.to_string()),
            })
            .collect(),
    };
    serde_json::to_string_pretty(&record).expect("graphs serialize")
}
