//! Compositions of stream transformers as network matrices.
//!
//! A transformer graph wires named outputs of nodes to named inputs of other
//! nodes. Each wire becomes a matrix element of weight 1, which makes the
//! down movement a pure shift of every stream by one tick.
//!
//! [`check_equivalence`] runs the compiled network next to a direct
//! transform-shift interpreter that never touches the matrix.

use alloc::collections::{BTreeMap, BTreeSet, VecDeque};
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use thiserror::Error;

use crate::network::{
    Activation, ActivityRule, Engine, EngineError, MatrixEntry, NetworkMatrix, NetworkState, NeuronId, NeuronRegistry,
};
use crate::vvalue::{Label, VError, VValue};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GraphNode {
    pub name: Label,
    pub function: Label,
}

/// `(from.0, from.1) -> (to.0, to.1)`: output `from.1` of node `from.0` feeds
/// input `to.1` of node `to.0`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct GraphEdge {
    pub from: (Label, Label),
    pub to: (Label, Label),
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TransformerGraph {
    pub nodes: Vec<GraphNode>,
    pub edges: Vec<GraphEdge>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CompileError {
    #[error("duplicate node `{0}`")]
    DuplicateNode(String),
    #[error("edge refers to unknown node `{0}`")]
    UnknownNode(String),
    #[error("unknown neuron type `{function}` on node `{node}`")]
    UnknownNeuronType { node: String, function: String },
    #[error("input `{input}` of node `{node}` has more than one incoming edge; insert an accum node to sum them")]
    FanIn { node: String, input: String },
    #[error(transparent)]
    Value(#[from] VError),
}

impl TransformerGraph {
    pub fn node(&self, name: &str) -> Option<&GraphNode> {
        self.nodes.iter().find(|n| n.name.as_str() == name)
    }

    pub fn neuron_id(&self, name: &str) -> Option<NeuronId> {
        self.node(name)
            .map(|n| NeuronId::new(n.function.clone(), n.name.clone()))
    }

    pub fn validate(&self, registry: &NeuronRegistry) -> Result<(), CompileError> {
        let mut names = BTreeSet::new();
        for n in &self.nodes {
            if !names.insert(n.name.as_str()) {
                return Err(CompileError::DuplicateNode(n.name.to_string()));
            }
            if !registry.contains(n.function.as_str()) {
                return Err(CompileError::UnknownNeuronType {
                    node: n.name.to_string(),
                    function: n.function.to_string(),
                });
            }
        }
        let mut wired = BTreeSet::new();
        for e in &self.edges {
            for end in [&e.from.0, &e.to.0] {
                if !names.contains(end.as_str()) {
                    return Err(CompileError::UnknownNode(end.to_string()));
                }
            }
            if !wired.insert((&e.to.0, &e.to.1)) {
                return Err(CompileError::FanIn {
                    node: e.to.0.to_string(),
                    input: e.to.1.to_string(),
                });
            }
        }
        Ok(())
    }
}

/// One weight-1 element per edge, and nothing else.
pub fn compile(graph: &TransformerGraph, registry: &NeuronRegistry) -> Result<NetworkMatrix, CompileError> {
    graph.validate(registry)?;
    let mut edges: Vec<&GraphEdge> = graph.edges.iter().collect();
    edges.sort();
    let entries: Vec<MatrixEntry> = edges
        .into_iter()
        .map(|e| MatrixEntry {
            target: graph.neuron_id(e.to.0.as_str()).expect("validated"),
            input: e.to.1.clone(),
            source: graph.neuron_id(e.from.0.as_str()).expect("validated"),
            output: e.from.1.clone(),
            weight: 1.0,
        })
        .collect();
    Ok(NetworkMatrix::from_entries(&entries)?)
}

/// Length of the shortest chain of edges from any `source` node; nodes that
/// no source reaches are absent. In a compiled network an event emitted by
/// a source shows up at a node of depth `k` exactly `k` ticks later.
pub fn pipeline_depths(graph: &TransformerGraph) -> BTreeMap<Label, usize> {
    let mut depth = BTreeMap::new();
    let mut queue = VecDeque::new();
    for n in &graph.nodes {
        if n.function.as_str() == "source" {
            depth.insert(n.name.clone(), 0usize);
            queue.push_back(n.name.clone());
        }
    }
    while let Some(name) = queue.pop_front() {
        let d = depth[&name];
        for e in graph.edges.iter().filter(|e| e.from.0 == name) {
            if !depth.contains_key(&e.to.0) {
                depth.insert(e.to.0.clone(), d + 1);
                queue.push_back(e.to.0.clone());
            }
        }
    }
    depth
}

#[derive(Clone, Debug, PartialEq)]
pub struct Divergence {
    pub tick: u64,
    pub node: Label,
    pub compiled: VValue,
    pub interpreted: VValue,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EquivalenceReport {
    pub steps: u64,
    /// Ticks by which the compiled trace lags the interpreter. Both
    /// disciplines cross every edge in exactly one tick, so this is zero.
    pub offset: u64,
    pub first_divergence: Option<Divergence>,
}

impl EquivalenceReport {
    pub fn is_equivalent(&self) -> bool {
        self.first_divergence.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EquivalenceError {
    #[error(transparent)]
    Compile(#[from] CompileError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("interpreter failed at tick {tick} on node `{node}`: {error}")]
    Interpreter { tick: u64, node: String, error: VError },
}

/// Direct transform-shift execution of a transformer graph: every node keeps
/// a current output; each tick all nodes compute their next output from the
/// current outputs of their wired sources, then all next outputs become
/// current at once.
#[derive(Clone, Debug)]
pub struct TransformShift<'a> {
    graph: &'a TransformerGraph,
    registry: &'a NeuronRegistry,
    current: BTreeMap<Label, VValue>,
    events: &'a [VValue],
    cursors: BTreeMap<Label, usize>,
    tick: u64,
}

impl<'a> TransformShift<'a> {
    pub fn new(graph: &'a TransformerGraph, registry: &'a NeuronRegistry, events: &'a [VValue]) -> Self {
        TransformShift {
            graph,
            registry,
            current: BTreeMap::new(),
            events,
            cursors: BTreeMap::new(),
            tick: 0,
        }
    }

    pub fn output(&self, node: &str) -> VValue {
        self.current.get(node).cloned().unwrap_or_default()
    }

    pub fn step(&mut self) -> Result<(), EquivalenceError> {
        self.tick += 1;
        let mut next = BTreeMap::new();
        for node in &self.graph.nodes {
            let fail = |error| EquivalenceError::Interpreter {
                tick: self.tick,
                node: node.name.to_string(),
                error,
            };
            let wires = self.graph.edges.iter().filter(|e| e.to.0 == node.name).map(|e| {
                let upstream = self.current.get(&e.from.0);
                let value = upstream
                    .and_then(|v| v.child(e.from.1.as_str()))
                    .cloned()
                    .unwrap_or_default();
                (e.to.1.clone(), value)
            });
            let input = VValue::from_children(wires).map_err(fail)?;
            let activation = self.registry.get(node.function.as_str()).ok_or_else(|| {
                EquivalenceError::Compile(CompileError::UnknownNeuronType {
                    node: node.name.to_string(),
                    function: node.function.to_string(),
                })
            })?;
            let out = match activation {
                Activation::Pure(f) => f(&input).map_err(fail)?,
                Activation::Source => {
                    let cursor = self.cursors.entry(node.name.clone()).or_insert(0);
                    let event = self.events.get(*cursor).cloned().unwrap_or_default();
                    *cursor += 1;
                    VValue::singleton(Label::new("single").expect("valid"), event)
                }
                Activation::Sink => VValue::zero(),
            };
            next.insert(node.name.clone(), out);
        }
        self.current = next;
        Ok(())
    }
}

/// Runs the compiled network and the transform-shift interpreter side by
/// side for `steps` ticks and reports the first node whose outputs differ.
///
/// The compiled network starts from zero outputs under the
/// input-or-output activity rule and consumes `events` through its
/// `source` nodes.
pub fn check_equivalence(
    graph: &TransformerGraph,
    registry: &NeuronRegistry,
    events: &[VValue],
    steps: u64,
) -> Result<EquivalenceReport, EquivalenceError> {
    let matrix = compile(graph, registry)?;
    let mut engine = Engine::new(registry.clone(), matrix, NetworkState::new(), 0)
        .with_activity_rule(ActivityRule::InputOrOutput)
        .with_events(events.to_vec());
    let mut interp = TransformShift::new(graph, registry, events);
    let ids: Vec<(Label, NeuronId)> = graph
        .nodes
        .iter()
        .map(|n| (n.name.clone(), NeuronId::new(n.function.clone(), n.name.clone())))
        .collect();
    for _ in 0..steps {
        let record = engine.step()?;
        interp.step()?;
        for (name, id) in &ids {
            let compiled = record.outputs.value(id);
            let interpreted = interp.output(name.as_str());
            if compiled != interpreted {
                return Ok(EquivalenceReport {
                    steps,
                    offset: 0,
                    first_divergence: Some(Divergence {
                        tick: record.tick,
                        node: name.clone(),
                        compiled,
                        interpreted,
                    }),
                });
            }
        }
    }
    Ok(EquivalenceReport {
        steps,
        offset: 0,
        first_divergence: None,
    })
}
