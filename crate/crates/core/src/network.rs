//! The two-stroke engine for networks of variadic neurons.
//!
//! Each tick first applies the rank-6 network matrix to the outputs of all
//! neurons (the down movement), producing every neuron's input, and then
//! applies each active neuron's activation function to its input (the up
//! movement).
//!
//! Matrix layout, six levels deep:
//! `fn_in -> neuron_in -> input -> fn_out -> neuron_out -> output -> weight`.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use thiserror::Error;

use crate::samples::{mixed_linear_comb, SampleRng};
use crate::selfref::{extract_matrix, SelfConfig};
use crate::vvalue::{Children, Label, VError, VValue};

/// Number of index levels of a network matrix.
pub const MATRIX_RANK: usize = 6;

/// A neuron is determined by its activation function name and its own name.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NeuronId {
    pub function: Label,
    pub neuron: Label,
}

impl NeuronId {
    pub fn new(function: Label, neuron: Label) -> Self {
        NeuronId { function, neuron }
    }

    pub fn parse(function: &str, neuron: &str) -> Result<Self, VError> {
        Ok(NeuronId {
            function: Label::new(function)?,
            neuron: Label::new(neuron)?,
        })
    }
}

impl fmt::Debug for NeuronId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{} :{}]", self.function, self.neuron)
    }
}

impl fmt::Display for NeuronId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ActivityRule {
    /// Only neurons with a nonzero input fire.
    InputDriven,
    /// Neurons with a nonzero input, plus every neuron that is the source of
    /// a nonzero weight.
    #[default]
    InputOrOutput,
}

impl ActivityRule {
    pub fn name(self) -> &'static str {
        match self {
            ActivityRule::InputDriven => "input_driven",
            ActivityRule::InputOrOutput => "input_or_output",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "input_driven" => Some(ActivityRule::InputDriven),
            "input_or_output" => Some(ActivityRule::InputOrOutput),
            _ => None,
        }
    }
}

pub type ActivationFn = Arc<dyn Fn(&VValue) -> Result<VValue, VError> + Send + Sync>;

/// What happens to a neuron on the up movement.
#[derive(Clone)]
pub enum Activation {
    /// A pure function `U -> U`.
    Pure(ActivationFn),
    /// Ignores its input and emits `{single: e}` for the next external event.
    Source,
    /// Records its input as external output and emits zero.
    Sink,
}

impl fmt::Debug for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Activation::Pure(_) => f.write_str("Pure(..)"),
            Activation::Source => f.write_str("Source"),
            Activation::Sink => f.write_str("Sink"),
        }
    }
}

/// Stable names of activation functions.
#[derive(Clone, Debug, Default)]
pub struct NeuronRegistry {
    entries: BTreeMap<Label, Activation>,
}

impl NeuronRegistry {
    pub fn new() -> Self {
        NeuronRegistry::default()
    }

    pub fn register(&mut self, name: Label, activation: Activation) -> &mut Self {
        self.entries.insert(name, activation);
        self
    }

    pub fn register_fn<F>(&mut self, name: &str, f: F) -> Result<&mut Self, VError>
    where
        F: Fn(&VValue) -> Result<VValue, VError> + Send + Sync + 'static,
    {
        Ok(self.register(Label::new(name)?, Activation::Pure(Arc::new(f))))
    }

    pub fn get(&self, name: &str) -> Option<&Activation> {
        self.entries.get(name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(Label::as_str)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{path}: {reason}")]
pub struct ShapeError {
    pub path: String,
    pub reason: String,
}

impl ShapeError {
    fn new(path: &[&Label], reason: impl Into<String>) -> Self {
        let mut p = String::from("$");
        for l in path {
            p.push('.');
            p.push_str(l.as_str());
        }
        ShapeError {
            path: p,
            reason: reason.into(),
        }
    }
}

/// All neuron outputs (or all neuron inputs) at one tick:
/// `fn -> neuron -> value`, where every value lies in `U`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct NetworkState(VValue);

impl NetworkState {
    pub fn new() -> Self {
        NetworkState::default()
    }

    pub fn from_vvalue(v: VValue) -> Result<Self, ShapeError> {
        if !v.is_u() {
            return Err(ShapeError::new(&[], "top level holds a scalar or sample"));
        }
        for (f, fnode) in v.children() {
            if !fnode.is_u() {
                return Err(ShapeError::new(&[f], "function level holds a scalar or sample"));
            }
            for (n, value) in fnode.children() {
                if !value.is_u() {
                    return Err(ShapeError::new(
                        &[f, n],
                        "neuron value is not in U (top-level scalar or sample)",
                    ));
                }
            }
        }
        Ok(NetworkState(v))
    }

    pub fn from_neurons<I>(neurons: I) -> Result<Self, ShapeError>
    where
        I: IntoIterator<Item = (NeuronId, VValue)>,
    {
        let mut top = Children::default();
        for (id, value) in neurons {
            if !value.is_u() {
                return Err(ShapeError::new(
                    &[&id.function, &id.neuron],
                    "neuron value is not in U (top-level scalar or sample)",
                ));
            }
            if value.is_zero() {
                continue;
            }
            top.entry(id.function)
                .or_default()
                .children_mut()
                .insert(id.neuron, value);
        }
        Ok(NetworkState(VValue::from_parts(0.0, None, top)))
    }

    pub fn get(&self, id: &NeuronId) -> Option<&VValue> {
        self.0.child(id.function.as_str())?.child(id.neuron.as_str())
    }

    /// The value of `id`, zero when absent.
    pub fn value(&self, id: &NeuronId) -> VValue {
        self.get(id).cloned().unwrap_or_default()
    }

    pub fn neurons(&self) -> impl Iterator<Item = (NeuronId, &VValue)> {
        self.0.children().flat_map(|(f, fnode)| {
            fnode
                .children()
                .map(move |(n, v)| (NeuronId::new(f.clone(), n.clone()), v))
        })
    }

    pub fn neuron_count(&self) -> usize {
        self.0.children().map(|(_, f)| f.child_count()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_zero()
    }

    pub fn as_vvalue(&self) -> &VValue {
        &self.0
    }

    pub fn into_vvalue(self) -> VValue {
        self.0
    }

    /// Statewise linear combination.
    pub fn linear_comb(pairs: &[(f64, &NetworkState)]) -> Result<NetworkState, VError> {
        VValue::linear_comb(pairs.iter().map(|(c, s)| (*c, &s.0))).map(NetworkState)
    }
}

/// One nonzero element `w[f, nf, i; g, ng, o]`.
#[derive(Clone, Debug, PartialEq)]
pub struct MatrixEntry {
    pub target: NeuronId,
    pub input: Label,
    pub source: NeuronId,
    pub output: Label,
    pub weight: f64,
}

/// Sparse rank-6 tensor mapping neuron outputs to neuron inputs.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct NetworkMatrix(VValue);

impl NetworkMatrix {
    pub fn empty() -> Self {
        NetworkMatrix::default()
    }

    /// Accepts `v` only if every leaf is a number at depth exactly six.
    pub fn new(v: VValue) -> Result<Self, ShapeError> {
        let mut path = Vec::new();
        check_rank(&v, &mut path)?;
        Ok(NetworkMatrix(v))
    }

    /// Builds a matrix from elements; repeated coordinates are summed.
    pub fn from_entries<'a, I>(entries: I) -> Result<Self, VError>
    where
        I: IntoIterator<Item = &'a MatrixEntry>,
    {
        let paths: Vec<(crate::vvalue::Path, f64)> = entries.into_iter().map(|e| (entry_path(e), e.weight)).collect();
        VValue::from_terms(paths.iter().map(|(p, w)| (p, *w))).map(NetworkMatrix)
    }

    pub fn entries(&self) -> Vec<MatrixEntry> {
        let mut out = Vec::new();
        for (f, nf, i, row) in self.rows() {
            for (g, gnode) in row.children() {
                for (ng, nnode) in gnode.children() {
                    for (o, w) in nnode.children() {
                        out.push(MatrixEntry {
                            target: NeuronId::new(f.clone(), nf.clone()),
                            input: i.clone(),
                            source: NeuronId::new(g.clone(), ng.clone()),
                            output: o.clone(),
                            weight: w.number(),
                        });
                    }
                }
            }
        }
        out
    }

    /// Rows `(f, nf, i, row)`; each row is a rank-3 tensor `g -> ng -> o -> w`.
    pub fn rows(&self) -> impl Iterator<Item = (&Label, &Label, &Label, &VValue)> {
        self.0.children().flat_map(|(f, fnode)| {
            fnode
                .children()
                .flat_map(move |(nf, nnode)| nnode.children().map(move |(i, row)| (f, nf, i, row)))
        })
    }

    pub fn weight(&self, entry_target: &NeuronId, input: &str, source: &NeuronId, output: &str) -> f64 {
        (|| {
            Some(
                self.0
                    .child(entry_target.function.as_str())?
                    .child(entry_target.neuron.as_str())?
                    .child(input)?
                    .child(source.function.as_str())?
                    .child(source.neuron.as_str())?
                    .child(output)?
                    .number(),
            )
        })()
        .unwrap_or(0.0)
    }

    /// Neurons that appear as the source of some nonzero weight.
    pub fn sources(&self) -> BTreeSet<NeuronId> {
        let mut out = BTreeSet::new();
        for (_, _, _, row) in self.rows() {
            for (g, gnode) in row.children() {
                for (ng, _) in gnode.children() {
                    out.insert(NeuronId::new(g.clone(), ng.clone()));
                }
            }
        }
        out
    }

    /// Every neuron mentioned as target or source.
    pub fn neurons(&self) -> BTreeSet<NeuronId> {
        let mut out = self.sources();
        for (f, fnode) in self.0.children() {
            for (nf, _) in fnode.children() {
                out.insert(NeuronId::new(f.clone(), nf.clone()));
            }
        }
        out
    }

    pub fn leaf_count(&self) -> usize {
        self.0.leaf_count()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_zero()
    }

    pub fn as_vvalue(&self) -> &VValue {
        &self.0
    }

    pub fn into_vvalue(self) -> VValue {
        self.0
    }

    /// Returns a copy with `entry` set to exactly `weight`.
    pub fn with_weight(&self, entry: &MatrixEntry, weight: f64) -> Result<Self, VError> {
        let current = self.weight(
            &entry.target,
            entry.input.as_str(),
            &entry.source,
            entry.output.as_str(),
        );
        let delta = VValue::leaf(&entry_path(entry), weight - current)?;
        Ok(NetworkMatrix(self.0.add(&delta)?))
    }
}

fn entry_path(e: &MatrixEntry) -> crate::vvalue::Path {
    crate::vvalue::Path::from(alloc::vec![
        e.target.function.clone(),
        e.target.neuron.clone(),
        e.input.clone(),
        e.source.function.clone(),
        e.source.neuron.clone(),
        e.output.clone(),
    ])
}

fn check_rank<'a>(v: &'a VValue, path: &mut Vec<&'a Label>) -> Result<(), ShapeError> {
    if v.sample().is_some() {
        return Err(ShapeError::new(path, "sample leaf in network matrix"));
    }
    if path.len() == MATRIX_RANK {
        if v.child_count() > 0 {
            return Err(ShapeError::new(path, "matrix deeper than six levels"));
        }
        return Ok(());
    }
    if v.number() != 0.0 {
        return Err(ShapeError::new(
            path,
            alloc::format!("numeric leaf at depth {}, expected {MATRIX_RANK}", path.len()),
        ));
    }
    for (l, child) in v.children() {
        path.push(l);
        check_rank(child, path)?;
        path.pop();
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineErrorKind {
    #[error("malformed network matrix: {0}")]
    MatrixShape(ShapeError),
    #[error("Self emitted a value that is not a rank-6 matrix: {0}")]
    SelfShape(ShapeError),
    #[error("unknown neuron type `{0}`")]
    UnknownNeuronType(String),
    #[error("neuron {neuron} violated its contract: {reason}")]
    ContractViolation { neuron: String, reason: String },
    #[error(transparent)]
    Value(#[from] VError),
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("tick {tick}: {kind}")]
pub struct EngineError {
    pub tick: u64,
    pub kind: EngineErrorKind,
}

impl EngineError {
    fn at(tick: u64) -> impl Fn(EngineErrorKind) -> EngineError {
        move |kind| EngineError { tick, kind }
    }
}

/// External input events and captured sink output.
#[derive(Clone, Debug, Default)]
pub struct ExternalIo {
    events: Vec<VValue>,
    cursors: BTreeMap<NeuronId, usize>,
    sink_log: Vec<(NeuronId, VValue)>,
}

impl ExternalIo {
    pub fn new(events: Vec<VValue>) -> Self {
        ExternalIo {
            events,
            ..ExternalIo::default()
        }
    }

    /// Each source neuron reads the shared event list in order, one event
    /// per firing; exhausted sources read zero.
    fn next_event(&mut self, id: &NeuronId) -> VValue {
        let cursor = self.cursors.entry(id.clone()).or_insert(0);
        let event = self.events.get(*cursor).cloned().unwrap_or_default();
        *cursor += 1;
        event
    }

    fn take_sinks(&mut self) -> Vec<(NeuronId, VValue)> {
        core::mem::take(&mut self.sink_log)
    }

    pub fn events(&self) -> &[VValue] {
        &self.events
    }
}

/// `x[f,nf,i] = Σ_{g,ng,o} w[f,nf,i; g,ng,o] * y[g,ng,o]` for every row of `matrix`.
///
/// Rows that evaluate to zero are dropped. Sample leaves meeting at a path are
/// combined stochastically with `rng`.
pub fn down_movement(
    matrix: &NetworkMatrix,
    outputs: &NetworkState,
    rng: &mut SampleRng,
) -> Result<NetworkState, VError> {
    let mut top = Children::default();
    for (f, fnode) in matrix.as_vvalue().children() {
        let mut neurons = Children::default();
        for (nf, nnode) in fnode.children() {
            let mut inputs = Children::default();
            for (i, row) in nnode.children() {
                let mut pairs: Vec<(f64, &VValue)> = Vec::new();
                for (g, gnode) in row.children() {
                    let Some(gout) = outputs.as_vvalue().child(g.as_str()) else {
                        continue;
                    };
                    for (ng, onode) in gnode.children() {
                        let Some(y) = gout.child(ng.as_str()) else {
                            continue;
                        };
                        for (o, w) in onode.children() {
                            if let Some(y_o) = y.child(o.as_str()) {
                                pairs.push((w.number(), y_o));
                            }
                        }
                    }
                }
                if pairs.is_empty() {
                    continue;
                }
                let x = mixed_linear_comb(&pairs, rng)?;
                if !x.is_zero() {
                    inputs.insert(i.clone(), x);
                }
            }
            if !inputs.is_empty() {
                neurons.insert(nf.clone(), VValue::from_parts(0.0, None, inputs));
            }
        }
        if !neurons.is_empty() {
            top.insert(f.clone(), VValue::from_parts(0.0, None, neurons));
        }
    }
    Ok(NetworkState(VValue::from_parts(0.0, None, top)))
}

/// Neurons that run their activation function this tick.
pub fn fire_set(matrix: &NetworkMatrix, inputs: &NetworkState, rule: ActivityRule) -> BTreeSet<NeuronId> {
    let mut set: BTreeSet<NeuronId> = inputs.neurons().map(|(id, _)| id).collect();
    if rule == ActivityRule::InputOrOutput {
        set.extend(matrix.sources());
    }
    set
}

/// `y[f,nf] = f(x[f,nf])` for every neuron in `fire`; absent inputs are zero.
pub fn up_movement(
    registry: &NeuronRegistry,
    inputs: &NetworkState,
    fire: &BTreeSet<NeuronId>,
    io: &mut ExternalIo,
) -> Result<NetworkState, EngineErrorKind> {
    let zero = VValue::zero();
    let mut produced = Vec::with_capacity(fire.len());
    for id in fire {
        let activation = registry
            .get(id.function.as_str())
            .ok_or_else(|| EngineErrorKind::UnknownNeuronType(id.function.to_string()))?;
        let input = inputs.get(id).unwrap_or(&zero);
        let output = match activation {
            Activation::Pure(f) => f(input)?,
            Activation::Source => VValue::singleton(single(), io.next_event(id)),
            Activation::Sink => {
                if !input.is_zero() {
                    io.sink_log.push((id.clone(), input.clone()));
                }
                VValue::zero()
            }
        };
        if !output.is_u() {
            return Err(EngineErrorKind::ContractViolation {
                neuron: id.to_string(),
                reason: "activation output has a top-level scalar or sample".into(),
            });
        }
        if !output.is_canonical() {
            return Err(EngineErrorKind::ContractViolation {
                neuron: id.to_string(),
                reason: "activation output is not canonical".into(),
            });
        }
        produced.push((id.clone(), output));
    }
    NetworkState::from_neurons(produced).map_err(EngineErrorKind::MatrixShape)
}

pub(crate) fn single() -> Label {
    Label::new("single").expect("valid label")
}

/// Everything observable about one completed tick.
#[derive(Clone, Debug, PartialEq)]
pub struct TickRecord {
    pub tick: u64,
    /// The matrix used by this tick's down movement; `None` for tick 0.
    pub matrix: Option<NetworkMatrix>,
    /// Whether `matrix` differs from the one used on the previous tick.
    pub matrix_changed: bool,
    pub outputs: NetworkState,
    pub sinks: Vec<(NeuronId, VValue)>,
}

pub trait TraceSink {
    type Error;
    fn record(&mut self, record: &TickRecord) -> Result<(), Self::Error>;
}

/// Collects records in memory.
impl TraceSink for Vec<TickRecord> {
    type Error = core::convert::Infallible;
    fn record(&mut self, record: &TickRecord) -> Result<(), Self::Error> {
        self.push(record.clone());
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum RunError<E> {
    #[error(transparent)]
    Engine(EngineError),
    #[error("trace sink failed")]
    Sink(E),
}

#[derive(Clone, Debug)]
pub struct Engine {
    registry: NeuronRegistry,
    outputs: NetworkState,
    matrix: NetworkMatrix,
    last_used: Option<NetworkMatrix>,
    tick: u64,
    rng: SampleRng,
    seed: u64,
    rule: ActivityRule,
    self_config: Option<SelfConfig>,
    io: ExternalIo,
}

impl Engine {
    pub fn new(registry: NeuronRegistry, matrix: NetworkMatrix, outputs: NetworkState, seed: u64) -> Self {
        Engine {
            registry,
            outputs,
            matrix,
            last_used: None,
            tick: 0,
            rng: SampleRng::seed_from_u64(seed),
            seed,
            rule: ActivityRule::default(),
            self_config: None,
            io: ExternalIo::default(),
        }
    }

    pub fn with_activity_rule(mut self, rule: ActivityRule) -> Self {
        self.rule = rule;
        self
    }

    pub fn with_events(mut self, events: Vec<VValue>) -> Self {
        self.io = ExternalIo::new(events);
        self
    }

    /// Installs Self: from now on the matrix is read from Self's output at
    /// the start of every tick. A disabled config is ignored.
    pub fn with_self_reference(mut self, cfg: SelfConfig) -> Self {
        self.self_config = cfg.enabled.then_some(cfg);
        self
    }

    pub fn tick(&self) -> u64 {
        self.tick
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn activity_rule(&self) -> ActivityRule {
        self.rule
    }

    pub fn outputs(&self) -> &NetworkState {
        &self.outputs
    }

    /// The matrix the next down movement will use.
    pub fn current_matrix(&self) -> Result<NetworkMatrix, EngineError> {
        match &self.self_config {
            Some(cfg) => extract_matrix(&self.outputs, cfg)
                .map_err(|e| EngineError::at(self.tick)(EngineErrorKind::SelfShape(e))),
            None => Ok(self.matrix.clone()),
        }
    }

    pub fn registry(&self) -> &NeuronRegistry {
        &self.registry
    }

    pub fn self_config(&self) -> Option<&SelfConfig> {
        self.self_config.as_ref()
    }

    /// Record describing the initial state, before any step.
    pub fn initial_record(&self) -> TickRecord {
        TickRecord {
            tick: self.tick,
            matrix: None,
            matrix_changed: false,
            outputs: self.outputs.clone(),
            sinks: Vec::new(),
        }
    }

    /// One two-stroke cycle.
    pub fn step(&mut self) -> Result<TickRecord, EngineError> {
        let tick = self.tick + 1;
        let err = EngineError::at(tick);
        if let Some(cfg) = &self.self_config {
            self.matrix = extract_matrix(&self.outputs, cfg).map_err(|e| err(EngineErrorKind::SelfShape(e)))?;
        }
        let inputs =
            down_movement(&self.matrix, &self.outputs, &mut self.rng).map_err(|e| err(EngineErrorKind::Value(e)))?;
        let fire = fire_set(&self.matrix, &inputs, self.rule);
        let outputs = up_movement(&self.registry, &inputs, &fire, &mut self.io).map_err(&err)?;
        let matrix_changed = self.last_used.as_ref() != Some(&self.matrix);
        if matrix_changed {
            self.last_used = Some(self.matrix.clone());
        }
        self.outputs = outputs;
        self.tick = tick;
        Ok(TickRecord {
            tick,
            matrix: Some(self.matrix.clone()),
            matrix_changed,
            outputs: self.outputs.clone(),
            sinks: self.io.take_sinks(),
        })
    }

    /// Runs `steps` ticks, handing every record to `sink`. When starting
    /// from tick 0 the initial record is emitted first.
    pub fn run<S: TraceSink>(&mut self, steps: u64, sink: &mut S) -> Result<(), RunError<S::Error>> {
        if self.tick == 0 {
            sink.record(&self.initial_record()).map_err(RunError::Sink)?;
        }
        for _ in 0..steps {
            let record = self.step().map_err(RunError::Engine)?;
            sink.record(&record).map_err(RunError::Sink)?;
        }
        Ok(())
    }
}

/// Checks that every function named in `matrix` or `state` is registered.
pub fn check_registry(registry: &NeuronRegistry, matrix: &NetworkMatrix, state: &NetworkState) -> Result<(), String> {
    let mut names: BTreeSet<&str> = BTreeSet::new();
    for (f, _) in matrix.as_vvalue().children() {
        names.insert(f.as_str());
    }
    for (_, _, _, row) in matrix.rows() {
        for (g, _) in row.children() {
            names.insert(g.as_str());
        }
    }
    for (f, _) in state.as_vvalue().children() {
        names.insert(f.as_str());
    }
    match names.into_iter().find(|n| !registry.contains(n)) {
        Some(missing) => Err(missing.to_string()),
        None => Ok(()),
    }
}
