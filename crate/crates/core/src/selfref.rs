//! Self-modification through a designated accumulator neuron `Self`.
//!
//! `Self` emits a stream of matrix-shaped values. At the start of every tick
//! the engine installs Self's latest output as the network matrix. Other
//! neurons change the network by sending additive updates to Self's `delta`
//! input, and can observe the current matrix by reading Self's output.

use crate::network::{MatrixEntry, NetworkMatrix, NetworkState, NeuronId, ShapeError};
use crate::vvalue::{Label, VError, VValue};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SelfConfig {
    pub neuron: NeuronId,
    /// Output of Self that carries the matrix.
    pub output: Label,
    /// Input that the weight-1 loop feeds Self's own output back into.
    pub loop_input: Label,
    pub enabled: bool,
}

impl Default for SelfConfig {
    fn default() -> Self {
        SelfConfig {
            neuron: NeuronId::parse("accum", "self").expect("valid labels"),
            output: Label::new("single").expect("valid label"),
            loop_input: Label::new("accum").expect("valid label"),
            enabled: true,
        }
    }
}

impl SelfConfig {
    /// The element `w[Self, loop_input; Self, output]`.
    pub fn loop_entry(&self) -> MatrixEntry {
        MatrixEntry {
            target: self.neuron.clone(),
            input: self.loop_input.clone(),
            source: self.neuron.clone(),
            output: self.output.clone(),
            weight: 1.0,
        }
    }
}

/// Reads the matrix Self currently emits. An absent output is the empty
/// matrix.
pub fn extract_matrix(outputs: &NetworkState, cfg: &SelfConfig) -> Result<NetworkMatrix, ShapeError> {
    let emitted = outputs
        .get(&cfg.neuron)
        .and_then(|y| y.child(cfg.output.as_str()))
        .cloned()
        .unwrap_or_default();
    NetworkMatrix::new(emitted).map_err(|e| ShapeError {
        path: alloc::format!("{}.{}{}", cfg.neuron, cfg.output, e.path.trim_start_matches('$')),
        reason: e.reason,
    })
}

/// Prepares a network whose connectivity lives in Self.
///
/// Sets the weight-1 loop on Self in `w0` and returns `initial` extended with
/// Self emitting that matrix, together with the matrix itself.
pub fn bootstrap_self(
    w0: &NetworkMatrix,
    initial: &NetworkState,
    cfg: &SelfConfig,
) -> Result<(NetworkState, NetworkMatrix), VError> {
    let matrix = w0.with_weight(&cfg.loop_entry(), 1.0)?;
    let emitted = VValue::singleton(cfg.output.clone(), matrix.as_vvalue().clone());
    let mut neurons: alloc::vec::Vec<(NeuronId, VValue)> = initial
        .neurons()
        .filter(|(id, _)| *id != cfg.neuron)
        .map(|(id, v)| (id, v.clone()))
        .collect();
    neurons.push((cfg.neuron.clone(), emitted));
    let state = NetworkState::from_neurons(neurons).map_err(|e| VError::Malformed {
        path: e.path,
        reason: e.reason,
    })?;
    Ok((state, matrix))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{Engine, EngineErrorKind};
    use crate::neuron_lib::builtin_registry;
    use crate::vvalue::Path;

    #[test]
    fn bootstrap_without_updates_is_a_fixed_point() {
        let cfg = SelfConfig::default();
        let (state, w) = bootstrap_self(&NetworkMatrix::empty(), &NetworkState::new(), &cfg).unwrap();
        assert_eq!(w.leaf_count(), 1);
        let mut engine =
            Engine::new(builtin_registry(), NetworkMatrix::empty(), state, 0).with_self_reference(cfg.clone());
        for _ in 0..10 {
            let rec = engine.step().unwrap();
            assert_eq!(rec.matrix.as_ref(), Some(&w));
            assert_eq!(extract_matrix(&rec.outputs, &cfg).unwrap(), w);
        }
    }

    #[test]
    fn bad_self_output_is_a_shape_error() {
        let cfg = SelfConfig::default();
        let bogus = VValue::leaf(&Path::parse(["single", "a", "b"]).unwrap(), 1.0).unwrap();
        let state = NetworkState::from_neurons([(cfg.neuron.clone(), bogus)]).unwrap();
        assert!(extract_matrix(&state, &cfg).is_err());
        let mut engine = Engine::new(builtin_registry(), NetworkMatrix::empty(), state, 0).with_self_reference(cfg);
        let err = engine.step().unwrap_err();
        assert!(matches!(err.kind, EngineErrorKind::SelfShape(_)));
        assert_eq!(err.tick, 1);
    }

    #[test]
    fn missing_self_loop_forgets_the_matrix() {
        let cfg = SelfConfig::default();
        let (_, w) = bootstrap_self(&NetworkMatrix::empty(), &NetworkState::new(), &cfg).unwrap();
        // a matrix with some other wiring but no loop on Self
        let other = NetworkMatrix::new(
            VValue::leaf(&Path::parse(["identity", "a", "x", "identity", "b", "y"]).unwrap(), 2.0).unwrap(),
        )
        .unwrap();
        let emitted = VValue::singleton(cfg.output.clone(), other.as_vvalue().clone());
        let state = NetworkState::from_neurons([(cfg.neuron.clone(), emitted)]).unwrap();
        let mut engine =
            Engine::new(builtin_registry(), NetworkMatrix::empty(), state, 0).with_self_reference(cfg.clone());
        let first = engine.step().unwrap();
        assert_eq!(first.matrix, Some(other));
        assert!(extract_matrix(&first.outputs, &cfg).unwrap().is_empty());
        let second = engine.step().unwrap();
        assert_eq!(second.matrix, Some(NetworkMatrix::empty()));
        assert_ne!(w, NetworkMatrix::empty());
    }
}
