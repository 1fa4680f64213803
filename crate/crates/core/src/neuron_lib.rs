//! Built-in activation functions.
//!
//! Neurons are variadic: each builtin reads named arguments from the first
//! level of its input and writes named results at the first level of its
//! output. Missing arguments read as zero.

use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::network::{Activation, ActivationFn, MatrixEntry, NetworkMatrix, NeuronId, NeuronRegistry};
use crate::vvalue::{Label, Path, VError, VValue};

/// Advisory description of a builtin; the argument lists are the labels the
/// function actually reads and writes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BuiltinSpec {
    pub name: &'static str,
    pub inputs: &'static [&'static str],
    pub outputs: &'static [&'static str],
    pub doc: &'static str,
}

pub const BUILTINS: &[BuiltinSpec] = &[
    BuiltinSpec {
        name: "identity",
        inputs: &["*"],
        outputs: &["*"],
        doc: "emits its input unchanged",
    },
    BuiltinSpec {
        name: "accum",
        inputs: &["accum", "delta"],
        outputs: &["single"],
        doc: "single = accum + delta",
    },
    BuiltinSpec {
        name: "symmetric-minus",
        inputs: &["x", "y"],
        outputs: &["difference", "negative-difference"],
        doc: "difference = x - y, negative-difference = y - x",
    },
    BuiltinSpec {
        name: "gate",
        inputs: &["scalar", "signal"],
        outputs: &["single"],
        doc: "single = (number of scalar) * signal; closed when scalar is absent",
    },
    BuiltinSpec {
        name: "dmm-cons",
        inputs: &["self", "signal"],
        outputs: &["self"],
        doc: "prepends a nonzero signal to the list held on self",
    },
    BuiltinSpec {
        name: "source",
        inputs: &[],
        outputs: &["single"],
        doc: "emits the next external event",
    },
    BuiltinSpec {
        name: "sink",
        inputs: &["*"],
        outputs: &[],
        doc: "records its input as external output",
    },
    BuiltinSpec {
        name: "max-norm",
        inputs: &["signal"],
        outputs: &["single"],
        doc: "single = max |leaf| of signal",
    },
];

pub fn builtin(name: &str) -> Option<&'static BuiltinSpec> {
    BUILTINS.iter().find(|b| b.name == name)
}

fn label(s: &str) -> Label {
    Label::new(s).expect("builtin labels are valid")
}

fn arg(input: &VValue, name: &str) -> VValue {
    input.child(name).cloned().unwrap_or_default()
}

pub fn identity_fn(input: &VValue) -> Result<VValue, VError> {
    Ok(input.clone())
}

/// `{single: accum + delta}`
pub fn accum(input: &VValue) -> Result<VValue, VError> {
    let sum = arg(input, "accum").add(&arg(input, "delta"))?;
    Ok(VValue::singleton(label("single"), sum))
}

/// `{difference: x - y, negative-difference: y - x}`
pub fn symmetric_minus(input: &VValue) -> Result<VValue, VError> {
    let x = arg(input, "x");
    let y = arg(input, "y");
    VValue::from_children([
        (label("difference"), x.sub(&y)?),
        (label("negative-difference"), y.sub(&x)?),
    ])
}

/// Multiplies `signal` by the scalar held at `scalar`. An absent scalar reads
/// as zero, so the gate is closed by default.
pub fn gate(input: &VValue) -> Result<VValue, VError> {
    let c = input.child("scalar").map_or(0.0, VValue::number);
    Ok(VValue::singleton(label("single"), arg(input, "signal").scale(c)?))
}

/// List accumulation with the default predicate: any nonzero signal is
/// interesting.
pub fn dmm_cons(input: &VValue) -> Result<VValue, VError> {
    cons_with(input, |signal| !signal.is_zero())
}

fn cons_with(input: &VValue, interesting: impl Fn(&VValue) -> bool) -> Result<VValue, VError> {
    let old = arg(input, "self");
    let signal = arg(input, "signal");
    let list = if interesting(&signal) {
        VValue::from_children([(label("this"), signal), (label("rest"), old)])?
    } else {
        old
    };
    Ok(VValue::singleton(label("self"), list))
}

/// `dmm-cons` with a custom notion of an interesting signal.
pub fn dmm_cons_with<P>(interesting: P) -> ActivationFn
where
    P: Fn(&VValue) -> bool + Send + Sync + 'static,
{
    Arc::new(move |input: &VValue| cons_with(input, &interesting))
}

/// Number of cells of a `this`/`rest` list.
pub fn list_len(list: &VValue) -> usize {
    let mut n = 0;
    let mut node = list;
    let zero = VValue::zero();
    while !node.is_zero() {
        n += 1;
        node = node.child("rest").unwrap_or(&zero);
    }
    n
}

/// `{single: {number: max |leaf|}}` of `signal`.
pub fn max_norm(input: &VValue) -> Result<VValue, VError> {
    let m = input.child("signal").map_or(0.0, VValue::max_abs_leaf);
    Ok(VValue::singleton(label("single"), VValue::scalar(m)?))
}

/// Registry holding every builtin under its stable name.
pub fn builtin_registry() -> NeuronRegistry {
    let mut r = NeuronRegistry::new();
    let pure = |f: fn(&VValue) -> Result<VValue, VError>| Activation::Pure(Arc::new(f));
    r.register(label("identity"), pure(identity_fn))
        .register(label("accum"), pure(accum))
        .register(label("symmetric-minus"), pure(symmetric_minus))
        .register(label("gate"), pure(gate))
        .register(label("dmm-cons"), pure(dmm_cons))
        .register(label("max-norm"), pure(max_norm))
        .register(label("source"), Activation::Source)
        .register(label("sink"), Activation::Sink);
    r
}

/// The weight-1 element connecting output `single` of an accumulator to its
/// own `accum` input.
pub fn accumulator_loop(neuron: &NeuronId) -> MatrixEntry {
    MatrixEntry {
        target: neuron.clone(),
        input: label("accum"),
        source: neuron.clone(),
        output: label("single"),
        weight: 1.0,
    }
}

pub const CHAR_SOURCE: &str = "chars";
pub const CHAR_HISTOGRAM: &str = "histogram";

/// Two-neuron character counter: a source feeding one character per tick
/// into the `delta` input of an accumulator. The matrix does not depend on
/// the alphabet.
pub fn char_count_network() -> NetworkMatrix {
    let source = NeuronId::new(label("source"), label(CHAR_SOURCE));
    let hist = NeuronId::new(label("accum"), label(CHAR_HISTOGRAM));
    let feed = MatrixEntry {
        target: hist.clone(),
        input: label("delta"),
        source,
        output: label("single"),
        weight: 1.0,
    };
    NetworkMatrix::from_entries(&[accumulator_loop(&hist), feed]).expect("finite weights")
}

/// One event `{c: 1}` per character of `text`.
pub fn char_events(text: &str) -> Result<Vec<VValue>, VError> {
    let mut buf = [0u8; 4];
    text.chars()
        .map(|c| VValue::leaf(&Path::parse([c.encode_utf8(&mut buf) as &str])?, 1.0))
        .collect()
}
