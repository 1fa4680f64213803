//! Generators and reference implementations shared by the integration tests.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use dmm_core::compiler::{GraphEdge, GraphNode, TransformerGraph};
use dmm_core::network::MatrixEntry;
use dmm_core::neuron_lib::builtin;
use dmm_core::vvalue::canonicalize;
use dmm_core::{Label, NetworkMatrix, NetworkState, NeuronId, Path, RawValue, SampleLeaf, Sign, VValue};
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};

pub fn l(s: &str) -> Label {
    Label::new(s).unwrap()
}

pub fn id(f: &str, n: &str) -> NeuronId {
    NeuronId::parse(f, n).unwrap()
}

/// A runner that executes exactly `cases` cases from a fixed seed.
pub fn runner(cases: u32, seed: u8) -> TestRunner {
    let config = Config {
        cases,
        failure_persistence: None,
        max_shrink_iters: 64,
        ..Config::default()
    };
    TestRunner::new_with_rng(config, TestRng::from_seed(RngAlgorithm::ChaCha, &[seed; 32]))
}

const PLAIN: &[&str] = &["a", "b", "c", "foo", "bar", "baz"];
const AWKWARD: &[&str] = &[
    "a b",
    "1x",
    ":",
    "-neg",
    "ü",
    "\"q\"",
    "x.y",
    "number_",
    "{",
    "}",
    "(",
    "⤳",
    "~>",
    "+",
    "0",
    "-1.5",
    "tab\there",
    "nl\nx",
    "\\",
    "#",
    ";",
    ",",
];

pub fn label() -> impl Strategy<Value = String> {
    prop_oneof![
        4 => prop::sample::select(PLAIN).prop_map(String::from),
        1 => prop::sample::select(AWKWARD).prop_map(String::from),
    ]
}

pub fn int_coeff() -> impl Strategy<Value = f64> {
    (-9i32..=9).prop_map(f64::from)
}

pub fn float_coeff() -> impl Strategy<Value = f64> {
    prop_oneof![
        3 => -1e3f64..1e3,
        1 => -1e-6f64..1e-6,
        1 => (1.0f64..2.0, -100i32..100, any::<bool>()).prop_map(|(m, e, neg)| if neg { -m } else { m } * 2f64.powi(e)),
    ]
}

/// Sparse values built from a list of (path, coefficient) terms.
pub fn terms_value(coeff: BoxedStrategy<f64>, max_terms: usize) -> impl Strategy<Value = VValue> {
    let path = prop::collection::vec(prop::sample::select(PLAIN), 0..4);
    prop::collection::vec((path, coeff), 0..max_terms).prop_map(|terms| {
        let terms: Vec<(Path, f64)> = terms.into_iter().map(|(p, c)| (Path::parse(p).unwrap(), c)).collect();
        VValue::from_terms(terms.iter().map(|(p, c)| (p, *c))).unwrap()
    })
}

pub fn int_value() -> impl Strategy<Value = VValue> {
    terms_value(int_coeff().boxed(), 12)
}

pub fn float_value() -> impl Strategy<Value = VValue> {
    terms_value(float_coeff().boxed(), 12)
}

fn raw_sample() -> impl Strategy<Value = RawValue> {
    (prop::sample::select(&["a", "b c", "\"", "ü"][..]), any::<bool>()).prop_map(|(e, neg)| {
        let sign = if neg { Sign::Minus } else { Sign::Plus };
        RawValue::Map(vec![("sample".into(), SampleLeaf::new(e, sign).unwrap().to_raw())])
    })
}

/// Deep values with awkward labels, zero-valued scalars at interior nodes,
/// and occasional sample leaves; always canonicalized.
pub fn deep_value() -> impl Strategy<Value = VValue> {
    let leaf = prop_oneof![
        6 => float_coeff().prop_map(RawValue::Number),
        1 => raw_sample(),
    ];
    let tree = leaf.prop_recursive(6, 64, 5, |inner| {
        (
            prop::option::of(float_coeff()),
            prop::collection::btree_map(label(), inner, 0..5),
        )
            .prop_map(|(number, children)| {
                let mut entries = Vec::new();
                if let Some(c) = number {
                    entries.push(("number".to_string(), RawValue::Number(c)));
                }
                entries.extend(children);
                RawValue::Map(entries)
            })
    });
    tree.prop_map(|raw| canonicalize(&raw).unwrap())
}

const FNS: &[&str] = &["identity", "accum", "gate"];
const NEURONS: &[&str] = &["n0", "n1", "n2", "n3"];
const PORTS: &[&str] = &["single", "delta", "accum", "p"];

pub fn neuron() -> impl Strategy<Value = NeuronId> {
    (prop::sample::select(FNS), prop::sample::select(NEURONS)).prop_map(|(f, n)| id(f, n))
}

pub fn port() -> impl Strategy<Value = Label> {
    prop::sample::select(PORTS).prop_map(l)
}

/// Random sparse rank-6 matrices with at most 50 nonzero elements.
pub fn matrix(coeff: BoxedStrategy<f64>) -> impl Strategy<Value = NetworkMatrix> {
    prop::collection::vec((neuron(), port(), neuron(), port(), coeff), 0..=50).prop_map(|raw| {
        let entries: Vec<MatrixEntry> = raw
            .into_iter()
            .map(|(target, input, source, output, weight)| MatrixEntry {
                target,
                input,
                source,
                output,
                weight,
            })
            .collect();
        NetworkMatrix::from_entries(&entries).unwrap()
    })
}

pub fn state(coeff: BoxedStrategy<f64>) -> impl Strategy<Value = NetworkState> {
    prop::collection::vec((neuron(), port(), terms_value(coeff, 4)), 0..12).prop_map(|raw| {
        let mut by_neuron: BTreeMap<NeuronId, VValue> = BTreeMap::new();
        for (n, p, v) in raw {
            let slot = by_neuron.entry(n).or_default();
            *slot = slot.add(&VValue::singleton(p, v)).unwrap();
        }
        NetworkState::from_neurons(by_neuron).unwrap()
    })
}

pub type Flat = BTreeMap<Vec<String>, f64>;

pub fn flatten(v: &VValue) -> Flat {
    v.to_terms()
        .into_iter()
        .map(|(p, c)| (p.labels().iter().map(|l| l.as_str().to_string()).collect(), c))
        .collect()
}

/// x[f,nf,i] = Σ_{g,ng,o} w[f,nf,i;g,ng,o] · y[g,ng,o], by enumerating every
/// matrix element against every output term.
pub fn down_movement_oracle(w: &NetworkMatrix, y: &NetworkState) -> Flat {
    let ys = flatten(y.as_vvalue());
    let mut x = Flat::new();
    for (wp, wc) in flatten(w.as_vvalue()) {
        let (target, source) = wp.split_at(3);
        for (yp, yc) in &ys {
            if yp.len() >= 3 && yp[..3] == *source {
                let mut key = target.to_vec();
                key.extend_from_slice(&yp[3..]);
                *x.entry(key).or_insert(0.0) += wc * yc;
            }
        }
    }
    x.retain(|_, c| *c != 0.0);
    x
}

pub fn flat_close(a: &Flat, b: &Flat, tol: f64) -> bool {
    let keys: BTreeSet<&Vec<String>> = a.keys().chain(b.keys()).collect();
    keys.into_iter().all(|k| {
        let (x, y) = (a.get(k).copied().unwrap_or(0.0), b.get(k).copied().unwrap_or(0.0));
        (x - y).abs() <= tol * x.abs().max(y.abs()).max(1.0)
    })
}

/// Node functions used by the graph fuzzer, with the ports they read and
/// write. `dmm-cons` nodes only feed their own `self` input and `gate`
/// scalars only come from sources, which keeps values bounded over 50 ticks.
const GRAPH_FNS: &[&str] = &[
    "source",
    "identity",
    "accum",
    "symmetric-minus",
    "gate",
    "max-norm",
    "dmm-cons",
];

fn inputs_of(f: &str) -> Vec<&'static str> {
    match f {
        "identity" => vec!["x", "y"],
        other => builtin(other).unwrap().inputs.to_vec(),
    }
}

fn outputs_of(f: &str) -> Vec<&'static str> {
    match f {
        "identity" => vec!["x", "y"],
        other => builtin(other).unwrap().outputs.to_vec(),
    }
}

/// Transformer graphs with up to 8 nodes, cycles allowed, no fan-in, and an
/// outgoing edge on every source.
pub fn transformer_graph() -> impl Strategy<Value = TransformerGraph> {
    let fns = prop::collection::vec(prop::sample::select(GRAPH_FNS), 1..=8);
    fns.prop_flat_map(|fns| {
        let n = fns.len();
        let picks = prop::collection::vec((0..n, 0usize..4, 0..n, 0usize..4), 0..=2 * n);
        (Just(fns), picks)
    })
    .prop_map(|(fns, picks)| build_graph(&fns, &picks))
}

fn build_graph(fns: &[&str], picks: &[(usize, usize, usize, usize)]) -> TransformerGraph {
    let name = |i: usize| format!("n{i}");
    let nodes: Vec<GraphNode> = fns
        .iter()
        .enumerate()
        .map(|(i, f)| GraphNode {
            name: l(&name(i)),
            function: l(f),
        })
        .collect();
    let mut wired: BTreeSet<(usize, &str)> = BTreeSet::new();
    let mut edges: Vec<GraphEdge> = Vec::new();
    let mut push = |edges: &mut Vec<GraphEdge>, from: usize, out: &str, to: usize, input: &'static str| -> bool {
        let ok = allowed(fns, from, out, to, input) && wired.insert((to, input));
        if ok {
            edges.push(GraphEdge {
                from: (l(&name(from)), l(out)),
                to: (l(&name(to)), l(input)),
            });
        }
        ok
    };
    for &(from, o, to, i) in picks {
        let outs = outputs_of(fns[from]);
        let ins = inputs_of(fns[to]);
        if outs.is_empty() || ins.is_empty() {
            continue;
        }
        push(&mut edges, from, outs[o % outs.len()], to, ins[i % ins.len()]);
    }
    for (s, f) in fns.iter().enumerate() {
        if *f != "source" || edges.iter().any(|e| e.from.0.as_str() == name(s)) {
            continue;
        }
        'search: for (to, g) in fns.iter().enumerate() {
            for input in inputs_of(g) {
                if push(&mut edges, s, "single", to, input) {
                    break 'search;
                }
            }
        }
    }
    let mut nodes = nodes;
    // A source with nowhere to send its events would not fire in the
    // compiled network; demote it.
    for (s, node) in nodes.iter_mut().enumerate() {
        if fns[s] == "source" && !edges.iter().any(|e| e.from.0.as_str() == name(s)) {
            node.function = l("identity");
        }
    }
    TransformerGraph { nodes, edges }
}

fn allowed(fns: &[&str], from: usize, out: &str, to: usize, input: &str) -> bool {
    let (f, g) = (fns[from], fns[to]);
    if f == "dmm-cons" || g == "dmm-cons" && input == "self" {
        return f == "dmm-cons" && g == "dmm-cons" && from == to && out == "self" && input == "self";
    }
    if g == "gate" && input == "scalar" {
        return f == "source";
    }
    true
}

/// Integer events over a small alphabet of keys; some are zero.
pub fn int_events(max: usize) -> impl Strategy<Value = Vec<VValue>> {
    let key = prop::sample::select(&["u", "v", "w"][..]);
    let scalar = prop::option::of(-3i32..=3);
    prop::collection::vec((scalar, prop::collection::vec((key, -3i32..=3), 0..3)), 0..max).prop_map(|evs| {
        evs.into_iter()
            .map(|(s, terms)| {
                let mut t: Vec<(Path, f64)> = terms
                    .into_iter()
                    .map(|(k, c)| (Path::parse([k]).unwrap(), f64::from(c)))
                    .collect();
                if let Some(s) = s {
                    t.push((Path::empty(), f64::from(s)));
                }
                VValue::from_terms(t.iter().map(|(p, c)| (p, *c))).unwrap()
            })
            .collect()
    })
}
