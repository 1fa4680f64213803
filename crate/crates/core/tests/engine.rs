use std::collections::BTreeMap;

use dmm_core::network::{down_movement, MatrixEntry};
use dmm_core::neuron_lib::{accumulator_loop, builtin_registry};
use dmm_core::{
    ActivityRule, Engine, Label, NetworkMatrix, NetworkState, NeuronId, Path, SampleRng, TickRecord, VValue,
};
use proptest::prelude::*;

fn l(s: &str) -> Label {
    Label::new(s).unwrap()
}

fn id(f: &str, n: &str) -> NeuronId {
    NeuronId::parse(f, n).unwrap()
}

const FNS: &[&str] = &["identity", "accum"];
const NEURONS: &[&str] = &["n0", "n1", "n2"];
const PORTS: &[&str] = &["p", "q", "single"];

fn neuron() -> impl Strategy<Value = NeuronId> {
    (prop::sample::select(FNS), prop::sample::select(NEURONS)).prop_map(|(f, n)| id(f, n))
}

fn port() -> impl Strategy<Value = Label> {
    prop::sample::select(PORTS).prop_map(l)
}

fn matrix() -> impl Strategy<Value = NetworkMatrix> {
    prop::collection::vec((neuron(), port(), neuron(), port(), -4i32..=4), 0..50).prop_map(|raw| {
        let entries: Vec<MatrixEntry> = raw
            .into_iter()
            .map(|(target, input, source, output, w)| MatrixEntry {
                target,
                input,
                source,
                output,
                weight: w as f64,
            })
            .collect();
        NetworkMatrix::from_entries(&entries).unwrap()
    })
}

fn payload() -> impl Strategy<Value = VValue> {
    prop::collection::vec(
        (
            prop::collection::vec(prop::sample::select(&["x", "y", "z"][..]), 0..3),
            -5i32..=5,
        ),
        0..4,
    )
    .prop_map(|terms| {
        let terms: Vec<(Path, f64)> = terms
            .into_iter()
            .map(|(p, c)| (Path::parse(p).unwrap(), c as f64))
            .collect();
        VValue::from_terms(terms.iter().map(|(p, c)| (p, *c))).unwrap()
    })
}

fn state() -> impl Strategy<Value = NetworkState> {
    prop::collection::vec((neuron(), port(), payload()), 0..10).prop_map(|raw| {
        let mut by_neuron: BTreeMap<NeuronId, VValue> = BTreeMap::new();
        for (n, p, v) in raw {
            let add = VValue::singleton(p, v);
            let slot = by_neuron.entry(n).or_default();
            *slot = slot.add(&add).unwrap();
        }
        NetworkState::from_neurons(by_neuron).unwrap()
    })
}

fn down(w: &NetworkMatrix, y: &NetworkState) -> NetworkState {
    down_movement(w, y, &mut SampleRng::seed_from_u64(0)).unwrap()
}

/// x[f,nf,i] = Σ_{g,ng,o} w[f,nf,i;g,ng,o] · y[g,ng,o], computed over flat
/// term maps rather than the nested representation.
fn brute_force(w: &NetworkMatrix, y: &NetworkState) -> BTreeMap<Vec<String>, f64> {
    let flat = |v: &VValue| -> BTreeMap<Vec<String>, f64> {
        v.to_terms()
            .into_iter()
            .map(|(p, c)| (p.labels().iter().map(|l| l.as_str().to_string()).collect(), c))
            .collect()
    };
    let ys = flat(y.as_vvalue());
    let mut x: BTreeMap<Vec<String>, f64> = BTreeMap::new();
    for (wp, wc) in flat(w.as_vvalue()) {
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

proptest! {
    #[test]
    fn down_movement_is_linear(w in matrix(), y1 in state(), y2 in state(), a in -3i32..=3, b in -3i32..=3) {
        let (a, b) = (a as f64, b as f64);
        let mixed = NetworkState::linear_comb(&[(a, &y1), (b, &y2)]).unwrap();
        let lhs = down(&w, &mixed);
        let rhs = NetworkState::linear_comb(&[(a, &down(&w, &y1)), (b, &down(&w, &y2))]).unwrap();
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn down_movement_matches_triple_sum(w in matrix(), y in state()) {
        let got = down(&w, &y);
        let flat: BTreeMap<Vec<String>, f64> = got
            .as_vvalue()
            .to_terms()
            .into_iter()
            .map(|(p, c)| (p.labels().iter().map(|l| l.as_str().to_string()).collect(), c))
            .collect();
        prop_assert_eq!(flat, brute_force(&w, &y));
        prop_assert!(got.as_vvalue().is_canonical());
    }

    #[test]
    fn accumulator_sums_its_deltas(deltas in prop::collection::vec(payload(), 1..40)) {
        let hist = id("accum", "acc");
        let src = id("source", "in");
        let feed = MatrixEntry { target: hist.clone(), input: l("delta"), source: src, output: l("single"), weight: 1.0 };
        let w = NetworkMatrix::from_entries(&[accumulator_loop(&hist), feed]).unwrap();
        let mut engine = Engine::new(builtin_registry(), w, NetworkState::new(), 0).with_events(deltas.clone());
        let mut trace: Vec<TickRecord> = Vec::new();
        engine.run(deltas.len() as u64 + 1, &mut trace).unwrap();
        // One tick of latency: the source emits event k at tick k+1, the
        // accumulator absorbs it at tick k+2.
        for rec in &trace[1..] {
            let absorbed = (rec.tick as usize).saturating_sub(1);
            let want = VValue::linear_comb(deltas[..absorbed].iter().map(|d| (1.0, d))).unwrap();
            let got = rec.outputs.value(&hist).child("single").cloned().unwrap_or_default();
            prop_assert_eq!(got, want);
        }
    }

    #[test]
    fn identity_chain_delays_by_its_length(k in 1usize..6, events in prop::collection::vec(payload(), 1..12)) {
        let src = id("source", "in");
        let mut entries = Vec::new();
        let mut prev = src.clone();
        for i in 0..k {
            let next = id("identity", &format!("s{i}"));
            entries.push(MatrixEntry { target: next.clone(), input: l("single"), source: prev, output: l("single"), weight: 1.0 });
            prev = next;
        }
        let w = NetworkMatrix::from_entries(&entries).unwrap();
        let mut engine = Engine::new(builtin_registry(), w, NetworkState::new(), 0).with_events(events.clone());
        let mut trace: Vec<TickRecord> = Vec::new();
        engine.run((events.len() + k + 2) as u64, &mut trace).unwrap();
        for rec in &trace[1..] {
            let t = rec.tick as usize;
            let want = if t > k { events.get(t - 1 - k).cloned().unwrap_or_default() } else { VValue::zero() };
            let got = rec.outputs.value(&prev).child("single").cloned().unwrap_or_default();
            prop_assert_eq!(got, want, "tick {}", t);
        }
    }

    #[test]
    fn runs_are_deterministic(w in matrix(), y in state(), seed in any::<u64>()) {
        let run = || {
            let mut e = Engine::new(builtin_registry(), w.clone(), y.clone(), seed);
            let mut trace: Vec<TickRecord> = Vec::new();
            e.run(5, &mut trace).unwrap();
            trace
        };
        prop_assert_eq!(run(), run());
    }
}

#[test]
fn gate_follows_its_scalar() {
    let gate = id("gate", "g");
    let signal = id("identity", "sig");
    let switch = id("source", "switch");
    let entries = [
        MatrixEntry {
            target: signal.clone(),
            input: l("single"),
            source: signal.clone(),
            output: l("single"),
            weight: 1.0,
        },
        MatrixEntry {
            target: gate.clone(),
            input: l("signal"),
            source: signal.clone(),
            output: l("single"),
            weight: 1.0,
        },
        MatrixEntry {
            target: gate.clone(),
            input: l("scalar"),
            source: switch,
            output: l("single"),
            weight: 1.0,
        },
    ];
    let w = NetworkMatrix::from_entries(&entries).unwrap();
    let x = VValue::leaf(&Path::parse(["x"]).unwrap(), 3.0).unwrap();
    let init = NetworkState::from_neurons([(signal, VValue::singleton(l("single"), x.clone()))]).unwrap();
    let switches: Vec<VValue> = [1.0, 0.0, 2.0, -1.0]
        .iter()
        .map(|c| VValue::scalar(*c).unwrap())
        .collect();
    let mut engine = Engine::new(builtin_registry(), w, init, 0).with_events(switches);
    let mut trace: Vec<TickRecord> = Vec::new();
    engine.run(6, &mut trace).unwrap();
    let gated: Vec<f64> = trace[1..]
        .iter()
        .map(|r| {
            r.outputs
                .value(&gate)
                .child("single")
                .map_or(0.0, |v| v.number_at(&Path::parse(["x"]).unwrap()))
        })
        .collect();
    assert_eq!(gated, vec![0.0, 3.0, 0.0, 6.0, -3.0, 0.0]);
}

#[test]
fn input_driven_sources_stay_silent() {
    let src = id("source", "in");
    let w = NetworkMatrix::from_entries(&[MatrixEntry {
        target: id("identity", "out"),
        input: l("x"),
        source: src.clone(),
        output: l("single"),
        weight: 1.0,
    }])
    .unwrap();
    let events = vec![VValue::scalar(1.0).unwrap()];
    let run = |rule| {
        let mut e = Engine::new(builtin_registry(), w.clone(), NetworkState::new(), 0)
            .with_activity_rule(rule)
            .with_events(events.clone());
        e.step().unwrap().outputs
    };
    assert!(run(ActivityRule::InputDriven).is_empty());
    assert_eq!(
        run(ActivityRule::InputOrOutput).value(&src),
        VValue::singleton(l("single"), events[0].clone())
    );
}
