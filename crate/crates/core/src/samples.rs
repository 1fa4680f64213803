//! Signed samples and stochastic linear combination.
//!
//! A stream of signed samples `<x, s>` represents a stream of finite signed
//! measures over a discrete space of string tokens. A linear combination
//! `Σ αi·μi` is realized by picking term `i` with probability
//! `|αi| / Σ|αj|` and flipping its sign when `αi < 0`.
//!
//! The zero measure is represented by the absence of a sample.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::vvalue::{Children, Label, VError, VValue};

/// Name of the generator behind [`SampleRng`], recorded in traces.
pub const RNG_ALGORITHM: &str = "chacha8";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn as_i8(self) -> i8 {
        match self {
            Sign::Plus => 1,
            Sign::Minus => -1,
        }
    }

    pub fn flip(self) -> Sign {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }
}

/// One draw `<element, sign>` from a finite signed measure.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct SampleLeaf {
    element: String,
    sign: Sign,
}

impl SampleLeaf {
    pub fn new(element: impl Into<String>, sign: Sign) -> Result<Self, VError> {
        let element = element.into();
        if element.is_empty() {
            return Err(VError::InvalidSample("empty element".into()));
        }
        Ok(SampleLeaf { element, sign })
    }

    pub fn element(&self) -> &str {
        &self.element
    }

    pub fn sign(&self) -> Sign {
        self.sign
    }
}

impl fmt::Debug for SampleLeaf {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "<{:?}, {}>", self.element, self.sign.as_i8())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WeightedSample {
    pub coefficient: f64,
    pub sample: SampleLeaf,
}

impl WeightedSample {
    pub fn new(coefficient: f64, sample: SampleLeaf) -> Self {
        WeightedSample { coefficient, sample }
    }
}

/// Seeded generator used for every stochastic choice an engine makes.
#[derive(Clone, Debug)]
pub struct SampleRng(ChaCha8Rng);

impl SampleRng {
    pub fn seed_from_u64(seed: u64) -> Self {
        SampleRng(ChaCha8Rng::seed_from_u64(seed))
    }
}

impl RngCore for SampleRng {
    fn next_u32(&mut self) -> u32 {
        self.0.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.0.fill_bytes(dst)
    }
}

/// Picks term `i` with probability `|αi| / Σ|αj|` and returns its sample with
/// the sign multiplied by `sign(αi)`.
///
/// Returns `Ok(None)` (the zero measure) when every coefficient is zero. A
/// single nonzero term is returned without consuming randomness.
pub fn stochastic_linear_comb<R: Rng + ?Sized>(
    inputs: &[WeightedSample],
    rng: &mut R,
) -> Result<Option<SampleLeaf>, VError> {
    let mut total = 0.0;
    let mut live = 0usize;
    let mut last = None;
    for (i, w) in inputs.iter().enumerate() {
        if !w.coefficient.is_finite() {
            return Err(VError::InvalidScalar(w.coefficient));
        }
        if w.coefficient != 0.0 {
            total += w.coefficient.abs();
            live += 1;
            last = Some(i);
        }
    }
    let Some(last) = last else {
        return Ok(None);
    };
    let picked = if live == 1 {
        last
    } else {
        let target = rng.random::<f64>() * total;
        let mut cumulative = 0.0;
        inputs
            .iter()
            .position(|w| {
                cumulative += w.coefficient.abs();
                w.coefficient != 0.0 && target < cumulative
            })
            // rounding can leave target just above the final partial sum
            .unwrap_or(last)
    };
    let w = &inputs[picked];
    let sign = if w.coefficient < 0.0 {
        w.sample.sign.flip()
    } else {
        w.sample.sign
    };
    Ok(Some(SampleLeaf {
        element: w.sample.element.clone(),
        sign,
    }))
}

/// `Σ ci·vi` over values that may carry sample leaves.
///
/// Numeric leaves are summed as in [`VValue::linear_comb`]; at every path
/// where sample leaves meet, [`stochastic_linear_comb`] picks one. A path that
/// receives both a nonzero number and a sample is an error.
pub fn mixed_linear_comb<R: Rng + ?Sized>(pairs: &[(f64, &VValue)], rng: &mut R) -> Result<VValue, VError> {
    if !pairs.iter().any(|(_, v)| v.contains_sample()) {
        return VValue::linear_comb(pairs.iter().map(|(c, v)| (*c, *v)));
    }
    let mut path = Vec::new();
    combine_node(pairs, rng, &mut path)
}

fn combine_node<R: Rng + ?Sized>(
    pairs: &[(f64, &VValue)],
    rng: &mut R,
    path: &mut Vec<Label>,
) -> Result<VValue, VError> {
    let mut number = 0.0;
    let mut has_number = false;
    let mut weighted = Vec::new();
    for &(c, v) in pairs {
        if !c.is_finite() {
            return Err(VError::InvalidScalar(c));
        }
        if c == 0.0 {
            continue;
        }
        if v.number() != 0.0 {
            has_number = true;
            number += c * v.number();
        }
        if let Some(s) = v.sample() {
            weighted.push(WeightedSample::new(c, s.clone()));
        }
    }
    if has_number && !weighted.is_empty() {
        let shown: Vec<&str> = path.iter().map(Label::as_str).collect();
        return Err(VError::MixedLeaf(alloc::format!("[{}]", shown.join(" "))));
    }
    if !number.is_finite() {
        return Err(VError::InvalidScalar(number));
    }
    let sample = stochastic_linear_comb(&weighted, rng)?;

    let mut labels: Vec<&Label> = Vec::new();
    let mut seen = Children::default();
    for (_, v) in pairs {
        for (label, _) in v.children() {
            if !seen.contains_key(label) {
                seen.insert(label.clone(), VValue::zero());
                labels.push(label);
            }
        }
    }
    let mut children = Children::default();
    for label in labels {
        let sub: Vec<(f64, &VValue)> = pairs
            .iter()
            .filter_map(|(c, v)| v.child(label.as_str()).map(|child| (*c, child)))
            .collect();
        path.push(label.clone());
        let child = combine_node(&sub, rng, path)?;
        path.pop();
        if !child.is_zero() {
            children.insert(label.clone(), child);
        }
    }
    Ok(VValue::from_parts(
        if number == 0.0 { 0.0 } else { number },
        sample,
        children,
    ))
}

/// Estimates the signed measure behind a list of draws as
/// `(count+ - count-) / N` per element.
pub fn empirical_measure(draws: &[SampleLeaf]) -> BTreeMap<String, f64> {
    let mut counts: BTreeMap<String, i64> = BTreeMap::new();
    for d in draws {
        *counts.entry(d.element.to_string()).or_insert(0) += i64::from(d.sign.as_i8());
    }
    let n = draws.len().max(1) as f64;
    counts.into_iter().map(|(k, c)| (k, c as f64 / n)).collect()
}
