//! Sparse recursive maps: the vector space `V = R + (L -> V)`.
//!
//! A [`VValue`] is a finitary map from labels to V-values, together with an
//! optional scalar component stored under the reserved key `number` and an
//! optional signed-sample component stored under the reserved key `sample`.
//! The empty map is the zero vector.
//!
//! Every value handed out by this module is canonical: no zero scalar leaves,
//! no children equal to zero, no empty submaps. Children keep the order in
//! which they were first inserted, which is what the textual views print;
//! equality ignores that order.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::borrow::Borrow;
use core::fmt;

use indexmap::IndexMap;
use rustc_hash::FxBuildHasher;
use thiserror::Error;

use crate::samples::{SampleLeaf, Sign};

/// Key under which the scalar component of a node is stored.
pub const NUMBER_KEY: &str = "number";
/// Key under which the signed-sample component of a node is stored.
pub const SAMPLE_KEY: &str = "sample";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum VError {
    #[error("non-finite scalar {0}")]
    InvalidScalar(f64),
    #[error("`{0}` is a reserved key and cannot be used as a label")]
    ReservedLabel(String),
    #[error("empty label")]
    EmptyLabel,
    #[error("sample leaves cannot be combined deterministically")]
    UnsupportedLeaf,
    #[error("invalid sample leaf: {0}")]
    InvalidSample(String),
    #[error("path {0} receives both numeric and sample contributions")]
    MixedLeaf(String),
    #[error("malformed value at {path}: {reason}")]
    Malformed { path: String, reason: String },
}

/// A user label. The reserved keys `number` and `sample` are not labels.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Label(String);

impl Label {
    pub fn new(name: impl Into<String>) -> Result<Self, VError> {
        let name = name.into();
        if name.is_empty() {
            return Err(VError::EmptyLabel);
        }
        if is_reserved(&name) {
            return Err(VError::ReservedLabel(name));
        }
        Ok(Label(name))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl Borrow<str> for Label {
    fn borrow(&self) -> &str {
        &self.0
    }
}

impl fmt::Debug for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, ":{}", self.0)
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl TryFrom<&str> for Label {
    type Error = VError;
    fn try_from(s: &str) -> Result<Self, VError> {
        Label::new(s)
    }
}

pub fn is_reserved(key: &str) -> bool {
    key == NUMBER_KEY || key == SAMPLE_KEY
}

/// A finite sequence of labels addressing a node of a prefix tree.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Path(Vec<Label>);

impl Path {
    pub fn empty() -> Self {
        Path(Vec::new())
    }

    pub fn parse<I, S>(labels: I) -> Result<Self, VError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        labels
            .into_iter()
            .map(|s| Label::new(s.as_ref()))
            .collect::<Result<Vec<_>, _>>()
            .map(Path)
    }

    pub fn labels(&self) -> &[Label] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn push(&mut self, label: Label) {
        self.0.push(label);
    }

    pub fn pop(&mut self) -> Option<Label> {
        self.0.pop()
    }
}

impl From<Vec<Label>> for Path {
    fn from(labels: Vec<Label>) -> Self {
        Path(labels)
    }
}

impl fmt::Display for Path {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, l) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(".")?;
            }
            f.write_str(l.as_str())?;
        }
        Ok(())
    }
}

pub(crate) type Children = IndexMap<Label, VValue, FxBuildHasher>;

/// Immutable sparse recursive map with numeric (and optionally sample) leaves.
#[derive(Clone, Default, PartialEq)]
pub struct VValue {
    number: f64,
    sample: Option<SampleLeaf>,
    children: Children,
}

/// Loosely structured input accepted by [`canonicalize`]: bare numbers are
/// admitted wherever a value is expected and zero entries may be present.
#[derive(Clone, Debug, PartialEq)]
pub enum RawValue {
    Number(f64),
    Text(String),
    Map(Vec<(String, RawValue)>),
}

fn check_finite(c: f64) -> Result<f64, VError> {
    if c.is_finite() {
        // normalizes -0.0 as well
        Ok(if c == 0.0 { 0.0 } else { c })
    } else {
        Err(VError::InvalidScalar(c))
    }
}

impl VValue {
    pub fn zero() -> Self {
        VValue::default()
    }

    /// `{number: c}`, or zero when `c == 0`.
    pub fn scalar(c: f64) -> Result<Self, VError> {
        Ok(VValue {
            number: check_finite(c)?,
            ..VValue::default()
        })
    }

    /// `{sample: leaf}`.
    pub fn sample_leaf(leaf: SampleLeaf) -> Self {
        VValue {
            sample: Some(leaf),
            ..VValue::default()
        }
    }

    /// `{label: value}`, or zero when `value` is zero.
    pub fn singleton(label: Label, value: VValue) -> Self {
        let mut v = VValue::zero();
        if !value.is_zero() {
            v.children.insert(label, value);
        }
        v
    }

    /// Builds a value from `(label, child)` pairs; repeated labels are summed.
    pub fn from_children<I>(entries: I) -> Result<Self, VError>
    where
        I: IntoIterator<Item = (Label, VValue)>,
    {
        let mut acc = VValue::zero();
        for (label, child) in entries {
            match acc.children.get_mut(&label) {
                Some(slot) => slot.accumulate(1.0, &child)?,
                None => {
                    acc.children.insert(label, child);
                }
            }
        }
        acc.finish()
    }

    /// `α·(l1 … ln)` for a single path.
    pub fn leaf(path: &Path, c: f64) -> Result<Self, VError> {
        let mut v = VValue::scalar(c)?;
        for label in path.labels().iter().rev() {
            v = VValue::singleton(label.clone(), v);
        }
        Ok(v)
    }

    /// The canonical value equal to `Σ αi·pathi`.
    pub fn from_terms<'a, I>(terms: I) -> Result<Self, VError>
    where
        I: IntoIterator<Item = (&'a Path, f64)>,
    {
        let mut acc = VValue::zero();
        for (path, c) in terms {
            let c = check_finite(c)?;
            let mut node = &mut acc;
            for label in path.labels() {
                node = node.children.entry(label.clone()).or_default();
            }
            node.number += c;
        }
        acc.finish()
    }

    pub fn to_terms(&self) -> Vec<(Path, f64)> {
        let mut out = Vec::new();
        let mut path = Path::empty();
        self.collect_terms(&mut path, &mut out);
        out
    }

    fn collect_terms(&self, path: &mut Path, out: &mut Vec<(Path, f64)>) {
        if self.number != 0.0 {
            out.push((path.clone(), self.number));
        }
        for (label, child) in &self.children {
            path.push(label.clone());
            child.collect_terms(path, out);
            path.pop();
        }
    }

    pub fn is_zero(&self) -> bool {
        self.number == 0.0 && self.sample.is_none() && self.children.is_empty()
    }

    /// True iff there is no top-level scalar or sample, i.e. the value is in `U = L -> V`.
    pub fn is_u(&self) -> bool {
        self.number == 0.0 && self.sample.is_none()
    }

    pub fn number(&self) -> f64 {
        self.number
    }

    pub fn sample(&self) -> Option<&SampleLeaf> {
        self.sample.as_ref()
    }

    pub fn children(&self) -> impl ExactSizeIterator<Item = (&Label, &VValue)> {
        self.children.iter()
    }

    pub fn child_count(&self) -> usize {
        self.children.len()
    }

    pub fn child(&self, label: &str) -> Option<&VValue> {
        self.children.get(label)
    }

    /// `v^l`, or zero when absent.
    pub fn get_subtree(&self, label: &str) -> Result<VValue, VError> {
        if is_reserved(label) {
            return Err(VError::ReservedLabel(label.to_string()));
        }
        Ok(self.child(label).cloned().unwrap_or_default())
    }

    pub fn at_path(&self, path: &Path) -> Option<&VValue> {
        let mut node = self;
        for label in path.labels() {
            node = node.children.get(label)?;
        }
        Some(node)
    }

    /// Iterated [`get_subtree`](Self::get_subtree); zero when any step is absent.
    pub fn get_path(&self, path: &Path) -> VValue {
        self.at_path(path).cloned().unwrap_or_default()
    }

    /// Scalar component of the node at `path`, 0 when absent.
    pub fn number_at(&self, path: &Path) -> f64 {
        self.at_path(path).map_or(0.0, |v| v.number)
    }

    pub fn contains_sample(&self) -> bool {
        self.sample.is_some() || self.children.values().any(VValue::contains_sample)
    }

    pub fn add(&self, other: &VValue) -> Result<VValue, VError> {
        VValue::linear_comb([(1.0, self), (1.0, other)])
    }

    pub fn sub(&self, other: &VValue) -> Result<VValue, VError> {
        VValue::linear_comb([(1.0, self), (-1.0, other)])
    }

    pub fn scale(&self, c: f64) -> Result<VValue, VError> {
        VValue::linear_comb([(c, self)])
    }

    /// `Σ ci·vi` over numeric values.
    pub fn linear_comb<'a, I>(pairs: I) -> Result<VValue, VError>
    where
        I: IntoIterator<Item = (f64, &'a VValue)>,
    {
        let mut acc = VValue::zero();
        for (c, v) in pairs {
            let c = check_finite(c)?;
            if v.contains_sample() {
                return Err(VError::UnsupportedLeaf);
            }
            if c != 0.0 {
                acc.accumulate(c, v)?;
            }
        }
        acc.finish()
    }

    /// Adds `c·v` into `self` without pruning; call [`finish`](Self::finish) afterwards.
    pub(crate) fn accumulate(&mut self, c: f64, v: &VValue) -> Result<(), VError> {
        if v.sample.is_some() || self.sample.is_some() {
            return Err(VError::UnsupportedLeaf);
        }
        self.number += c * v.number;
        for (label, child) in &v.children {
            self.children.entry(label.clone()).or_default().accumulate(c, child)?;
        }
        Ok(())
    }

    /// Prunes zero leaves and empty submaps, and rejects non-finite leaves.
    pub(crate) fn finish(mut self) -> Result<VValue, VError> {
        self.prune()?;
        Ok(self)
    }

    fn prune(&mut self) -> Result<(), VError> {
        self.number = check_finite(self.number)?;
        let mut err = None;
        self.children.retain(|_, child| match child.prune() {
            Ok(()) => !child.is_zero(),
            Err(e) => {
                err.get_or_insert(e);
                true
            }
        });
        err.map_or(Ok(()), Err)
    }

    /// Drops every scalar leaf with `|α| < eps`. Separate from canonical
    /// pruning, which only removes exact zeros.
    pub fn prune_below(&self, eps: f64) -> VValue {
        let mut v = self.clone();
        v.prune_small(eps);
        v
    }

    fn prune_small(&mut self, eps: f64) {
        if self.number.abs() < eps {
            self.number = 0.0;
        }
        self.children.retain(|_, child| {
            child.prune_small(eps);
            !child.is_zero()
        });
    }

    /// Leafwise comparison with `|a-b| <= abs + rel·max(|a|,|b|)`.
    /// Sample leaves must match exactly.
    pub fn approx_eq(&self, other: &VValue, abs: f64, rel: f64) -> bool {
        let close = |a: f64, b: f64| (a - b).abs() <= abs + rel * a.abs().max(b.abs());
        if !close(self.number, other.number) || self.sample != other.sample {
            return false;
        }
        let zero = VValue::zero();
        self.children
            .iter()
            .all(|(l, a)| a.approx_eq(other.children.get(l).unwrap_or(&zero), abs, rel))
            && other
                .children
                .iter()
                .filter(|(l, _)| !self.children.contains_key(*l))
                .all(|(_, b)| zero.approx_eq(b, abs, rel))
    }

    /// Maximum path length to any leaf; 0 for zero and pure scalars.
    pub fn depth(&self) -> usize {
        self.children.values().map(|c| 1 + c.depth()).max().unwrap_or(0)
    }

    /// Number of nonzero leaves (scalar and sample).
    pub fn leaf_count(&self) -> usize {
        usize::from(self.number != 0.0)
            + usize::from(self.sample.is_some())
            + self.children.values().map(VValue::leaf_count).sum::<usize>()
    }

    pub fn max_abs_leaf(&self) -> f64 {
        self.children
            .values()
            .map(VValue::max_abs_leaf)
            .fold(self.number.abs(), f64::max)
    }

    /// Structural check that the value is canonical. Values built through
    /// this module always are.
    pub fn is_canonical(&self) -> bool {
        self.number.is_finite()
            && !(self.number == 0.0 && self.number.is_sign_negative())
            && self.children.values().all(|c| !c.is_zero() && c.is_canonical())
    }

    pub fn to_raw(&self) -> RawValue {
        let mut entries = Vec::with_capacity(self.children.len() + 2);
        if self.number != 0.0 {
            entries.push((NUMBER_KEY.to_string(), RawValue::Number(self.number)));
        }
        if let Some(s) = &self.sample {
            entries.push((SAMPLE_KEY.to_string(), s.to_raw()));
        }
        for (label, child) in &self.children {
            entries.push((label.as_str().to_string(), child.to_raw()));
        }
        RawValue::Map(entries)
    }

    pub(crate) fn children_mut(&mut self) -> &mut Children {
        &mut self.children
    }

    /// Assembles a node from already canonical parts.
    pub(crate) fn from_parts(number: f64, sample: Option<SampleLeaf>, children: Children) -> Self {
        VValue {
            number,
            sample,
            children,
        }
    }
}

impl fmt::Debug for VValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut m = f.debug_map();
        if self.number != 0.0 {
            m.entry(&format_args!(":number"), &self.number);
        }
        if let Some(s) = &self.sample {
            m.entry(&format_args!(":sample"), s);
        }
        for (l, c) in &self.children {
            m.entry(l, c);
        }
        m.finish()
    }
}

/// Normalizes loosely structured input into a canonical [`VValue`].
///
/// Bare numbers become `{number: α}`, zero leaves and empty submaps are
/// dropped, `number` must hold a number and `sample` a sample object.
pub fn canonicalize(raw: &RawValue) -> Result<VValue, VError> {
    let mut path = Vec::new();
    canonicalize_at(raw, &mut path)
}

fn malformed(path: &[String], reason: impl Into<String>) -> VError {
    let mut p = String::from("$");
    for seg in path {
        p.push('.');
        p.push_str(seg);
    }
    VError::Malformed {
        path: p,
        reason: reason.into(),
    }
}

fn canonicalize_at(raw: &RawValue, path: &mut Vec<String>) -> Result<VValue, VError> {
    match raw {
        RawValue::Number(c) => VValue::scalar(*c),
        RawValue::Text(_) => Err(malformed(path, "expected a map or a number")),
        RawValue::Map(entries) => {
            let mut number = None;
            let mut sample = None;
            let mut children = Children::default();
            for (key, value) in entries {
                path.push(key.clone());
                match key.as_str() {
                    NUMBER_KEY => match value {
                        RawValue::Number(c) if number.is_none() => {
                            number = Some(check_finite(*c)?);
                        }
                        RawValue::Number(_) => return Err(malformed(path, "duplicate key")),
                        _ => return Err(malformed(path, "`number` must map to a number")),
                    },
                    SAMPLE_KEY if sample.is_none() => {
                        sample = Some(SampleLeaf::from_raw(value).map_err(|e| match e {
                            VError::InvalidSample(reason) => malformed(path, reason),
                            other => other,
                        })?);
                    }
                    SAMPLE_KEY => return Err(malformed(path, "duplicate key")),
                    _ => {
                        let label = Label::new(key.as_str()).map_err(|e| malformed(path, e.to_string()))?;
                        if children.contains_key(&label) {
                            return Err(malformed(path, "duplicate key"));
                        }
                        let child = canonicalize_at(value, path)?;
                        if !child.is_zero() {
                            children.insert(label, child);
                        }
                    }
                }
                path.pop();
            }
            Ok(VValue::from_parts(number.unwrap_or(0.0), sample, children))
        }
    }
}

impl SampleLeaf {
    pub fn to_raw(&self) -> RawValue {
        RawValue::Map(alloc::vec![
            ("element".to_string(), RawValue::Text(self.element().to_string())),
            ("sign".to_string(), RawValue::Number(f64::from(self.sign().as_i8()))),
        ])
    }

    pub fn from_raw(raw: &RawValue) -> Result<SampleLeaf, VError> {
        let RawValue::Map(entries) = raw else {
            return Err(VError::InvalidSample("expected {\"element\", \"sign\"}".into()));
        };
        let mut element = None;
        let mut sign = None;
        for (k, v) in entries {
            match (k.as_str(), v) {
                ("element", RawValue::Text(s)) => element = Some(s.clone()),
                ("sign", RawValue::Number(n)) if *n == 1.0 => sign = Some(Sign::Plus),
                ("sign", RawValue::Number(n)) if *n == -1.0 => sign = Some(Sign::Minus),
                ("sign", _) => return Err(VError::InvalidSample("sign must be 1 or -1".into())),
                (other, _) => return Err(VError::InvalidSample(alloc::format!("unexpected field `{other}`"))),
            }
        }
        match (element, sign) {
            (Some(e), Some(s)) => SampleLeaf::new(e, s),
            _ => Err(VError::InvalidSample("missing `element` or `sign`".into())),
        }
    }
}
