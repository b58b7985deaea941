//! Runtime values flowing through programs and the categorical distributions
//! over them.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::diff::{Scalar, Tape};

/// A predefined input image variable.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ImageName {
    #[serde(rename = "IMAGE")]
    Image,
    #[serde(rename = "LEFT")]
    Left,
    #[serde(rename = "RIGHT")]
    Right,
}

impl ImageName {
    pub const ALL: [ImageName; 3] = [ImageName::Image, ImageName::Left, ImageName::Right];

    pub fn as_str(self) -> &'static str {
        match self {
            ImageName::Image => "IMAGE",
            ImageName::Left => "LEFT",
            ImageName::Right => "RIGHT",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|n| n.as_str() == name)
    }
}

impl fmt::Display for ImageName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A grid cell. Ordering is row-major.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cell {
    pub row: u8,
    pub col: u8,
}

impl Cell {
    pub fn new(row: u8, col: u8) -> Self {
        Cell { row, col }
    }
}

/// Axis-aligned rectangle of cells in one image; `bottom` and `right` are
/// exclusive.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Region {
    pub image: ImageName,
    pub top: u8,
    pub left: u8,
    pub bottom: u8,
    pub right: u8,
}

impl Region {
    pub fn whole(image: ImageName, rows: u8, cols: u8) -> Self {
        Region {
            image,
            top: 0,
            left: 0,
            bottom: rows,
            right: cols,
        }
    }

    pub fn cell(image: ImageName, c: Cell) -> Self {
        Region {
            image,
            top: c.row,
            left: c.col,
            bottom: c.row + 1,
            right: c.col + 1,
        }
    }

    pub fn contains(&self, c: Cell) -> bool {
        (self.top..self.bottom).contains(&c.row) && (self.left..self.right).contains(&c.col)
    }

    pub fn is_empty(&self) -> bool {
        self.top >= self.bottom || self.left >= self.right
    }

    pub fn area(&self) -> usize {
        if self.is_empty() {
            0
        } else {
            (self.bottom - self.top) as usize * (self.right - self.left) as usize
        }
    }

    /// Cells in row-major order.
    pub fn cells(&self) -> impl Iterator<Item = Cell> + '_ {
        (self.top..self.bottom).flat_map(move |r| (self.left..self.right).map(move |c| Cell::new(r, c)))
    }
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}[{}..{},{}..{}]",
            self.image, self.top, self.bottom, self.left, self.right
        )
    }
}

/// A set of detected cells, highest-scoring first.
///
/// The order matters: CROP uses the first cell. Two detections with the same
/// cells in a different order are different values.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Detection {
    pub image: ImageName,
    pub cells: Vec<Cell>,
}

impl Detection {
    pub fn empty(image: ImageName) -> Self {
        Detection {
            image,
            cells: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn top(&self) -> Option<Cell> {
        self.cells.first().copied()
    }

    pub fn sorted_cells(&self) -> Vec<Cell> {
        let mut c = self.cells.clone();
        c.sort();
        c
    }

    /// Same cells regardless of order.
    pub fn same_set(&self, other: &Detection) -> bool {
        self.image == other.image && self.sorted_cells() == other.sorted_cells()
    }
}

impl fmt::Display for Detection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{{", self.image)?;
        for (i, c) in self.cells.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "({},{})", c.row, c.col)?;
        }
        f.write_str("}")
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Int(i64),
    Token(String),
    Detection(Detection),
    Region(Region),
}

impl Value {
    pub fn token(s: impl Into<String>) -> Self {
        Value::Token(s.into())
    }

    pub fn boolean(b: bool) -> Self {
        Value::token(if b { "True" } else { "False" })
    }

    pub fn as_token(&self) -> Option<&str> {
        match self {
            Value::Token(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_int(&self) -> Option<i64> {
        match self {
            Value::Int(n) => Some(*n),
            _ => None,
        }
    }

    pub fn type_name(&self) -> &'static str {
        match self {
            Value::Token(_) => "string",
            Value::Int(_) => "integer",
            Value::Detection(_) => "detection",
            Value::Region(_) => "region",
        }
    }

    /// Label comparison: tokens and integers compare by their text so that a
    /// label "2" matches `Int(2)`.
    pub fn matches_label(&self, label: &str) -> bool {
        match self {
            Value::Token(s) => s == label,
            Value::Int(n) => label.parse::<i64>() == Ok(*n),
            _ => false,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Token(s) => f.write_str(s),
            Value::Int(n) => write!(f, "{n}"),
            Value::Detection(d) => d.fmt(f),
            Value::Region(r) => r.fmt(f),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CategoricalError {
    #[error("support and probability lengths differ ({support} vs {probs})")]
    LengthMismatch { support: usize, probs: usize },
    #[error("duplicate support entry `{0}`")]
    DuplicateSupport(String),
    #[error("empty support")]
    Empty,
}

/// A finite distribution whose probabilities may live on a tape.
#[derive(Clone, Debug, PartialEq)]
pub struct Categorical {
    support: Vec<Value>,
    probs: Vec<Scalar>,
}

impl Categorical {
    pub fn new(support: Vec<Value>, probs: Vec<Scalar>) -> Result<Self, CategoricalError> {
        if support.len() != probs.len() {
            return Err(CategoricalError::LengthMismatch {
                support: support.len(),
                probs: probs.len(),
            });
        }
        if support.is_empty() {
            return Err(CategoricalError::Empty);
        }
        let mut seen = std::collections::HashSet::with_capacity(support.len());
        for v in &support {
            if !seen.insert(v) {
                return Err(CategoricalError::DuplicateSupport(v.to_string()));
            }
        }
        Ok(Categorical { support, probs })
    }

    /// Builds from constant probabilities.
    pub fn from_f64(pairs: impl IntoIterator<Item = (Value, f64)>) -> Result<Self, CategoricalError> {
        let (support, probs): (Vec<_>, Vec<_>) = pairs.into_iter().map(|(v, p)| (v, Scalar::constant(p))).unzip();
        Self::new(support, probs)
    }

    pub fn point(v: Value) -> Self {
        Categorical {
            support: vec![v],
            probs: vec![Scalar::ONE],
        }
    }

    /// Merges equal values, keeping first-appearance order.
    pub fn from_weighted(tape: &mut Tape, items: impl IntoIterator<Item = (Value, Scalar)>) -> Self {
        let mut support: Vec<Value> = Vec::new();
        let mut parts: Vec<Vec<Scalar>> = Vec::new();
        let mut index = std::collections::HashMap::new();
        for (v, p) in items {
            let i = *index.entry(v.clone()).or_insert_with(|| {
                support.push(v);
                parts.push(Vec::new());
                support.len() - 1
            });
            parts[i].push(p);
        }
        let probs = parts.iter().map(|ps| tape.sum(ps)).collect();
        Categorical { support, probs }
    }

    pub fn support(&self) -> &[Value] {
        &self.support
    }

    pub fn probs(&self) -> &[Scalar] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Value, Scalar)> {
        self.support.iter().zip(self.probs.iter().copied())
    }

    pub fn values(&self) -> Vec<f64> {
        self.probs.iter().map(|p| p.value()).collect()
    }

    pub fn index_of(&self, v: &Value) -> Option<usize> {
        self.support.iter().position(|s| s == v)
    }

    pub fn prob_of(&self, v: &Value) -> Option<Scalar> {
        self.index_of(v).map(|i| self.probs[i])
    }

    /// Probability of a value as a plain number; zero if absent.
    pub fn p(&self, v: &Value) -> f64 {
        self.prob_of(v).map_or(0.0, Scalar::value)
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().map(|p| p.value()).sum()
    }

    pub fn is_normalized(&self, tol: f64) -> bool {
        (self.total() - 1.0).abs() <= tol && self.probs.iter().all(|p| p.value() >= -1e-12)
    }

    /// Most probable value; ties go to the earliest support entry.
    pub fn argmax(&self) -> (&Value, f64) {
        let mut best = 0;
        for i in 1..self.probs.len() {
            if self.probs[i].value() > self.probs[best].value() {
                best = i;
            }
        }
        (&self.support[best], self.probs[best].value())
    }

    /// Drops the tape links, keeping values.
    pub fn detached(&self) -> Self {
        Categorical {
            support: self.support.clone(),
            probs: self.probs.iter().map(|p| Scalar::constant(p.value())).collect(),
        }
    }

    /// Largest absolute per-value difference, treating absent values as zero.
    pub fn max_abs_diff(&self, other: &Categorical) -> f64 {
        let mut m: f64 = 0.0;
        for (v, p) in self.iter() {
            m = m.max((p.value() - other.p(v)).abs());
        }
        for (v, p) in other.iter() {
            if self.index_of(v).is_none() {
                m = m.max(p.value().abs());
            }
        }
        m
    }

    /// Pushforward through `f`; equal images are merged.
    pub fn map<F>(&self, tape: &mut Tape, mut f: F) -> Self
    where
        F: FnMut(&Value) -> Value,
    {
        let items: Vec<_> = self.iter().map(|(v, p)| (f(v), p)).collect();
        Self::from_weighted(tape, items)
    }

    /// `{support: [...], probs: [...]}` for JSON output.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "support": self.support,
            "probs": self.values(),
        })
    }
}

impl fmt::Display for Categorical {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, (v, p)) in self.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{v}: {:.6}", p.value())?;
        }
        f.write_str("}")
    }
}
