//! Named parameter tensors and their checkpoint format.
//!
//! A checkpoint is a JSON document:
//!
//! ```json
//! { "format": "diffvp.params", "version": 1,
//!   "tensors": [ { "name": "vqa.weight", "shape": [31, 529], "values": [ ... ] } ] }
//! ```
//!
//! Values are row-major. Tensor order is registration order and is preserved.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::DiffError;

pub const CHECKPOINT_FORMAT: &str = "diffvp.params";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TensorId(pub usize);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    name: String,
    shape: Vec<usize>,
    values: Vec<f64>,
}

impl Tensor {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamStore {
    tensors: Vec<Tensor>,
    by_name: BTreeMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    format: String,
    version: u32,
    tensors: Vec<Tensor>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers a tensor. Shapes are fixed from here on.
    pub fn register(
        &mut self,
        name: impl Into<String>,
        shape: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<TensorId, DiffError> {
        let name = name.into();
        if self.by_name.contains_key(&name) {
            return Err(DiffError::DuplicateTensor(name));
        }
        let expected: usize = shape.iter().product();
        if expected != values.len() {
            return Err(DiffError::ShapeMismatch {
                name,
                expected,
                got: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(DiffError::NonFiniteParameter { name, index: i });
        }
        let id = TensorId(self.tensors.len());
        self.by_name.insert(name.clone(), id.0);
        self.tensors.push(Tensor { name, shape, values });
        Ok(id)
    }

    pub fn id(&self, name: &str) -> Option<TensorId> {
        self.by_name.get(name).map(|&i| TensorId(i))
    }

    pub fn require(&self, name: &str) -> Result<TensorId, DiffError> {
        self.id(name).ok_or_else(|| DiffError::UnknownTensor(name.to_string()))
    }

    pub fn tensor(&self, id: TensorId) -> &Tensor {
        &self.tensors[id.0]
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn ids(&self) -> impl Iterator<Item = TensorId> {
        (0..self.tensors.len()).map(TensorId)
    }

    pub fn num_params(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    pub fn get(&self, id: TensorId, index: usize) -> f64 {
        self.tensors[id.0].values[index]
    }

    pub fn set(&mut self, id: TensorId, index: usize, value: f64) -> Result<(), DiffError> {
        let t = &mut self.tensors[id.0];
        if !value.is_finite() {
            return Err(DiffError::NonFiniteParameter {
                name: t.name.clone(),
                index,
            });
        }
        t.values[index] = value;
        Ok(())
    }

    pub(crate) fn values_mut(&mut self, id: TensorId) -> &mut [f64] {
        &mut self.tensors[id.0].values
    }

    /// Whether every tensor matches `other` in name and shape.
    pub fn same_layout(&self, other: &ParamStore) -> bool {
        self.tensors.len() == other.tensors.len()
            && self
                .tensors
                .iter()
                .zip(&other.tensors)
                .all(|(a, b)| a.name == b.name && a.shape == b.shape)
    }

    /// Largest absolute coordinate difference; `None` if layouts differ.
    pub fn max_abs_diff(&self, other: &ParamStore) -> Option<f64> {
        if !self.same_layout(other) {
            return None;
        }
        Some(
            self.tensors
                .iter()
                .zip(&other.tensors)
                .flat_map(|(a, b)| a.values.iter().zip(&b.values).map(|(x, y)| (x - y).abs()))
                .fold(0.0, f64::max),
        )
    }

    pub fn to_json(&self) -> String {
        let ck = Checkpoint {
            format: CHECKPOINT_FORMAT.to_string(),
            version: CHECKPOINT_VERSION,
            tensors: self.tensors.clone(),
        };
        serde_json::to_string(&ck).expect("checkpoint serialization")
    }

    pub fn from_json(text: &str) -> Result<Self, DiffError> {
        let ck: Checkpoint = serde_json::from_str(text).map_err(|e| DiffError::Checkpoint(e.to_string()))?;
        if ck.format != CHECKPOINT_FORMAT {
            return Err(DiffError::Checkpoint(format!("unexpected format tag `{}`", ck.format)));
        }
        if ck.version != CHECKPOINT_VERSION {
            return Err(DiffError::Checkpoint(format!(
                "unsupported checkpoint version {}",
                ck.version
            )));
        }
        let mut store = ParamStore::new();
        for t in ck.tensors {
            store.register(t.name, t.shape, t.values)?;
        }
        Ok(store)
    }

    pub fn save(&self, path: &Path) -> Result<(), DiffError> {
        std::fs::write(path, self.to_json()).map_err(|e| DiffError::Checkpoint(format!("{}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<Self, DiffError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| DiffError::Checkpoint(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}

/// Dense gradient buffers aligned with a [`ParamStore`].
#[derive(Clone, Debug, PartialEq)]
pub struct ParamGrads {
    tensors: Vec<Vec<f64>>,
}

impl ParamGrads {
    pub fn zeros_like(store: &ParamStore) -> Self {
        ParamGrads {
            tensors: store.tensors.iter().map(|t| vec![0.0; t.len()]).collect(),
        }
    }

    pub fn tensor(&self, id: TensorId) -> &[f64] {
        &self.tensors[id.0]
    }

    pub fn tensor_mut(&mut self, id: TensorId) -> &mut [f64] {
        &mut self.tensors[id.0]
    }

    pub fn num_tensors(&self) -> usize {
        self.tensors.len()
    }

    /// `self += scale * other`.
    pub fn add_scaled(&mut self, other: &ParamGrads, scale: f64) {
        for (a, b) in self.tensors.iter_mut().zip(&other.tensors) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += scale * y;
            }
        }
    }

    pub fn scale(&mut self, s: f64) {
        for x in self.tensors.iter_mut().flatten() {
            *x *= s;
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.tensors.iter().flatten().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn sum(&self) -> f64 {
        self.tensors.iter().flatten().sum()
    }

    pub(crate) fn check_against(&self, store: &ParamStore) -> Result<(), DiffError> {
        if self.tensors.len() != store.tensors.len() {
            return Err(DiffError::ShapeMismatch {
                name: "<gradient set>".into(),
                expected: store.tensors.len(),
                got: self.tensors.len(),
            });
        }
        for (g, t) in self.tensors.iter().zip(&store.tensors) {
            if g.len() != t.len() {
                return Err(DiffError::ShapeMismatch {
                    name: t.name.clone(),
                    expected: t.len(),
                    got: g.len(),
                });
            }
            if let Some(i) = g.iter().position(|v| !v.is_finite()) {
                return Err(DiffError::NonFiniteParameter {
                    name: format!("grad of {}", t.name),
                    index: i,
                });
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn checkpoint_roundtrip() {
        let mut s = ParamStore::new();
        s.register("loc.weight", vec![2, 3], vec![0.5, -1.0, 2.0, 0.0, 1e-9, 3.25])
            .unwrap();
        s.register("vqa.bias", vec![2], vec![0.1, 0.2]).unwrap();
        let back = ParamStore::from_json(&s.to_json()).unwrap();
        assert_eq!(s, back);
    }

    #[test]
    fn rejects_bad_shapes_and_values() {
        let mut s = ParamStore::new();
        assert!(matches!(
            s.register("a", vec![2, 2], vec![0.0; 3]),
            Err(DiffError::ShapeMismatch { .. })
        ));
        assert!(matches!(
            s.register("a", vec![1], vec![f64::NAN]),
            Err(DiffError::NonFiniteParameter { .. })
        ));
        s.register("a", vec![1], vec![0.0]).unwrap();
        assert!(matches!(
            s.register("a", vec![1], vec![0.0]),
            Err(DiffError::DuplicateTensor(_))
        ));
    }

    #[test]
    fn rejects_foreign_checkpoints() {
        let text = r#"{"format":"other","version":1,"tensors":[]}"#;
        assert!(ParamStore::from_json(text).is_err());
        let text = r#"{"format":"diffvp.params","version":9,"tensors":[]}"#;
        assert!(ParamStore::from_json(text).is_err());
    }
}
