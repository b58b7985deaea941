//! Modules that replay fixed distributions from a JSON fixture. Useful for
//! hand-computed examples; not differentiable.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{LocModule, ModuleError, VqaModule};
use crate::diff::{ParamStore, Tape};
use crate::value::{Categorical, Cell, Detection, Region, Value};
use crate::world::SceneSet;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LocOutcome {
    pub cells: Vec<Cell>,
    pub p: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LocEntry {
    pub object: String,
    /// Applies to every region when absent.
    #[serde(default)]
    pub region: Option<Region>,
    pub outcomes: Vec<LocOutcome>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VqaEntry {
    pub question: String,
    #[serde(default)]
    pub region: Option<Region>,
    /// `[answer, probability]` pairs.
    pub answers: Vec<(Value, f64)>,
}

/// Entries are matched by literal and region; an exact region match wins
/// over a region-less entry.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableFixture {
    #[serde(default)]
    pub loc: Vec<LocEntry>,
    #[serde(default)]
    pub vqa: Vec<VqaEntry>,
}

impl TableFixture {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

fn pick<'a, T>(entries: impl Iterator<Item = (&'a Option<Region>, &'a T)> + Clone, region: &Region) -> Option<&'a T> {
    entries
        .clone()
        .find(|(r, _)| r.as_ref() == Some(region))
        .or_else(|| entries.clone().find(|(r, _)| r.is_none()))
        .map(|(_, t)| t)
}

#[derive(Clone, Debug)]
pub struct TableLoc(pub Arc<TableFixture>);

impl LocModule for TableLoc {
    fn name(&self) -> &str {
        "table"
    }

    fn distribution(
        &self,
        _scenes: &SceneSet,
        region: &Region,
        object: &str,
        _params: &ParamStore,
        _tape: &mut Tape,
    ) -> Result<Categorical, ModuleError> {
        let entries = self.0.loc.iter().filter(|e| e.object == object).map(|e| (&e.region, e));
        let e = pick(entries, region).ok_or_else(|| ModuleError::NoFixture(format!("LOC `{object}` on {region}")))?;
        Categorical::from_f64(e.outcomes.iter().map(|o| {
            (
                Value::Detection(Detection {
                    image: region.image,
                    cells: o.cells.clone(),
                }),
                o.p,
            )
        }))
        .map_err(|err| ModuleError::NoFixture(format!("LOC `{object}`: {err}")))
    }
}

#[derive(Clone, Debug)]
pub struct TableVqa(pub Arc<TableFixture>);

impl VqaModule for TableVqa {
    fn name(&self) -> &str {
        "table"
    }

    fn distribution(
        &self,
        _scenes: &SceneSet,
        region: &Region,
        question: &str,
        _params: &ParamStore,
        _tape: &mut Tape,
    ) -> Result<Categorical, ModuleError> {
        let entries = self
            .0
            .vqa
            .iter()
            .filter(|e| e.question == question)
            .map(|e| (&e.region, e));
        let e = pick(entries, region).ok_or_else(|| ModuleError::NoFixture(format!("VQA `{question}` on {region}")))?;
        Categorical::from_f64(e.answers.iter().cloned())
            .map_err(|err| ModuleError::NoFixture(format!("VQA `{question}`: {err}")))
    }
}
