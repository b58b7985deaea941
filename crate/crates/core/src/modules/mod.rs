//! Perception modules behind a common contract, plus the deterministic
//! CROP and COUNT operations.

mod questions;
mod table;
mod toy;
mod truth;

pub use questions::{Question, SlotKind, Template, SLOT_DIM};
pub use table::{TableFixture, TableLoc, TableVqa};
pub use toy::{init_params, ToyLoc, ToyVqa, LOC_POOL, VQA_INPUT_DIM};
pub use truth::{truth_accesses, TruthLoc, TruthVqa};

use std::sync::Arc;

use crate::diff::{ParamStore, Tape};
use crate::dsl::ModuleKind;
use crate::value::{Categorical, Detection, Region};
use crate::world::SceneSet;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModuleError {
    #[error("`{0}` is not in the object vocabulary")]
    OutOfVocabulary(String),
    #[error("question `{0}` matches no known template")]
    UnknownTemplate(String),
    #[error("no scene bound to {0}")]
    MissingImage(String),
    #[error("missing parameter tensor `{0}`")]
    MissingParams(String),
    #[error("fixture has no entry for {0}")]
    NoFixture(String),
    #[error("unknown module implementation `{0}`")]
    UnknownImplementation(String),
}

/// Object localization: a distribution over detection outcomes inside
/// `region`.
pub trait LocModule: Send + Sync {
    fn name(&self) -> &str;

    fn distribution(
        &self,
        scenes: &SceneSet,
        region: &Region,
        object: &str,
        params: &ParamStore,
        tape: &mut Tape,
    ) -> Result<Categorical, ModuleError>;
}

/// Question answering over a region: a distribution over the template's
/// answer vocabulary.
pub trait VqaModule: Send + Sync {
    fn name(&self) -> &str;

    fn distribution(
        &self,
        scenes: &SceneSet,
        region: &Region,
        question: &str,
        params: &ParamStore,
        tape: &mut Tape,
    ) -> Result<Categorical, ModuleError>;
}

/// The LOC and VQA implementations a program runs against.
#[derive(Clone)]
pub struct ModuleSet {
    pub loc: Arc<dyn LocModule>,
    pub vqa: Arc<dyn VqaModule>,
}

impl ModuleSet {
    pub fn toy() -> Self {
        ModuleSet {
            loc: Arc::new(ToyLoc),
            vqa: Arc::new(ToyVqa),
        }
    }

    /// One-hot modules reading the scene's ground truth. Evaluation only.
    pub fn truth() -> Self {
        ModuleSet {
            loc: Arc::new(TruthLoc),
            vqa: Arc::new(TruthVqa),
        }
    }

    pub fn table(fixture: TableFixture) -> Self {
        let fixture = Arc::new(fixture);
        ModuleSet {
            loc: Arc::new(TableLoc(fixture.clone())),
            vqa: Arc::new(TableVqa(fixture)),
        }
    }

    /// Looks up an implementation by name. `table` needs a fixture.
    pub fn by_name(name: &str, fixture: Option<TableFixture>) -> Result<Self, ModuleError> {
        match (name, fixture) {
            ("toy", _) => Ok(Self::toy()),
            ("truth", _) => Ok(Self::truth()),
            ("table", Some(f)) => Ok(Self::table(f)),
            ("table", None) => Err(ModuleError::NoFixture("module set `table`".into())),
            (other, _) => Err(ModuleError::UnknownImplementation(other.into())),
        }
    }

    pub const NAMES: [&'static str; 3] = ["toy", "truth", "table"];
}

impl std::fmt::Debug for ModuleSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ModuleSet")
            .field("loc", &self.loc.name())
            .field("vqa", &self.vqa.name())
            .finish()
    }
}

/// The region a CROP variant selects.
///
/// An empty detection leaves the input region unchanged. Otherwise the
/// detection's first (highest-scoring) cell is used: plain CROP returns that
/// cell, the directional variants return the part of the input region
/// strictly beyond the cell's edge, shrunk to at least one cell. In front of
/// and behind map to below and above.
pub fn crop(input: &Region, detection: &Detection, variant: ModuleKind) -> Region {
    let Some(c) = detection.top() else {
        return *input;
    };
    let mut r = *input;
    match variant {
        ModuleKind::Crop => return Region::cell(input.image, c),
        ModuleKind::CropRightof => {
            r.left = (c.col + 1).max(input.left).min(input.right - 1);
        }
        ModuleKind::CropLeftof => {
            r.right = c.col.min(input.right).max(input.left + 1);
        }
        ModuleKind::CropBelow | ModuleKind::CropInfrontof => {
            r.top = (c.row + 1).max(input.top).min(input.bottom - 1);
        }
        ModuleKind::CropAbove | ModuleKind::CropBehind => {
            r.bottom = c.row.min(input.bottom).max(input.top + 1);
        }
        other => panic!("{other} is not a crop"),
    }
    r
}

pub fn count(detection: &Detection) -> i64 {
    detection.len() as i64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::value::{Cell, ImageName};

    fn det(cells: &[(u8, u8)]) -> Detection {
        Detection {
            image: ImageName::Image,
            cells: cells.iter().map(|&(r, c)| Cell::new(r, c)).collect(),
        }
    }

    #[test]
    fn empty_detection_keeps_input() {
        let whole = Region::whole(ImageName::Image, 4, 5);
        for v in ModuleKind::CROPS {
            assert_eq!(crop(&whole, &det(&[]), v), whole);
        }
    }

    #[test]
    fn right_of_column_two_in_five_wide_grid() {
        let whole = Region::whole(ImageName::Image, 4, 5);
        let r = crop(&whole, &det(&[(1, 2)]), ModuleKind::CropRightof);
        assert_eq!((r.left, r.right, r.top, r.bottom), (3, 5, 0, 4));
    }

    #[test]
    fn half_planes_never_collapse() {
        let whole = Region::whole(ImageName::Image, 3, 3);
        let corner = det(&[(2, 2)]);
        for v in ModuleKind::CROPS {
            assert!(crop(&whole, &corner, v).area() >= 1, "{v}");
        }
        let r = crop(&whole, &corner, ModuleKind::CropRightof);
        assert_eq!((r.left, r.right), (2, 3));
        let r = crop(&whole, &det(&[(0, 0)]), ModuleKind::CropAbove);
        assert_eq!((r.top, r.bottom), (0, 1));
    }

    #[test]
    fn depth_variants_follow_rows() {
        let whole = Region::whole(ImageName::Image, 4, 4);
        let d = det(&[(1, 1)]);
        assert_eq!(
            crop(&whole, &d, ModuleKind::CropInfrontof),
            crop(&whole, &d, ModuleKind::CropBelow)
        );
        assert_eq!(
            crop(&whole, &d, ModuleKind::CropBehind),
            crop(&whole, &d, ModuleKind::CropAbove)
        );
    }

    #[test]
    fn crop_is_idempotent_on_its_box() {
        let whole = Region::whole(ImageName::Image, 4, 4);
        let d = det(&[(2, 3), (0, 0)]);
        let once = crop(&whole, &d, ModuleKind::Crop);
        assert_eq!(once, Region::cell(ImageName::Image, Cell::new(2, 3)));
        assert_eq!(crop(&once, &d, ModuleKind::Crop), once);
    }

    #[test]
    fn count_is_cardinality() {
        assert_eq!(count(&det(&[])), 0);
        assert_eq!(count(&det(&[(0, 0), (1, 1)])), 2);
    }

    #[test]
    fn registry_lookup() {
        assert_eq!(ModuleSet::by_name("toy", None).unwrap().loc.name(), "toy");
        assert!(matches!(
            ModuleSet::by_name("owl", None),
            Err(ModuleError::UnknownImplementation(_))
        ));
        assert!(ModuleSet::by_name("table", None).is_err());
    }
}
