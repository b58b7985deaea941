//! Grid scenes and their attribute vocabularies.

use std::collections::BTreeMap;
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::value::{Cell, ImageName, Region};

macro_rules! vocab {
    ($(#[$m:meta])* $name:ident { $($var:ident => $s:literal),+ $(,)? }) => {
        $(#[$m])*
        #[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        #[serde(rename_all = "lowercase")]
        pub enum $name { $($var),+ }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$var),+];

            pub fn as_str(self) -> &'static str {
                match self { $($name::$var => $s),+ }
            }

            pub fn from_name(s: &str) -> Option<Self> {
                match s { $($s => Some($name::$var),)+ _ => None }
            }

            pub fn index(self) -> usize {
                self as usize
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }
    };
}

vocab!(Category {
    Post => "post",
    Sign => "sign",
    Dog => "dog",
    Cat => "cat",
    Person => "person",
    Car => "car",
    Chair => "chair",
    Bottle => "bottle",
});

vocab!(Color {
    Red => "red",
    Blue => "blue",
    Green => "green",
    White => "white",
    Black => "black",
    Yellow => "yellow",
});

vocab!(Material {
    Wood => "wood",
    Metal => "metal",
    Plastic => "plastic",
    Glass => "glass",
});

vocab!(Activity {
    Standing => "standing",
    Sitting => "sitting",
    Running => "running",
    Lying => "lying",
});

/// Length of the per-cell feature vector: one-hot category, color, material
/// and activity, plus a presence bit.
pub const FEATURE_DIM: usize = 8 + 6 + 4 + 4 + 1;
pub const COLOR_OFFSET: usize = 8;
pub const MATERIAL_OFFSET: usize = 14;
pub const ACTIVITY_OFFSET: usize = 18;
pub const PRESENCE: usize = 22;

/// At most this many objects of one category per scene. Matches the LOC
/// candidate pool so every ground-truth detection is representable.
pub const MAX_PER_CATEGORY: usize = 4;
pub const MAX_GRID: u8 = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Object {
    pub row: u8,
    pub col: u8,
    pub category: Category,
    pub color: Color,
    pub material: Material,
    pub activity: Activity,
}

impl Object {
    pub fn cell(&self) -> Cell {
        Cell::new(self.row, self.col)
    }

    /// Indices of the nonzero (all 1.0) feature coordinates.
    pub fn active_features(&self) -> [usize; 5] {
        [
            self.category.index(),
            COLOR_OFFSET + self.color.index(),
            MATERIAL_OFFSET + self.material.index(),
            ACTIVITY_OFFSET + self.activity.index(),
            PRESENCE,
        ]
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scene {
    pub rows: u8,
    pub cols: u8,
    /// Row-major by cell.
    pub objects: Vec<Object>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SceneError {
    #[error("grid {rows}x{cols} outside 1..={MAX_GRID}")]
    BadDims { rows: u8, cols: u8 },
    #[error("object at ({row},{col}) lies outside the grid")]
    OutOfBounds { row: u8, col: u8 },
    #[error("two objects share cell ({row},{col})")]
    SharedCell { row: u8, col: u8 },
}

impl Scene {
    pub fn validate(&self) -> Result<(), SceneError> {
        if !(1..=MAX_GRID).contains(&self.rows) || !(1..=MAX_GRID).contains(&self.cols) {
            return Err(SceneError::BadDims {
                rows: self.rows,
                cols: self.cols,
            });
        }
        let mut seen = std::collections::HashSet::new();
        for o in &self.objects {
            if o.row >= self.rows || o.col >= self.cols {
                return Err(SceneError::OutOfBounds { row: o.row, col: o.col });
            }
            if !seen.insert(o.cell()) {
                return Err(SceneError::SharedCell { row: o.row, col: o.col });
            }
        }
        Ok(())
    }

    pub fn whole(&self, image: ImageName) -> Region {
        Region::whole(image, self.rows, self.cols)
    }

    pub fn object_at(&self, c: Cell) -> Option<&Object> {
        self.objects.iter().find(|o| o.cell() == c)
    }

    /// Objects inside `region`, row-major.
    pub fn objects_in<'a>(&'a self, region: &'a Region) -> impl Iterator<Item = &'a Object> + 'a {
        self.objects.iter().filter(move |o| region.contains(o.cell()))
    }

    pub fn count(&self, category: Category) -> usize {
        self.objects.iter().filter(|o| o.category == category).count()
    }

    /// Draws a scene: object count uniform in `[1, cells/2]`, distinct cells,
    /// at most [`MAX_PER_CATEGORY`] objects per category.
    pub fn random<R: Rng>(rng: &mut R, rows: u8, cols: u8) -> Scene {
        let cells = rows as usize * cols as usize;
        let max_objects = (cells / 2).max(1).min(Category::ALL.len() * MAX_PER_CATEGORY);
        let n = rng.gen_range(1..=max_objects);
        let mut free: Vec<Cell> = Region::whole(ImageName::Image, rows, cols).cells().collect();
        let mut per_cat = [0usize; 8];
        let mut objects = Vec::with_capacity(n);
        while objects.len() < n {
            let category = loop {
                let c = Category::ALL[rng.gen_range(0..Category::ALL.len())];
                if per_cat[c.index()] < MAX_PER_CATEGORY {
                    break c;
                }
            };
            per_cat[category.index()] += 1;
            let cell = free.swap_remove(rng.gen_range(0..free.len()));
            objects.push(Object {
                row: cell.row,
                col: cell.col,
                category,
                color: Color::ALL[rng.gen_range(0..Color::ALL.len())],
                material: Material::ALL[rng.gen_range(0..Material::ALL.len())],
                activity: Activity::ALL[rng.gen_range(0..Activity::ALL.len())],
            });
        }
        objects.sort_by_key(Object::cell);
        Scene { rows, cols, objects }
    }
}

/// The scenes bound to the predefined image variables of one case.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SceneSet(pub BTreeMap<ImageName, Scene>);

impl SceneSet {
    pub fn single(scene: Scene) -> Self {
        SceneSet(BTreeMap::from([(ImageName::Image, scene)]))
    }

    pub fn pair(left: Scene, right: Scene) -> Self {
        SceneSet(BTreeMap::from([(ImageName::Left, left), (ImageName::Right, right)]))
    }

    pub fn get(&self, image: ImageName) -> Option<&Scene> {
        self.0.get(&image)
    }

    pub fn images(&self) -> impl Iterator<Item = ImageName> + '_ {
        self.0.keys().copied()
    }

    pub fn validate(&self) -> Result<(), SceneError> {
        self.0.values().try_for_each(Scene::validate)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn vocab_names_roundtrip() {
        for c in Category::ALL {
            assert_eq!(Category::from_name(c.as_str()), Some(*c));
        }
        assert_eq!(Color::from_name("mauve"), None);
        assert_eq!(
            Category::ALL.len() + Color::ALL.len() + Material::ALL.len() + Activity::ALL.len() + 1,
            FEATURE_DIM
        );
    }

    #[test]
    fn random_scenes_are_valid_and_reproducible() {
        for seed in 0..200 {
            let a = Scene::random(&mut ChaCha8Rng::seed_from_u64(seed), 4, 4);
            let b = Scene::random(&mut ChaCha8Rng::seed_from_u64(seed), 4, 4);
            assert_eq!(a, b);
            a.validate().unwrap();
            assert!((1..=8).contains(&a.objects.len()));
            for c in Category::ALL {
                assert!(a.count(*c) <= MAX_PER_CATEGORY);
            }
        }
    }
}
