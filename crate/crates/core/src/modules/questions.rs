//! Sub-question templates understood by the VQA modules.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::value::Value;
use crate::world::{Activity, Category, Color, Material};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlotKind {
    Object,
    Color,
    Material,
    Activity,
}

impl SlotKind {
    pub fn vocab(self) -> &'static [&'static str] {
        const OBJ: [&str; 8] = ["post", "sign", "dog", "cat", "person", "car", "chair", "bottle"];
        const COL: [&str; 6] = ["red", "blue", "green", "white", "black", "yellow"];
        const MAT: [&str; 4] = ["wood", "metal", "plastic", "glass"];
        const ACT: [&str; 4] = ["standing", "sitting", "running", "lying"];
        match self {
            SlotKind::Object => &OBJ,
            SlotKind::Color => &COL,
            SlotKind::Material => &MAT,
            SlotKind::Activity => &ACT,
        }
    }

    /// Offset of this kind's values inside the 22-wide slot indicator.
    fn offset(self) -> usize {
        match self {
            SlotKind::Object => 0,
            SlotKind::Color => 8,
            SlotKind::Material => 14,
            SlotKind::Activity => 18,
        }
    }

    fn placeholder(self) -> &'static str {
        match self {
            SlotKind::Object => "{obj}",
            SlotKind::Color => "{color}",
            SlotKind::Material => "{material}",
            SlotKind::Activity => "{activity}",
        }
    }
}

/// Width of the slot indicator: every object, color, material and activity
/// word gets one position.
pub const SLOT_DIM: usize = 22;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Template {
    WhatColor,
    HasColor,
    MadeOf,
    Doing,
    HowMany,
    IsThere,
    AnythingColor,
    WhatMaterial,
    IsActivity,
}

impl Template {
    pub const ALL: [Template; 9] = [
        Template::WhatColor,
        Template::HasColor,
        Template::MadeOf,
        Template::Doing,
        Template::HowMany,
        Template::IsThere,
        Template::AnythingColor,
        Template::WhatMaterial,
        Template::IsActivity,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Template::WhatColor => "what_color",
            Template::HasColor => "has_color",
            Template::MadeOf => "made_of",
            Template::Doing => "doing",
            Template::HowMany => "how_many",
            Template::IsThere => "is_there",
            Template::AnythingColor => "anything_color",
            Template::WhatMaterial => "what_material",
            Template::IsActivity => "is_activity",
        }
    }

    pub fn pattern(self) -> &'static str {
        match self {
            Template::WhatColor => "What color is the {obj}?",
            Template::HasColor => "Does the {obj} have {color} color?",
            Template::MadeOf => "Is the {obj} made of {material}?",
            Template::Doing => "What is the {obj} doing?",
            Template::HowMany => "How many {obj}s are in the image?",
            Template::IsThere => "Is there a {obj}?",
            Template::AnythingColor => "Is there anything {color}?",
            Template::WhatMaterial => "What material is the {obj} made of?",
            Template::IsActivity => "Is the {obj} {activity}?",
        }
    }

    pub fn slots(self) -> Vec<SlotKind> {
        pieces(self.pattern())
            .into_iter()
            .filter_map(|p| match p {
                Piece::Slot(k) => Some(k),
                Piece::Text(_) => None,
            })
            .collect()
    }

    /// Largest answer for counting questions; matches the per-category cap of
    /// the scene generator.
    pub const MAX_COUNT: i64 = 4;

    /// Answer vocabulary in canonical order.
    pub fn answers(self) -> Vec<Value> {
        let toks = |xs: &[&str]| xs.iter().map(|s| Value::token(*s)).collect();
        match self {
            Template::WhatColor => toks(SlotKind::Color.vocab()),
            Template::WhatMaterial => toks(SlotKind::Material.vocab()),
            Template::Doing => toks(SlotKind::Activity.vocab()),
            Template::HowMany => (0..=Self::MAX_COUNT).map(Value::Int).collect(),
            _ => toks(&["yes", "no"]),
        }
    }

    pub fn is_yes_no(self) -> bool {
        self.answers().len() == 2
    }
}

impl fmt::Display for Template {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

enum Piece {
    Text(&'static str),
    Slot(SlotKind),
}

fn pieces(pattern: &'static str) -> Vec<Piece> {
    const KINDS: [SlotKind; 4] = [
        SlotKind::Object,
        SlotKind::Color,
        SlotKind::Material,
        SlotKind::Activity,
    ];
    let mut out = Vec::new();
    let mut rest = pattern;
    while let Some(start) = rest.find('{') {
        if start > 0 {
            out.push(Piece::Text(&rest[..start]));
        }
        let kind = KINDS
            .into_iter()
            .find(|k| rest[start..].starts_with(k.placeholder()))
            .expect("patterns use known placeholders");
        out.push(Piece::Slot(kind));
        rest = &rest[start + kind.placeholder().len()..];
    }
    if !rest.is_empty() {
        out.push(Piece::Text(rest));
    }
    out
}

/// A question matched against a template, with its slot fillers in pattern
/// order.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Question {
    pub template: Template,
    pub slots: Vec<(SlotKind, String)>,
}

impl Question {
    pub fn new(template: Template, fillers: &[&str]) -> Self {
        let slots = template
            .slots()
            .into_iter()
            .zip(fillers)
            .map(|(k, v)| (k, v.to_string()))
            .collect();
        Question { template, slots }
    }

    /// Matches `text` against every template. Slot values must come from the
    /// slot's vocabulary.
    pub fn parse(text: &str) -> Option<Question> {
        Template::ALL.into_iter().find_map(|t| {
            let mut slots = Vec::new();
            match_pieces(&pieces(t.pattern()), text, &mut slots).then_some(Question { template: t, slots })
        })
    }

    pub fn render(&self) -> String {
        let mut fill = self.slots.iter();
        let mut s = String::new();
        for p in pieces(self.template.pattern()) {
            match p {
                Piece::Text(t) => s.push_str(t),
                Piece::Slot(_) => s.push_str(&fill.next().expect("one filler per slot").1),
            }
        }
        s
    }

    pub fn slot(&self, kind: SlotKind) -> Option<&str> {
        self.slots.iter().find(|(k, _)| *k == kind).map(|(_, v)| v.as_str())
    }

    pub fn category(&self) -> Option<Category> {
        self.slot(SlotKind::Object).and_then(Category::from_name)
    }

    pub fn color(&self) -> Option<Color> {
        self.slot(SlotKind::Color).and_then(Color::from_name)
    }

    pub fn material(&self) -> Option<Material> {
        self.slot(SlotKind::Material).and_then(Material::from_name)
    }

    pub fn activity(&self) -> Option<Activity> {
        self.slot(SlotKind::Activity).and_then(Activity::from_name)
    }

    /// Positions set in the slot indicator, one per filler.
    pub fn slot_indices(&self) -> Vec<usize> {
        self.slots
            .iter()
            .map(|(k, v)| {
                let i = k
                    .vocab()
                    .iter()
                    .position(|w| w == v)
                    .expect("parsed slot is in vocabulary");
                k.offset() + i
            })
            .collect()
    }
}

fn match_pieces(ps: &[Piece], text: &str, slots: &mut Vec<(SlotKind, String)>) -> bool {
    match ps.split_first() {
        None => text.is_empty(),
        Some((Piece::Text(t), rest)) => text.strip_prefix(t).is_some_and(|tail| match_pieces(rest, tail, slots)),
        Some((Piece::Slot(k), rest)) => {
            for w in k.vocab() {
                if let Some(tail) = text.strip_prefix(w) {
                    slots.push((*k, w.to_string()));
                    if match_pieces(rest, tail, slots) {
                        return true;
                    }
                    slots.pop();
                }
            }
            false
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_template_roundtrips() {
        for t in Template::ALL {
            let fillers: Vec<&str> = t.slots().iter().map(|k| k.vocab()[1]).collect();
            let q = Question::new(t, &fillers);
            assert_eq!(Question::parse(&q.render()), Some(q));
        }
    }

    #[test]
    fn plural_count_question() {
        let q = Question::parse("How many dogs are in the image?").unwrap();
        assert_eq!(q.template, Template::HowMany);
        assert_eq!(q.category(), Some(Category::Dog));
        assert_eq!(q.template.answers().len(), 5);
    }

    #[test]
    fn unknown_text_and_words_are_rejected() {
        assert!(Question::parse("What color is the laptop?").is_none());
        assert!(Question::parse("Why is the sky blue?").is_none());
        assert!(Question::parse("What color is the dog").is_none());
    }

    #[test]
    fn slot_indices_are_disjoint_by_kind() {
        let q = Question::parse("Does the bottle have yellow color?").unwrap();
        assert_eq!(q.slot_indices(), vec![7, 13]);
        let q = Question::parse("Is the cat lying?").unwrap();
        assert_eq!(q.slot_indices(), vec![3, 21]);
    }
}
