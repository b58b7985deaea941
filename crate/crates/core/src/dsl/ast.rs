use std::fmt;

use serde::Serialize;

use crate::evalexpr::EvalAst;

/// What a variable holds, for argument type checking.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum VarType {
    Image,
    Box,
    Answer,
}

/// How an argument must be written.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ArgKind {
    /// A variable of the given type.
    Var(VarType),
    /// A variable of any type.
    AnyVar,
    /// A quoted literal.
    Literal,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ModuleKind {
    Loc,
    Crop,
    CropRightof,
    CropLeftof,
    CropInfrontof,
    CropBehind,
    CropBelow,
    CropAbove,
    Vqa,
    Count,
    Eval,
    Result,
}

const IMAGE_BOX: &[(&str, ArgKind)] = &[
    ("image", ArgKind::Var(VarType::Image)),
    ("box", ArgKind::Var(VarType::Box)),
];

impl ModuleKind {
    pub const ALL: [ModuleKind; 12] = [
        ModuleKind::Loc,
        ModuleKind::Crop,
        ModuleKind::CropRightof,
        ModuleKind::CropLeftof,
        ModuleKind::CropInfrontof,
        ModuleKind::CropBehind,
        ModuleKind::CropBelow,
        ModuleKind::CropAbove,
        ModuleKind::Vqa,
        ModuleKind::Count,
        ModuleKind::Eval,
        ModuleKind::Result,
    ];

    pub const CROPS: [ModuleKind; 7] = [
        ModuleKind::Crop,
        ModuleKind::CropRightof,
        ModuleKind::CropLeftof,
        ModuleKind::CropInfrontof,
        ModuleKind::CropBehind,
        ModuleKind::CropBelow,
        ModuleKind::CropAbove,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModuleKind::Loc => "LOC",
            ModuleKind::Crop => "CROP",
            ModuleKind::CropRightof => "CROP_RIGHTOF",
            ModuleKind::CropLeftof => "CROP_LEFTOF",
            ModuleKind::CropInfrontof => "CROP_INFRONTOF",
            ModuleKind::CropBehind => "CROP_BEHIND",
            ModuleKind::CropBelow => "CROP_BELOW",
            ModuleKind::CropAbove => "CROP_ABOVE",
            ModuleKind::Vqa => "VQA",
            ModuleKind::Count => "COUNT",
            ModuleKind::Eval => "EVAL",
            ModuleKind::Result => "RESULT",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.name() == s)
    }

    /// Named arguments in canonical order.
    pub fn signature(self) -> &'static [(&'static str, ArgKind)] {
        match self {
            ModuleKind::Loc => &[("image", ArgKind::Var(VarType::Image)), ("object", ArgKind::Literal)],
            ModuleKind::Vqa => &[("image", ArgKind::Var(VarType::Image)), ("question", ArgKind::Literal)],
            ModuleKind::Count => &[("box", ArgKind::Var(VarType::Box))],
            ModuleKind::Eval => &[("expr", ArgKind::Literal)],
            ModuleKind::Result => &[("var", ArgKind::AnyVar)],
            _ => IMAGE_BOX,
        }
    }

    pub fn output(self) -> Option<VarType> {
        match self {
            ModuleKind::Loc => Some(VarType::Box),
            ModuleKind::Vqa | ModuleKind::Count | ModuleKind::Eval => Some(VarType::Answer),
            ModuleKind::Result => None,
            _ => Some(VarType::Image),
        }
    }

    pub fn is_crop(self) -> bool {
        Self::CROPS.contains(&self)
    }

    /// Modules that invoke a learned visual model.
    pub fn is_visual(self) -> bool {
        matches!(self, ModuleKind::Loc | ModuleKind::Vqa)
    }
}

impl fmt::Display for ModuleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Arg {
    Var(String),
    Literal(String),
}

impl Arg {
    pub fn as_var(&self) -> Option<&str> {
        match self {
            Arg::Var(v) => Some(v),
            Arg::Literal(_) => None,
        }
    }

    pub fn as_literal(&self) -> Option<&str> {
        match self {
            Arg::Literal(s) => Some(s),
            Arg::Var(_) => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Statement {
    pub target: String,
    pub module: ModuleKind,
    /// In signature order.
    pub args: Vec<(String, Arg)>,
    /// Parsed expression, for EVAL statements.
    #[serde(skip)]
    pub expr: Option<EvalAst>,
    /// 1-based source line.
    #[serde(skip)]
    pub line: usize,
}

impl Statement {
    pub fn arg(&self, name: &str) -> Option<&Arg> {
        self.args.iter().find(|(k, _)| k == name).map(|(_, a)| a)
    }

    pub fn var_arg(&self, name: &str) -> Option<&str> {
        self.arg(name).and_then(Arg::as_var)
    }

    pub fn literal_arg(&self, name: &str) -> Option<&str> {
        self.arg(name).and_then(Arg::as_literal)
    }

    /// Variables read by this statement, in argument order, deduplicated.
    /// For EVAL these are the expression placeholders.
    pub fn inputs(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        let args = self.args.iter().filter_map(|(_, a)| a.as_var());
        let placeholders = self.expr.iter().flat_map(|e| e.var_occurrences());
        for v in args.chain(placeholders) {
            if !out.contains(&v) {
                out.push(v);
            }
        }
        out
    }
}

/// A validated program. Equality ignores the original text and line numbers.
#[derive(Clone, Debug, Serialize)]
pub struct Program {
    pub statements: Vec<Statement>,
    #[serde(skip)]
    pub source_text: String,
}

impl PartialEq for Program {
    fn eq(&self, other: &Self) -> bool {
        self.statements.len() == other.statements.len()
            && self
                .statements
                .iter()
                .zip(&other.statements)
                .all(|(a, b)| a.target == b.target && a.module == b.module && a.args == b.args)
    }
}

impl Program {
    pub fn result(&self) -> &Statement {
        self.statements.last().expect("validated program is non-empty")
    }

    /// The variable the RESULT statement returns.
    pub fn result_var(&self) -> &str {
        self.result().var_arg("var").expect("validated RESULT has var")
    }

    pub fn index_of(&self, target: &str) -> Option<usize> {
        self.statements.iter().position(|s| s.target == target)
    }

    pub fn statement(&self, target: &str) -> Option<&Statement> {
        self.statements.iter().find(|s| s.target == target)
    }
}
