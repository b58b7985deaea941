//! Line-oriented parser and validator.

use std::collections::HashMap;

use super::ast::{Arg, ArgKind, ModuleKind, Program, Statement, VarType};
use super::ParseError;
use crate::evalexpr::parse_eval;
use crate::value::ImageName;

/// Parses and validates program text.
pub fn parse_program(text: &str) -> Result<Program, ParseError> {
    let mut statements = Vec::new();
    let mut types: HashMap<String, VarType> = ImageName::ALL
        .iter()
        .map(|n| (n.as_str().to_string(), VarType::Image))
        .collect();

    for (i, raw) in text.split('\n').enumerate() {
        let line_no = i + 1;
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if line.trim().is_empty() {
            continue;
        }
        if let Some(prev) = statements.last() {
            let prev: &Statement = prev;
            if prev.module == ModuleKind::Result {
                return Err(ParseError::ResultNotLast { line: prev.line });
            }
        }
        let raw_stmt = RawStatement::parse(line, line_no)?;
        let stmt = validate(raw_stmt, &types)?;
        if let Some(t) = stmt.module.output() {
            types.insert(stmt.target.clone(), t);
        } else {
            // RESULT's target is not readable by later statements; there are none.
            types.insert(stmt.target.clone(), VarType::Answer);
        }
        statements.push(stmt);
    }

    match statements.last() {
        Some(s) if s.module == ModuleKind::Result => {}
        _ => return Err(ParseError::MissingResult),
    }
    Ok(Program {
        statements,
        source_text: text.to_string(),
    })
}

struct RawArg {
    key: String,
    value: Arg,
    col: usize,
}

struct RawStatement {
    line: usize,
    target: String,
    target_col: usize,
    module: String,
    module_col: usize,
    args: Vec<RawArg>,
}

struct Cursor<'a> {
    chars: Vec<(usize, char)>,
    pos: usize,
    line: usize,
    text: &'a str,
}

impl<'a> Cursor<'a> {
    fn new(text: &'a str, line: usize) -> Self {
        Cursor {
            chars: text.char_indices().collect(),
            pos: 0,
            line,
            text,
        }
    }

    /// 1-based column (in characters) of the current position.
    fn col(&self) -> usize {
        self.pos + 1
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).map(|&(_, c)| c)
    }

    fn peek_at(&self, k: usize) -> Option<char> {
        self.chars.get(self.pos + k).map(|&(_, c)| c)
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek();
        if c.is_some() {
            self.pos += 1;
        }
        c
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(c) if c == ' ' || c == '\t') {
            self.pos += 1;
        }
    }

    fn err(&self, msg: impl Into<String>) -> ParseError {
        ParseError::Syntax {
            line: self.line,
            col: self.col(),
            msg: msg.into(),
        }
    }

    fn expect(&mut self, want: char) -> Result<(), ParseError> {
        self.skip_ws();
        match self.peek() {
            Some(c) if c == want => {
                self.pos += 1;
                Ok(())
            }
            Some(c) => Err(self.err(format!("expected `{want}`, found `{c}`"))),
            None => Err(self.err(format!("expected `{want}`, found end of line"))),
        }
    }

    fn ident(&mut self, what: &str) -> Result<(String, usize), ParseError> {
        self.skip_ws();
        let col = self.col();
        match self.peek() {
            Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
            Some(c) => return Err(self.err(format!("expected {what}, found `{c}`"))),
            None => return Err(self.err(format!("expected {what}, found end of line"))),
        }
        let start = self.chars[self.pos].0;
        while matches!(self.peek(), Some(c) if c.is_ascii_alphanumeric() || c == '_') {
            self.pos += 1;
        }
        let end = self.chars.get(self.pos).map_or(self.text.len(), |&(b, _)| b);
        Ok((self.text[start..end].to_string(), col))
    }

    /// A quoted literal. A quote character closes the literal only when it is
    /// followed (after optional blanks) by `,` or `)`, so payloads may contain
    /// unescaped quotes of either kind. Backslash escapes `\\`, `\'`, `\"`.
    fn literal(&mut self) -> Result<String, ParseError> {
        let quote = self.bump().expect("caller checked the opening quote");
        let open_col = self.col() - 1;
        let mut out = String::new();
        loop {
            match self.bump() {
                None => {
                    return Err(ParseError::Syntax {
                        line: self.line,
                        col: open_col,
                        msg: "unterminated string literal".into(),
                    })
                }
                Some('\\') => match self.bump() {
                    Some(c @ ('\\' | '\'' | '"')) => out.push(c),
                    Some(c) => {
                        self.pos -= 1;
                        return Err(self.err(format!("unknown escape `\\{c}`")));
                    }
                    None => return Err(self.err("dangling backslash")),
                },
                Some(c) if c == quote && self.closes_here() => return Ok(out),
                Some(c) => out.push(c),
            }
        }
    }

    fn closes_here(&self) -> bool {
        let mut k = 0;
        while matches!(self.peek_at(k), Some(' ' | '\t')) {
            k += 1;
        }
        matches!(self.peek_at(k), Some(',' | ')'))
    }
}

impl RawStatement {
    fn parse(line: &str, line_no: usize) -> Result<Self, ParseError> {
        let mut cur = Cursor::new(line, line_no);
        let (target, target_col) = cur.ident("a variable name")?;
        cur.expect('=')?;
        let (module, module_col) = cur.ident("a module name")?;
        cur.expect('(')?;
        let mut args = Vec::new();
        cur.skip_ws();
        if cur.peek() == Some(')') {
            cur.bump();
        } else {
            loop {
                let (key, col) = cur.ident("an argument name")?;
                cur.expect('=')?;
                cur.skip_ws();
                let value = match cur.peek() {
                    Some('\'' | '"') => Arg::Literal(cur.literal()?),
                    Some(c) if c.is_ascii_alphabetic() || c == '_' => Arg::Var(cur.ident("a value")?.0),
                    Some(c) => return Err(cur.err(format!("expected a variable or quoted literal, found `{c}`"))),
                    None => return Err(cur.err("expected a value, found end of line")),
                };
                args.push(RawArg { key, value, col });
                cur.skip_ws();
                match cur.bump() {
                    Some(',') => continue,
                    Some(')') => break,
                    Some(c) => {
                        cur.pos -= 1;
                        return Err(cur.err(format!("expected `,` or `)`, found `{c}`")));
                    }
                    None => return Err(cur.err("expected `,` or `)`, found end of line")),
                }
            }
        }
        cur.skip_ws();
        if let Some(c) = cur.peek() {
            return Err(cur.err(format!("unexpected `{c}` after statement")));
        }
        Ok(RawStatement {
            line: line_no,
            target,
            target_col,
            module,
            module_col,
            args,
        })
    }
}

fn validate(raw: RawStatement, types: &HashMap<String, VarType>) -> Result<Statement, ParseError> {
    let line = raw.line;
    let module = ModuleKind::from_name(&raw.module).ok_or_else(|| ParseError::UnknownModule {
        line,
        col: raw.module_col,
        name: raw.module.clone(),
    })?;
    if ImageName::from_name(&raw.target).is_some() {
        return Err(ParseError::ReservedName { line, name: raw.target });
    }
    if types.contains_key(&raw.target) {
        return Err(ParseError::DuplicateAssignment {
            line,
            col: raw.target_col,
            name: raw.target,
        });
    }
    let sig = module.signature();
    let mut slots: Vec<Option<Arg>> = vec![None; sig.len()];
    for a in raw.args {
        let Some(k) = sig.iter().position(|(name, _)| *name == a.key) else {
            return Err(ParseError::UnknownArgument {
                line,
                col: a.col,
                module,
                arg: a.key,
            });
        };
        if slots[k].is_some() {
            return Err(ParseError::DuplicateArgument {
                line,
                col: a.col,
                arg: a.key,
            });
        }
        let kind = sig[k].1;
        check_arg(line, module, &a.key, kind, &a.value, types)?;
        slots[k] = Some(a.value);
    }
    let mut args = Vec::with_capacity(sig.len());
    for ((name, _), slot) in sig.iter().zip(slots) {
        match slot {
            Some(v) => args.push((name.to_string(), v)),
            None => {
                return Err(ParseError::MissingArgument {
                    line,
                    module,
                    arg: name.to_string(),
                })
            }
        }
    }

    let expr = if module == ModuleKind::Eval {
        let text = args[0].1.as_literal().expect("checked literal");
        let ast = parse_eval(text).map_err(|e| ParseError::Eval { line, source: e })?;
        let occ = ast.var_occurrences();
        if occ.is_empty() {
            return Err(ParseError::ArgumentType {
                line,
                arg: "expr".into(),
                msg: "EVAL expression references no variables".into(),
            });
        }
        for v in occ {
            match types.get(v) {
                None => {
                    return Err(ParseError::UseBeforeDefine {
                        line,
                        name: v.to_string(),
                    })
                }
                Some(VarType::Answer) => {}
                Some(t) => {
                    return Err(ParseError::ArgumentType {
                        line,
                        arg: "expr".into(),
                        msg: format!("placeholder {{{v}}} holds a {t:?} value, not an answer"),
                    })
                }
            }
        }
        Some(ast)
    } else {
        None
    };

    Ok(Statement {
        target: raw.target,
        module,
        args,
        expr,
        line,
    })
}

fn check_arg(
    line: usize,
    module: ModuleKind,
    key: &str,
    kind: ArgKind,
    value: &Arg,
    types: &HashMap<String, VarType>,
) -> Result<(), ParseError> {
    let type_err = |msg: String| ParseError::ArgumentType {
        line,
        arg: key.to_string(),
        msg,
    };
    match (kind, value) {
        (ArgKind::Literal, Arg::Literal(_)) => Ok(()),
        (ArgKind::Literal, Arg::Var(v)) => Err(type_err(format!(
            "{module} expects a quoted literal for `{key}`, found variable {v}"
        ))),
        (_, Arg::Literal(_)) => Err(type_err(format!(
            "{module} expects a variable for `{key}`, found a literal"
        ))),
        (ArgKind::AnyVar, Arg::Var(v)) => match types.get(v) {
            Some(_) => Ok(()),
            None => Err(ParseError::UseBeforeDefine { line, name: v.clone() }),
        },
        (ArgKind::Var(want), Arg::Var(v)) => match types.get(v) {
            None => Err(ParseError::UseBeforeDefine { line, name: v.clone() }),
            Some(t) if *t == want => Ok(()),
            Some(t) => Err(type_err(format!(
                "{module} expects {want:?} for `{key}`, but {v} holds {t:?}"
            ))),
        },
    }
}
