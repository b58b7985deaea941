use std::fmt;

use super::ast::{Arg, Program, Statement};

/// Quotes a literal so that the parser reads it back unchanged. Single quotes
/// are preferred; double quotes are used when only single quotes occur in the
/// payload. The chosen quote and backslashes are escaped.
pub fn quote_literal(payload: &str) -> String {
    let q = if payload.contains('\'') && !payload.contains('"') {
        '"'
    } else {
        '\''
    };
    let mut out = String::with_capacity(payload.len() + 2);
    out.push(q);
    for c in payload.chars() {
        if c == q || c == '\\' {
            out.push('\\');
        }
        out.push(c);
    }
    out.push(q);
    out
}

impl fmt::Display for Statement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}={}(", self.target, self.module)?;
        for (i, (k, v)) in self.args.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            match v {
                Arg::Var(name) => write!(f, "{k}={name}")?,
                Arg::Literal(s) => write!(f, "{k}={}", quote_literal(s))?,
            }
        }
        f.write_str(")")
    }
}

/// Canonical text: one statement per line, no blanks, trailing newline.
impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.statements {
            writeln!(f, "{s}")?;
        }
        Ok(())
    }
}
