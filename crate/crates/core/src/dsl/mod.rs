//! Evaluation-program language.
//!
//! A program is a straight-line list of module calls separated by `;` or
//! newlines:
//!
//! ```text
//! program := sep* stmt (sep+ stmt)* sep*        sep := ';' | NEWLINE
//! stmt    := IDENT '(' arg (',' arg)* ')'
//! arg     := 'img' | STRING                     STRING := '...' with '' as an escaped quote
//! ```
//!
//! Newlines inside parentheses are ordinary whitespace. `img` is a keyword
//! and may only appear as the first argument.

mod parser;
pub(crate) mod validate;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use parser::{parse_program, ParseError, ParseErrorKind};
pub use validate::{validate_semantics, Diagnostic, Severity};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModuleName {
    #[serde(rename = "objectEval")]
    ObjectEval,
    #[serde(rename = "countEval")]
    CountEval,
    #[serde(rename = "spatialEval")]
    SpatialEval,
    #[serde(rename = "scaleEval")]
    ScaleEval,
    #[serde(rename = "textEval")]
    TextEval,
    #[serde(rename = "vqa")]
    Vqa,
}

impl ModuleName {
    pub const ALL: [ModuleName; 6] = [
        ModuleName::ObjectEval,
        ModuleName::CountEval,
        ModuleName::SpatialEval,
        ModuleName::ScaleEval,
        ModuleName::TextEval,
        ModuleName::Vqa,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ModuleName::ObjectEval => "objectEval",
            ModuleName::CountEval => "countEval",
            ModuleName::SpatialEval => "spatialEval",
            ModuleName::ScaleEval => "scaleEval",
            ModuleName::TextEval => "textEval",
            ModuleName::Vqa => "vqa",
        }
    }

    /// Number of arguments including `img`.
    pub fn arity(self) -> usize {
        match self {
            ModuleName::ObjectEval | ModuleName::TextEval => 2,
            ModuleName::CountEval => 3,
            ModuleName::SpatialEval | ModuleName::ScaleEval | ModuleName::Vqa => 4,
        }
    }
}

impl FromStr for ModuleName {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        ModuleName::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or(())
    }
}

impl fmt::Display for ModuleName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Arg {
    Img,
    Str(String),
}

/// Byte range in the source text.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

/// One statement. Equality ignores the span.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModuleCall {
    pub module: ModuleName,
    pub args: Vec<Arg>,
    pub span: Span,
}

impl PartialEq for ModuleCall {
    fn eq(&self, other: &Self) -> bool {
        self.module == other.module && self.args == other.args
    }
}

impl Eq for ModuleCall {}

impl ModuleCall {
    /// Build a call from its string arguments; `img` is prepended.
    ///
    /// Panics if the number of strings does not match the module's arity.
    pub fn new(module: ModuleName, strings: &[&str]) -> Self {
        assert_eq!(strings.len() + 1, module.arity(), "arity of {module}");
        let mut args = vec![Arg::Img];
        args.extend(strings.iter().map(|s| Arg::Str((*s).to_string())));
        ModuleCall {
            module,
            args,
            span: Span::default(),
        }
    }

    /// String arguments after `img`.
    pub fn strings(&self) -> Vec<&str> {
        self.args
            .iter()
            .filter_map(|a| match a {
                Arg::Str(s) => Some(s.as_str()),
                Arg::Img => None,
            })
            .collect()
    }

    pub fn to_source(&self) -> String {
        self.to_string()
    }
}

/// Quote a string literal, doubling embedded quotes.
pub fn quote(s: &str) -> String {
    format!("'{}'", s.replace('\'', "''"))
}

impl fmt::Display for ModuleCall {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.module)?;
        for (i, a) in self.args.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            match a {
                Arg::Img => f.write_str("img")?,
                Arg::Str(s) => f.write_str(&quote(s))?,
            }
        }
        f.write_str(")")
    }
}

/// A parsed program. Equality compares calls only.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalProgram {
    pub calls: Vec<ModuleCall>,
    pub source: String,
}

impl PartialEq for EvalProgram {
    fn eq(&self, other: &Self) -> bool {
        self.calls == other.calls
    }
}

impl Eq for EvalProgram {}

impl EvalProgram {
    /// Assemble a program from calls. Returns `None` for an empty list.
    pub fn from_calls(calls: Vec<ModuleCall>) -> Option<Self> {
        if calls.is_empty() {
            return None;
        }
        let mut p = EvalProgram {
            calls,
            source: String::new(),
        };
        p.source = print_program(&p);
        Some(p)
    }
}

/// Canonical text: one statement per line, `, ` between arguments, no
/// trailing newline.
pub fn print_program(p: &EvalProgram) -> String {
    p.calls
        .iter()
        .map(ModuleCall::to_string)
        .collect::<Vec<_>>()
        .join("\n")
}

impl fmt::Display for EvalProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&print_program(self))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn printing_is_canonical() {
        let p = EvalProgram::from_calls(vec![ModuleCall::new(ModuleName::ObjectEval, &["dog"])])
            .unwrap();
        assert_eq!(print_program(&p), "objectEval(img, 'dog')");
        let q = EvalProgram::from_calls(vec![ModuleCall::new(ModuleName::TextEval, &["it's"])])
            .unwrap();
        assert_eq!(print_program(&q), "textEval(img, 'it''s')");
        assert_eq!(parse_program(&print_program(&q)).unwrap(), q);
    }

    #[test]
    fn equality_ignores_spans() {
        let a = parse_program("objectEval(img,'dog')").unwrap();
        let b = parse_program("\n\n  objectEval( img , 'dog' )  ").unwrap();
        assert_ne!(a.calls[0].span, b.calls[0].span);
        assert_eq!(a, b);
    }
}
