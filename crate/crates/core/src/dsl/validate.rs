use std::fmt;

use serde::{Deserialize, Serialize};

use super::{EvalProgram, ModuleCall, ModuleName};
use crate::modules::{split_choices, CountExpr, ScaleRelation, SpatialRelation};
use crate::text::normalize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Info,
    Warning,
    Error,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub severity: Severity,
    /// Index of the offending statement.
    pub statement: usize,
    pub code: &'static str,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let level = match self.severity {
            Severity::Info => "info",
            Severity::Warning => "warning",
            Severity::Error => "error",
        };
        write!(
            f,
            "{level}[{}] statement {}: {}",
            self.code,
            self.statement + 1,
            self.message
        )
    }
}

/// Check the module-specific meaning of string arguments.
///
/// Returns an empty list iff the program is fully clean. Relations that fall
/// back to VQA produce an info-level `vqa-fallback` diagnostic.
pub fn validate_semantics(p: &EvalProgram) -> Vec<Diagnostic> {
    p.calls
        .iter()
        .enumerate()
        .flat_map(|(i, c)| check_call(i, c))
        .collect()
}

pub(crate) fn check_call(i: usize, call: &ModuleCall) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let mut push = |severity, code, message: String| {
        out.push(Diagnostic {
            severity,
            statement: i,
            code,
            message,
        })
    };
    let s = call.strings();
    let object_args = match call.module {
        ModuleName::ObjectEval | ModuleName::CountEval => 1,
        ModuleName::SpatialEval | ModuleName::ScaleEval => 2,
        ModuleName::TextEval | ModuleName::Vqa => 0,
    };
    for obj in s.iter().take(object_args) {
        if obj.trim().is_empty() {
            push(
                Severity::Error,
                "empty-object",
                "object description is empty".into(),
            );
        }
    }
    match call.module {
        ModuleName::ObjectEval => {}
        ModuleName::CountEval => {
            if let Err(e) = s[1].parse::<CountExpr>() {
                push(Severity::Error, "bad-count-expr", e.to_string());
            }
        }
        ModuleName::SpatialEval => {
            if let SpatialRelation::Other(r) = SpatialRelation::parse(s[2]) {
                push(
                    Severity::Info,
                    "vqa-fallback",
                    format!("spatial relation {r:?} is not geometric; vqa will be asked"),
                );
            }
        }
        ModuleName::ScaleEval => {
            if let ScaleRelation::Other(r) = ScaleRelation::parse(s[2]) {
                push(
                    Severity::Info,
                    "vqa-fallback",
                    format!("scale relation {r:?} is not geometric; vqa will be asked"),
                );
            }
        }
        ModuleName::TextEval => {
            if normalize(s[0]).is_empty() {
                push(
                    Severity::Error,
                    "empty-text",
                    "target text is empty after normalization".into(),
                );
            }
        }
        ModuleName::Vqa => {
            if s[0].trim().is_empty() {
                push(
                    Severity::Error,
                    "empty-question",
                    "question is empty".into(),
                );
            }
            match split_choices(s[1]) {
                Err(e) => push(Severity::Error, "bad-choices", e.to_string()),
                Ok(choices) => {
                    let expected = normalize(s[2]);
                    if !choices.iter().any(|c| normalize(c) == expected) {
                        push(
                            Severity::Error,
                            "answer-not-in-choices",
                            format!("expected answer {:?} is not one of {choices:?}", s[2]),
                        );
                    }
                }
            }
        }
    }
    out
}
