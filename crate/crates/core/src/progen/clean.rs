use super::{GenDiagnostic, GenDiagnosticKind, GenError};
use crate::dsl::validate::check_call;
use crate::dsl::{parse_program, EvalProgram, Severity};

/// Statement candidates extracted from raw completion text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cleaned {
    /// Call-shaped statements in completion order.
    pub statements: Vec<String>,
    pub diagnostics: Vec<GenDiagnostic>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Repaired {
    pub program: EvalProgram,
    pub diagnostics: Vec<GenDiagnostic>,
}

/// Split at `;` and newlines that are outside quotes and parentheses.
fn split_statements(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut depth = 0usize;
    let mut in_str = false;
    let mut start = 0;
    for (i, c) in text.char_indices() {
        match c {
            '\'' => in_str = !in_str,
            '(' if !in_str => depth += 1,
            ')' if !in_str => depth = depth.saturating_sub(1),
            ';' | '\n' if !in_str && depth == 0 => {
                out.push(&text[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    out.push(&text[start..]);
    out
}

fn looks_like_call(s: &str) -> bool {
    let ident_len = s
        .char_indices()
        .take_while(|(i, c)| c.is_ascii_alphabetic() || *c == '_' || (*i > 0 && c.is_ascii_digit()))
        .count();
    ident_len > 0 && s[ident_len..].trim_start().starts_with('(')
}

fn strip_label(s: &str) -> &str {
    let t = s.trim();
    match t.get(..8) {
        Some(head) if head.eq_ignore_ascii_case("program:") => t[8..].trim(),
        _ => t,
    }
}

/// Strip code fences, `Program:` labels and prose; stop at a following
/// `Prompt:` block.
pub fn clean_completion(raw: &str) -> Cleaned {
    let mut diagnostics = Vec::new();
    let mut kept = String::new();
    for line in raw.lines() {
        let t = line.trim();
        if t.starts_with("```") {
            continue;
        }
        if t.get(..7)
            .is_some_and(|h| h.eq_ignore_ascii_case("prompt:"))
        {
            let rest: Vec<&str> = raw.lines().skip_while(|l| *l != line).collect();
            diagnostics.push(GenDiagnostic {
                kind: GenDiagnosticKind::StrippedText,
                text: rest.join("\n"),
                message: "ignored text from the next Prompt: block on".into(),
            });
            break;
        }
        kept.push_str(line);
        kept.push('\n');
    }

    let mut statements = Vec::new();
    for seg in split_statements(&kept) {
        let s = strip_label(seg);
        if s.is_empty() {
            continue;
        }
        if looks_like_call(s) {
            statements.push(s.to_string());
        } else {
            diagnostics.push(GenDiagnostic {
                kind: GenDiagnosticKind::StrippedText,
                text: s.to_string(),
                message: "not a module call".into(),
            });
        }
    }
    Cleaned {
        statements,
        diagnostics,
    }
}

/// Clean, then keep only statements that parse and validate without errors.
///
/// ```
/// let r = vprog::progen::repair_completion(
///     "```\nobjectEval(img, 'dog')\nfooEval(img, 'x')\ncountEval(img, 'dog', '==2')\n```",
/// ).unwrap();
/// assert_eq!(r.program.calls.len(), 2);
/// assert_eq!(r.diagnostics.len(), 1);
/// ```
pub fn repair_completion(raw: &str) -> Result<Repaired, GenError> {
    let Cleaned {
        statements,
        mut diagnostics,
    } = clean_completion(raw);
    let mut calls = Vec::new();
    let mut dropped = 0;
    for stmt in statements {
        let reason = match parse_program(&stmt) {
            Err(e) => Some(e.kind.to_string()),
            Ok(p) if p.calls.len() != 1 => Some("more than one statement".to_string()),
            Ok(mut p) => {
                let call = p.calls.remove(0);
                match check_call(calls.len(), &call)
                    .into_iter()
                    .find(|d| d.severity == Severity::Error)
                {
                    Some(d) => Some(d.message),
                    None => {
                        calls.push(call);
                        None
                    }
                }
            }
        };
        if let Some(message) = reason {
            dropped += 1;
            diagnostics.push(GenDiagnostic {
                kind: GenDiagnosticKind::DroppedStatement,
                text: stmt,
                message,
            });
        }
    }
    match EvalProgram::from_calls(calls) {
        Some(program) => Ok(Repaired {
            program,
            diagnostics,
        }),
        None => Err(GenError::AllStatementsInvalid {
            dropped,
            diagnostics,
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::print_program;

    fn dropped(r: &Repaired) -> usize {
        r.diagnostics
            .iter()
            .filter(|d| d.kind == GenDiagnosticKind::DroppedStatement)
            .count()
    }

    #[test]
    fn plain_completion() {
        let r = repair_completion("objectEval(img, 'dog')\ncountEval(img, 'dog', '==2')").unwrap();
        assert_eq!(
            print_program(&r.program),
            "objectEval(img, 'dog')\ncountEval(img, 'dog', '==2')"
        );
        assert!(r.diagnostics.is_empty());
    }

    #[test]
    fn fences_and_labels() {
        let plain =
            repair_completion("objectEval(img, 'dog')\ncountEval(img, 'dog', '==2')").unwrap();
        let fenced = repair_completion(
            "Program:\n```python\nobjectEval(img, 'dog')\ncountEval(img, 'dog', '==2')\n```\n",
        )
        .unwrap();
        assert_eq!(fenced.program, plain.program);
        let inline =
            repair_completion("Program: objectEval(img, 'dog'); countEval(img, 'dog', '==2')")
                .unwrap();
        assert_eq!(inline.program, plain.program);
    }

    #[test]
    fn bogus_call_is_dropped() {
        let r = repair_completion(
            "objectEval(img, 'dog')\nfooEval(img,'x')\ncountEval(img, 'dog', '==2')",
        )
        .unwrap();
        assert_eq!(r.program.calls.len(), 2);
        assert_eq!(dropped(&r), 1);
        assert_eq!(r.diagnostics[0].text, "fooEval(img,'x')");
    }

    #[test]
    fn invalid_semantics_are_dropped() {
        let r = repair_completion(
            "objectEval(img, 'dog')\nvqa(img, 'is it red?', 'yes|no', 'maybe')\ncountEval(img, 'dog')",
        )
        .unwrap();
        assert_eq!(r.program.calls.len(), 1);
        assert_eq!(dropped(&r), 2);
    }

    #[test]
    fn prose_and_next_prompt_are_stripped() {
        let r = repair_completion(
            "Sure! Here is the program.\nobjectEval(img, 'cat')\nThis checks the cat.\n\nPrompt: a dog\nProgram:\nobjectEval(img, 'dog')",
        )
        .unwrap();
        assert_eq!(print_program(&r.program), "objectEval(img, 'cat')");
        assert_eq!(dropped(&r), 0);
    }

    #[test]
    fn multiline_call_survives_splitting() {
        let r = repair_completion(
            "spatialEval(img,\n 'dog',\n 'cat',\n 'left')\nobjectEval(img, 'a;b')",
        )
        .unwrap();
        assert_eq!(r.program.calls.len(), 2);
        assert_eq!(r.program.calls[1].strings(), ["a;b"]);
    }

    #[test]
    fn all_invalid() {
        assert!(matches!(
            repair_completion("fooEval(img, 'x')\nno program here"),
            Err(GenError::AllStatementsInvalid { dropped: 1, .. })
        ));
    }
}
