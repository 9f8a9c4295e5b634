use std::collections::BTreeSet;

use serde::Serialize;

use crate::dsl::{Arg, EvalProgram};
use crate::text::normalize;

const STOPWORDS: &[&str] = &[
    "a", "an", "the", "of", "in", "on", "at", "to", "and", "or", "is", "are", "was", "were", "be",
    "with", "that", "this", "it", "its", "by", "for", "from", "as", "photo", "image", "picture",
    "there", "which", "who", "has", "have", "his", "her", "their", "some",
];

/// Normalized content words of `s` in first-occurrence order.
pub fn content_words(s: &str) -> Vec<String> {
    let mut seen = BTreeSet::new();
    normalize(s)
        .split(' ')
        .filter(|w| !w.is_empty() && !STOPWORDS.contains(w))
        .filter(|w| seen.insert(w.to_string()))
        .map(str::to_string)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverageReport {
    pub covered: Vec<String>,
    pub uncovered: Vec<String>,
    /// Covered share of content words; 1 when the prompt has none.
    pub coverage: f64,
}

/// Which prompt content words appear in some string argument of the program.
///
/// ```
/// use vprog::dsl::parse_program;
/// use vprog::progen::coverage_stats;
/// let p = parse_program("objectEval(img, 'dog')").unwrap();
/// let c = coverage_stats("a red dog", &p);
/// assert_eq!(c.coverage, 0.5);
/// assert_eq!(c.uncovered, ["red"]);
/// ```
pub fn coverage_stats(prompt: &str, program: &EvalProgram) -> CoverageReport {
    let mut program_words = BTreeSet::new();
    for call in &program.calls {
        for arg in &call.args {
            if let Arg::Str(s) = arg {
                program_words.extend(
                    normalize(s)
                        .split(' ')
                        .filter(|w| !w.is_empty())
                        .map(str::to_string),
                );
            }
        }
    }
    let (covered, uncovered): (Vec<_>, Vec<_>) = content_words(prompt)
        .into_iter()
        .partition(|w| program_words.contains(w));
    let total = covered.len() + uncovered.len();
    let coverage = if total == 0 {
        1.0
    } else {
        covered.len() as f64 / total as f64
    };
    CoverageReport {
        covered,
        uncovered,
        coverage,
    }
}
