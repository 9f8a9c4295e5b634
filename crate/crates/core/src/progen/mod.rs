//! Evaluation programs for open-ended prompts, generated by a chat model
//! prompted with in-context exemplars.
//!
//! The completion is cleaned (code fences, `Program:` labels and prose are
//! stripped), split into statements, and every statement that fails to parse
//! or validate is dropped with a diagnostic. Repair never invents statements.

mod chat;
mod clean;
mod coverage;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsl::{print_program, validate_semantics, EvalProgram};

pub use chat::ChatClient;
pub use clean::{clean_completion, repair_completion, Cleaned, Repaired};
pub use coverage::{content_words, coverage_stats, CoverageReport};

const BUNDLED_EXEMPLARS: &str = include_str!("../../data/exemplars.json");

#[derive(Debug, Error)]
pub enum GenError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("invalid exemplar file: {0}")]
    Exemplars(String),
    #[error("invalid generation config: {0}")]
    Config(String),
    #[error("chat endpoint failed after {attempts} attempt(s): {message}")]
    Endpoint { attempts: u32, message: String },
    #[error("no valid statement in completion ({dropped} dropped)")]
    AllStatementsInvalid {
        dropped: usize,
        diagnostics: Vec<GenDiagnostic>,
    },
    #[error("offline fixture has no completion for prompt {0:?}")]
    OfflineFixtureMiss(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GenDiagnosticKind {
    /// A call-shaped statement that failed to parse or validate.
    DroppedStatement,
    /// Non-program text removed during cleaning.
    StrippedText,
    /// The all-invalid completion was retried once.
    Reprompted,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenDiagnostic {
    pub kind: GenDiagnosticKind,
    pub text: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exemplar {
    pub prompt: String,
    pub program: String,
}

/// Module documentation header plus `(prompt, program)` exemplars.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExemplarSet {
    pub header: String,
    pub exemplars: Vec<Exemplar>,
}

impl ExemplarSet {
    /// The 12 exemplars shipped in `data/exemplars.json`.
    pub fn bundled() -> Self {
        Self::from_json_str(BUNDLED_EXEMPLARS).expect("bundled exemplars are valid")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, GenError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| GenError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_json_str(&text)
    }

    /// Parse and check that every exemplar program is valid. Programs are
    /// stored in canonical form.
    pub fn from_json_str(text: &str) -> Result<Self, GenError> {
        let mut set: ExemplarSet =
            serde_json::from_str(text).map_err(|e| GenError::Exemplars(e.to_string()))?;
        for ex in &mut set.exemplars {
            let program = crate::dsl::parse_program(&ex.program)
                .map_err(|e| GenError::Exemplars(format!("{:?}: {e}", ex.prompt)))?;
            if let Some(d) = validate_semantics(&program)
                .into_iter()
                .find(|d| d.severity == crate::dsl::Severity::Error)
            {
                return Err(GenError::Exemplars(format!("{:?}: {d}", ex.prompt)));
            }
            ex.program = print_program(&program);
        }
        Ok(set)
    }
}

/// Deterministic in-context request: header, exemplar blocks in order, then
/// the target prompt with an empty program slot.
///
/// ```
/// use vprog::progen::{build_icl_request, Exemplar, ExemplarSet};
/// let set = ExemplarSet {
///     header: "Modules: objectEval".into(),
///     exemplars: vec![Exemplar { prompt: "a cat".into(), program: "objectEval(img, 'cat')".into() }],
/// };
/// assert_eq!(
///     build_icl_request("a dog", &set),
///     "Modules: objectEval\n\nPrompt: a cat\nProgram:\nobjectEval(img, 'cat')\n\nPrompt: a dog\nProgram:\n"
/// );
/// ```
pub fn build_icl_request(prompt: &str, exemplars: &ExemplarSet) -> String {
    let mut out = String::new();
    out.push_str(exemplars.header.trim_end());
    out.push_str("\n\n");
    for ex in &exemplars.exemplars {
        out.push_str(&format!(
            "Prompt: {}\nProgram:\n{}\n\n",
            ex.prompt,
            ex.program.trim_end()
        ));
    }
    out.push_str(&format!("Prompt: {prompt}\nProgram:\n"));
    out
}

#[derive(Debug, Clone)]
pub struct GenConfig {
    /// Base URL (`.../v1`) or full chat-completions URL.
    pub endpoint: String,
    pub api_key: Option<String>,
    pub model: String,
    pub temperature: f64,
    pub max_retries: u32,
    /// Answer from a JSON `{prompt: completion}` file instead of the network.
    pub offline_fixture: Option<PathBuf>,
    /// Ask once more when every statement of a completion is invalid.
    pub reprompt_on_all_invalid: bool,
    /// Lower bound between two requests.
    pub min_request_interval: Duration,
    pub timeout: Duration,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            endpoint: "http://localhost:8000/v1".into(),
            api_key: None,
            model: "gpt-35-turbo".into(),
            temperature: 0.0,
            max_retries: 2,
            offline_fixture: None,
            reprompt_on_all_invalid: false,
            min_request_interval: Duration::ZERO,
            timeout: Duration::from_secs(120),
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<(), GenError> {
        if !self.temperature.is_finite() || self.temperature < 0.0 {
            return Err(GenError::Config(format!(
                "temperature {} must be >= 0",
                self.temperature
            )));
        }
        Ok(())
    }
}

/// Something that turns an in-context request into completion text.
pub trait Completer: Send + Sync {
    fn complete(&self, prompt: &str, request: &str) -> Result<String, GenError>;
}

/// Completions looked up by prompt in a JSON map. Never touches the network.
#[derive(Debug, Clone, Default)]
pub struct OfflineCompleter {
    completions: BTreeMap<String, String>,
}

impl OfflineCompleter {
    pub fn new(completions: BTreeMap<String, String>) -> Self {
        OfflineCompleter { completions }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, GenError> {
        let path = path.as_ref();
        let io = |message: String| GenError::Io {
            path: path.display().to_string(),
            message,
        };
        let text = std::fs::read_to_string(path).map_err(|e| io(e.to_string()))?;
        let completions = serde_json::from_str(&text).map_err(|e| io(e.to_string()))?;
        Ok(OfflineCompleter { completions })
    }
}

impl Completer for OfflineCompleter {
    fn complete(&self, prompt: &str, _request: &str) -> Result<String, GenError> {
        self.completions
            .get(prompt)
            .cloned()
            .ok_or_else(|| GenError::OfflineFixtureMiss(prompt.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Generated {
    pub program: EvalProgram,
    pub diagnostics: Vec<GenDiagnostic>,
    pub completion: String,
}

pub struct ProgramGenerator {
    completer: Box<dyn Completer>,
    exemplars: ExemplarSet,
    reprompt_on_all_invalid: bool,
}

impl ProgramGenerator {
    pub fn new(completer: Box<dyn Completer>, exemplars: ExemplarSet) -> Self {
        ProgramGenerator {
            completer,
            exemplars,
            reprompt_on_all_invalid: false,
        }
    }

    /// Offline completer when `cfg.offline_fixture` is set, chat client
    /// otherwise.
    pub fn from_config(cfg: &GenConfig, exemplars: ExemplarSet) -> Result<Self, GenError> {
        cfg.validate()?;
        let completer: Box<dyn Completer> = match &cfg.offline_fixture {
            Some(path) => Box::new(OfflineCompleter::load(path)?),
            None => Box::new(ChatClient::new(cfg)),
        };
        Ok(ProgramGenerator {
            completer,
            exemplars,
            reprompt_on_all_invalid: cfg.reprompt_on_all_invalid,
        })
    }

    pub fn exemplars(&self) -> &ExemplarSet {
        &self.exemplars
    }

    pub fn generate(&self, prompt: &str) -> Result<Generated, GenError> {
        let request = build_icl_request(prompt, &self.exemplars);
        let completion = self.completer.complete(prompt, &request)?;
        match repair_completion(&completion) {
            Ok(r) => Ok(Generated {
                program: r.program,
                diagnostics: r.diagnostics,
                completion,
            }),
            Err(GenError::AllStatementsInvalid { diagnostics, .. })
                if self.reprompt_on_all_invalid =>
            {
                let completion = self.completer.complete(prompt, &request)?;
                let mut r = repair_completion(&completion)?;
                let mut all = diagnostics;
                all.push(GenDiagnostic {
                    kind: GenDiagnosticKind::Reprompted,
                    text: String::new(),
                    message: "first completion had no valid statement".into(),
                });
                all.append(&mut r.diagnostics);
                Ok(Generated {
                    program: r.program,
                    diagnostics: all,
                    completion,
                })
            }
            Err(e) => Err(e),
        }
    }
}

/// One-shot convenience over [`ProgramGenerator`] with the bundled exemplars.
pub fn generate_program(prompt: &str, cfg: &GenConfig) -> Result<Generated, GenError> {
    ProgramGenerator::from_config(cfg, ExemplarSet::bundled())?.generate(prompt)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_set_has_twelve_valid_exemplars() {
        let set = ExemplarSet::bundled();
        assert_eq!(set.exemplars.len(), 12);
        for ex in &set.exemplars {
            let p = crate::dsl::parse_program(&ex.program).unwrap();
            assert_eq!(print_program(&p), ex.program);
        }
    }

    #[test]
    fn request_contains_exemplars_in_order() {
        let set = ExemplarSet {
            header: "H".into(),
            exemplars: vec![
                Exemplar {
                    prompt: "p1".into(),
                    program: "objectEval(img, 'a')".into(),
                },
                Exemplar {
                    prompt: "p2".into(),
                    program: "objectEval(img, 'b')".into(),
                },
            ],
        };
        let r = build_icl_request("target", &set);
        let i1 = r.find("Prompt: p1").unwrap();
        let i2 = r.find("Prompt: p2").unwrap();
        let it = r.find("Prompt: target").unwrap();
        assert!(i1 < i2 && i2 < it);
        assert!(r.ends_with("Prompt: target\nProgram:\n"));
        assert_eq!(r, build_icl_request("target", &set));

        let empty = ExemplarSet {
            header: "H".into(),
            exemplars: vec![],
        };
        assert_eq!(build_icl_request("t", &empty), "H\n\nPrompt: t\nProgram:\n");
    }

    #[test]
    fn bad_exemplar_is_rejected() {
        let text =
            r#"{"header": "h", "exemplars": [{"prompt": "p", "program": "fooEval(img, 'x')"}]}"#;
        assert!(matches!(
            ExemplarSet::from_json_str(text),
            Err(GenError::Exemplars(_))
        ));
    }

    struct Scripted(std::sync::Mutex<Vec<String>>);

    impl Completer for Scripted {
        fn complete(&self, _: &str, _: &str) -> Result<String, GenError> {
            Ok(self.0.lock().unwrap().remove(0))
        }
    }

    #[test]
    fn reprompt_once_on_all_invalid() {
        let scripted = Scripted(std::sync::Mutex::new(vec![
            "fooEval(img, 'x')".into(),
            "objectEval(img, 'dog')".into(),
        ]));
        let mut g = ProgramGenerator::new(Box::new(scripted), ExemplarSet::bundled());
        g.reprompt_on_all_invalid = true;
        let out = g.generate("a dog").unwrap();
        assert_eq!(out.program.calls.len(), 1);
        assert!(out
            .diagnostics
            .iter()
            .any(|d| d.kind == GenDiagnosticKind::Reprompted));
    }

    #[test]
    fn offline_miss() {
        let g = ProgramGenerator::new(
            Box::new(OfflineCompleter::default()),
            ExemplarSet::bundled(),
        );
        assert!(matches!(
            g.generate("a dog"),
            Err(GenError::OfflineFixtureMiss(_))
        ));
    }

    #[test]
    fn negative_temperature_rejected() {
        let cfg = GenConfig {
            temperature: -0.5,
            ..Default::default()
        };
        assert!(matches!(cfg.validate(), Err(GenError::Config(_))));
    }
}
