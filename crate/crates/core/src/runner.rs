//! Program execution and score aggregation.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsl::{print_program, EvalProgram};
use crate::modules::{evaluate_call, ModuleConfig, ModuleResult};
use crate::perception::PerceptionBackend;

/// How errored statements enter the mean.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ErrorPolicy {
    /// Errored statements score 0 and stay in the denominator.
    #[default]
    CountAsZero,
    /// Errored statements are left out of the mean.
    Exclude,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(flatten)]
    pub modules: ModuleConfig,
    pub error_policy: ErrorPolicy,
}

/// Flag set when every statement was excluded and the score defaulted to 0.
pub const FLAG_NO_SCORED_STATEMENTS: &str = "no-scored-statements";

/// Per-image evaluation record. Embeds the config it was produced with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub skill: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    pub image: String,
    pub prompt: String,
    pub program: String,
    pub score: f64,
    pub results: Vec<ModuleResult>,
    pub config: RunConfig,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<String>,
}

impl EvalReport {
    pub fn errored_statements(&self) -> usize {
        self.results.iter().filter(|r| r.errored).count()
    }
}

/// Mean of per-statement scores under `policy`, plus whether the denominator
/// was empty.
pub fn aggregate(results: &[ModuleResult], policy: ErrorPolicy) -> (f64, bool) {
    let counted: Vec<u8> = results
        .iter()
        .filter(|r| policy == ErrorPolicy::CountAsZero || !r.errored)
        .map(|r| if r.errored { 0 } else { r.score })
        .collect();
    if counted.is_empty() {
        return (0.0, true);
    }
    let sum: u32 = counted.iter().map(|&s| u32::from(s)).sum();
    (f64::from(sum) / counted.len() as f64, false)
}

/// Run every statement in order against one image.
pub fn run_program(
    backend: &dyn PerceptionBackend,
    image: &str,
    program: &EvalProgram,
    prompt: &str,
    cfg: &RunConfig,
) -> EvalReport {
    let results: Vec<ModuleResult> = program
        .calls
        .iter()
        .map(|c| evaluate_call(backend, image, c, &cfg.modules))
        .collect();
    let (score, empty) = aggregate(&results, cfg.error_policy);
    EvalReport {
        id: None,
        skill: None,
        model: None,
        image: image.to_string(),
        prompt: prompt.to_string(),
        program: print_program(program),
        score,
        results,
        config: *cfg,
        flags: if empty {
            vec![FLAG_NO_SCORED_STATEMENTS.to_string()]
        } else {
            Vec::new()
        },
    }
}

#[derive(Debug, Clone)]
pub struct BatchItem {
    pub image: String,
    pub program: EvalProgram,
    pub prompt: String,
    pub id: Option<String>,
    pub skill: Option<String>,
    pub model: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchSummary {
    pub count: usize,
    /// `None` for an empty batch.
    pub mean_score: Option<f64>,
    pub undefined: bool,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub per_skill: BTreeMap<String, f64>,
    pub errored_statements: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchOutput {
    pub reports: Vec<EvalReport>,
    pub summary: BatchSummary,
}

impl BatchOutput {
    /// One report per line followed by `{"summary": {...}}`.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.reports {
            out.push_str(&serde_json::to_string(r).expect("reports serialize"));
            out.push('\n');
        }
        let summary = serde_json::json!({ "summary": self.summary });
        out.push_str(&summary.to_string());
        out.push('\n');
        out
    }
}

#[derive(Debug, Error)]
pub enum BatchError {
    #[error("parallelism must be at least 1")]
    ZeroParallelism,
    #[error("cannot build worker pool: {0}")]
    Pool(String),
}

pub fn summarize_batch(reports: &[EvalReport]) -> BatchSummary {
    let mean = |xs: &[f64]| xs.iter().sum::<f64>() / xs.len() as f64;
    let scores: Vec<f64> = reports.iter().map(|r| r.score).collect();
    let mut by_skill: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for r in reports {
        if let Some(skill) = &r.skill {
            by_skill.entry(skill.clone()).or_default().push(r.score);
        }
    }
    BatchSummary {
        count: reports.len(),
        mean_score: (!scores.is_empty()).then(|| mean(&scores)),
        undefined: scores.is_empty(),
        per_skill: by_skill.into_iter().map(|(k, v)| (k, mean(&v))).collect(),
        errored_statements: reports.iter().map(EvalReport::errored_statements).sum(),
    }
}

/// Evaluate items on up to `parallelism` workers. Reports come back in input
/// order regardless of scheduling.
pub fn run_batch(
    backend: &dyn PerceptionBackend,
    items: &[BatchItem],
    parallelism: usize,
    cfg: &RunConfig,
) -> Result<BatchOutput, BatchError> {
    if parallelism == 0 {
        return Err(BatchError::ZeroParallelism);
    }
    let run = |item: &BatchItem| {
        let mut report = run_program(backend, &item.image, &item.program, &item.prompt, cfg);
        report.id = item.id.clone();
        report.skill = item.skill.clone();
        report.model = item.model.clone();
        report
    };
    let reports: Vec<EvalReport> = if parallelism == 1 {
        items.iter().map(run).collect()
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(parallelism)
            .build()
            .map_err(|e| BatchError::Pool(e.to_string()))?
            .install(|| items.par_iter().map(run).collect())
    };
    let summary = summarize_batch(&reports);
    Ok(BatchOutput { reports, summary })
}
