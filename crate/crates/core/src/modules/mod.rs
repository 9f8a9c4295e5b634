//! Executable semantics of the evaluation modules.
//!
//! Every module returns a binary [`ModuleResult`] with a fixed-template
//! explanation and the boxes it looked at. Backend failures never propagate:
//! they become errored results that score 0.
//!
//! Explanation templates:
//!
//! | module | template |
//! |---|---|
//! | objectEval | `found {obj} ({n} box)` / `found {obj} ({n} boxes)` / `did not find {obj}` |
//! | countEval | `counted {n} {obj}; expected {expr}` |
//! | spatialEval | `{S} is [not ]{phrase} {R} ({metric} {a:.3} vs {b:.3})` |
//! | scaleEval | `{S} is [not ]{phrase} {R} (area ratio {rho:.3}, tau {tau})` |
//! | textEval | `found "{target}" in OCR text "{joined}"` / `did not find "{target}" in OCR text "{joined}"` |
//! | vqa | `asked "{q}"; answered "{a}"; expected "{e}"` |
//! | relation fallback | `vqa fallback: asked "{q}"; answered "{a}"` |
//! | missing objects | `object not found: {names}` |
//! | errored | `error: {message}` |

mod eval;
mod ocr_text;
mod relations;

use serde::{Deserialize, Serialize};

use crate::dsl::{parse_program, ModuleCall, ModuleName};
use crate::perception::{BBox, PerceptionBackend, DEFAULT_BOX_THRESHOLD};

pub use eval::{count_eval, object_eval, scale_eval, spatial_eval, vqa_eval};
pub use ocr_text::{reading_order, text_eval};
pub use relations::{
    split_choices, CountExpr, CountExprError, CountOp, ScaleRelation, SpatialRelation,
};

/// Default area-ratio tolerance for scale relations.
pub const DEFAULT_SCALE_TAU: f64 = 1.25;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModuleConfig {
    pub box_threshold: f64,
    pub scale_tau: f64,
}

impl Default for ModuleConfig {
    fn default() -> Self {
        ModuleConfig {
            box_threshold: DEFAULT_BOX_THRESHOLD,
            scale_tau: DEFAULT_SCALE_TAU,
        }
    }
}

impl ModuleConfig {
    /// `box_threshold` in [0, 1] and a finite `scale_tau` of at least 1.
    pub fn validate(&self) -> Result<(), String> {
        if !(0.0..=1.0).contains(&self.box_threshold) {
            return Err(format!(
                "box_threshold {} is outside [0, 1]",
                self.box_threshold
            ));
        }
        if !self.scale_tau.is_finite() || self.scale_tau < 1.0 {
            return Err(format!(
                "scale_tau {} must be finite and >= 1",
                self.scale_tau
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Subject,
    Reference,
    Detected,
    Ocr,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::Subject => "subject",
            Role::Reference => "reference",
            Role::Detected => "detected",
            Role::Ocr => "ocr",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Annotation {
    #[serde(rename = "box")]
    pub bbox: BBox,
    pub label: String,
    pub role: Role,
}

/// Outcome of one statement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "WireResult", into = "WireResult")]
pub struct ModuleResult {
    pub call: ModuleCall,
    /// 0 or 1.
    pub score: u8,
    pub errored: bool,
    pub explanation: String,
    pub annotations: Vec<Annotation>,
}

impl ModuleResult {
    pub(crate) fn scored(
        call: ModuleCall,
        pass: bool,
        explanation: String,
        annotations: Vec<Annotation>,
    ) -> Self {
        ModuleResult {
            call,
            score: u8::from(pass),
            errored: false,
            explanation,
            annotations,
        }
    }

    pub(crate) fn error(call: ModuleCall, message: impl std::fmt::Display) -> Self {
        ModuleResult {
            call,
            score: 0,
            errored: true,
            explanation: format!("error: {message}"),
            annotations: Vec::new(),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct WireResult {
    call: String,
    score: u8,
    errored: bool,
    explanation: String,
    annotations: Vec<Annotation>,
}

impl From<ModuleResult> for WireResult {
    fn from(r: ModuleResult) -> Self {
        WireResult {
            call: r.call.to_string(),
            score: r.score,
            errored: r.errored,
            explanation: r.explanation,
            annotations: r.annotations,
        }
    }
}

impl TryFrom<WireResult> for ModuleResult {
    type Error = String;

    fn try_from(w: WireResult) -> Result<Self, String> {
        let mut p = parse_program(&w.call).map_err(|e| e.to_string())?;
        if p.calls.len() != 1 {
            return Err(format!("expected one call, got {:?}", w.call));
        }
        if w.score > 1 {
            return Err(format!("score must be 0 or 1, got {}", w.score));
        }
        Ok(ModuleResult {
            call: p.calls.remove(0),
            score: w.score,
            errored: w.errored,
            explanation: w.explanation,
            annotations: w.annotations,
        })
    }
}

/// Run one parsed statement.
pub fn evaluate_call(
    backend: &dyn PerceptionBackend,
    image: &str,
    call: &ModuleCall,
    cfg: &ModuleConfig,
) -> ModuleResult {
    let s = call.strings();
    let mut result = match call.module {
        ModuleName::ObjectEval => object_eval(backend, image, s[0], cfg),
        ModuleName::CountEval => match s[1].parse::<CountExpr>() {
            Ok(expr) => count_eval(backend, image, s[0], expr, cfg),
            Err(e) => ModuleResult::error(call.clone(), e),
        },
        ModuleName::SpatialEval => spatial_eval(
            backend,
            image,
            s[0],
            s[1],
            &SpatialRelation::parse(s[2]),
            cfg,
        ),
        ModuleName::ScaleEval => {
            scale_eval(backend, image, s[0], s[1], &ScaleRelation::parse(s[2]), cfg)
        }
        ModuleName::TextEval => text_eval(backend, image, s[0]),
        ModuleName::Vqa => vqa_eval(backend, image, s[0], s[1], s[2]),
    };
    // Keep the statement exactly as written (relation spelling, spans).
    result.call = call.clone();
    result
}
