//! Perception data model and backends.
//!
//! Evaluation modules never look at pixels. They ask a [`PerceptionBackend`]
//! for grounded detections, OCR tokens and multiple-choice VQA answers, and
//! reason over the returned boxes. Two backends ship with the crate:
//! [`FixtureBackend`] answers from a JSON document and [`RemoteBackend`] talks
//! to an HTTP perception service.

mod fixture;
mod remote;

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::text::normalize;

pub use fixture::{FixtureBackend, FixtureError, FixtureMode};
pub use remote::{RemoteBackend, RemoteConfig};

/// Detection confidence cut used when none is configured.
pub const DEFAULT_BOX_THRESHOLD: f64 = 0.35;

/// Axis-aligned box in normalized `xyxy` image coordinates.
///
/// The y axis grows downward, as in image space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct BBox {
    x1: f64,
    y1: f64,
    x2: f64,
    y2: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("invalid box [{x1}, {y1}, {x2}, {y2}]: {reason}")]
pub struct BBoxError {
    pub x1: f64,
    pub y1: f64,
    pub x2: f64,
    pub y2: f64,
    pub reason: &'static str,
}

impl BBox {
    pub fn new(x1: f64, y1: f64, x2: f64, y2: f64) -> Result<Self, BBoxError> {
        let err = |reason| BBoxError {
            x1,
            y1,
            x2,
            y2,
            reason,
        };
        if ![x1, y1, x2, y2].iter().all(|v| v.is_finite()) {
            return Err(err("coordinates must be finite"));
        }
        if ![x1, y1, x2, y2].iter().all(|v| (0.0..=1.0).contains(v)) {
            return Err(err("coordinates must lie in [0, 1]"));
        }
        if x2 < x1 {
            return Err(err("x2 < x1"));
        }
        if y2 < y1 {
            return Err(err("y2 < y1"));
        }
        Ok(BBox { x1, y1, x2, y2 })
    }

    pub fn x1(&self) -> f64 {
        self.x1
    }
    pub fn y1(&self) -> f64 {
        self.y1
    }
    pub fn x2(&self) -> f64 {
        self.x2
    }
    pub fn y2(&self) -> f64 {
        self.y2
    }

    pub fn width(&self) -> f64 {
        self.x2 - self.x1
    }

    pub fn height(&self) -> f64 {
        self.y2 - self.y1
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn center(&self) -> (f64, f64) {
        ((self.x1 + self.x2) / 2.0, (self.y1 + self.y2) / 2.0)
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.x1, self.y1, self.x2, self.y2]
    }

    /// Lexicographic order on `(x1, y1, x2, y2)`.
    pub fn lex_cmp(&self, other: &BBox) -> Ordering {
        self.to_array()
            .iter()
            .zip(other.to_array().iter())
            .map(|(a, b)| a.total_cmp(b))
            .find(|o| o.is_ne())
            .unwrap_or(Ordering::Equal)
    }
}

impl TryFrom<[f64; 4]> for BBox {
    type Error = BBoxError;

    fn try_from(v: [f64; 4]) -> Result<Self, Self::Error> {
        BBox::new(v[0], v[1], v[2], v[3])
    }
}

impl From<BBox> for [f64; 4] {
    fn from(b: BBox) -> Self {
        b.to_array()
    }
}

/// One grounded object instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    /// Echo of the referring expression that produced the detection.
    pub label: String,
    #[serde(rename = "box")]
    pub bbox: BBox,
    pub confidence: f64,
    /// Larger means nearer to the camera.
    pub closeness: f64,
}

impl Detection {
    pub fn check(&self) -> Result<(), PerceptionError> {
        if !(0.0..=1.0).contains(&self.confidence) {
            return Err(PerceptionError::InvalidOutput(format!(
                "detection confidence {} outside [0, 1]",
                self.confidence
            )));
        }
        if !self.closeness.is_finite() || self.closeness < 0.0 {
            return Err(PerceptionError::InvalidOutput(format!(
                "detection closeness {} must be finite and non-negative",
                self.closeness
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OcrToken {
    pub text: String,
    #[serde(rename = "box")]
    pub bbox: BBox,
    pub confidence: f64,
}

impl OcrToken {
    pub fn check(&self) -> Result<(), PerceptionError> {
        if self.text.trim().is_empty() {
            return Err(PerceptionError::InvalidOutput("empty OCR token".into()));
        }
        if !(0.0..=1.0).contains(&self.confidence) {
            return Err(PerceptionError::InvalidOutput(format!(
                "OCR confidence {} outside [0, 1]",
                self.confidence
            )));
        }
        Ok(())
    }
}

/// A multiple-choice question.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VqaQuery {
    question: String,
    choices: Vec<String>,
}

impl VqaQuery {
    pub fn new(
        question: impl Into<String>,
        choices: impl IntoIterator<Item = impl Into<String>>,
    ) -> Result<Self, PerceptionError> {
        let question = question.into();
        let choices: Vec<String> = choices.into_iter().map(Into::into).collect();
        if choices.len() < 2 {
            return Err(PerceptionError::InvalidQuery(format!(
                "need at least 2 choices, got {}",
                choices.len()
            )));
        }
        let mut seen = std::collections::BTreeSet::new();
        for c in &choices {
            if !seen.insert(normalize(c)) {
                return Err(PerceptionError::InvalidQuery(format!(
                    "duplicate choice {c:?}"
                )));
            }
        }
        Ok(VqaQuery { question, choices })
    }

    /// The yes/no form used by the vqa fallback of the relation modules.
    pub fn yes_no(question: impl Into<String>) -> Self {
        VqaQuery::new(question, ["yes", "no"]).expect("yes/no choices are valid")
    }

    pub fn question(&self) -> &str {
        &self.question
    }

    pub fn choices(&self) -> &[String] {
        &self.choices
    }

    /// Model prompt in the `Question: ... Choices: ... Answer:` layout used by
    /// the perception service.
    pub fn prompt_text(&self) -> String {
        format!(
            "Question: {} Choices: {} Answer:",
            self.question,
            self.choices.join(", ")
        )
    }

    /// Map free text onto one of the choices.
    ///
    /// Exact match after normalization wins; otherwise a choice that equals
    /// the first word of the normalized text; otherwise the first choice,
    /// flagged with `projected = false`.
    pub fn project(&self, raw: &str) -> VqaAnswer {
        let norm = normalize(raw);
        let hit = self
            .choices
            .iter()
            .find(|c| normalize(c) == norm)
            .or_else(|| {
                let first = norm.split(' ').next().unwrap_or("");
                self.choices
                    .iter()
                    .find(|c| !first.is_empty() && normalize(c) == first)
            });
        match hit {
            Some(c) => VqaAnswer {
                answer: c.clone(),
                raw: raw.to_string(),
                projected: true,
            },
            None => VqaAnswer {
                answer: self.choices[0].clone(),
                raw: raw.to_string(),
                projected: false,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VqaAnswer {
    /// Always one of the query's choices.
    pub answer: String,
    /// Backend text before projection.
    pub raw: String,
    /// False when the raw text matched no choice and `answer` is the fallback.
    pub projected: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Capabilities {
    pub objdet: bool,
    pub ocr: bool,
    pub vqa: bool,
}

impl Capabilities {
    pub const ALL: Capabilities = Capabilities {
        objdet: true,
        ocr: true,
        vqa: true,
    };
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PerceptionError {
    #[error("image not found: {0}")]
    ImageNotFound(String),
    #[error("no fixture entry for {kind} {key:?} on image {image:?}")]
    UnknownKey {
        image: String,
        kind: &'static str,
        key: String,
    },
    #[error("backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("backend rejected request (status {status}): {body}")]
    Rejected { status: u16, body: String },
    #[error("invalid backend output: {0}")]
    InvalidOutput(String),
    #[error("invalid query: {0}")]
    InvalidQuery(String),
    #[error("capability not supported: {0}")]
    Unsupported(&'static str),
}

/// Source of perception results for evaluation modules.
///
/// Implementations must be shareable across evaluation workers and must
/// return boxes that satisfy the [`BBox`] invariants.
pub trait PerceptionBackend: Send + Sync {
    fn capabilities(&self) -> Capabilities;

    /// Detections for `query`, confidence at least `box_threshold`, sorted by
    /// [`detection_order`].
    fn obj_det(
        &self,
        image: &str,
        query: &str,
        box_threshold: f64,
    ) -> Result<Vec<Detection>, PerceptionError>;

    /// All text tokens in backend-native order.
    fn ocr(&self, image: &str) -> Result<Vec<OcrToken>, PerceptionError>;

    fn vqa(&self, image: &str, query: &VqaQuery) -> Result<VqaAnswer, PerceptionError>;
}

impl<T: PerceptionBackend + ?Sized> PerceptionBackend for &T {
    fn capabilities(&self) -> Capabilities {
        (**self).capabilities()
    }
    fn obj_det(&self, image: &str, query: &str, t: f64) -> Result<Vec<Detection>, PerceptionError> {
        (**self).obj_det(image, query, t)
    }
    fn ocr(&self, image: &str) -> Result<Vec<OcrToken>, PerceptionError> {
        (**self).ocr(image)
    }
    fn vqa(&self, image: &str, query: &VqaQuery) -> Result<VqaAnswer, PerceptionError> {
        (**self).vqa(image, query)
    }
}

/// Descending confidence, ties broken by ascending `(x1, y1, x2, y2)`.
pub fn detection_order(a: &Detection, b: &Detection) -> Ordering {
    b.confidence
        .total_cmp(&a.confidence)
        .then_with(|| a.bbox.lex_cmp(&b.bbox))
}

/// Keep detections with `confidence >= threshold` and sort them.
pub fn filter_and_sort(mut dets: Vec<Detection>, threshold: f64) -> Vec<Detection> {
    dets.retain(|d| d.confidence >= threshold);
    dets.sort_by(detection_order);
    dets
}

pub(crate) fn check_query(query: &str, box_threshold: f64) -> Result<(), PerceptionError> {
    if query.trim().is_empty() {
        return Err(PerceptionError::InvalidQuery(
            "empty detection query".into(),
        ));
    }
    if !(0.0..=1.0).contains(&box_threshold) {
        return Err(PerceptionError::InvalidQuery(format!(
            "box threshold {box_threshold} outside [0, 1]"
        )));
    }
    Ok(())
}

impl fmt::Display for BBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{:.3}, {:.3}, {:.3}, {:.3}]",
            self.x1, self.y1, self.x2, self.y2
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn det(conf: f64, b: [f64; 4]) -> Detection {
        Detection {
            label: "dog".into(),
            bbox: BBox::try_from(b).unwrap(),
            confidence: conf,
            closeness: 0.5,
        }
    }

    #[test]
    fn bbox_rejects_inverted_and_out_of_range() {
        assert!(BBox::new(0.2, 0.2, 0.1, 0.9).is_err());
        assert!(BBox::new(0.0, 0.5, 1.0, 0.4).is_err());
        assert!(BBox::new(-0.1, 0.0, 0.5, 0.5).is_err());
        assert!(BBox::new(0.0, 0.0, f64::NAN, 0.5).is_err());
        let b = BBox::new(0.1, 0.2, 0.5, 0.6).unwrap();
        assert!((b.area() - 0.16).abs() < 1e-12);
    }

    #[test]
    fn filter_sorts_descending_with_lex_tiebreak() {
        let dets = vec![
            det(0.6, [0.5, 0.5, 0.6, 0.6]),
            det(0.9, [0.1, 0.1, 0.2, 0.2]),
            det(0.6, [0.1, 0.5, 0.6, 0.6]),
            det(0.3, [0.0, 0.0, 0.1, 0.1]),
        ];
        let out = filter_and_sort(dets.clone(), 0.5);
        let confs: Vec<f64> = out.iter().map(|d| d.confidence).collect();
        assert_eq!(confs, vec![0.9, 0.6, 0.6]);
        assert_eq!(out[1].bbox.x1(), 0.1);
        assert!(filter_and_sort(dets, 0.95).is_empty());
    }

    #[test]
    fn projection_normalizes_and_flags_failures() {
        let q = VqaQuery::yes_no("is there a dog?");
        let a = q.project("Yes.");
        assert_eq!(a.answer, "yes");
        assert!(a.projected);
        assert_eq!(q.project("no, there is not").answer, "no");
        let miss = q.project("a cat");
        assert_eq!(miss.answer, "yes");
        assert!(!miss.projected);
    }

    #[test]
    fn query_needs_distinct_choices() {
        assert!(VqaQuery::new("q", ["yes"]).is_err());
        assert!(VqaQuery::new("q", ["Yes", "yes."]).is_err());
        assert_eq!(
            VqaQuery::yes_no("is there a dog in the image?").prompt_text(),
            "Question: is there a dog in the image? Choices: yes, no Answer:"
        );
    }
}
