use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

use super::{
    check_query, filter_and_sort, BBox, Capabilities, Detection, OcrToken, PerceptionBackend,
    PerceptionError, VqaAnswer, VqaQuery,
};
use crate::text::description_key;

/// How the fixture backend answers `(image, query)` pairs it has no entry for.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum FixtureMode {
    /// Empty detections / tokens, flagged VQA answers.
    #[default]
    Lenient,
    /// Errors.
    Strict,
}

#[derive(Debug, Error)]
pub enum FixtureError {
    #[error("cannot read fixture {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("fixture parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("fixture schema violation at {field}: {message}")]
    Schema { field: String, message: String },
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFixture {
    images: BTreeMap<String, RawImage>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawImage {
    #[serde(default)]
    objdet: BTreeMap<String, Vec<RawDetection>>,
    #[serde(default)]
    ocr: Vec<RawToken>,
    #[serde(default)]
    vqa: BTreeMap<String, String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDetection {
    #[serde(rename = "box")]
    bbox: [f64; 4],
    confidence: f64,
    closeness: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawToken {
    text: String,
    #[serde(rename = "box")]
    bbox: [f64; 4],
    confidence: f64,
}

#[derive(Debug, Clone, Default)]
struct ImageEntry {
    // keyed by description_key(query)
    objdet: BTreeMap<String, Vec<Detection>>,
    ocr: Vec<OcrToken>,
    // keyed by description_key(question)
    vqa: BTreeMap<String, String>,
}

/// Perception backend that answers purely from a JSON document.
///
/// Schema:
///
/// ```json
/// {"images": {"<image-ref>": {
///     "objdet": {"<query>": [{"box": [x1, y1, x2, y2], "confidence": 0.9, "closeness": 0.5}]},
///     "ocr": [{"text": "shop", "box": [x1, y1, x2, y2], "confidence": 0.9}],
///     "vqa": {"<question>": "<answer>"}}}}
/// ```
///
/// Queries and questions are matched case-insensitively with whitespace
/// collapsed. The backend is immutable after loading.
#[derive(Debug, Clone, Default)]
pub struct FixtureBackend {
    images: BTreeMap<String, ImageEntry>,
    mode: FixtureMode,
}

impl FixtureBackend {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, FixtureError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| FixtureError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json_str(&text)
    }

    pub fn from_json_str(text: &str) -> Result<Self, FixtureError> {
        let raw: RawFixture = serde_json::from_str(text).map_err(|e| {
            use serde_json::error::Category;
            match e.classify() {
                Category::Data => FixtureError::Schema {
                    field: format!("line {}, column {}", e.line(), e.column()),
                    message: e.to_string(),
                },
                _ => FixtureError::Parse {
                    line: e.line(),
                    column: e.column(),
                    message: e.to_string(),
                },
            }
        })?;

        let mut images = BTreeMap::new();
        for (image, raw_image) in raw.images {
            let mut entry = ImageEntry::default();
            for (query, dets) in raw_image.objdet {
                let mut out = Vec::with_capacity(dets.len());
                for (i, d) in dets.into_iter().enumerate() {
                    let field = format!("images[{image:?}].objdet[{query:?}][{i}]");
                    let bbox = BBox::try_from(d.bbox).map_err(|e| schema(&field, "box", e))?;
                    let det = Detection {
                        label: query.clone(),
                        bbox,
                        confidence: d.confidence,
                        closeness: d.closeness,
                    };
                    det.check().map_err(|e| schema(&field, "", e))?;
                    out.push(det);
                }
                entry.objdet.insert(description_key(&query), out);
            }
            for (i, t) in raw_image.ocr.into_iter().enumerate() {
                let field = format!("images[{image:?}].ocr[{i}]");
                let bbox = BBox::try_from(t.bbox).map_err(|e| schema(&field, "box", e))?;
                let tok = OcrToken {
                    text: t.text,
                    bbox,
                    confidence: t.confidence,
                };
                tok.check().map_err(|e| schema(&field, "", e))?;
                entry.ocr.push(tok);
            }
            for (q, a) in raw_image.vqa {
                entry.vqa.insert(description_key(&q), a);
            }
            images.insert(image, entry);
        }
        Ok(FixtureBackend {
            images,
            mode: FixtureMode::Lenient,
        })
    }

    pub fn with_mode(mut self, mode: FixtureMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn mode(&self) -> FixtureMode {
        self.mode
    }

    fn image(&self, image: &str) -> Result<Option<&ImageEntry>, PerceptionError> {
        match (self.images.get(image), self.mode) {
            (Some(e), _) => Ok(Some(e)),
            (None, FixtureMode::Lenient) => Ok(None),
            (None, FixtureMode::Strict) => Err(PerceptionError::ImageNotFound(image.to_string())),
        }
    }
}

fn schema(field: &str, sub: &str, e: impl std::fmt::Display) -> FixtureError {
    let field = if sub.is_empty() {
        field.to_string()
    } else {
        format!("{field}.{sub}")
    };
    FixtureError::Schema {
        field,
        message: e.to_string(),
    }
}

impl PerceptionBackend for FixtureBackend {
    fn capabilities(&self) -> Capabilities {
        Capabilities::ALL
    }

    fn obj_det(
        &self,
        image: &str,
        query: &str,
        box_threshold: f64,
    ) -> Result<Vec<Detection>, PerceptionError> {
        check_query(query, box_threshold)?;
        let Some(entry) = self.image(image)? else {
            return Ok(Vec::new());
        };
        match entry.objdet.get(&description_key(query)) {
            Some(dets) => {
                let dets = dets
                    .iter()
                    .map(|d| Detection {
                        label: query.to_string(),
                        ..d.clone()
                    })
                    .collect();
                Ok(filter_and_sort(dets, box_threshold))
            }
            None if self.mode == FixtureMode::Strict => Err(PerceptionError::UnknownKey {
                image: image.to_string(),
                kind: "objdet query",
                key: query.to_string(),
            }),
            None => Ok(Vec::new()),
        }
    }

    fn ocr(&self, image: &str) -> Result<Vec<OcrToken>, PerceptionError> {
        Ok(self
            .image(image)?
            .map(|e| e.ocr.clone())
            .unwrap_or_default())
    }

    fn vqa(&self, image: &str, query: &VqaQuery) -> Result<VqaAnswer, PerceptionError> {
        let raw = self
            .image(image)?
            .and_then(|e| e.vqa.get(&description_key(query.question())));
        match raw {
            Some(raw) => Ok(query.project(raw)),
            None if self.mode == FixtureMode::Strict => Err(PerceptionError::UnknownKey {
                image: image.to_string(),
                kind: "vqa question",
                key: query.question().to_string(),
            }),
            // Projection of an empty answer fails, so the result is flagged.
            None => Ok(query.project("")),
        }
    }
}
