use std::path::Path;
use std::time::Duration;

use base64::Engine;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{
    check_query, filter_and_sort, Capabilities, Detection, OcrToken, PerceptionBackend,
    PerceptionError, VqaAnswer, VqaQuery,
};

#[derive(Debug, Clone)]
pub struct RemoteConfig {
    /// Additional attempts after the first failed connection.
    pub retries: u32,
    pub timeout: Duration,
    pub backoff: Duration,
}

impl Default for RemoteConfig {
    fn default() -> Self {
        RemoteConfig {
            retries: 2,
            timeout: Duration::from_secs(60),
            backoff: Duration::from_millis(250),
        }
    }
}

/// Client for the perception service wire protocol.
///
/// Image references are file paths; the client reads and base64-encodes the
/// bytes. Endpoints: `POST /v1/objdet`, `POST /v1/ocr`, `POST /v1/vqa`,
/// `GET /v1/health`.
#[derive(Debug, Clone)]
pub struct RemoteBackend {
    base_url: String,
    agent: ureq::Agent,
    config: RemoteConfig,
}

#[derive(Deserialize)]
struct ObjDetResponse {
    detections: Vec<Detection>,
}

#[derive(Deserialize)]
struct OcrResponse {
    tokens: Vec<OcrToken>,
}

#[derive(Deserialize)]
struct VqaResponse {
    answer: String,
    #[serde(default)]
    raw: Option<String>,
    #[serde(default)]
    projected: Option<bool>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    #[serde(default)]
    pub models: serde_json::Map<String, serde_json::Value>,
}

impl RemoteBackend {
    pub fn new(base_url: impl Into<String>, config: RemoteConfig) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(config.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        RemoteBackend {
            base_url: base_url.into().trim_end_matches('/').to_string(),
            agent,
            config,
        }
    }

    pub fn base_url(&self) -> &str {
        &self.base_url
    }

    pub fn health(&self) -> Result<Health, PerceptionError> {
        let url = format!("{}/v1/health", self.base_url);
        self.with_retries(|| {
            let mut resp = self.agent.get(&url).call().map_err(transport)?;
            let status = resp.status().as_u16();
            if status != 200 {
                let body = resp.body_mut().read_to_string().unwrap_or_default();
                return Err(Attempt::Fatal(PerceptionError::BackendUnavailable(
                    format!("health check returned {status}: {body}"),
                )));
            }
            resp.body_mut()
                .read_json::<Health>()
                .map_err(|e| Attempt::Fatal(PerceptionError::InvalidOutput(e.to_string())))
        })
    }

    fn post<T: for<'de> Deserialize<'de>>(
        &self,
        endpoint: &str,
        body: &serde_json::Value,
    ) -> Result<T, PerceptionError> {
        let url = format!("{}{}", self.base_url, endpoint);
        self.with_retries(|| {
            let mut resp = self.agent.post(&url).send_json(body).map_err(transport)?;
            let status = resp.status().as_u16();
            if status == 503 {
                let body = resp.body_mut().read_to_string().unwrap_or_default();
                return Err(Attempt::Retry(PerceptionError::BackendUnavailable(body)));
            }
            if !(200..300).contains(&status) {
                let body = resp.body_mut().read_to_string().unwrap_or_default();
                return Err(Attempt::Fatal(PerceptionError::Rejected { status, body }));
            }
            resp.body_mut()
                .read_json::<T>()
                .map_err(|e| Attempt::Fatal(PerceptionError::InvalidOutput(e.to_string())))
        })
    }

    fn with_retries<T>(
        &self,
        mut f: impl FnMut() -> Result<T, Attempt>,
    ) -> Result<T, PerceptionError> {
        let mut attempt = 0;
        loop {
            match f() {
                Ok(v) => return Ok(v),
                Err(Attempt::Fatal(e)) => return Err(e),
                Err(Attempt::Retry(e)) if attempt >= self.config.retries => return Err(e),
                Err(Attempt::Retry(_)) => {
                    attempt += 1;
                    std::thread::sleep(self.config.backoff * attempt);
                }
            }
        }
    }
}

enum Attempt {
    Retry(PerceptionError),
    Fatal(PerceptionError),
}

fn transport(e: ureq::Error) -> Attempt {
    Attempt::Retry(PerceptionError::BackendUnavailable(e.to_string()))
}

fn encode_image(image: &str) -> Result<String, PerceptionError> {
    let bytes = std::fs::read(Path::new(image))
        .map_err(|_| PerceptionError::ImageNotFound(image.to_string()))?;
    Ok(base64::engine::general_purpose::STANDARD.encode(bytes))
}

impl PerceptionBackend for RemoteBackend {
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
        let body = json!({
            "image": encode_image(image)?,
            "query": query,
            "box_threshold": box_threshold,
        });
        let resp: ObjDetResponse = self.post("/v1/objdet", &body)?;
        for d in &resp.detections {
            d.check()?;
        }
        Ok(filter_and_sort(resp.detections, box_threshold))
    }

    fn ocr(&self, image: &str) -> Result<Vec<OcrToken>, PerceptionError> {
        let body = json!({ "image": encode_image(image)? });
        let resp: OcrResponse = self.post("/v1/ocr", &body)?;
        for t in &resp.tokens {
            t.check()?;
        }
        Ok(resp.tokens)
    }

    fn vqa(&self, image: &str, query: &VqaQuery) -> Result<VqaAnswer, PerceptionError> {
        let body = json!({
            "image": encode_image(image)?,
            "question": query.question(),
            "choices": query.choices(),
        });
        let resp: VqaResponse = self.post("/v1/vqa", &body)?;
        // Re-project locally: the answer must be one of our choices.
        let mut answer = query.project(&resp.answer);
        if let Some(raw) = resp.raw {
            answer.raw = raw;
        }
        if resp.projected == Some(false) {
            answer.projected = false;
        }
        Ok(answer)
    }
}
