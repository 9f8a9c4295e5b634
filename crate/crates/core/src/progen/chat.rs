use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde_json::json;

use super::{Completer, GenConfig, GenError};

/// Blocking client for an OpenAI-style chat-completions endpoint.
pub struct ChatClient {
    url: String,
    api_key: Option<String>,
    model: String,
    temperature: f64,
    max_retries: u32,
    min_interval: Duration,
    last_request: Mutex<Option<Instant>>,
    agent: ureq::Agent,
}

impl ChatClient {
    pub fn new(cfg: &GenConfig) -> Self {
        let base = cfg.endpoint.trim_end_matches('/');
        let url = if base.ends_with("/chat/completions") {
            base.to_string()
        } else {
            format!("{base}/chat/completions")
        };
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(cfg.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        ChatClient {
            url,
            api_key: cfg.api_key.clone(),
            model: cfg.model.clone(),
            temperature: cfg.temperature,
            max_retries: cfg.max_retries,
            min_interval: cfg.min_request_interval,
            last_request: Mutex::new(None),
            agent,
        }
    }

    pub fn url(&self) -> &str {
        &self.url
    }

    fn throttle(&self) {
        let mut last = self.last_request.lock().unwrap_or_else(|p| p.into_inner());
        if let Some(t) = *last {
            let wait = self.min_interval.saturating_sub(t.elapsed());
            if !wait.is_zero() {
                std::thread::sleep(wait);
            }
        }
        *last = Some(Instant::now());
    }

    fn attempt(&self, body: &serde_json::Value) -> Result<String, (bool, String)> {
        self.throttle();
        let mut req = self.agent.post(&self.url);
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = req.send_json(body).map_err(|e| (true, e.to_string()))?;
        let status = resp.status().as_u16();
        if !(200..300).contains(&status) {
            let text = resp.body_mut().read_to_string().unwrap_or_default();
            let retry = status == 429 || status >= 500;
            return Err((retry, format!("status {status}: {text}")));
        }
        let value: serde_json::Value = resp
            .body_mut()
            .read_json()
            .map_err(|e| (false, e.to_string()))?;
        value["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| {
                (
                    false,
                    "response has no choices[0].message.content".to_string(),
                )
            })
    }
}

impl Completer for ChatClient {
    fn complete(&self, _prompt: &str, request: &str) -> Result<String, GenError> {
        let body = json!({
            "model": self.model,
            "messages": [{"role": "user", "content": request}],
            "temperature": self.temperature,
        });
        let mut attempts = 0;
        loop {
            attempts += 1;
            match self.attempt(&body) {
                Ok(text) => return Ok(text),
                Err((true, _)) if attempts <= self.max_retries => {
                    std::thread::sleep(Duration::from_millis(200) * attempts);
                }
                Err((_, message)) => return Err(GenError::Endpoint { attempts, message }),
            }
        }
    }
}
