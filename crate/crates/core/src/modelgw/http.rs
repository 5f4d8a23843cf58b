use std::time::Duration;

use serde::Deserialize;
use serde_json::json;

use super::{AttemptError, GatewayError, ModelRequest, Provider};

pub const API_KEY_ENV: &str = "MS_API_KEY";

/// OpenAI-style chat-completion endpoint. Each prompt is sent as the sole
/// user message of a fresh conversation.
pub struct HttpProvider {
    client: reqwest::blocking::Client,
    endpoint: String,
    api_key: Option<String>,
}

#[derive(Deserialize)]
struct Completion {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: Message,
}

#[derive(Deserialize)]
struct Message {
    #[serde(default)]
    content: Option<String>,
}

impl HttpProvider {
    /// `base_url` is the API root, e.g. `https://api.openai.com/v1`. The
    /// bearer token is read from `MS_API_KEY` if set.
    pub fn new(base_url: &str, timeout: Duration) -> Result<Self, GatewayError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| GatewayError::Config(e.to_string()))?;
        Ok(HttpProvider {
            client,
            endpoint: format!("{}/chat/completions", base_url.trim_end_matches('/')),
            api_key: std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty()),
        })
    }
}

fn retryable(status: u16) -> bool {
    status == 408 || status == 429 || (500..600).contains(&status)
}

impl Provider for HttpProvider {
    fn name(&self) -> String {
        format!("http:{}", self.endpoint)
    }

    fn call(&self, req: &ModelRequest) -> Result<String, AttemptError> {
        let body = json!({
            "model": req.params.model_id,
            "messages": [{"role": "user", "content": req.prompt.text}],
            "temperature": req.params.temperature,
            "max_tokens": req.params.max_tokens,
        });
        let mut call = self.client.post(&self.endpoint).json(&body);
        if let Some(key) = &self.api_key {
            call = call.bearer_auth(key);
        }
        let resp = match call.send() {
            Ok(r) => r,
            Err(e) if e.is_timeout() => return Err(AttemptError::TimedOut),
            Err(e) => {
                return Err(AttemptError::Transient {
                    status: 0,
                    message: e.to_string(),
                })
            }
        };
        let status = resp.status().as_u16();
        let text = match resp.text() {
            Ok(t) => t,
            Err(e) if e.is_timeout() => return Err(AttemptError::TimedOut),
            Err(e) => {
                return Err(AttemptError::Transient {
                    status,
                    message: e.to_string(),
                })
            }
        };
        if !(200..300).contains(&status) {
            let message: String = text.chars().take(500).collect();
            return Err(if retryable(status) {
                AttemptError::Transient { status, message }
            } else {
                AttemptError::Permanent(GatewayError::Provider {
                    status,
                    attempts: 1,
                    message,
                })
            });
        }
        let parsed: Completion = serde_json::from_str(&text).map_err(|e| {
            AttemptError::Permanent(GatewayError::Provider {
                status,
                attempts: 1,
                message: format!("unexpected response body: {e}"),
            })
        })?;
        parsed
            .choices
            .into_iter()
            .next()
            .map(|c| c.message.content.unwrap_or_default())
            .ok_or_else(|| {
                AttemptError::Permanent(GatewayError::Provider {
                    status,
                    attempts: 1,
                    message: "response has no choices".into(),
                })
            })
    }
}
