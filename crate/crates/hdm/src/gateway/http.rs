//! OpenAI-compatible chat-completions backend over blocking HTTP.
//!
//! Wire format: POST {base_url}/chat/completions with
//! `{"model", "messages", "temperature"?, "max_tokens"?}`; the assistant
//! text is read from `choices[0].message.content`.

use serde_json::{json, Value};

use super::{ChatBackend, ChatRequest, GatewayError};

/// Build the JSON request body. Temperature and max_tokens are omitted
/// when unset so provider defaults apply.
pub fn build_body(req: &ChatRequest) -> Value {
    let messages: Vec<Value> = req
        .messages
        .iter()
        .map(|m| json!({"role": m.role.as_str(), "content": m.content}))
        .collect();
    let mut body = json!({"model": req.model_id, "messages": messages});
    if let Some(t) = req.temperature {
        body["temperature"] = json!(t);
    }
    if let Some(m) = req.max_tokens {
        body["max_tokens"] = json!(m);
    }
    body
}

/// Extract the assistant text from a chat-completions response payload.
pub fn extract_text(payload: &Value) -> Result<String, GatewayError> {
    payload
        .get("choices")
        .and_then(|c| c.get(0))
        .and_then(|c| c.get("message"))
        .and_then(|m| m.get("content"))
        .and_then(|c| c.as_str())
        .map(|s| s.to_string())
        .ok_or_else(|| {
            GatewayError::MalformedResponse("payload lacks choices[0].message.content".into())
        })
}

pub struct HttpBackend {
    base_url: String,
    api_key: String,
    client: reqwest::blocking::Client,
}

impl HttpBackend {
    /// Resolve the API key from the environment variable named in the
    /// config. Fails fast so a bad deployment never burns retries.
    pub fn new(base_url: &str, api_key_env: &str) -> Result<Self, GatewayError> {
        let api_key = std::env::var(api_key_env)
            .map_err(|_| GatewayError::Auth(format!("env var {api_key_env} not set")))?;
        if api_key.trim().is_empty() {
            return Err(GatewayError::Auth(format!("env var {api_key_env} is empty")));
        }
        Ok(Self {
            base_url: base_url.trim_end_matches('/').to_string(),
            api_key,
            client: reqwest::blocking::Client::new(),
        })
    }
}

impl ChatBackend for HttpBackend {
    fn send(&self, req: &ChatRequest) -> Result<String, GatewayError> {
        let url = format!("{}/chat/completions", self.base_url);
        let resp = self
            .client
            .post(&url)
            .bearer_auth(&self.api_key)
            .json(&build_body(req))
            .send()
            .map_err(|e| GatewayError::Network(e.to_string()))?;
        let status = resp.status();
        if status.as_u16() == 401 || status.as_u16() == 403 {
            return Err(GatewayError::Auth(format!("HTTP {status}")));
        }
        if status.as_u16() == 429 {
            return Err(GatewayError::RateLimited(format!("HTTP {status}")));
        }
        if status.is_server_error() {
            return Err(GatewayError::Network(format!("HTTP {status}")));
        }
        if !status.is_success() {
            return Err(GatewayError::MalformedResponse(format!("HTTP {status}")));
        }
        let payload: Value = resp
            .json()
            .map_err(|e| GatewayError::MalformedResponse(e.to_string()))?;
        extract_text(&payload)
    }

    fn name(&self) -> &str {
        "http"
    }
}

#[cfg(test)]
mod tests {
    use super::super::{ChatMessage, Role};
    use super::*;

    #[test]
    fn body_matches_wire_format() {
        let req = ChatRequest {
            model_id: "gpt4-turbo".into(),
            messages: vec![
                ChatMessage {
                    role: Role::System,
                    content: "sys".into(),
                },
                ChatMessage {
                    role: Role::User,
                    content: "hi".into(),
                },
            ],
            temperature: Some(0.7),
            max_tokens: Some(256),
            request_tag: "t".into(),
        };
        let body = build_body(&req);
        assert_eq!(body["model"], "gpt4-turbo");
        assert_eq!(body["messages"][0]["role"], "system");
        assert_eq!(body["messages"][1]["content"], "hi");
        assert_eq!(body["temperature"], 0.7);
        assert_eq!(body["max_tokens"], 256);
    }

    #[test]
    fn defaults_omitted_from_body() {
        let req = ChatRequest {
            model_id: "m".into(),
            messages: vec![ChatMessage {
                role: Role::User,
                content: "hi".into(),
            }],
            temperature: None,
            max_tokens: None,
            request_tag: "t".into(),
        };
        let body = build_body(&req);
        assert!(body.get("temperature").is_none());
        assert!(body.get("max_tokens").is_none());
    }

    #[test]
    fn extract_text_happy_and_malformed() {
        let ok = serde_json::json!({"choices": [{"message": {"content": "hello"}}]});
        assert_eq!(extract_text(&ok).unwrap(), "hello");
        let bad = serde_json::json!({"choices": []});
        assert!(matches!(
            extract_text(&bad),
            Err(GatewayError::MalformedResponse(_))
        ));
    }

    #[test]
    fn missing_key_env_is_auth_error() {
        assert!(matches!(
            HttpBackend::new("http://x", "HDM_TEST_NO_SUCH_ENV_VAR"),
            Err(GatewayError::Auth(_))
        ));
    }
}
