//! Provider-agnostic chat-completion gateway: validation, retries with
//! exponential backoff, a sliding-window rate limiter, bounded concurrency,
//! and a content-addressed response cache.

pub mod cache;
pub mod clock;
pub mod http;
pub mod mock;
pub mod rate_limit;

use std::path::PathBuf;
use std::sync::Arc;
use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use cache::cache_key;
use clock::{Clock, SystemClock};
use rate_limit::{RateLimiter, Semaphore};

pub use cache::{canonical_request, CacheEntry, ResponseCache};
pub use http::HttpBackend;
pub use mock::{MockBackend, MockRule, MockScript};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

impl Role {
    pub fn as_str(&self) -> &'static str {
        match self {
            Role::System => "system",
            Role::User => "user",
            Role::Assistant => "assistant",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model_id: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: Option<f64>,
    pub max_tokens: Option<u32>,
    /// Stage label ("decompose", "translate", ...). Trace metadata only;
    /// excluded from the cache key.
    pub request_tag: String,
}

impl ChatRequest {
    /// Single-user-message request, the common case for every stage.
    pub fn user(model_id: &str, content: &str, tag: &str) -> Self {
        Self {
            model_id: model_id.to_string(),
            messages: vec![ChatMessage {
                role: Role::User,
                content: content.to_string(),
            }],
            temperature: None,
            max_tokens: None,
            request_tag: tag.to_string(),
        }
    }

    pub fn last_user_content(&self) -> Option<String> {
        self.messages
            .iter()
            .rev()
            .find(|m| m.role == Role::User)
            .map(|m| m.content.clone())
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        if self.messages.is_empty() {
            return Err(GatewayError::InvalidRequest("messages empty".into()));
        }
        if self.messages.last().map(|m| m.role) != Some(Role::User) {
            return Err(GatewayError::InvalidRequest(
                "last message must have role user".into(),
            ));
        }
        if let Some(t) = self.temperature {
            if !t.is_finite() || t < 0.0 {
                return Err(GatewayError::InvalidRequest(format!(
                    "temperature {t} must be finite and >= 0"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub text: String,
    pub model_id: String,
    pub latency_ms: u64,
    pub from_cache: bool,
    /// Network attempts used; 0 on a cache hit.
    pub attempt_count: u32,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GatewayConfig {
    pub base_url: String,
    pub api_key_env: String,
    pub max_retries: u32,
    pub backoff_base_ms: u64,
    /// Admit at most `rate_limit.0` requests per `rate_limit.1` ms.
    pub rate_limit: (usize, u64),
    pub max_concurrency: usize,
    pub cache_dir: Option<PathBuf>,
}

impl Default for GatewayConfig {
    fn default() -> Self {
        Self {
            base_url: "https://api.openai.com/v1".into(),
            api_key_env: "OPENAI_API_KEY".into(),
            max_retries: 3,
            backoff_base_ms: 500,
            rate_limit: (60, 60_000),
            max_concurrency: 4,
            cache_dir: None,
        }
    }
}

impl GatewayConfig {
    pub fn validate(&self) -> Result<(), GatewayError> {
        if self.max_concurrency < 1 {
            return Err(GatewayError::InvalidRequest(
                "max_concurrency must be >= 1".into(),
            ));
        }
        if self.rate_limit.1 == 0 {
            return Err(GatewayError::InvalidRequest("rate window must be > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum GatewayError {
    #[error("auth error: {0}")]
    Auth(String),
    #[error("rate limited: {0}")]
    RateLimited(String),
    #[error("malformed response: {0}")]
    MalformedResponse(String),
    #[error("network error: {0}")]
    Network(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("io error: {0}")]
    Io(String),
}

impl GatewayError {
    pub fn is_retryable(&self) -> bool {
        matches!(self, GatewayError::Network(_) | GatewayError::RateLimited(_))
    }

    pub fn kind(&self) -> &'static str {
        match self {
            GatewayError::Auth(_) => "auth",
            GatewayError::RateLimited(_) => "rate_limited",
            GatewayError::MalformedResponse(_) => "malformed_response",
            GatewayError::Network(_) => "network",
            GatewayError::InvalidRequest(_) => "invalid_request",
            GatewayError::Io(_) => "io",
        }
    }
}

/// Transport implemented by the mock and HTTP backends.
pub trait ChatBackend: Send + Sync {
    fn send(&self, req: &ChatRequest) -> Result<String, GatewayError>;
    fn name(&self) -> &str {
        "backend"
    }
}

const BACKOFF_CAP_MS: u64 = 30_000;

/// Backoff before retry `attempt` (1-based): base * 2^(attempt-1), capped
/// at 30 s, with the given jitter factor in [-0.2, 0.2].
pub fn backoff_delay_ms(base_ms: u64, attempt: u32, jitter: f64) -> u64 {
    let raw = (base_ms as f64) * 2f64.powi(attempt.saturating_sub(1) as i32);
    let capped = raw.min(BACKOFF_CAP_MS as f64);
    (capped * (1.0 + jitter.clamp(-0.2, 0.2))).round() as u64
}

/// Retrying, rate-limited, cached front door to a chat backend. Shareable
/// across worker threads; at most `max_concurrency` requests in flight.
pub struct Gateway {
    backend: Arc<dyn ChatBackend>,
    cfg: GatewayConfig,
    limiter: RateLimiter,
    semaphore: Semaphore,
    cache: Option<ResponseCache>,
    clock: Arc<dyn Clock>,
    default_temperature: Option<f64>,
    default_max_tokens: Option<u32>,
}

impl Gateway {
    pub fn new(backend: Arc<dyn ChatBackend>, cfg: GatewayConfig) -> Result<Self, GatewayError> {
        Self::with_clock(backend, cfg, Arc::new(SystemClock::default()))
    }

    pub fn with_clock(
        backend: Arc<dyn ChatBackend>,
        cfg: GatewayConfig,
        clock: Arc<dyn Clock>,
    ) -> Result<Self, GatewayError> {
        cfg.validate()?;
        let cache = match &cfg.cache_dir {
            Some(dir) => Some(ResponseCache::new(dir)?),
            None => None,
        };
        Ok(Self {
            limiter: RateLimiter::new(cfg.rate_limit.0, cfg.rate_limit.1, clock.clone()),
            semaphore: Semaphore::new(cfg.max_concurrency),
            backend,
            cfg,
            cache,
            clock,
            default_temperature: None,
            default_max_tokens: None,
        })
    }

    /// Sampling defaults applied to requests that leave them unset. Kept
    /// separate from the wire payload: `None` means the provider default.
    pub fn with_request_defaults(
        mut self,
        temperature: Option<f64>,
        max_tokens: Option<u32>,
    ) -> Self {
        self.default_temperature = temperature;
        self.default_max_tokens = max_tokens;
        self
    }

    pub fn config(&self) -> &GatewayConfig {
        &self.cfg
    }

    pub fn cache(&self) -> Option<&ResponseCache> {
        self.cache.as_ref()
    }

    /// Issue a chat completion. May block awaiting rate-limit or
    /// concurrency admission.
    pub fn complete(&self, req: &ChatRequest) -> Result<ChatResponse, GatewayError> {
        let mut owned;
        let req = if (req.temperature.is_none() && self.default_temperature.is_some())
            || (req.max_tokens.is_none() && self.default_max_tokens.is_some())
        {
            owned = req.clone();
            owned.temperature = owned.temperature.or(self.default_temperature);
            owned.max_tokens = owned.max_tokens.or(self.default_max_tokens);
            &owned
        } else {
            req
        };
        req.validate()?;
        let started = Instant::now();
        if let Some(cache) = &self.cache {
            if let Some(entry) = cache.load(&cache_key(req)) {
                return Ok(ChatResponse {
                    text: entry.response_text,
                    model_id: req.model_id.clone(),
                    latency_ms: started.elapsed().as_millis() as u64,
                    from_cache: true,
                    attempt_count: 0,
                });
            }
        }

        let _permit = self.semaphore.acquire();
        let mut attempt = 0u32;
        loop {
            attempt += 1;
            self.limiter.acquire();
            match self.backend.send(req) {
                Ok(text) => {
                    if let Some(cache) = &self.cache {
                        cache.store(req, &text)?;
                    }
                    return Ok(ChatResponse {
                        text,
                        model_id: req.model_id.clone(),
                        latency_ms: started.elapsed().as_millis() as u64,
                        from_cache: false,
                        attempt_count: attempt,
                    });
                }
                Err(err) if err.is_retryable() && attempt <= self.cfg.max_retries => {
                    let jitter = rand::thread_rng().gen_range(-0.2..=0.2);
                    let delay = backoff_delay_ms(self.cfg.backoff_base_ms, attempt, jitter);
                    self.clock.sleep_ms(delay);
                }
                Err(err) => return Err(err),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::clock::MockClock;
    use super::*;

    fn mock_gateway(cfg: GatewayConfig) -> (Arc<MockBackend>, Gateway) {
        let backend = Arc::new(MockBackend::echo());
        let gw = Gateway::with_clock(backend.clone(), cfg, Arc::new(MockClock::new())).unwrap();
        (backend, gw)
    }

    #[test]
    fn mock_ping_round_trip() {
        let (_, gw) = mock_gateway(GatewayConfig::default());
        let resp = gw.complete(&ChatRequest::user("mock", "PING", "t")).unwrap();
        assert_eq!(resp.text, "MOCK[PING]");
        assert_eq!(resp.attempt_count, 1);
        assert!(!resp.from_cache);
    }

    #[test]
    fn cache_hit_skips_network_and_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = GatewayConfig {
            cache_dir: Some(dir.path().to_path_buf()),
            ..GatewayConfig::default()
        };
        let (backend, gw) = mock_gateway(cfg);
        let req = ChatRequest::user("mock", "PING \u{00e9}\u{2713}", "t");
        let first = gw.complete(&req).unwrap();
        let second = gw.complete(&req).unwrap();
        assert!(!first.from_cache);
        assert!(second.from_cache);
        assert_eq!(second.attempt_count, 0);
        assert_eq!(first.text, second.text);
        assert_eq!(backend.calls(), 1, "second call must not reach the network");
    }

    #[test]
    fn retries_then_succeeds() {
        let cfg = GatewayConfig {
            max_retries: 2,
            backoff_base_ms: 10,
            ..GatewayConfig::default()
        };
        let (backend, gw) = mock_gateway(cfg);
        backend.fail_next(2);
        let resp = gw.complete(&ChatRequest::user("mock", "x", "t")).unwrap();
        assert_eq!(resp.attempt_count, 3);
        assert_eq!(backend.calls(), 3);
    }

    #[test]
    fn retry_budget_is_bounded() {
        let cfg = GatewayConfig {
            max_retries: 2,
            backoff_base_ms: 1,
            ..GatewayConfig::default()
        };
        let (backend, gw) = mock_gateway(cfg);
        backend.fail_next(10);
        let err = gw.complete(&ChatRequest::user("mock", "x", "t")).unwrap_err();
        assert!(err.is_retryable());
        assert_eq!(backend.calls(), 3, "max_retries+1 attempts");
    }

    #[test]
    fn invalid_requests_rejected() {
        let (_, gw) = mock_gateway(GatewayConfig::default());
        let empty = ChatRequest {
            model_id: "m".into(),
            messages: vec![],
            temperature: None,
            max_tokens: None,
            request_tag: "t".into(),
        };
        assert!(matches!(
            gw.complete(&empty),
            Err(GatewayError::InvalidRequest(_))
        ));
        let mut bad_temp = ChatRequest::user("m", "x", "t");
        bad_temp.temperature = Some(-1.0);
        assert!(matches!(
            gw.complete(&bad_temp),
            Err(GatewayError::InvalidRequest(_))
        ));
    }

    #[test]
    fn backoff_schedule_is_nondecreasing_and_capped() {
        // Worst-case jitter on attempt k (+20%) stays at or below best-case
        // jitter on attempt k+1 (-20%) until the cap region, where delays
        // level off at 30 s +/- 20%.
        let capped_floor = (BACKOFF_CAP_MS as f64 * 0.8).round() as u64;
        for base in [100u64, 500, 2000] {
            for attempt in 1..12 {
                let hi = backoff_delay_ms(base, attempt, 0.2);
                let lo_next = backoff_delay_ms(base, attempt + 1, -0.2);
                assert!(lo_next >= hi.min(capped_floor));
                assert!(hi <= (BACKOFF_CAP_MS as f64 * 1.2).round() as u64);
            }
        }
    }

    #[test]
    fn concurrency_never_exceeds_limit() {
        let cfg = GatewayConfig {
            max_concurrency: 3,
            rate_limit: (10_000, 1_000),
            ..GatewayConfig::default()
        };
        let backend = Arc::new(MockBackend::echo());
        let gw = Arc::new(
            Gateway::with_clock(backend.clone(), cfg, Arc::new(MockClock::new())).unwrap(),
        );
        let handles: Vec<_> = (0..24)
            .map(|i| {
                let gw = gw.clone();
                std::thread::spawn(move || {
                    gw.complete(&ChatRequest::user("mock", &format!("r{i}"), "t"))
                        .unwrap();
                })
            })
            .collect();
        for h in handles {
            h.join().unwrap();
        }
        assert!(backend.max_in_flight() <= 3);
    }
}
