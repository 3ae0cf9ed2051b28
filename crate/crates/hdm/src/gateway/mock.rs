//! Deterministic mock backend for offline tests and dry runs.
//!
//! A `MockScript` maps (request_tag, user-content substring) to a canned
//! reply; anything unmatched gets `MOCK[<last user content>]`.

use std::sync::atomic::{AtomicUsize, Ordering};

use super::{ChatBackend, ChatRequest, GatewayError};

#[derive(Debug, Clone)]
pub struct MockRule {
    /// Match only this stage label; `None` matches any tag.
    pub tag: Option<String>,
    /// Substring the last user message must contain.
    pub contains: String,
    pub reply: String,
}

#[derive(Debug, Clone, Default)]
pub struct MockScript {
    pub rules: Vec<MockRule>,
}

impl MockScript {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn rule(mut self, tag: &str, contains: &str, reply: &str) -> Self {
        self.rules.push(MockRule {
            tag: Some(tag.to_string()),
            contains: contains.to_string(),
            reply: reply.to_string(),
        });
        self
    }

    pub fn reply_for(&self, req: &ChatRequest) -> String {
        let content = req.last_user_content().unwrap_or_default();
        for rule in &self.rules {
            let tag_ok = rule.tag.as_deref().is_none_or(|t| t == req.request_tag);
            if tag_ok && content.contains(&rule.contains) {
                return rule.reply.clone();
            }
        }
        format!("MOCK[{content}]")
    }
}

/// Scripted backend with instrumentation: a call counter, an in-flight
/// gauge (for concurrency assertions), and an optional fail-first-N knob
/// for retry tests.
pub struct MockBackend {
    script: MockScript,
    calls: AtomicUsize,
    in_flight: AtomicUsize,
    max_in_flight: AtomicUsize,
    fail_first: AtomicUsize,
}

impl MockBackend {
    pub fn new(script: MockScript) -> Self {
        Self {
            script,
            calls: AtomicUsize::new(0),
            in_flight: AtomicUsize::new(0),
            max_in_flight: AtomicUsize::new(0),
            fail_first: AtomicUsize::new(0),
        }
    }

    pub fn echo() -> Self {
        Self::new(MockScript::new())
    }

    /// Make the next `n` sends fail with a transient network error.
    pub fn fail_next(&self, n: usize) {
        self.fail_first.store(n, Ordering::SeqCst);
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn max_in_flight(&self) -> usize {
        self.max_in_flight.load(Ordering::SeqCst)
    }
}

impl ChatBackend for MockBackend {
    fn send(&self, req: &ChatRequest) -> Result<String, GatewayError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let n = self.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
        self.max_in_flight.fetch_max(n, Ordering::SeqCst);
        // Small pause so overlapping callers are observable.
        std::thread::sleep(std::time::Duration::from_micros(200));
        let result = if self
            .fail_first
            .fetch_update(Ordering::SeqCst, Ordering::SeqCst, |v| v.checked_sub(1))
            .is_ok()
        {
            Err(GatewayError::Network("scripted transient failure".into()))
        } else {
            Ok(self.script.reply_for(req))
        };
        self.in_flight.fetch_sub(1, Ordering::SeqCst);
        result
    }

    fn name(&self) -> &str {
        "mock"
    }
}

#[cfg(test)]
mod tests {
    use super::super::{ChatMessage, Role};
    use super::*;

    fn req(tag: &str, content: &str) -> ChatRequest {
        ChatRequest {
            model_id: "mock".into(),
            messages: vec![ChatMessage {
                role: Role::User,
                content: content.into(),
            }],
            temperature: None,
            max_tokens: None,
            request_tag: tag.into(),
        }
    }

    #[test]
    fn default_rule_echoes() {
        let script = MockScript::new();
        assert_eq!(script.reply_for(&req("any", "PING")), "MOCK[PING]");
    }

    #[test]
    fn scripted_rule_wins() {
        let script = MockScript::new().rule(
            "decompose",
            "chicken",
            "Topic: a chicken\nAngle: crossing\nPunchline: the other side",
        );
        let reply = script.reply_for(&req("decompose", "joke about a chicken"));
        assert!(reply.starts_with("Topic:"));
        // Same content under the wrong tag falls through to the default.
        assert_eq!(
            script.reply_for(&req("compose", "joke about a chicken")),
            "MOCK[joke about a chicken]"
        );
    }

    #[test]
    fn replies_are_deterministic() {
        let script = MockScript::new().rule("t", "x", "y");
        let backend = MockBackend::new(script);
        let a = backend.send(&req("t", "contains x")).unwrap();
        let b = backend.send(&req("t", "contains x")).unwrap();
        assert_eq!(a, b);
        assert_eq!(backend.calls(), 2);
    }
}
