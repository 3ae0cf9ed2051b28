//! Content-addressed response cache: one JSON file per request digest.
//!
//! The digest covers the request semantics (model, messages, temperature,
//! max_tokens); the `request_tag` stage label is trace metadata and excluded.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{ChatRequest, GatewayError};

/// Canonical JSON form of a request, with a fixed field order.
pub fn canonical_request(req: &ChatRequest) -> String {
    let mut obj = serde_json::Map::new();
    obj.insert("model".into(), req.model_id.clone().into());
    let messages: Vec<serde_json::Value> = req
        .messages
        .iter()
        .map(|m| {
            let mut msg = serde_json::Map::new();
            msg.insert("role".into(), m.role.as_str().into());
            msg.insert("content".into(), m.content.clone().into());
            serde_json::Value::Object(msg)
        })
        .collect();
    obj.insert("messages".into(), messages.into());
    if let Some(t) = req.temperature {
        obj.insert("temperature".into(), format!("{t:?}").into());
    }
    if let Some(m) = req.max_tokens {
        obj.insert("max_tokens".into(), m.into());
    }
    serde_json::Value::Object(obj).to_string()
}

/// Deterministic digest over the canonical request form.
pub fn cache_key(req: &ChatRequest) -> String {
    let mut hasher = Sha256::new();
    hasher.update(canonical_request(req).as_bytes());
    hex::encode(hasher.finalize())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CacheEntry {
    pub key: String,
    pub request: String,
    pub response_text: String,
    pub created_at: String,
}

/// Directory-backed cache, one file per digest. Writes go through a temp
/// file + rename so concurrent readers never see a partial entry.
#[derive(Debug, Clone)]
pub struct ResponseCache {
    dir: PathBuf,
}

impl ResponseCache {
    pub fn new(dir: &Path) -> Result<Self, GatewayError> {
        fs::create_dir_all(dir).map_err(|e| GatewayError::Io(e.to_string()))?;
        Ok(Self {
            dir: dir.to_path_buf(),
        })
    }

    fn path_for(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.json"))
    }

    pub fn load(&self, key: &str) -> Option<CacheEntry> {
        let text = fs::read_to_string(self.path_for(key)).ok()?;
        serde_json::from_str(&text).ok()
    }

    pub fn store(&self, req: &ChatRequest, response_text: &str) -> Result<(), GatewayError> {
        let key = cache_key(req);
        let entry = CacheEntry {
            key: key.clone(),
            request: canonical_request(req),
            response_text: response_text.to_string(),
            created_at: chrono::Utc::now().to_rfc3339(),
        };
        let tmp = self.dir.join(format!(".{key}.tmp"));
        let body = serde_json::to_string_pretty(&entry)
            .map_err(|e| GatewayError::Io(e.to_string()))?;
        fs::write(&tmp, body).map_err(|e| GatewayError::Io(e.to_string()))?;
        fs::rename(&tmp, self.path_for(&key)).map_err(|e| GatewayError::Io(e.to_string()))?;
        Ok(())
    }

    pub fn len(&self) -> usize {
        fs::read_dir(&self.dir)
            .map(|rd| {
                rd.filter_map(|e| e.ok())
                    .filter(|e| e.path().extension().is_some_and(|x| x == "json"))
                    .count()
            })
            .unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn clear(&self) -> Result<usize, GatewayError> {
        let mut removed = 0;
        let rd = fs::read_dir(&self.dir).map_err(|e| GatewayError::Io(e.to_string()))?;
        for entry in rd.filter_map(|e| e.ok()) {
            if entry.path().extension().is_some_and(|x| x == "json") {
                fs::remove_file(entry.path()).map_err(|e| GatewayError::Io(e.to_string()))?;
                removed += 1;
            }
        }
        Ok(removed)
    }
}
