use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use super::{ProviderKind, Response, Usage};

/// SHA-256 over the provider kind, model and the full request payload.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CacheKey {
    kind: ProviderKind,
    hex: String,
}

impl CacheKey {
    pub fn new(kind: ProviderKind, model: &str, payload: &Value) -> Self {
        let mut h = Sha256::new();
        h.update(kind.as_str().as_bytes());
        h.update([0]);
        h.update(model.as_bytes());
        h.update([0]);
        // serde_json maps are sorted, so this serialization is canonical
        h.update(payload.to_string().as_bytes());
        CacheKey {
            kind,
            hex: hex::encode(h.finalize()),
        }
    }

    pub fn hex(&self) -> &str {
        &self.hex
    }
}

#[derive(Serialize, Deserialize)]
struct Entry {
    body: Value,
    usage: Option<Usage>,
}

/// Content-addressed response files. Writes go through a temporary file and
/// a rename, so concurrent readers see either nothing or a whole entry.
#[derive(Debug, Clone)]
pub struct ResponseCache {
    root: PathBuf,
}

impl ResponseCache {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        ResponseCache { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn path(&self, key: &CacheKey) -> PathBuf {
        self.root
            .join(key.kind.as_str())
            .join(&key.hex[..2])
            .join(format!("{}.json", key.hex))
    }

    pub fn get(&self, key: &CacheKey) -> Option<Response> {
        let raw = fs::read(self.path(key)).ok()?;
        match serde_json::from_slice::<Entry>(&raw) {
            Ok(e) => Some(Response {
                body: e.body,
                usage: e.usage,
            }),
            Err(err) => {
                log::warn!("ignoring unreadable cache entry {}: {err}", key.hex);
                None
            }
        }
    }

    /// Stores `resp` unless an entry already exists. Returns whether this
    /// call wrote it.
    pub fn put(&self, key: &CacheKey, resp: &Response) -> std::io::Result<bool> {
        let path = self.path(key);
        if path.exists() {
            return Ok(false);
        }
        let dir = path.parent().expect("cache path has a parent");
        fs::create_dir_all(dir)?;
        let entry = Entry {
            body: resp.body.clone(),
            usage: resp.usage,
        };
        let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
        tmp.write_all(&serde_json::to_vec(&entry)?)?;
        tmp.flush()?;
        match tmp.persist_noclobber(&path) {
            Ok(_) => Ok(true),
            Err(e) if path.exists() => {
                drop(e);
                Ok(false)
            }
            Err(e) => Err(e.error),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn key_depends_on_every_part() {
        let p = json!({"a": 1});
        let k = CacheKey::new(ProviderKind::Ocr, "m", &p);
        assert_eq!(k, CacheKey::new(ProviderKind::Ocr, "m", &json!({"a": 1})));
        assert_ne!(k, CacheKey::new(ProviderKind::ChatLlm, "m", &p));
        assert_ne!(k, CacheKey::new(ProviderKind::Ocr, "n", &p));
        assert_ne!(k, CacheKey::new(ProviderKind::Ocr, "m", &json!({"a": 2})));
        assert_eq!(k.hex().len(), 64);
    }

    #[test]
    fn first_write_wins() {
        let dir = tempfile::tempdir().unwrap();
        let cache = ResponseCache::new(dir.path());
        let k = CacheKey::new(ProviderKind::Ocr, "m", &json!("x"));
        assert!(cache.get(&k).is_none());
        let r = Response { body: json!({"v": 1}), usage: None };
        assert!(cache.put(&k, &r).unwrap());
        let other = Response { body: json!({"v": 2}), usage: None };
        assert!(!cache.put(&k, &other).unwrap());
        assert_eq!(cache.get(&k).unwrap(), r);
    }
}
