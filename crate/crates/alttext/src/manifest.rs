//! Run manifests. The manifest proper is a pure function of configuration,
//! inputs and provider responses; wall-clock times and cache statistics go
//! to a sidecar file so repeated runs produce identical manifests.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::config::{PipelineConfig, Seeds};
use crate::formats::ResultStatus;
use crate::providers::{CallRecord, ProviderKind};

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Replaces embedded images (base64 fields and data URIs) by their digest.
pub fn redact(v: &Value) -> Value {
    match v {
        Value::String(s) if s.starts_with("data:") || s.len() > 512 => {
            Value::String(format!("sha256:{}", sha256_hex(s.as_bytes())))
        }
        Value::Array(a) => Value::Array(a.iter().map(redact).collect()),
        Value::Object(o) => Value::Object(
            o.iter()
                .map(|(k, v)| {
                    let v = if k == "image_base64" {
                        Value::String(format!(
                            "sha256:{}",
                            sha256_hex(v.as_str().unwrap_or_default().as_bytes())
                        ))
                    } else {
                        redact(v)
                    };
                    (k.clone(), v)
                })
                .collect(),
        ),
        other => other.clone(),
    }
}

/// A provider call as logged in the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoggedCall {
    #[serde(flatten)]
    pub call: CallRecord,
    pub response: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IconRecord {
    pub icon_id: String,
    pub status: ResultStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub context_digest: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub icon_label: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prompt_digest: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alt_text: Option<String>,
    pub calls: Vec<LoggedCall>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub warnings: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl IconRecord {
    pub fn cost_usd(&self) -> f64 {
        self.calls.iter().map(|c| c.call.cost_usd).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Totals {
    pub icons: usize,
    pub ok: usize,
    pub failed: usize,
    pub cost_usd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    pub command: String,
    pub config: Value,
    pub seeds: Seeds,
    /// Input file digests by role.
    pub inputs: BTreeMap<String, String>,
    pub records: Vec<IconRecord>,
    pub totals: Totals,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub halted: Option<String>,
}

impl RunManifest {
    /// The run id is derived from the command, configuration and inputs.
    pub fn new(command: &str, cfg: &PipelineConfig, inputs: BTreeMap<String, String>) -> Self {
        let config = serde_json::to_value(cfg).expect("configuration serializes");
        let mut h = Sha256::new();
        h.update(command.as_bytes());
        h.update(config.to_string().as_bytes());
        h.update(serde_json::to_string(&inputs).expect("map serializes").as_bytes());
        RunManifest {
            run_id: hex::encode(h.finalize())[..16].to_string(),
            command: command.to_string(),
            config,
            seeds: cfg.seeds,
            inputs,
            records: Vec::new(),
            totals: Totals::default(),
            halted: None,
        }
    }

    pub fn finish(&mut self, records: Vec<IconRecord>, halted: Option<String>) {
        self.totals = Totals {
            icons: records.len(),
            ok: records.iter().filter(|r| r.status == ResultStatus::Ok).count(),
            failed: records.iter().filter(|r| r.status == ResultStatus::Failed).count(),
            cost_usd: records.iter().map(IconRecord::cost_usd).sum(),
        };
        self.records = records;
        self.halted = halted;
    }

    pub fn write(&self, path: &Path) -> std::io::Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(path, text)
    }

    pub fn read(path: &Path) -> std::io::Result<Self> {
        let raw = std::fs::read_to_string(path)?;
        serde_json::from_str(&raw).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
    }
}

/// Sidecar path next to a manifest: `x.json` becomes `x.times.json`.
pub fn sidecar_path(manifest: &Path) -> PathBuf {
    manifest.with_extension("times.json")
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ProviderStats {
    pub attempts: usize,
    pub cache_hits: usize,
    pub charged_usd: f64,
    pub peak_in_flight: usize,
}

/// Non-reproducible facts about a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTimes {
    pub run_id: String,
    pub started_unix_ms: u128,
    pub finished_unix_ms: u128,
    pub interrupted: bool,
    pub providers: BTreeMap<ProviderKind, ProviderStats>,
}

pub fn now_unix_ms() -> u128 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis())
        .unwrap_or(0)
}

impl RunTimes {
    pub fn write(&self, path: &Path) -> std::io::Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(path, text)
    }
}
