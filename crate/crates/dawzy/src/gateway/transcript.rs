//! Append-only JSONL transcripts, one file per session.

use std::fs::OpenOptions;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::{SystemTime, UNIX_EPOCH};

use dawzy_core::planner::OutcomeKind;
use serde::{Deserialize, Serialize};

use super::ChatResponse;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Modality {
    Text,
    Hum,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptRecord {
    pub session_id: String,
    pub timestamp_ms: u64,
    pub modality: Modality,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub audio_bytes: Option<usize>,
    pub kind: OutcomeKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub script: Option<String>,
    pub revision_before: u64,
    pub revision_after: u64,
    pub explanation: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error_code: Option<String>,
}

impl TranscriptRecord {
    pub fn new(modality: Modality, text: Option<&str>, audio_bytes: Option<usize>, r: &ChatResponse) -> Self {
        let timestamp_ms = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis() as u64);
        TranscriptRecord {
            session_id: r.session_id.clone(),
            timestamp_ms,
            modality,
            text: text.map(str::to_owned),
            audio_bytes,
            kind: r.kind,
            script: r.script.clone(),
            revision_before: r.revision_before,
            revision_after: r.revision_after,
            explanation: r.explanation.clone(),
            error_code: r.error.as_ref().map(|e| e.code.clone()),
        }
    }
}

pub struct TranscriptLog {
    dir: PathBuf,
    write: Mutex<()>,
}

impl TranscriptLog {
    pub fn new(dir: impl Into<PathBuf>) -> io::Result<Self> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir)?;
        Ok(TranscriptLog { dir, write: Mutex::new(()) })
    }

    /// Session ids become file names; anything outside `[A-Za-z0-9_-]` is
    /// replaced so an id cannot escape the directory.
    pub fn path_for(&self, session_id: &str) -> PathBuf {
        let safe: String = session_id
            .chars()
            .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
            .collect();
        let safe = if safe.is_empty() { "default".to_owned() } else { safe };
        self.dir.join(format!("{safe}.jsonl"))
    }

    pub fn append(&self, record: &TranscriptRecord) -> io::Result<()> {
        let _guard = self.write.lock().unwrap_or_else(|p| p.into_inner());
        let mut line = serde_json::to_string(record).map_err(io::Error::other)?;
        line.push('\n');
        let mut f = OpenOptions::new().create(true).append(true).open(self.path_for(&record.session_id))?;
        f.write_all(line.as_bytes())
    }

    pub fn read(path: &Path) -> io::Result<Vec<TranscriptRecord>> {
        std::fs::read_to_string(path)?
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| serde_json::from_str(l).map_err(io::Error::other))
            .collect()
    }
}
