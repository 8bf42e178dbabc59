//! Run provenance.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::PathBuf;

use chrono::{SecondsFormat, Utc};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::params::ParamMap;

/// Provenance of one invocation. Timestamps live here and never in data files, which
/// only carry `id`.
#[derive(Clone, Debug, Serialize)]
pub struct RunRecord {
    pub id: String,
    pub command: String,
    pub params: BTreeMap<String, String>,
    /// Seed as given; `sample` accepts a list.
    pub seed: Option<String>,
    /// SHA-256 of the inputs framed as a git blob.
    pub input_hash: String,
    pub started: String,
    pub finished: String,
    pub outputs: Vec<String>,
}

/// Hash of `content` framed like a git blob: `blob <len>\0<content>`.
pub fn blob_hash(content: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", content.len()).as_bytes());
    h.update(content);
    hex::encode(h.finalize())
}

/// Everything that determines the data: command, parameters and input file contents.
pub fn input_hash(command: &str, params: &ParamMap, files: &[(String, String)]) -> String {
    let mut s = format!("command {command}\n{}", params.canonical());
    for (name, text) in files {
        s.push_str(&format!("file {name} {}\n{text}", text.len()));
    }
    blob_hash(s.as_bytes())
}

pub fn now() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

/// Where data goes: a file (record beside it as `<path>.run.json`) or stdout (record on stderr).
pub struct Sink {
    pub path: Option<PathBuf>,
    pub data: Vec<u8>,
}

impl Sink {
    pub fn new(out: &str) -> Self {
        Sink { path: (!out.is_empty() && out != "-").then(|| PathBuf::from(out)), data: Vec::new() }
    }

    pub fn finish(self, mut record: RunRecord, stdout: &mut dyn Write, stderr: &mut dyn Write) -> anyhow::Result<()> {
        match &self.path {
            Some(p) => {
                std::fs::write(p, &self.data)?;
                record.outputs.push(p.display().to_string());
                record.finished = now();
                let mut rp = p.clone().into_os_string();
                rp.push(".run.json");
                std::fs::write(&rp, serde_json::to_string_pretty(&record)? + "\n")?;
            }
            None => {
                stdout.write_all(&self.data)?;
                record.outputs.push("-".into());
                record.finished = now();
                writeln!(stderr, "run record: {}", serde_json::to_string(&record)?)?;
            }
        }
        Ok(())
    }
}
