//! Report files: CSV tables, JSON documents and the timestamp sidecar.
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::Failure;
use crate::scenario::{check_version, SCHEMA_VERSION};

/// Identity stamped into every artifact of a run.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stamp {
    pub scenario_hash: String,
    pub seed: u64,
}

/// JSON artifact with its schema version and stamp.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Document<P> {
    pub schema_version: String,
    pub kind: String,
    pub scenario_hash: String,
    pub seed: u64,
    pub payload: P,
}

impl<P> Document<P> {
    pub fn new(kind: &str, stamp: &Stamp, payload: P) -> Self {
        Self {
            schema_version: SCHEMA_VERSION.to_string(),
            kind: kind.to_string(),
            scenario_hash: stamp.scenario_hash.clone(),
            seed: stamp.seed,
            payload,
        }
    }
}

/// Writes artifacts into one directory and remembers their names.
pub struct BundleWriter {
    dir: PathBuf,
    stamp: Stamp,
    files: Vec<String>,
}

impl BundleWriter {
    pub fn create(dir: &Path, stamp: Stamp) -> Result<Self, Failure> {
        std::fs::create_dir_all(dir).map_err(|e| Failure::config(format!("{}: {e}", dir.display())))?;
        Ok(Self { dir: dir.to_path_buf(), stamp, files: Vec::new() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn stamp(&self) -> &Stamp {
        &self.stamp
    }

    pub fn files(&self) -> &[String] {
        &self.files
    }

    /// CSV with a leading `# schema=... scenario=... seed=...` comment line and a header row.
    pub fn csv<R: Serialize>(&mut self, name: &str, rows: &[R]) -> anyhow::Result<()> {
        let mut buf = Vec::new();
        writeln!(
            buf,
            "# schema={SCHEMA_VERSION} scenario={} seed={}",
            self.stamp.scenario_hash, self.stamp.seed
        )?;
        {
            let mut w = csv::Writer::from_writer(&mut buf);
            for r in rows {
                w.serialize(r)?;
            }
            w.flush()?;
        }
        self.raw(name, &buf)
    }

    pub fn json<P: Serialize>(&mut self, name: &str, kind: &str, payload: P) -> anyhow::Result<()> {
        let doc = Document::new(kind, &self.stamp, payload);
        let mut text = serde_json::to_string_pretty(&doc)?;
        text.push('\n');
        self.raw(name, text.as_bytes())
    }

    pub fn raw(&mut self, name: &str, bytes: &[u8]) -> anyhow::Result<()> {
        let path = self.dir.join(name);
        std::fs::write(&path, bytes).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))?;
        if !self.files.iter().any(|f| f == name) {
            self.files.push(name.to_string());
        }
        Ok(())
    }

}

/// Writes `run_meta.json`: run metadata that legitimately differs between reruns, kept out of
/// the report payloads.
pub fn write_sidecar(dir: &Path, stamp: &Stamp, command: &str) -> anyhow::Result<()> {
    let now = std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).unwrap_or_default();
    let meta = serde_json::json!({
        "schema_version": SCHEMA_VERSION,
        "scenario_hash": stamp.scenario_hash,
        "seed": stamp.seed,
        "command": command,
        "unix_time": now.as_secs(),
        "tool_version": env!("CARGO_PKG_VERSION"),
        "threads": rayon::current_num_threads(),
    });
    std::fs::write(dir.join("run_meta.json"), serde_json::to_string_pretty(&meta)? + "\n")?;
    Ok(())
}

/// JSON number, or a string sentinel for values JSON cannot represent.
pub fn num(x: f64) -> Value {
    if x.is_nan() {
        Value::String("nan".into())
    } else if x == f64::INFINITY {
        Value::String("+inf".into())
    } else if x == f64::NEG_INFINITY {
        Value::String("-inf".into())
    } else {
        serde_json::json!(x)
    }
}

/// Parses a JSON artifact, rejecting unknown major versions and unexpected kinds.
pub fn read_document(path: &Path, kind: Option<&str>) -> Result<Document<Value>, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::config(format!("{}: {e}", path.display())))?;
    parse_document(&text, kind).map_err(|e| match e {
        Failure::Config(m) => Failure::config(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn parse_document(text: &str, kind: Option<&str>) -> Result<Document<Value>, Failure> {
    let raw: Value = serde_json::from_str(text).map_err(|e| Failure::config(format!("invalid JSON: {e}")))?;
    let version = raw
        .get("schema_version")
        .and_then(Value::as_str)
        .ok_or_else(|| Failure::config("missing schema_version"))?;
    check_version(version, "document")?;
    let doc: Document<Value> =
        serde_json::from_value(raw).map_err(|e| Failure::config(format!("malformed document: {e}")))?;
    if let Some(k) = kind {
        if doc.kind != k {
            return Err(Failure::config(format!("expected a {k} document, found {}", doc.kind)));
        }
    }
    Ok(doc)
}
