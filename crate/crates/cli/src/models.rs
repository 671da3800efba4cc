//! Float and quantized model files.
use std::path::Path;

use cimsim_core::dnn::{FloatMlp, QuantizedMlp};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::Failure;
use crate::scenario::{check_version, SCHEMA_VERSION};

pub const FLOAT_KIND: &str = "float-mlp";
pub const QUANTIZED_KIND: &str = "quantized-mlp";

#[derive(Serialize, Deserialize)]
struct ModelFile<M> {
    schema_version: String,
    kind: String,
    seed: u64,
    model: M,
}

pub fn model_json<M: Serialize>(kind: &str, seed: u64, model: &M) -> String {
    let file = ModelFile { schema_version: SCHEMA_VERSION.to_string(), kind: kind.to_string(), seed, model };
    serde_json::to_string(&file).expect("model serializes") + "\n"
}

pub fn save_model<M: Serialize>(path: &Path, kind: &str, seed: u64, model: &M) -> Result<(), Failure> {
    std::fs::write(path, model_json(kind, seed, model)).map_err(|e| Failure::stage("write-model", format!("{}: {e}", path.display())))
}

fn load_model<M: DeserializeOwned>(path: &Path, kind: &str) -> Result<M, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::config(format!("{}: {e}", path.display())))?;
    let raw: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| Failure::config(format!("{}: {e}", path.display())))?;
    let version = raw.get("schema_version").and_then(|v| v.as_str()).unwrap_or("");
    check_version(version, &path.display().to_string())?;
    let file: ModelFile<M> =
        serde_json::from_value(raw).map_err(|e| Failure::config(format!("{}: {e}", path.display())))?;
    if file.kind != kind {
        return Err(Failure::config(format!("{}: expected a {kind} model, found {}", path.display(), file.kind)));
    }
    Ok(file.model)
}

pub fn load_float(path: &Path) -> Result<FloatMlp, Failure> {
    let m: FloatMlp = load_model(path, FLOAT_KIND)?;
    m.validate().map_err(|e| Failure::config(format!("{}: {e}", path.display())))?;
    Ok(m)
}

pub fn load_quantized(path: &Path) -> Result<QuantizedMlp, Failure> {
    let m: QuantizedMlp = load_model(path, QUANTIZED_KIND)?;
    m.validate().map_err(|e| Failure::config(format!("{}: {e}", path.display())))?;
    Ok(m)
}
