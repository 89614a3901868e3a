//! Versioned JSON document format for [`PredictiveModel`].
//!
//! ```json
//! {
//!   "format": "conlearn-model",
//!   "version": 1,
//!   "outcome": "palatability",
//!   "features": { "x_names": [...], "w_names": [...], "x_bounds": [[lo, hi], ...], "w_bounds": [...] },
//!   "model": { "kind": "linear" | "tree" | "forest" | "gbm" | "mlp", ... }
//! }
//! ```
//!
//! The `model` object carries the fields of the matching shape struct.
//! Trees are stored as `{task, root, splits, leaf_values}`; leaf paths are
//! rebuilt on load.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{FeatureSpace, ModelShape, PredictiveModel};

pub const DOCUMENT_FORMAT: &str = "conlearn-model";
pub const DOCUMENT_VERSION: u32 = 1;

#[derive(Debug, Error, Clone, PartialEq)]
#[error("schema error at `{path}`: {message}")]
pub struct SchemaError {
    pub path: String,
    pub message: String,
}

impl SchemaError {
    fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            path: path.into(),
            message: message.into(),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Document {
    format: String,
    version: u32,
    outcome: String,
    features: FeatureSpace,
    model: serde_json::Value,
}

pub fn to_document(model: &PredictiveModel) -> String {
    let doc = Document {
        format: DOCUMENT_FORMAT.to_string(),
        version: DOCUMENT_VERSION,
        outcome: model.outcome.clone(),
        features: model.features.clone(),
        model: serde_json::to_value(&model.shape).expect("model shapes always serialize"),
    };
    serde_json::to_string_pretty(&doc).expect("model documents always serialize")
}

pub fn from_document(text: &str) -> Result<PredictiveModel, SchemaError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let doc: Document = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        SchemaError::new(path, e.into_inner().to_string())
    })?;
    if doc.format != DOCUMENT_FORMAT {
        return Err(SchemaError::new("format", format!("expected `{DOCUMENT_FORMAT}`, got `{}`", doc.format)));
    }
    if doc.version != DOCUMENT_VERSION {
        return Err(SchemaError::new("version", format!("unsupported version {}", doc.version)));
    }
    let f = &doc.features;
    if f.x_names.is_empty() {
        return Err(SchemaError::new("features.x_names", "at least one decision feature is required"));
    }
    if f.x_bounds.len() != f.x_names.len() {
        return Err(SchemaError::new("features.x_bounds", "one bound pair per decision feature"));
    }
    if f.w_bounds.len() != f.w_names.len() {
        return Err(SchemaError::new("features.w_bounds", "one bound pair per context feature"));
    }
    for (key, bounds) in [("x_bounds", &f.x_bounds), ("w_bounds", &f.w_bounds)] {
        if let Some(i) = bounds
            .iter()
            .position(|&(lo, hi)| !(lo.is_finite() && hi.is_finite() && lo <= hi))
        {
            return Err(SchemaError::new(format!("features.{key}[{i}]"), "bounds must be finite with lo <= hi"));
        }
    }
    let shape = parse_shape(doc.model)?;
    let model = PredictiveModel::new(doc.outcome, doc.features, shape);
    model
        .validate()
        .map_err(|e| SchemaError::new("model", e.to_string()))?;
    Ok(model)
}

fn parse_shape(mut value: serde_json::Value) -> Result<ModelShape, SchemaError> {
    let obj = value
        .as_object_mut()
        .ok_or_else(|| SchemaError::new("model", "expected an object"))?;
    let kind = match obj.remove("kind") {
        Some(serde_json::Value::String(k)) => k,
        Some(_) => return Err(SchemaError::new("model.kind", "expected a string")),
        None => return Err(SchemaError::new("model", "missing field `kind`")),
    };
    fn typed<T: serde::de::DeserializeOwned>(v: serde_json::Value) -> Result<T, SchemaError> {
        serde_path_to_error::deserialize(v).map_err(|e| {
            let inner = e.path().to_string();
            let path = if inner == "." { "model".to_string() } else { format!("model.{inner}") };
            SchemaError::new(path, e.into_inner().to_string())
        })
    }
    Ok(match kind.as_str() {
        "linear" => ModelShape::Linear(typed(value)?),
        "tree" => ModelShape::Tree(typed(value)?),
        "forest" => ModelShape::Forest(typed(value)?),
        "gbm" => ModelShape::Gbm(typed(value)?),
        "mlp" => ModelShape::Mlp(typed(value)?),
        other => {
            return Err(SchemaError::new(
                "model.kind",
                format!("unknown model kind `{other}`; expected linear, tree, forest, gbm or mlp"),
            ))
        }
    })
}
