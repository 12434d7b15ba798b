//! `KEY=v1,v2,...` overrides expanded into a grid of config documents.

use serde_json::Value;
use thermoflux_core::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Axis {
    pub key: String,
    pub values: Vec<Value>,
}

/// Values that parse as JSON keep their type; anything else is a string.
fn parse_value(text: &str) -> Value {
    serde_json::from_str(text).unwrap_or_else(|_| Value::String(text.to_string()))
}

pub fn parse_axis(spec: &str) -> Result<Axis> {
    let (key, values) = spec
        .split_once('=')
        .ok_or_else(|| Error::config("--sweep", format!("expected KEY=v1,v2,..., got `{spec}`")))?;
    let key = key.trim();
    if key.is_empty() {
        return Err(Error::config("--sweep", format!("missing key in `{spec}`")));
    }
    let values: Vec<Value> = values.split(',').map(|v| parse_value(v.trim())).collect();
    if values.iter().any(|v| v.as_str() == Some("")) {
        return Err(Error::config(key, "empty sweep value"));
    }
    Ok(Axis {
        key: key.to_string(),
        values,
    })
}

/// Sets a dotted key on an existing document. Unknown keys are rejected so a
/// typo cannot silently produce identical runs.
pub fn set_key(doc: &mut Value, key: &str, value: Value) -> Result<()> {
    let pointer: String = key.split('.').map(|p| format!("/{p}")).collect();
    let slot = doc
        .pointer_mut(&pointer)
        .ok_or_else(|| Error::config(key, "no such configuration key"))?;
    *slot = value;
    Ok(())
}

/// Cartesian product of the axes, first axis varying slowest.
pub fn expand(base: &Value, axes: &[Axis]) -> Result<Vec<Value>> {
    let mut docs = vec![base.clone()];
    for axis in axes {
        let mut next = Vec::with_capacity(docs.len() * axis.values.len());
        for doc in &docs {
            for v in &axis.values {
                let mut d = doc.clone();
                set_key(&mut d, &axis.key, v.clone())?;
                next.push(d);
            }
        }
        docs = next;
    }
    Ok(docs)
}
