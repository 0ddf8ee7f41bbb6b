//! Cartesian parameter sweeps over a scenario's JSON document.

use std::collections::BTreeMap;

use serde_json::Value;

use crate::scenario::{parse_value, Scenario, ScenarioError};

/// One parameter path (`model.theta`, `families.0.basis`) and its values.
#[derive(Debug, Clone, PartialEq)]
pub struct Axis {
    pub path: String,
    pub values: Vec<Value>,
}

/// Comma-separated list; each item is read as JSON, falling back to a string.
pub fn parse_values(list: &str) -> Vec<Value> {
    list.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| serde_json::from_str(s).unwrap_or_else(|_| Value::String(s.to_string())))
        .collect()
}

fn set_path(doc: &mut Value, path: &str, value: Value) -> Result<(), ScenarioError> {
    let mut cur = doc;
    let parts: Vec<&str> = path.split('.').collect();
    for (k, part) in parts.iter().enumerate() {
        let last = k + 1 == parts.len();
        cur = match cur {
            Value::Object(map) => {
                if last {
                    map.insert(part.to_string(), value);
                    return Ok(());
                }
                map.entry(part.to_string()).or_insert_with(|| Value::Object(Default::default()))
            }
            Value::Array(items) => {
                let idx: usize = part
                    .parse()
                    .map_err(|_| ScenarioError::new(path, format!("'{part}' is not an array index")))?;
                let len = items.len();
                let slot = items
                    .get_mut(idx)
                    .ok_or_else(|| ScenarioError::new(path, format!("index {idx} out of range ({len} items)")))?;
                if last {
                    *slot = value;
                    return Ok(());
                }
                slot
            }
            _ => return Err(ScenarioError::new(path, format!("'{part}' does not name a field"))),
        };
    }
    Err(ScenarioError::new(path, "empty parameter path"))
}

pub type SweepPoint = (Scenario, BTreeMap<String, Value>);

/// Every combination of axis values, first axis slowest. Point names get a
/// `_pNNN` suffix.
pub fn expand(base: &Value, axes: &[Axis]) -> Result<Vec<SweepPoint>, ScenarioError> {
    if axes.iter().any(|a| a.values.is_empty()) {
        return Err(ScenarioError::new("--values", "every parameter needs at least one value"));
    }
    let total: usize = axes.iter().map(|a| a.values.len()).product();
    let name = base
        .get("name")
        .and_then(Value::as_str)
        .ok_or_else(|| ScenarioError::new("name", "missing"))?
        .to_string();
    let width = total.to_string().len().max(3);
    let mut out = Vec::with_capacity(total);
    for k in 0..total {
        let mut doc = base.clone();
        let mut point = BTreeMap::new();
        let mut rest = k;
        let mut choice = vec![0; axes.len()];
        for (pos, a) in axes.iter().enumerate().rev() {
            choice[pos] = rest % a.values.len();
            rest /= a.values.len();
        }
        for (a, &c) in axes.iter().zip(&choice) {
            set_path(&mut doc, &a.path, a.values[c].clone())?;
            point.insert(a.path.clone(), a.values[c].clone());
        }
        set_path(&mut doc, "name", Value::String(format!("{name}_p{k:0width$}")))?;
        let scenario = parse_value(doc)?;
        scenario.prepare()?;
        out.push((scenario, point));
    }
    Ok(out)
}
