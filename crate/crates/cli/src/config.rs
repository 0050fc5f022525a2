//! Building the effective experiment configuration.

use btud::experiment::{ComponentRule, ExperimentConfig, ExperimentKind};
use serde_json::{Map, Value};

use crate::args::ConfigArgs;
use crate::output::Failure;

/// Recursively overlays `top` on `base`; objects merge key by key, anything
/// else replaces.
fn merge(base: &mut Value, top: Value) {
    match (base, top) {
        (Value::Object(b), Value::Object(t)) => {
            for (k, v) in t {
                merge(b.entry(k).or_insert(Value::Null), v);
            }
        }
        (slot, v) => *slot = v,
    }
}

fn set_path(root: &mut Value, path: &str, value: Value) -> Result<(), Failure> {
    let mut node = root;
    let parts: Vec<&str> = path.split('.').collect();
    for (n, part) in parts.iter().enumerate() {
        if part.is_empty() {
            return Err(Failure::usage(format!("empty segment in `{path}`")));
        }
        let obj = node.as_object_mut().ok_or_else(|| {
            Failure::usage(format!("`{}` is not an object", parts[..n].join(".")))
        })?;
        if n + 1 == parts.len() {
            obj.insert(part.to_string(), value);
            return Ok(());
        }
        node = obj
            .entry(part.to_string())
            .or_insert_with(|| Value::Object(Map::new()));
    }
    Ok(())
}

fn parse_assignment(s: &str) -> Result<(&str, Value), Failure> {
    let (path, raw) = s
        .split_once('=')
        .ok_or_else(|| Failure::usage(format!("--set expects PATH=VALUE, got `{s}`")))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    Ok((path.trim(), value))
}

fn kind_of(v: &Value) -> Result<Option<ExperimentKind>, Failure> {
    match v.get("experiment") {
        None => Ok(None),
        Some(k) => serde_json::from_value(k.clone())
            .map(Some)
            .map_err(|e| Failure::usage(format!("experiment: {e}"))),
    }
}

/// Preset of the chosen experiment, overlaid with the config file, `--set`
/// assignments, the dedicated flags and finally the global seed.
pub fn resolve(args: &ConfigArgs, seed: Option<u64>) -> Result<ExperimentConfig, Failure> {
    let file: Option<Value> = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Failure::io(format!("{}: {e}", path.display())))?;
            let v: Value = serde_json::from_str(&text)
                .map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
            if !v.is_object() {
                return Err(Failure::usage(format!(
                    "{}: expected a JSON object",
                    path.display()
                )));
            }
            Some(v)
        }
        None => None,
    };
    let kind = match args.experiment {
        Some(k) => k.into(),
        None => match &file {
            Some(v) => kind_of(v)?.unwrap_or(ExperimentKind::SyntheticBlock),
            None => ExperimentKind::SyntheticBlock,
        },
    };
    let mut value =
        serde_json::to_value(ExperimentConfig::preset(kind)).map_err(Failure::internal)?;
    if let Some(f) = file {
        merge(&mut value, f);
    }
    set_path(
        &mut value,
        "experiment",
        serde_json::to_value(kind).map_err(Failure::internal)?,
    )?;
    for s in &args.set {
        let (path, v) = parse_assignment(s)?;
        set_path(&mut value, path, v)?;
    }
    let mut config: ExperimentConfig =
        serde_json::from_value(value).map_err(|e| Failure::usage(format!("configuration: {e}")))?;

    if let Some(r) = &args.ranks {
        config.ranks = r[..]
            .try_into()
            .map_err(|_| Failure::usage(format!("--ranks takes three values, got {}", r.len())))?;
    }
    if let Some(c) = &args.components {
        config.selection.components = ComponentRule::Fixed {
            components: c.clone(),
        };
    }
    if let Some(m) = args.method {
        config.selection.method = m.into();
    }
    if let Some(t) = args.threshold {
        config.selection.threshold = t;
    }
    if let Some(s) = args.solver {
        config.solver = s.into();
    }
    if let Some(a) = args.alpha {
        config.alpha = a;
    }
    if let Some(s) = seed {
        config.seed = s;
    }
    config.validate().map_err(Failure::from)?;
    Ok(config)
}
