use std::fs;
use std::path::{Path, PathBuf};

use serde_json::Value;
use wildtrack_core::scenario::{AntennaSource, ScenarioConfig, TerrainSource};

use crate::CliError;

/// Parses a JSON config, applies `key.path=value` overrides and validates.
/// Relative file references resolve against the config's directory.
pub fn load_config(path: &Path, overrides: &[String]) -> Result<ScenarioConfig, CliError> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut config = parse_config(&text, overrides)?;
    let base = path.parent().unwrap_or(Path::new("."));
    resolve_paths(&mut config, base);
    config.validate()?;
    Ok(config)
}

/// Parses and overrides without touching the filesystem or validating.
pub fn parse_config(text: &str, overrides: &[String]) -> Result<ScenarioConfig, CliError> {
    let value: Value = serde_json::from_str(text).map_err(|e| CliError::Parse {
        path: String::new(),
        message: e.to_string(),
    })?;
    let config = from_value(value)?;
    if overrides.is_empty() {
        return Ok(config);
    }
    // overrides apply to the fully defaulted tree so every key is addressable
    let mut tree = serde_json::to_value(&config).expect("config serializes");
    for spec in overrides {
        apply_override(&mut tree, spec)?;
    }
    from_value(tree)
}

fn from_value(value: Value) -> Result<ScenarioConfig, CliError> {
    serde_path_to_error::deserialize(value).map_err(|e| CliError::Parse {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })
}

/// Sets one `a.b.c=value` override. The value is read as JSON when it
/// parses, otherwise as a string. A bare string assigned to a tagged block
/// (such as `planner.reward=shannon`) selects that variant.
pub fn apply_override(tree: &mut Value, spec: &str) -> Result<(), CliError> {
    let err = |message: &str| CliError::Override {
        spec: spec.to_string(),
        message: message.to_string(),
    };
    let (key, raw) = spec.split_once('=').ok_or_else(|| err("expected key=value"))?;
    let key = key.trim();
    if key.is_empty() {
        return Err(err("empty key"));
    }
    let value = serde_json::from_str::<Value>(raw.trim()).unwrap_or_else(|_| Value::String(raw.trim().to_string()));
    let parts: Vec<&str> = key.split('.').collect();
    let (leaf, parents) = parts.split_last().expect("non-empty key");
    let mut node = tree;
    for (i, part) in parents.iter().enumerate() {
        node = node
            .as_object_mut()
            .and_then(|m| m.get_mut(*part))
            .ok_or_else(|| err(&format!("unknown key `{}`", parts[..=i].join("."))))?;
    }
    let map = node
        .as_object_mut()
        .ok_or_else(|| err(&format!("`{}` is not a block", parents.join("."))))?;
    // absent optional keys may be set; typos are caught by the typed parse
    let slot = map.entry(leaf.to_string()).or_insert(Value::Null);
    let tagged = slot.as_object().is_some_and(|m| m.contains_key("kind"));
    *slot = match value {
        Value::String(s) if tagged => serde_json::json!({ "kind": s }),
        v => v,
    };
    Ok(())
}

fn resolve_paths(config: &mut ScenarioConfig, base: &Path) {
    let fix = |p: &mut PathBuf| {
        if p.is_relative() {
            *p = base.join(&*p);
        }
    };
    if let TerrainSource::File { path, .. } = &mut config.terrain {
        fix(path);
    }
    if let AntennaSource::File { path } = &mut config.antenna {
        fix(path);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn override_selects_tagged_variant() {
        let c = parse_config("{}", &["planner.reward=shannon".into()]).unwrap();
        assert_eq!(c.planner.reward.name(), "shannon");
        let c = parse_config("{}", &["planner.reward.alpha=0.5".into()]).unwrap();
        assert_eq!(serde_json::to_value(c.planner.reward).unwrap()["alpha"], 0.5);
    }

    #[test]
    fn override_sets_absent_optional_and_rejects_unknown() {
        let c = parse_config("{}", &["forced_pd=0.7".into(), "filter.imprecision=[-10,2]".into()]).unwrap();
        assert_eq!(c.forced_pd, Some(0.7));
        assert_eq!(c.filter.imprecision, Some([-10.0, 2.0]));
        let e = parse_config("{}", &["filtr.n_th=1".into()]).unwrap_err();
        assert!(e.to_string().contains("filtr"), "{e}");
        let e = parse_config("{}", &["filter.n_thh=1".into()]).unwrap_err();
        assert!(e.to_string().contains("n_thh"), "{e}");
    }
}
