//! Layered configuration: an optional JSON document, overridden by flags.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::CliError;

/// Read a config file. A run manifest is accepted too, in which case its
/// recorded configuration is used; its subcommand must match.
pub fn load_file(path: &Path, subcommand: &str) -> Result<Map<String, Value>, CliError> {
    let text =
        std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let value: Value = serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("{} is not valid JSON: {e}", path.display())))?;
    let Value::Object(mut map) = value else {
        return Err(CliError::Config(format!("{} must hold a JSON object", path.display())));
    };
    if map.get("tool").and_then(Value::as_str) == Some(crate::manifest::TOOL) {
        let recorded = map.get("subcommand").and_then(Value::as_str).unwrap_or_default();
        if recorded != subcommand {
            return Err(CliError::Config(format!(
                "{} is a manifest for `{recorded}`, not `{subcommand}`",
                path.display()
            )));
        }
        return match map.remove("config") {
            Some(Value::Object(cfg)) => Ok(cfg),
            _ => Err(CliError::Config(format!("{} has no config object", path.display()))),
        };
    }
    Ok(map)
}

/// Merge flags over the file layer and deserialize. Flags left unset are
/// serialized as null and skipped.
pub fn resolve<F: Serialize, C: DeserializeOwned>(file: Option<Map<String, Value>>, flags: &F) -> Result<C, CliError> {
    let mut merged = file.unwrap_or_default();
    let Value::Object(flag_map) = serde_json::to_value(flags).map_err(|e| CliError::Config(e.to_string()))? else {
        return Err(CliError::Config("flags did not serialize to an object".into()));
    };
    for (k, v) in flag_map {
        if !v.is_null() {
            merged.insert(k, v);
        }
    }
    serde_json::from_value(Value::Object(merged)).map_err(|e| CliError::Config(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde::Deserialize;

    #[derive(Serialize)]
    struct Flags {
        count: Option<usize>,
        seed: Option<u64>,
    }

    #[derive(Debug, Deserialize, PartialEq)]
    #[serde(deny_unknown_fields)]
    struct Cfg {
        count: usize,
        #[serde(default)]
        seed: u64,
    }

    #[test]
    fn flags_override_file_values() {
        let file: Map<String, Value> = serde_json::from_str(r#"{"count": 5, "seed": 9}"#).unwrap();
        let cfg: Cfg = resolve(Some(file), &Flags { count: Some(7), seed: None }).unwrap();
        assert_eq!(cfg, Cfg { count: 7, seed: 9 });
    }

    #[test]
    fn unknown_and_missing_keys_are_config_errors() {
        let file: Map<String, Value> = serde_json::from_str(r#"{"count": 5, "colour": 1}"#).unwrap();
        assert!(matches!(resolve::<_, Cfg>(Some(file), &Flags { count: None, seed: None }), Err(CliError::Config(_))));
        assert!(matches!(resolve::<_, Cfg>(None, &Flags { count: None, seed: None }), Err(CliError::Config(_))));
    }
}
