//! Run configuration: an experiment spec plus driver settings, with
//! `key=value` overrides applied before strict parsing.

use serde_json::{Map, Value};
use uresample_core::ExperimentSpec;

use crate::CliError;

/// Driver settings read from the top level of the config file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Driver {
    pub output: Option<String>,
    pub threads: Option<usize>,
    pub log_level: Option<String>,
}

#[derive(Debug, Clone)]
pub struct Config {
    pub driver: Driver,
    pub spec: ExperimentSpec,
}

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

/// Sets `path` (dot separated) in `root`, creating objects as needed. The
/// value is parsed as JSON when possible, else taken as a string.
pub fn apply_override(root: &mut Value, assignment: &str) -> Result<(), CliError> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| config_err(format!("override `{assignment}` is not of the form key=value")))?;
    if key.is_empty() {
        return Err(config_err(format!("override `{assignment}` has an empty key")));
    }
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = root;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let obj = node
            .as_object_mut()
            .ok_or_else(|| config_err(format!("override `{key}`: `{part}` is not inside an object")))?;
        if i + 1 == parts.len() {
            obj.insert(part.to_string(), value);
            return Ok(());
        }
        node = obj.entry(part.to_string()).or_insert_with(|| Value::Object(Map::new()));
    }
    unreachable!("split always yields at least one part")
}

fn take_string(obj: &mut Map<String, Value>, key: &str) -> Result<Option<String>, CliError> {
    match obj.remove(key) {
        None | Some(Value::Null) => Ok(None),
        Some(Value::String(s)) => Ok(Some(s)),
        Some(other) => Err(config_err(format!("`{key}` must be a string, got {other}"))),
    }
}

impl Config {
    /// Parses config text, applies overrides and validates the experiment.
    pub fn parse(text: &str, overrides: &[String]) -> Result<Self, CliError> {
        let mut root: Value = serde_json::from_str(text).map_err(|e| config_err(format!("invalid JSON: {e}")))?;
        if !root.is_object() {
            return Err(config_err("config must be a JSON object"));
        }
        for o in overrides {
            apply_override(&mut root, o)?;
        }
        let obj = root.as_object_mut().expect("checked above");
        let threads = match obj.remove("threads") {
            None | Some(Value::Null) => None,
            Some(v) => match v.as_u64() {
                Some(t) if t > 0 => Some(t as usize),
                _ => return Err(config_err(format!("`threads` must be a positive integer, got {v}"))),
            },
        };
        let driver = Driver { output: take_string(obj, "output")?, threads, log_level: take_string(obj, "log_level")? };
        let spec: ExperimentSpec = serde_json::from_value(root).map_err(|e| config_err(format!("schema: {e}")))?;
        spec.validate().map_err(|e| config_err(format!("schema: {e}")))?;
        Ok(Self { driver, spec })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const DKW: &str = r#"{"experiment":"dkw-check","family":{"family":"bernoulli","p":0.5},
        "ns":[100],"b":10,"epsilons":[0.5],"replicates":100}"#;

    #[test]
    fn driver_keys_are_split_off() {
        let text = DKW.replacen('{', r#"{"threads":2,"output":"out","log_level":"warn","#, 1);
        let c = Config::parse(&text, &[]).unwrap();
        assert_eq!(c.driver, Driver { output: Some("out".into()), threads: Some(2), log_level: Some("warn".into()) });
        assert_eq!(c.spec.kind(), "dkw-check");
    }

    #[test]
    fn overrides_nest_and_parse_json() {
        let c = Config::parse(DKW, &["seed=42".into(), "resampling.draws=300".into(), "family.p=0.25".into()]).unwrap();
        assert_eq!(c.spec.seed(), 42);
        let v = serde_json::to_value(&c.spec).unwrap();
        assert_eq!(v["resampling"]["draws"], 300);
        assert_eq!(v["family"]["p"], 0.25);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(Config::parse("[1]", &[]), Err(CliError::Config(_))));
        assert!(matches!(Config::parse(DKW, &["nokey".into()]), Err(CliError::Config(_))));
        assert!(matches!(Config::parse(DKW, &["bogus=1".into()]), Err(CliError::Config(_))));
        assert!(matches!(Config::parse(DKW, &["threads=0".into()]), Err(CliError::Config(_))));
        assert!(matches!(Config::parse(DKW, &["replicates=5".into()]), Err(CliError::Config(_))));
    }
}
