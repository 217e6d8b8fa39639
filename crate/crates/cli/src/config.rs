//! `--config FILE` support. The file's entries become `--flag=value` tokens
//! placed right after the subcommand, so anything on the real command line
//! (which comes later and overrides) wins.

use serde_json::Value;

use crate::error::CliError;

pub fn expand_args(argv: Vec<String>) -> Result<Vec<String>, CliError> {
    let mut rest = Vec::with_capacity(argv.len());
    let mut path = None;
    let mut it = argv.into_iter();
    while let Some(a) = it.next() {
        if a == "--config" {
            path = Some(it.next().ok_or_else(|| CliError::Usage("--config needs a file".into()))?);
        } else if let Some(p) = a.strip_prefix("--config=") {
            path = Some(p.to_string());
        } else {
            rest.push(a);
        }
    }
    let Some(path) = path else { return Ok(rest) };
    let text = std::fs::read_to_string(&path).map_err(|e| CliError::Usage(format!("cannot read config {path}: {e}")))?;
    let value: Value =
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("config {path} is not valid JSON: {e}")))?;
    let Value::Object(map) = value else {
        return Err(CliError::Usage(format!("config {path} must be a JSON object")));
    };

    let mut command = None;
    let mut tokens = Vec::new();
    for (key, v) in map {
        if key == "command" {
            command = Some(scalar(&key, &v)?.ok_or_else(|| CliError::Usage("config \"command\" must be a string".into()))?);
            continue;
        }
        let flag = format!("--{}", key.replace('_', "-"));
        match v {
            Value::Bool(false) | Value::Null => {}
            Value::Bool(true) => tokens.push(flag),
            other => {
                let text = scalar(&key, &other)?.expect("non-bool scalar");
                tokens.push(format!("{flag}={text}"));
            }
        }
    }

    if !rest.get(1).is_some_and(|a| !a.starts_with('-')) {
        let sub = command.ok_or_else(|| CliError::Usage("no subcommand on the command line or in the config".into()))?;
        rest.insert(1.min(rest.len()), sub);
    }
    rest.splice(2..2, tokens);
    Ok(rest)
}

fn scalar(key: &str, v: &Value) -> Result<Option<String>, CliError> {
    match v {
        Value::String(s) => Ok(Some(s.clone())),
        Value::Number(n) => Ok(Some(n.to_string())),
        Value::Bool(_) | Value::Null => Ok(None),
        _ => Err(CliError::Usage(format!("config entry {key:?} must be a string, number or boolean"))),
    }
}
