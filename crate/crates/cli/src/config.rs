//! `--config FILE` support: keys in the file become flags unless the same
//! flag is already on the command line.
//!
//! Top-level keys apply to whichever subcommand accepts them; a table named
//! after the subcommand (e.g. `[simulate]`) overrides the top level.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use clap::Command;
use serde_json::Value;

fn load(path: &Path) -> Result<serde_json::Map<String, Value>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    let is_json = path.extension().is_some_and(|e| e == "json") || text.trim_start().starts_with('{');
    let value: Value = if is_json {
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
    } else {
        let t: toml::Table = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        serde_json::to_value(t)?
    };
    match value {
        Value::Object(m) => Ok(m),
        _ => bail!("config {} must be a table", path.display()),
    }
}

fn render(key: &str, v: &Value) -> Result<String> {
    Ok(match v {
        Value::String(s) => s.clone(),
        Value::Number(n) => n.to_string(),
        Value::Array(items) => items.iter().map(|i| render(key, i)).collect::<Result<Vec<_>>>()?.join(","),
        _ => bail!("config key `{key}` has unsupported value {v}"),
    })
}

/// Returns `args` with config-file entries appended as flags.
pub fn expand(cmd: &Command, args: Vec<OsString>) -> Result<Vec<OsString>> {
    let strs: Vec<String> = args.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    let path = match strs.iter().position(|a| a == "--config") {
        Some(i) => strs.get(i + 1).ok_or_else(|| anyhow!("--config needs a file"))?.clone(),
        None => match strs.iter().find_map(|a| a.strip_prefix("--config=")) {
            Some(p) => p.to_owned(),
            None => return Ok(args),
        },
    };
    let mut cmd = cmd.clone();
    cmd.build();
    let Some(sub) = cmd
        .get_subcommands()
        .find(|s| strs.iter().skip(1).any(|a| a == s.get_name()))
    else {
        return Ok(args);
    };
    let accepted: BTreeMap<String, bool> = sub
        .get_arguments()
        .filter_map(|a| {
            let takes_value = a.get_action().takes_values();
            a.get_long().map(|l| (l.to_owned(), takes_value))
        })
        .collect();

    let file = load(Path::new(&path))?;
    let mut entries: BTreeMap<String, Value> = BTreeMap::new();
    for (k, v) in &file {
        if !v.is_object() {
            entries.insert(k.replace('_', "-"), v.clone());
        }
    }
    if let Some(Value::Object(own)) = file.get(sub.get_name()) {
        for (k, v) in own {
            entries.insert(k.replace('_', "-"), v.clone());
        }
    }

    let mut out = args;
    for (key, v) in entries {
        let Some(&takes_value) = accepted.get(&key) else {
            if file.contains_key(sub.get_name()) && file[sub.get_name()].get(&key).is_some() {
                bail!("config key `{key}` is not a flag of `{}`", sub.get_name());
            }
            continue;
        };
        let flag = format!("--{key}");
        if key == "config" || strs.iter().any(|a| *a == flag || a.starts_with(&format!("{flag}="))) {
            continue;
        }
        if takes_value {
            out.push(flag.into());
            out.push(render(&key, &v)?.into());
        } else {
            match v {
                Value::Bool(true) => out.push(flag.into()),
                Value::Bool(false) => {}
                _ => bail!("config key `{key}` is a switch and needs true or false"),
            }
        }
    }
    Ok(out)
}
