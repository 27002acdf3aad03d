//! `--config` support: TOML `key = value` pairs become flags placed right
//! after the subcommand name, so flags typed on the command line, which
//! come later, take precedence.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::CommandFactory;

use crate::common::CliError;
use crate::Cli;

fn config_path(argv: &[OsString]) -> Option<PathBuf> {
    let mut it = argv.iter().skip(1);
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            return it.next().map(PathBuf::from);
        }
        if let Some(p) = s.strip_prefix("--config=") {
            return Some(PathBuf::from(p));
        }
    }
    None
}

fn render(value: &toml::Value) -> Option<String> {
    match value {
        toml::Value::String(s) => Some(s.clone()),
        toml::Value::Integer(i) => Some(i.to_string()),
        toml::Value::Float(f) => Some(f.to_string()),
        toml::Value::Boolean(_) => None,
        toml::Value::Array(items) => {
            let parts: Option<Vec<String>> = items.iter().map(render).collect();
            parts.map(|p| p.join(","))
        }
        toml::Value::Datetime(d) => Some(d.to_string()),
        toml::Value::Table(_) => None,
    }
}

fn push_flag(out: &mut Vec<OsString>, key: &str, value: &toml::Value) -> Result<(), CliError> {
    let flag = format!("--{}", key.replace('_', "-"));
    match value {
        toml::Value::Boolean(true) => out.push(flag.into()),
        toml::Value::Boolean(false) => {}
        v => {
            let rendered =
                render(v).ok_or_else(|| CliError::invalid(format!("config key `{key}` has an unsupported value")))?;
            out.push(flag.into());
            out.push(rendered.into());
        }
    }
    Ok(())
}

/// Rewrites `argv` with config-file flags inserted after the subcommand.
/// Top-level keys apply to any subcommand that has the flag; keys under a
/// `[subcommand]` table apply to that subcommand only.
pub fn inject(argv: Vec<OsString>) -> Result<Vec<OsString>, CliError> {
    let Some(path) = config_path(&argv) else {
        return Ok(argv);
    };
    let text = std::fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
    let table: toml::Table = text
        .parse()
        .map_err(|e| CliError::invalid(format!("{}: {e}", path.display())))?;
    let cmd = Cli::command();
    let names: Vec<String> = cmd.get_subcommands().map(|s| s.get_name().to_string()).collect();
    let Some(pos) = argv.iter().position(|a| names.iter().any(|n| a.to_string_lossy() == *n)) else {
        return Ok(argv);
    };
    let sub_name = argv[pos].to_string_lossy().into_owned();
    let sub = cmd.find_subcommand(&sub_name).expect("known subcommand");
    let accepts = |key: &str| {
        let long = key.replace('_', "-");
        sub.get_arguments().any(|a| a.get_long() == Some(long.as_str()))
    };
    let mut injected = Vec::new();
    for (key, value) in &table {
        match value {
            toml::Value::Table(section) if key == &sub_name => {
                for (k, v) in section {
                    push_flag(&mut injected, k, v)?;
                }
            }
            toml::Value::Table(_) => {}
            v if accepts(key) => push_flag(&mut injected, key, v)?,
            _ => {}
        }
    }
    let mut out = argv[..=pos].to_vec();
    out.extend(injected);
    out.extend(argv[pos + 1..].iter().cloned());
    Ok(out)
}
