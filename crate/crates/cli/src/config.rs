//! `--config FILE` support.
//!
//! A TOML file supplies default flag values. Top-level keys apply to every
//! command, a `[group]` table to one group, and a `[group.command]` table to
//! one command; the more specific table wins. Flags given on the command line
//! always beat the file. Keys the chosen command does not know are reported
//! and skipped.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, Context, Result};
use clap::CommandFactory;

use crate::Cli;

fn scalar(v: &toml::Value) -> Option<String> {
    match v {
        toml::Value::String(s) => Some(s.clone()),
        toml::Value::Integer(i) => Some(i.to_string()),
        toml::Value::Float(f) => Some(f.to_string()),
        toml::Value::Boolean(b) => Some(b.to_string()),
        toml::Value::Array(a) => {
            let parts: Option<Vec<String>> = a.iter().map(scalar).collect();
            parts.map(|p| p.join(","))
        }
        _ => None,
    }
}

fn collect(table: &toml::Table, out: &mut BTreeMap<String, String>) {
    for (k, v) in table {
        if let Some(s) = scalar(v) {
            out.insert(k.replace('_', "-"), s);
        }
    }
}

/// Position of the first two command words and the `--config` value.
fn locate(args: &[String]) -> (Vec<usize>, Option<(usize, String)>) {
    let mut words = Vec::new();
    let mut config = None;
    let mut i = 1;
    while i < args.len() && words.len() < 2 {
        let a = &args[i];
        if a == "--config" {
            if let Some(v) = args.get(i + 1) {
                config = Some((i, v.clone()));
            }
            i += 2;
            continue;
        }
        if let Some(v) = a.strip_prefix("--config=") {
            config = Some((i, v.to_string()));
        } else if !a.starts_with('-') {
            words.push(i);
        }
        i += 1;
    }
    if config.is_none() {
        for (j, a) in args.iter().enumerate().skip(i) {
            if a == "--config" {
                config = args.get(j + 1).map(|v| (j, v.clone()));
            } else if let Some(v) = a.strip_prefix("--config=") {
                config = Some((j, v.to_string()));
            }
        }
    }
    (words, config)
}

/// Returns the argument vector with file defaults spliced in after the
/// command words, and any warnings about skipped keys.
pub fn merge(args: Vec<String>) -> Result<(Vec<String>, Vec<String>)> {
    let (words, config) = locate(&args);
    let Some((_, path)) = config else {
        return Ok((args, Vec::new()));
    };
    if words.len() < 2 {
        return Ok((args, Vec::new()));
    }
    let group = args[words[0]].clone();
    let cmd = args[words[1]].clone();
    let text = std::fs::read_to_string(Path::new(&path)).with_context(|| format!("reading config {path}"))?;
    let doc: toml::Table = text.parse().with_context(|| format!("parsing config {path}"))?;

    let mut values = BTreeMap::new();
    collect(&doc, &mut values);
    if let Some(toml::Value::Table(g)) = doc.get(&group) {
        collect(g, &mut values);
        if let Some(toml::Value::Table(c)) = g.get(&cmd) {
            collect(c, &mut values);
        }
    }

    let root = Cli::command();
    let Some(sub) = root.find_subcommand(&group).and_then(|g| g.find_subcommand(&cmd)) else {
        return Ok((args, Vec::new()));
    };
    let known: BTreeMap<String, bool> = sub
        .get_arguments()
        .filter_map(|a| a.get_long().map(|l| (l.to_string(), a.get_action().takes_values())))
        .collect();
    let given: Vec<String> = args
        .iter()
        .filter_map(|a| a.strip_prefix("--").map(|s| s.split('=').next().unwrap_or(s).to_string()))
        .collect();

    let mut warnings = Vec::new();
    let mut extra = Vec::new();
    for (k, v) in values {
        if k == "config" || given.contains(&k) {
            continue;
        }
        match known.get(&k) {
            Some(true) => {
                extra.push(format!("--{k}={v}"));
            }
            Some(false) => match v.as_str() {
                "true" => extra.push(format!("--{k}")),
                "false" => {}
                _ => bail!("config key `{k}` expects true or false, got `{v}`"),
            },
            None => warnings.push(format!("config key `{k}` is not used by `{group} {cmd}`")),
        }
    }
    let mut out = args[..=words[1]].to_vec();
    out.extend(extra);
    out.extend_from_slice(&args[words[1] + 1..]);
    Ok((out, warnings))
}
