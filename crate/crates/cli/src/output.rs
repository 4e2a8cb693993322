//! Artifacts: CSV tables with unit comment lines, JSON documents, and the
//! run manifest.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const OUT_ENV: &str = "SBMRANGE_OUT";

/// A CSV table. Every column gets a `# name: meaning` comment line.
pub struct Table {
    pub columns: Vec<(String, String)>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(columns: &[(&str, &str)]) -> Table {
        Table { columns: columns.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect(), rows: Vec::new() }
    }

    pub fn push<I: IntoIterator<Item = String>>(&mut self, row: I) {
        self.rows.push(row.into_iter().collect());
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for (name, meaning) in &self.columns {
            writeln!(s, "# {name}: {meaning}").unwrap();
        }
        let names: Vec<&str> = self.columns.iter().map(|c| c.0.as_str()).collect();
        writeln!(s, "{}", names.join(",")).unwrap();
        for r in &self.rows {
            writeln!(s, "{}", r.join(",")).unwrap();
        }
        s
    }
}

/// Formats a float for CSV: shortest round-trip form, `NaN` for missing.
pub fn num(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else {
        format!("{x}")
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OutputFile {
    pub file: String,
    pub sha256: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    /// Arguments after config merging; replaying them reproduces the run.
    pub argv: Vec<String>,
    pub options: serde_json::Value,
    pub seed: Option<u64>,
    pub started_unix: f64,
    pub finished_unix: f64,
    pub version: String,
    pub config_hash: String,
    pub outputs: Vec<OutputFile>,
}

pub fn now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn output_root() -> PathBuf {
    std::env::var_os(OUT_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("sbmrange-out"))
}

/// Collects artifacts for one run directory.
pub struct Run {
    pub dir: PathBuf,
    pub command: String,
    pub argv: Vec<String>,
    pub options: serde_json::Value,
    pub seed: Option<u64>,
    pub started: f64,
    pub config_hash: String,
    pub outputs: Vec<OutputFile>,
}

impl Run {
    pub fn new(command: &str, argv: Vec<String>, options: serde_json::Value, seed: Option<u64>) -> Result<Run> {
        let config_hash = sbmrange::estimators::config_hash(&serde_json::json!({"command": command, "options": options}));
        let dir = output_root().join(format!("{}-{}", command.replace(' ', "-"), &config_hash[..12]));
        std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Run { dir, command: command.into(), argv, options, seed, started: now(), config_hash, outputs: Vec::new() })
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.dir.join(name);
        std::fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        self.outputs.push(OutputFile { file: name.into(), sha256: sha256_hex(bytes) });
        Ok(path)
    }

    pub fn csv(&mut self, name: &str, table: &Table) -> Result<PathBuf> {
        self.write(name, table.render().as_bytes())
    }

    pub fn json(&mut self, name: &str, value: &serde_json::Value) -> Result<PathBuf> {
        let mut s = serde_json::to_string_pretty(value)?;
        s.push('\n');
        self.write(name, s.as_bytes())
    }

    pub fn finish(self) -> Result<PathBuf> {
        let m = Manifest {
            command: self.command,
            argv: self.argv,
            options: self.options,
            seed: self.seed,
            started_unix: self.started,
            finished_unix: now(),
            version: env!("CARGO_PKG_VERSION").into(),
            config_hash: self.config_hash,
            outputs: self.outputs,
        };
        let path = self.dir.join("manifest.json");
        std::fs::write(&path, serde_json::to_string_pretty(&m)? + "\n")?;
        Ok(path)
    }
}

pub fn read_manifest(path: &Path) -> Result<Manifest> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading manifest {}", path.display()))?;
    Ok(serde_json::from_str(&text)?)
}
