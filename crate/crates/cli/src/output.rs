//! Output files, each carrying the config hash and seed.

use std::path::{Path, PathBuf};

use serde::Serialize;
use stit_core::io::csv_table;

use crate::config::ExperimentConfig;
use crate::CliError;

#[derive(Clone, Debug, Serialize)]
pub struct Meta {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub config_hash: String,
    pub seed: u64,
    pub config: ExperimentConfig,
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    meta: &'a Meta,
    data: &'a T,
}

pub struct Output {
    dir: PathBuf,
    pub meta: Meta,
    pub written: Vec<PathBuf>,
}

impl Output {
    pub fn new(dir: &Path, command: &'static str, config: &ExperimentConfig, seed: u64) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Config(format!("cannot create {}: {e}", dir.display())))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            meta: Meta {
                tool: "stit",
                version: env!("CARGO_PKG_VERSION"),
                command,
                config_hash: config.hash(),
                seed,
                config: config.clone(),
            },
            written: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, text: &str) -> Result<(), CliError> {
        let path = self.dir.join(name);
        std::fs::write(&path, text).map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))?;
        self.written.push(path);
        Ok(())
    }

    /// `{"meta": …, "data": …}`, pretty-printed with a trailing newline.
    pub fn json<T: Serialize>(&mut self, name: &str, data: &T) -> Result<(), CliError> {
        let mut s = serde_json::to_string_pretty(&Envelope { meta: &self.meta, data })
            .map_err(|e| CliError::Run(format!("serializing {name}: {e}")))?;
        s.push('\n');
        self.write(name, &s)
    }

    /// CSV with `config_hash` and `seed` appended to every row.
    pub fn csv(&mut self, name: &str, header: &[&str], rows: Vec<Vec<String>>) -> Result<(), CliError> {
        let mut h = header.to_vec();
        h.extend(["config_hash", "seed"]);
        let rows: Vec<Vec<String>> = rows
            .into_iter()
            .map(|mut r| {
                r.push(self.meta.config_hash.clone());
                r.push(self.meta.seed.to_string());
                r
            })
            .collect();
        let text = csv_table(&h, &rows);
        self.write(name, &text)
    }

    /// SVG with the config hash and seed in a leading comment.
    pub fn svg(&mut self, name: &str, svg: &str) -> Result<(), CliError> {
        let text = format!(
            "<!-- stit {} config_hash={} seed={} -->\n{svg}",
            self.meta.command, self.meta.config_hash, self.meta.seed
        );
        self.write(name, &text)
    }
}

/// Number formatting for CSV cells; missing values stay empty.
pub fn num(v: f64) -> String {
    if v.is_finite() {
        v.to_string()
    } else if v.is_nan() {
        String::new()
    } else {
        (if v > 0.0 { "inf" } else { "-inf" }).to_string()
    }
}

pub fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, num)
}
