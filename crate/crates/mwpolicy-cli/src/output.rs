//! Output files. Every file starts with the run metadata: CSV files carry
//! it as `# ` comment lines, JSON files under a `metadata` key. The
//! metadata embeds the canonical configuration, so a run can be repeated
//! from any single output file.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use mwpolicy::config::Config;

use crate::Failure;

#[derive(Debug, Clone, Serialize)]
pub struct Metadata {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config_sha256: String,
    pub seed: u64,
    pub hours_annualization: f64,
    pub capitalists_receive_y0: bool,
    pub include_foreign_income: bool,
    pub zeta: f64,
    pub config: String,
}

impl Metadata {
    pub fn new(command: &str, cfg: &Config, seed: u64) -> Self {
        let canonical = cfg.to_canonical_toml();
        let digest = Sha256::digest(canonical.as_bytes());
        Metadata {
            tool: "mwpolicy".into(),
            version: mwpolicy::VERSION.into(),
            command: command.into(),
            config_sha256: digest.iter().map(|b| format!("{b:02x}")).collect(),
            seed,
            hours_annualization: cfg.params.hours_annualization,
            capitalists_receive_y0: cfg.welfare.capitalists_receive_y0,
            include_foreign_income: cfg.welfare.include_foreign_income,
            zeta: cfg.welfare.zeta,
            config: canonical,
        }
    }

    fn csv_header(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!("# tool: {} {}\n", self.tool, self.version));
        s.push_str(&format!("# command: {}\n", self.command));
        s.push_str(&format!("# config_sha256: {}\n", self.config_sha256));
        s.push_str(&format!("# seed: {}\n", self.seed));
        s.push_str(&format!(
            "# hours_annualization: {:?}\n",
            self.hours_annualization
        ));
        s.push_str(&format!(
            "# capitalists_receive_y0: {}\n",
            self.capitalists_receive_y0
        ));
        s.push_str(&format!(
            "# include_foreign_income: {}\n",
            self.include_foreign_income
        ));
        s.push_str(&format!("# zeta: {:?}\n", self.zeta));
        s.push_str("# config:\n");
        for line in self.config.lines() {
            s.push_str(&format!("# | {line}\n"));
        }
        s
    }
}

pub struct Sink {
    pub dir: PathBuf,
    pub meta: Metadata,
    pub written: Vec<PathBuf>,
}

impl Sink {
    pub fn new(dir: &Path, meta: Metadata) -> Result<Self, Failure> {
        fs::create_dir_all(dir).map_err(|e| Failure::io(dir, e))?;
        Ok(Sink {
            dir: dir.to_path_buf(),
            meta,
            written: Vec::new(),
        })
    }

    /// `body` produces CSV text into the buffer.
    pub fn csv<F>(&mut self, name: &str, body: F) -> Result<(), Failure>
    where
        F: FnOnce(&mut Vec<u8>) -> mwpolicy::Result<()>,
    {
        let mut buf = self.meta.csv_header().into_bytes();
        body(&mut buf).map_err(Failure::from)?;
        self.write(name, &buf)
    }

    pub fn json<T: Serialize>(&mut self, name: &str, data: &T) -> Result<(), Failure> {
        let doc = json!({ "metadata": self.meta, "data": data });
        let mut text =
            serde_json::to_string_pretty(&doc).map_err(|e| Failure::new(4, e.to_string()))?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), Failure> {
        let path = self.dir.join(name);
        fs::write(&path, bytes).map_err(|e| Failure::io(&path, e))?;
        self.written.push(path);
        Ok(())
    }
}

/// Flattens nested JSON objects into `a.b.c` keys.
pub fn flatten(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
    match v {
        Value::Object(m) => {
            for (k, x) in m {
                let key = if prefix.is_empty() {
                    k.clone()
                } else {
                    format!("{prefix}.{k}")
                };
                flatten(&key, x, out);
            }
        }
        Value::Null => out.push((prefix.to_string(), String::new())),
        Value::String(s) => out.push((prefix.to_string(), s.clone())),
        other => out.push((prefix.to_string(), other.to_string())),
    }
}

/// One `key,value` row per leaf of `data`.
pub fn key_value_csv<T: Serialize>(buf: &mut Vec<u8>, data: &T) -> mwpolicy::Result<()> {
    let v = serde_json::to_value(data).map_err(|e| mwpolicy::Error::Data(e.to_string()))?;
    let mut rows = Vec::new();
    flatten("", &v, &mut rows);
    let mut w = csv::Writer::from_writer(buf);
    w.write_record(["key", "value"])
        .map_err(|e| mwpolicy::Error::Data(e.to_string()))?;
    for (k, v) in rows {
        w.write_record([k, v])
            .map_err(|e| mwpolicy::Error::Data(e.to_string()))?;
    }
    w.flush().map_err(|e| mwpolicy::Error::Data(e.to_string()))
}

/// Serializable rows as CSV.
pub fn rows_csv<T: Serialize>(buf: &mut Vec<u8>, rows: &[T]) -> mwpolicy::Result<()> {
    mwpolicy::econpanel::panel::write_csv(buf, rows)
}
