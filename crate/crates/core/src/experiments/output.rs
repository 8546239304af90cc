//! CSV and JSON writers. Every file starts with the command, the master
//! seed and the resolved configuration so it can be regenerated on its own.
//! CSV preambles are `#` comment lines followed by a fixed header row.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::config::CampaignConfig;
use crate::error::Result;

/// Provenance shared by every output of one command run.
#[derive(Debug, Clone)]
pub struct Stamp {
    pub command: &'static str,
    pub seed: u64,
    pub config: serde_json::Value,
}

impl Stamp {
    /// The worker count and output directory are left out: they do not
    /// change any result.
    pub fn new(command: &'static str, config: &CampaignConfig) -> Result<Self> {
        let mut value = serde_json::to_value(config)?;
        if let Some(obj) = value.as_object_mut() {
            obj.remove("workers");
            obj.remove("out");
        }
        Ok(Stamp {
            command,
            seed: config.seed,
            config: value,
        })
    }

    fn lines(&self) -> Vec<String> {
        vec![
            format!("command: {}", self.command),
            format!("seed: {}", self.seed),
            format!("config: {}", self.config),
        ]
    }
}

pub struct Table {
    path: PathBuf,
    inner: csv::Writer<BufWriter<File>>,
}

impl Table {
    /// Writes the preamble (stamp plus `extra` lines) and the header.
    pub fn create(path: &Path, stamp: &Stamp, extra: &[String], header: &[String]) -> Result<Self> {
        let mut w = BufWriter::new(File::create(path)?);
        for line in stamp.lines().iter().chain(extra) {
            writeln!(w, "# {line}")?;
        }
        let mut inner = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(w);
        inner.write_record(header)?;
        Ok(Table {
            path: path.to_path_buf(),
            inner,
        })
    }

    pub fn row(&mut self, fields: &[String]) -> Result<()> {
        self.inner.write_record(fields)?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<PathBuf> {
        self.inner.flush()?;
        Ok(self.path)
    }
}

/// Shortest round-trip form; blank for missing values.
pub fn num(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else if x.is_infinite() {
        if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else if x != 0.0 && !(1e-4..1e16).contains(&x.abs()) {
        format!("{x:e}")
    } else {
        format!("{x}")
    }
}

pub fn opt_num(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

/// Pretty JSON object `{command, seed, config, ...body}`.
pub fn write_json<T: Serialize>(path: &Path, stamp: &Stamp, body: &T) -> Result<PathBuf> {
    let mut value = serde_json::json!({
        "command": stamp.command,
        "seed": stamp.seed,
        "config": stamp.config,
    });
    if let (Some(obj), serde_json::Value::Object(extra)) = (value.as_object_mut(), serde_json::to_value(body)?) {
        obj.extend(extra);
    }
    let mut text = serde_json::to_string_pretty(&value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(path.to_path_buf())
}

/// Column names of a flattened threshold tree: `tau_1`, `tau_2_0`,
/// `tau_2_1`, `tau_3_00`, ... where the suffix spells the decisions of the
/// earlier TXs, first TX leftmost.
pub fn tree_columns(k: usize) -> Vec<String> {
    let mut cols = Vec::new();
    for j in 0..k {
        for b in 0..1usize << j {
            if j == 0 {
                cols.push("tau_1".to_string());
            } else {
                cols.push(format!("tau_{}_{:0width$b}", j + 1, b, width = j));
            }
        }
    }
    cols
}

/// `tau_1..tau_K` for per-TX thresholds.
pub fn scalar_columns(k: usize) -> Vec<String> {
    (1..=k).map(|j| format!("tau_{j}")).collect()
}

pub fn indexed(prefix: &str, k: usize) -> Vec<String> {
    (1..=k).map(|j| format!("{prefix}_{j}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tree_column_names() {
        assert_eq!(tree_columns(1), ["tau_1"]);
        assert_eq!(
            tree_columns(3),
            ["tau_1", "tau_2_0", "tau_2_1", "tau_3_00", "tau_3_01", "tau_3_10", "tau_3_11"]
        );
    }

    #[test]
    fn number_format() {
        assert_eq!(num(0.25), "0.25");
        assert_eq!(num(1e-30), "1e-30");
        assert_eq!(num(2.5e-7), "2.5e-7");
        assert_eq!(num(1e6), "1000000");
        assert_eq!(num(f64::NAN), "");
        assert_eq!(num(f64::INFINITY), "inf");
        assert_eq!(opt_num(None), "");
    }

    #[test]
    fn preamble_then_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let stamp = Stamp::new("analytic", &CampaignConfig::default()).unwrap();
        let mut t = Table::create(&path, &stamp, &["note: x".into()], &["a".into(), "b".into()]).unwrap();
        t.row(&["1".into(), "2".into()]).unwrap();
        t.finish().unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "# command: analytic");
        assert_eq!(lines[1], "# seed: 1");
        assert!(lines[2].starts_with("# config: {"));
        assert_eq!(lines[3], "# note: x");
        assert_eq!(lines[4], "a,b");
        assert_eq!(lines[5], "1,2");
    }
}
