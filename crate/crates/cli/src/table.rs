//! CSV artifacts: a `#` provenance comment, a header row, then one row per
//! sweep point in sweep order.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};

/// Run parameters recorded at the top of every artifact. Nothing
/// time-dependent goes in, so reruns are byte-identical.
pub struct Provenance {
    pub command: &'static str,
    pub fields: Vec<(&'static str, String)>,
}

impl Provenance {
    pub fn new(command: &'static str) -> Self {
        Self { command, fields: Vec::new() }
    }

    pub fn with(mut self, key: &'static str, value: impl ToString) -> Self {
        self.fields.push((key, value.to_string()));
        self
    }

    fn line(&self) -> String {
        let mut s = format!("# dht {} command={}", env!("CARGO_PKG_VERSION"), self.command);
        for (k, v) in &self.fields {
            s.push_str(&format!(" {k}={v}"));
        }
        s
    }
}

/// Stdout, or a file when a path is given.
pub fn sink(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(BufWriter::new(io::stdout())),
    })
}

pub fn write_csv(path: Option<&Path>, prov: &Provenance, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut out = sink(path)?;
    writeln!(out, "{}", prov.line())?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json(path: Option<&Path>, value: &serde_json::Value) -> Result<()> {
    let mut out = sink(path)?;
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

/// Shortest round-trip form; empty for a missing value.
pub fn num(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        v.to_string()
    }
}

pub fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, num)
}
