//! Data files and run manifests.
//!
//! Floats are written with 17 significant digits in scientific notation,
//! independent of locale. Data files never contain wall-clock content; the
//! timings live in the manifest only.

use std::collections::BTreeMap;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

/// `x` with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

struct FullPrecision;

impl serde_json::ser::Formatter for FullPrecision {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        if value.is_finite() {
            w.write_all(fmt_f64(value).as_bytes())
        } else {
            w.write_all(b"null")
        }
    }

    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, value as f64)
    }
}

/// JSON text with full-precision floats and keys in sorted order.
pub fn to_json<T: Serialize>(value: &T) -> serde_json::Result<String> {
    let v = serde_json::to_value(value)?;
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, FullPrecision);
    v.serialize(&mut ser)?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("json is utf-8"))
}

/// One CSV cell.
#[derive(Clone, Debug)]
pub enum Cell {
    F(f64),
    I(i64),
    S(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::F(x) => fmt_f64(*x),
            Cell::I(i) => i.to_string(),
            Cell::S(s) => s.clone(),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::F(x)
    }
}

pub fn csv_text(header: &[&str], rows: &[Vec<Cell>]) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for r in rows {
        let line: Vec<String> = r.iter().map(Cell::render).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config_hash: String,
    pub tool_version: String,
    pub outputs: Vec<String>,
    /// Seconds per phase.
    pub timings: BTreeMap<String, f64>,
}

/// Collects the files written by one command and records them in its manifest.
pub struct RunOutput {
    dir: PathBuf,
    manifest: RunManifest,
    started: Instant,
}

impl RunOutput {
    pub fn new(dir: &Path, command: &str, config_hash: String) -> io::Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            manifest: RunManifest {
                command: command.to_string(),
                config_hash,
                tool_version: env!("CARGO_PKG_VERSION").to_string(),
                outputs: Vec::new(),
                timings: BTreeMap::new(),
            },
            started: Instant::now(),
        })
    }

    fn file_name(&self, suffix: &str) -> String {
        format!("{}_{}", self.manifest.command.replace(' ', "_"), suffix)
    }

    pub fn write_bytes(&mut self, suffix: &str, bytes: &[u8]) -> io::Result<PathBuf> {
        let name = self.file_name(suffix);
        let path = self.dir.join(&name);
        std::fs::write(&path, bytes)?;
        if !self.manifest.outputs.contains(&name) {
            self.manifest.outputs.push(name);
        }
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&mut self, suffix: &str, value: &T) -> io::Result<PathBuf> {
        let text = to_json(value).map_err(io::Error::other)?;
        self.write_bytes(suffix, text.as_bytes())
    }

    pub fn write_csv(&mut self, suffix: &str, header: &[&str], rows: &[Vec<Cell>]) -> io::Result<PathBuf> {
        self.write_bytes(suffix, csv_text(header, rows).as_bytes())
    }

    pub fn time(&mut self, phase: &str, seconds: f64) {
        self.manifest.timings.insert(phase.to_string(), seconds);
    }

    /// Writes `<command>_manifest.json` and returns the manifest.
    pub fn finish(mut self) -> io::Result<RunManifest> {
        let total = self.started.elapsed().as_secs_f64();
        self.manifest.timings.insert("total".into(), total);
        let name = self.file_name("manifest.json");
        let text = to_json(&self.manifest).map_err(io::Error::other)?;
        std::fs::write(self.dir.join(name), text)?;
        Ok(self.manifest)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 1.622_075_925_917_433_4, 6.02e23] {
            let s = fmt_f64(x);
            assert_eq!(s.parse::<f64>().unwrap(), x);
            let mantissa = s.split('e').next().unwrap().trim_start_matches('-').replace('.', "");
            assert_eq!(mantissa.len(), 17, "{s}");
        }
    }

    #[test]
    fn json_keys_sorted_and_full_precision() {
        #[derive(Serialize)]
        struct S {
            z: f64,
            a: f64,
        }
        let t = to_json(&S { z: 0.1, a: 2.0 }).unwrap();
        assert_eq!(t, "{\"a\":2.0000000000000000e0,\"z\":1.0000000000000001e-1}\n");
        let back: serde_json::Value = serde_json::from_str(&t).unwrap();
        assert_eq!(back["z"].as_f64().unwrap(), 0.1);
    }
}
