//! Plain `key = value` reports, one field per line.
//!
//! Floats use Rust's shortest exact rendering, vectors are written as
//! `[a, b, c]` and matrices one row per key (`beta_nlr[0] = [...]`).

use std::fmt::{self, Display, Write as _};
use std::path::Path;

use ndarray::{ArrayView1, ArrayView2};
use sha2::{Digest, Sha256};

use crate::error::{Result, SlsError};

pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    entries: Vec<(String, String)>,
}

impl Report {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, key: impl Into<String>, value: impl Display) -> &mut Self {
        self.entries.push((key.into(), value.to_string()));
        self
    }

    pub fn push_vector(&mut self, key: impl Into<String>, v: ArrayView1<f64>) -> &mut Self {
        self.push(key, format_vector(v.iter().copied()))
    }

    pub fn push_matrix(&mut self, key: &str, m: ArrayView2<f64>) -> &mut Self {
        for (i, row) in m.rows().into_iter().enumerate() {
            self.push_vector(format!("{key}[{i}]"), row);
        }
        self
    }

    /// Reproducibility line: command, SHA-256 of the config text, master
    /// seed and artifact version.
    pub fn push_manifest(&mut self, command: &str, config_sha256: &str, master_seed: u64) -> &mut Self {
        self.push(
            "manifest",
            format!("command={command} config_sha256={config_sha256} master_seed={master_seed} version={ARTIFACT_VERSION}"),
        )
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_string())?;
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut report = Report::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once(" = ")
                .ok_or_else(|| SlsError::Format(format!("report line {}: missing ' = '", i + 1)))?;
            report.push(k, v);
        }
        Ok(report)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }
}

impl Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in &self.entries {
            writeln!(f, "{k} = {v}")?;
        }
        Ok(())
    }
}

pub fn format_vector(values: impl IntoIterator<Item = f64>) -> String {
    let mut s = String::from("[");
    for (i, v) in values.into_iter().enumerate() {
        if i > 0 {
            s.push_str(", ");
        }
        let _ = write!(s, "{v:?}");
    }
    s.push(']');
    s
}

pub fn parse_vector(text: &str) -> Result<Vec<f64>> {
    let inner = text
        .strip_prefix('[')
        .and_then(|t| t.strip_suffix(']'))
        .ok_or_else(|| SlsError::Format(format!("not a vector: {text}")))?;
    if inner.trim().is_empty() {
        return Ok(Vec::new());
    }
    inner
        .split(',')
        .map(|t| t.trim().parse().map_err(|_| SlsError::Format(format!("bad number {t:?}"))))
        .collect()
}

pub fn sha256_hex(text: &str) -> String {
    Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn round_trip() {
        let mut r = Report::new();
        r.push("command", "estimate")
            .push("c_hat[0]", 0.1 + 0.2)
            .push_vector("v", array![1.0, -2.5e-300, f64::NAN].view())
            .push_matrix("beta", array![[1.0, 2.0], [3.0, 4.0]].view())
            .push_manifest("estimate", &sha256_hex("x = 1\n"), 7);
        let back = Report::parse(&r.to_string()).unwrap();
        assert_eq!(back, r);
        assert_eq!(back.get("c_hat[0]").unwrap().parse::<f64>().unwrap(), 0.1 + 0.2);
        let v = parse_vector(back.get("v").unwrap()).unwrap();
        assert_eq!(v[1], -2.5e-300);
        assert!(v[2].is_nan());
        assert_eq!(parse_vector(back.get("beta[1]").unwrap()).unwrap(), vec![3.0, 4.0]);
        assert!(back.get("manifest").unwrap().contains("master_seed=7"));
        assert_eq!(parse_vector("[]").unwrap(), Vec::<f64>::new());
        assert!(parse_vector("1, 2").is_err());
        assert!(Report::parse("no separator").is_err());
    }

    #[test]
    fn hash_is_sha256() {
        assert_eq!(
            sha256_hex("abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
