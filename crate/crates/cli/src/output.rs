//! Artifact serialization: column-ordered tables rendered to CSV (the
//! canonical format) or JSON (one object per record, same column order),
//! plus a manifest tying every file to its checksum and the resolved
//! configuration that produced it.

use anyhow::{Context, Result};
use serde_json::Value;
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

/// One table value. Floats are printed with full round-trip precision so
/// reruns are byte-comparable.
#[derive(Clone, Debug)]
pub enum Cell {
    Float(f64),
    Count(u64),
    Text(String),
}

impl Cell {
    fn push_csv(&self, out: &mut String) {
        match self {
            // Shortest round-trip formatting, stable across runs.
            Cell::Float(x) => out.push_str(&ryu_format(*x)),
            Cell::Count(n) => {
                let _ = write!(out, "{n}");
            }
            Cell::Text(s) => out.push_str(s),
        }
    }

    fn to_json(&self) -> Value {
        match self {
            Cell::Float(x) => serde_json::Number::from_f64(*x)
                .map(Value::Number)
                .unwrap_or(Value::Null),
            Cell::Count(n) => Value::Number((*n).into()),
            Cell::Text(s) => Value::String(s.clone()),
        }
    }
}

/// Shortest exact decimal for an f64; the standard `{}` formatter already
/// guarantees round-tripping, this just pins the behaviour behind a name.
fn ryu_format(x: f64) -> String {
    format!("{x}")
}

/// A named table with a fixed column order.
pub struct Table {
    pub name: &'static str,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: &'static str, columns: &[&'static str]) -> Self {
        Table {
            name,
            columns: columns.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len(), "row width in {}", self.name);
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for row in &self.rows {
            for (i, cell) in row.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                cell.push_csv(&mut out);
            }
            out.push('\n');
        }
        out
    }

    /// JSON mirror: an array of objects whose keys appear in column order.
    pub fn to_json(&self) -> String {
        let mut out = String::from("[");
        for (r, row) in self.rows.iter().enumerate() {
            if r > 0 {
                out.push(',');
            }
            out.push_str("\n  {");
            for (i, (col, cell)) in self.columns.iter().zip(row).enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                let _ = write!(out, "{}: {}", Value::String((*col).into()), cell.to_json());
            }
            out.push('}');
        }
        out.push_str("\n]\n");
        out
    }

    pub fn render(&self, format: Format) -> (String, String) {
        let body = match format {
            Format::Csv => self.to_csv(),
            Format::Json => self.to_json(),
        };
        (format!("{}.{}", self.name, format.extension()), body)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(64);
    for b in digest {
        let _ = write!(out, "{b:02x}");
    }
    out
}

/// Collects artifacts in memory, then writes them plus `manifest.json` in
/// one pass so the manifest checksums always describe the bytes on disk.
pub struct ArtifactSet {
    dir: PathBuf,
    files: Vec<(String, Vec<u8>)>,
}

impl ArtifactSet {
    pub fn new(dir: &Path) -> Self {
        ArtifactSet {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        }
    }

    pub fn add_table(&mut self, table: &Table, format: Format) {
        let (name, body) = table.render(format);
        self.files.push((name, body.into_bytes()));
    }

    pub fn add_text(&mut self, name: &str, body: String) {
        self.files.push((name.to_string(), body.into_bytes()));
    }

    /// Writes every artifact and the manifest; returns the file names in
    /// write order (manifest last).
    pub fn write(self, scenario: &str, seed: u64, resolved: Value) -> Result<Vec<String>> {
        fs::create_dir_all(&self.dir)
            .with_context(|| format!("cannot create output dir {}", self.dir.display()))?;
        let mut checksums = BTreeMap::new();
        let mut names = Vec::new();
        for (name, bytes) in &self.files {
            let path = self.dir.join(name);
            fs::write(&path, bytes).with_context(|| format!("cannot write {}", path.display()))?;
            checksums.insert(name.clone(), Value::String(sha256_hex(bytes)));
            names.push(name.clone());
        }
        let manifest = serde_json::json!({
            "scenario": scenario,
            "seed": seed,
            "version": env!("CARGO_PKG_VERSION"),
            "config": resolved,
            "checksums": Value::Object(checksums.into_iter().collect()),
        });
        let path = self.dir.join("manifest.json");
        let mut body = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        body.push('\n');
        fs::write(&path, body).with_context(|| format!("cannot write {}", path.display()))?;
        names.push("manifest.json".to_string());
        Ok(names)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Table {
        let mut t = Table::new("sample", &["t", "value", "count"]);
        t.push(vec![Cell::Float(0.0), Cell::Float(0.5), Cell::Count(3)]);
        t.push(vec![Cell::Float(0.125), Cell::Float(-1.0), Cell::Count(0)]);
        t
    }

    #[test]
    fn csv_has_header_and_full_precision() {
        let mut t = Table::new("x", &["v"]);
        t.push(vec![Cell::Float(0.1 + 0.2)]);
        let csv = t.to_csv();
        assert_eq!(csv, "v\n0.30000000000000004\n");
    }

    #[test]
    fn json_mirrors_rows_in_column_order() {
        let json = sample().to_json();
        let parsed: Value = serde_json::from_str(&json).unwrap();
        let rows = parsed.as_array().unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0]["t"], Value::from(0.0));
        assert_eq!(rows[1]["count"], Value::from(0));
        // Key order inside the rendered text follows the column order.
        let first_obj = json.lines().nth(1).unwrap();
        let t_pos = first_obj.find("\"t\"").unwrap();
        let v_pos = first_obj.find("\"value\"").unwrap();
        assert!(t_pos < v_pos);
    }

    #[test]
    fn checksums_match_the_bytes_on_disk() {
        let dir = std::env::temp_dir().join(format!("qtraj-output-test-{}", std::process::id()));
        let _ = fs::remove_dir_all(&dir);
        let mut set = ArtifactSet::new(&dir);
        set.add_table(&sample(), Format::Csv);
        let names = set
            .write("static-pair", 9, serde_json::json!({"g0": 1.0}))
            .unwrap();
        assert_eq!(names, vec!["sample.csv".to_string(), "manifest.json".to_string()]);
        let manifest: Value =
            serde_json::from_slice(&fs::read(dir.join("manifest.json")).unwrap()).unwrap();
        let on_disk = fs::read(dir.join("sample.csv")).unwrap();
        assert_eq!(
            manifest["checksums"]["sample.csv"],
            Value::String(sha256_hex(&on_disk))
        );
        assert_eq!(manifest["seed"], Value::from(9));
        assert_eq!(manifest["scenario"], Value::from("static-pair"));
        fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn known_sha256_vector() {
        // NIST test vector for "abc".
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
