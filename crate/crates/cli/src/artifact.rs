//! Self-describing output files. Each artifact starts with a metadata block
//! carrying the tool version, the resolved config and two FNV-1a hashes: one
//! of the config text and one of the body bytes that follow.

use std::fmt::Write as _;
use std::hash::Hasher;
use std::path::{Path, PathBuf};

use fnv::FnvHasher;
use serde::Serialize;

use crate::config::Format;
use crate::error::CliError;

pub const VERSION: &str = concat!("sbo-lab v", env!("CARGO_PKG_VERSION"));

pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h = FnvHasher::default();
    h.write(bytes);
    h.finish()
}

pub fn hex(h: u64) -> String {
    format!("{h:016x}")
}

/// Shortest text that parses back to the same `f64`.
pub fn float_text(x: f64) -> String {
    format!("{x:?}")
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    F(f64),
    I(i64),
    S(String),
    B(bool),
}

impl Cell {
    fn text(&self) -> String {
        match self {
            Cell::F(x) => float_text(*x),
            Cell::I(x) => x.to_string(),
            Cell::S(s) => s.clone(),
            Cell::B(b) => b.to_string(),
        }
    }

    fn json(&self) -> String {
        match self {
            Cell::F(x) if !x.is_finite() => serde_json::to_string(&float_text(*x)).unwrap(),
            Cell::F(x) => serde_json::to_string(x).unwrap(),
            Cell::I(x) => x.to_string(),
            Cell::S(s) => serde_json::to_string(s).unwrap(),
            Cell::B(b) => b.to_string(),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::F(x)
    }
}

impl From<i64> for Cell {
    fn from(x: i64) -> Self {
        Cell::I(x)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::I(x as i64)
    }
}

impl From<bool> for Cell {
    fn from(x: bool) -> Self {
        Cell::B(x)
    }
}

impl From<&str> for Cell {
    fn from(x: &str) -> Self {
        Cell::S(x.to_string())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width");
        self.rows.push(row);
    }

    pub fn csv_body(&self) -> Vec<u8> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::CRLF)
            .from_writer(Vec::new());
        w.write_record(&self.columns).expect("in-memory write");
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::text)).expect("in-memory write");
        }
        w.into_inner().expect("in-memory flush")
    }

    pub fn ndjson_body(&self) -> Vec<u8> {
        let mut out = String::new();
        for row in &self.rows {
            out.push('{');
            for (i, (c, v)) in self.columns.iter().zip(row).enumerate() {
                if i > 0 {
                    out.push(',');
                }
                let _ = write!(out, "{}:{}", serde_json::to_string(c).unwrap(), v.json());
            }
            out.push_str("}\n");
        }
        out.into_bytes()
    }
}

/// Header fields shared by all artifacts of one run.
#[derive(Debug, Clone)]
pub struct RunMeta {
    pub command: String,
    pub config: String,
}

impl RunMeta {
    pub fn config_hash(&self) -> u64 {
        fnv1a(self.config.as_bytes())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArtifactRecord {
    pub file: String,
    pub content_hash: String,
    pub file_hash: String,
}

#[derive(Serialize)]
struct JsonMeta<'a> {
    version: &'a str,
    command: &'a str,
    artifact: &'a str,
    config_hash: String,
    content_hash: String,
    config: &'a str,
}

fn csv_header(meta: &RunMeta, artifact: &str, content_hash: u64) -> String {
    let mut h = String::new();
    let _ = write!(h, "# {VERSION}\r\n");
    let _ = write!(h, "# command = {}\r\n", meta.command);
    let _ = write!(h, "# artifact = {artifact}\r\n");
    let _ = write!(h, "# config_hash = {}\r\n", hex(meta.config_hash()));
    let _ = write!(h, "# content_hash = {}\r\n", hex(content_hash));
    h.push_str("# config:\r\n");
    for line in meta.config.lines() {
        if line.is_empty() {
            h.push_str("#\r\n");
        } else {
            let _ = write!(h, "#   {line}\r\n");
        }
    }
    h
}

fn json_header(meta: &RunMeta, artifact: &str, content_hash: u64) -> String {
    let m = JsonMeta {
        version: VERSION,
        command: &meta.command,
        artifact,
        config_hash: hex(meta.config_hash()),
        content_hash: hex(content_hash),
        config: &meta.config,
    };
    let mut s = String::from("{\"meta\":");
    s.push_str(&serde_json::to_string(&m).unwrap());
    s.push_str("}\n");
    s
}

fn write_file(dir: &Path, file: &str, bytes: &[u8]) -> Result<(), CliError> {
    let path = dir.join(file);
    std::fs::write(&path, bytes).map_err(|e| CliError::io(path, e))
}

fn finish(dir: &Path, file: String, header: String, body: &[u8], content: u64) -> Result<ArtifactRecord, CliError> {
    let mut bytes = header.into_bytes();
    bytes.extend_from_slice(body);
    write_file(dir, &file, &bytes)?;
    Ok(ArtifactRecord {
        file,
        content_hash: hex(content),
        file_hash: hex(fnv1a(&bytes)),
    })
}

/// Writes `table` as `<name>.csv` or `<name>.ndjson`.
pub fn emit_table(
    dir: &Path,
    name: &str,
    table: &Table,
    format: Format,
    meta: &RunMeta,
) -> Result<ArtifactRecord, CliError> {
    if table.rows.is_empty() {
        return Err(CliError::Verify(format!("table {name} is empty")));
    }
    let file = format!("{name}.{}", format.extension());
    match format {
        Format::Csv => {
            let body = table.csv_body();
            let h = fnv1a(&body);
            finish(dir, file, csv_header(meta, name, h), &body, h)
        }
        Format::Ndjson => {
            let body = table.ndjson_body();
            let h = fnv1a(&body);
            finish(dir, file, json_header(meta, name, h), &body, h)
        }
    }
}

/// Writes a structured report as a two-line NDJSON file.
pub fn emit_record(dir: &Path, name: &str, value: &impl Serialize, meta: &RunMeta) -> Result<ArtifactRecord, CliError> {
    let mut body = serde_json::to_string(value).expect("report serializes").into_bytes();
    body.push(b'\n');
    let h = fnv1a(&body);
    finish(dir, format!("{name}.ndjson"), json_header(meta, name, h), &body, h)
}

/// Writes a binary artifact whose integrity is carried by its own header.
pub fn emit_binary(dir: &Path, file: &str, bytes: &[u8]) -> Result<ArtifactRecord, CliError> {
    write_file(dir, file, bytes)?;
    Ok(ArtifactRecord {
        file: file.to_string(),
        content_hash: hex(fnv1a(bytes)),
        file_hash: hex(fnv1a(bytes)),
    })
}

pub fn emit_manifest(dir: &Path, records: &[ArtifactRecord], meta: &RunMeta) -> Result<ArtifactRecord, CliError> {
    let mut body = String::new();
    for r in records {
        body.push_str(&serde_json::to_string(r).unwrap());
        body.push('\n');
    }
    let h = fnv1a(body.as_bytes());
    finish(dir, "manifest.ndjson".into(), json_header(meta, "manifest", h), body.as_bytes(), h)
}

/// Metadata parsed back from an artifact header.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedded {
    pub version: String,
    pub config: String,
    pub config_hash: String,
    pub content_hash: String,
    pub body: Vec<u8>,
}

fn bad(path: &Path, what: &str) -> CliError {
    CliError::Verify(format!("{}: {what}", path.display()))
}

pub fn read_embedded(path: &Path) -> Result<Embedded, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
    match ext {
        "csv" => parse_csv_header(path, &bytes),
        "ndjson" => parse_json_header(path, &bytes),
        _ => Err(bad(path, "not a text artifact")),
    }
}

fn parse_csv_header(path: &Path, bytes: &[u8]) -> Result<Embedded, CliError> {
    let mut pos = 0;
    let mut lines = Vec::new();
    while bytes[pos..].starts_with(b"#") {
        let end = bytes[pos..]
            .windows(2)
            .position(|w| w == b"\r\n")
            .ok_or_else(|| bad(path, "unterminated header"))?;
        let line = std::str::from_utf8(&bytes[pos..pos + end]).map_err(|_| bad(path, "header is not UTF-8"))?;
        lines.push(line.to_string());
        pos += end + 2;
    }
    let field = |key: &str| -> Result<String, CliError> {
        let prefix = format!("# {key} = ");
        lines
            .iter()
            .find_map(|l| l.strip_prefix(&prefix))
            .map(str::to_string)
            .ok_or_else(|| bad(path, &format!("missing {key}")))
    };
    let start = lines
        .iter()
        .position(|l| l == "# config:")
        .ok_or_else(|| bad(path, "missing config"))?;
    let mut config = String::new();
    for l in &lines[start + 1..] {
        let l = l.strip_prefix("#   ").unwrap_or("");
        config.push_str(l);
        config.push('\n');
    }
    Ok(Embedded {
        version: lines[0].trim_start_matches("# ").to_string(),
        config,
        config_hash: field("config_hash")?,
        content_hash: field("content_hash")?,
        body: bytes[pos..].to_vec(),
    })
}

fn parse_json_header(path: &Path, bytes: &[u8]) -> Result<Embedded, CliError> {
    let end = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| bad(path, "missing metadata line"))?;
    let v: serde_json::Value =
        serde_json::from_slice(&bytes[..end]).map_err(|e| bad(path, &format!("metadata: {e}")))?;
    let m = &v["meta"];
    let s = |k: &str| -> Result<String, CliError> {
        m[k].as_str()
            .map(str::to_string)
            .ok_or_else(|| bad(path, &format!("missing {k}")))
    };
    Ok(Embedded {
        version: s("version")?,
        config: s("config")?,
        config_hash: s("config_hash")?,
        content_hash: s("content_hash")?,
        body: bytes[end + 1..].to_vec(),
    })
}

/// Re-checks both embedded hashes of a text artifact.
pub fn verify_text(path: &Path) -> Result<Embedded, CliError> {
    let e = read_embedded(path)?;
    if hex(fnv1a(&e.body)) != e.content_hash {
        return Err(bad(path, "content hash mismatch"));
    }
    if hex(fnv1a(e.config.as_bytes())) != e.config_hash {
        return Err(bad(path, "config hash mismatch"));
    }
    Ok(e)
}

pub fn manifest_path(dir: &Path) -> PathBuf {
    dir.join("manifest.ndjson")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn meta() -> RunMeta {
        RunMeta {
            command: "test".into(),
            config: "[run]\nseed = 1\n\n[params]\nalpha = 0.5\n".into(),
        }
    }

    fn table() -> Table {
        let mut t = Table::new(&["x", "label", "flag"]);
        t.push(vec![0.1.into(), "a,b \"q\"".into(), true.into()]);
        t.push(vec![1e-300.into(), "plain".into(), false.into()]);
        t.push(vec![(2.0f64 / 3.0).into(), "".into(), false.into()]);
        t
    }

    #[test]
    fn csv_quotes_and_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let rec = emit_table(dir.path(), "t", &table(), Format::Csv, &meta()).unwrap();
        let path = dir.path().join(&rec.file);
        let e = verify_text(&path).unwrap();
        assert_eq!(e.config, meta().config);
        assert_eq!(e.version, VERSION);
        let mut r = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .from_path(&path)
            .unwrap();
        let rows: Vec<csv::StringRecord> = r.records().map(|x| x.unwrap()).collect();
        assert_eq!(&rows[0][1], "a,b \"q\"");
        for (row, want) in rows.iter().zip(&table().rows) {
            let x: f64 = row[0].parse().unwrap();
            assert_eq!(Cell::F(x), want[0]);
        }
    }

    #[test]
    fn ndjson_keeps_column_order() {
        let dir = tempfile::tempdir().unwrap();
        let rec = emit_table(dir.path(), "t", &table(), Format::Ndjson, &meta()).unwrap();
        let e = verify_text(&dir.path().join(&rec.file)).unwrap();
        let first = std::str::from_utf8(&e.body).unwrap().lines().next().unwrap();
        assert!(first.starts_with("{\"x\":0.1,\"label\":"));
        let v: serde_json::Value = serde_json::from_str(first).unwrap();
        assert_eq!(v["flag"], serde_json::Value::Bool(true));
    }

    #[test]
    fn tampering_is_detected() {
        let dir = tempfile::tempdir().unwrap();
        let rec = emit_table(dir.path(), "t", &table(), Format::Csv, &meta()).unwrap();
        let path = dir.path().join(&rec.file);
        let text = std::fs::read_to_string(&path).unwrap().replace("plain", "plein");
        std::fs::write(&path, text).unwrap();
        assert!(verify_text(&path).is_err());
    }

    #[test]
    fn empty_tables_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let t = Table::new(&["x"]);
        assert!(emit_table(dir.path(), "t", &t, Format::Csv, &meta()).is_err());
    }
}
