//! On-disk formats shared by every stage: TMX matrices, row-indexed CSV
//! tables, and atomic file writes.
//!
//! TMX is a plain-text dense matrix: a `tmx 1 <rows> <cols>` header line
//! followed by one line per row of space-separated decimal floats. Floats are
//! written with the shortest representation that parses back to the same
//! bits, so a write/read cycle is lossless and a read/write cycle of a file we
//! produced is byte-identical.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};

const TMX_MAGIC: &str = "tmx";
const TMX_VERSION: &str = "1";

/// Writes `contents` to a sibling temp file and renames it over `path`.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::InvalidInput(format!("not a file path: {}", path.display())))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(file_name);
    tmp_name.push(format!(".tmp{}", std::process::id()));
    let tmp = path.with_file_name(tmp_name);
    fs::write(&tmp, contents).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn format_tmx(m: &Array2<f64>) -> String {
    let mut out = String::with_capacity(16 + m.len() * 12);
    let _ = writeln!(out, "{TMX_MAGIC} {TMX_VERSION} {} {}", m.nrows(), m.ncols());
    for row in m.rows() {
        let mut first = true;
        for v in row {
            if !first {
                out.push(' ');
            }
            first = false;
            let _ = write!(out, "{v}");
        }
        out.push('\n');
    }
    out
}

pub fn parse_tmx(text: &str, path: &Path) -> Result<Array2<f64>> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::parse(path, 1, "empty file"))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 4 || fields[0] != TMX_MAGIC {
        return Err(Error::parse(path, 1, "expected header `tmx 1 <rows> <cols>`"));
    }
    if fields[1] != TMX_VERSION {
        return Err(Error::parse(
            path,
            1,
            format!("unsupported tmx version {}", fields[1]),
        ));
    }
    let rows: usize = fields[2]
        .parse()
        .map_err(|_| Error::parse(path, 1, "bad row count"))?;
    let cols: usize = fields[3]
        .parse()
        .map_err(|_| Error::parse(path, 1, "bad column count"))?;

    let mut data = Vec::with_capacity(rows * cols);
    let mut seen = 0usize;
    for (i, line) in lines.enumerate() {
        let lineno = i + 2;
        if line.trim().is_empty() {
            continue;
        }
        if seen == rows {
            return Err(Error::parse(path, lineno, "more rows than declared"));
        }
        let before = data.len();
        for tok in line.split_whitespace() {
            let v: f64 = tok
                .parse()
                .map_err(|_| Error::parse(path, lineno, format!("bad float {tok:?}")))?;
            data.push(v);
        }
        if data.len() - before != cols {
            return Err(Error::parse(
                path,
                lineno,
                format!("expected {cols} values, found {}", data.len() - before),
            ));
        }
        seen += 1;
    }
    if seen != rows {
        return Err(Error::parse(
            path,
            seen + 1,
            format!("declared {rows} rows, found {seen}"),
        ));
    }
    Array2::from_shape_vec((rows, cols), data)
        .map_err(|e| Error::parse(path, 1, e.to_string()))
}

pub fn read_tmx(path: &Path) -> Result<Array2<f64>> {
    parse_tmx(&read_to_string(path)?, path)
}

pub fn write_tmx(path: &Path, m: &Array2<f64>) -> Result<()> {
    write_atomic(path, format_tmx(m).as_bytes())
}

/// A header plus string records, one per data line. No quoting: none of our
/// tables carry commas inside fields.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub records: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        CsvTable {
            header: header.into_iter().map(Into::into).collect(),
            records: Vec::new(),
        }
    }

    pub fn push<S: ToString>(&mut self, record: impl IntoIterator<Item = S>) {
        self.records
            .push(record.into_iter().map(|s| s.to_string()).collect());
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    pub fn to_text(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for r in &self.records {
            out.push_str(&r.join(","));
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::parse(path, 1, "missing header"))?;
        let header: Vec<String> = header.split(',').map(|s| s.trim().to_string()).collect();
        let mut records = Vec::new();
        for (i, line) in lines {
            let rec: Vec<String> = line.split(',').map(|s| s.trim().to_string()).collect();
            if rec.len() != header.len() {
                return Err(Error::parse(
                    path,
                    i + 1,
                    format!("expected {} fields, found {}", header.len(), rec.len()),
                ));
            }
            records.push(rec);
        }
        Ok(CsvTable { header, records })
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(&read_to_string(path)?, path)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_text().as_bytes())
    }
}

/// Checks that the `row` column of a table is exactly `0..n` in order and
/// returns the table's records with that column stripped.
pub(crate) fn positional_records(table: &CsvTable, path: &Path) -> Result<Vec<Vec<String>>> {
    if table.header.first().map(String::as_str) != Some("row") {
        return Err(Error::parse(path, 1, "first column must be `row`"));
    }
    table
        .records
        .iter()
        .enumerate()
        .map(|(i, rec)| {
            let row: usize = rec[0]
                .parse()
                .map_err(|_| Error::parse(path, i + 2, format!("bad row index {:?}", rec[0])))?;
            if row != i {
                return Err(Error::parse(
                    path,
                    i + 2,
                    format!("row index {row} out of order, expected {i}"),
                ));
            }
            Ok(rec[1..].to_vec())
        })
        .collect()
}

/// Reads a `row,<name>` CSV of integer ids.
pub fn read_id_column(path: &Path) -> Result<Vec<usize>> {
    let table = CsvTable::read(path)?;
    if table.header.len() != 2 {
        return Err(Error::parse(path, 1, "expected two columns"));
    }
    positional_records(&table, path)?
        .into_iter()
        .enumerate()
        .map(|(i, rec)| {
            rec[0]
                .parse()
                .map_err(|_| Error::parse(path, i + 2, format!("bad id {:?}", rec[0])))
        })
        .collect()
}

pub fn write_id_column(path: &Path, name: &str, ids: &[usize]) -> Result<()> {
    let mut t = CsvTable::new(["row", name]);
    for (i, id) in ids.iter().enumerate() {
        t.push([i, *id]);
    }
    t.write(path)
}
