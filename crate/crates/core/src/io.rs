//! Deterministic text output: CSV tables, NDJSON state records and JSON
//! documents. Floats are written with 17 significant digits so that a value
//! read back is bit-identical, and every file starts from a versioned
//! schema.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::WaveFunction;

/// Version stamped into every JSON/NDJSON record and CSV header comment.
pub const SCHEMA_VERSION: u32 = 1;

/// Round-trippable float formatting (17 significant digits).
pub fn fmt_f64(x: f64) -> String {
    if x == 0.0 {
        // avoid "-0.0000000000000000e0" noise
        return "0.0000000000000000e0".to_string();
    }
    format!("{x:.16e}")
}

/// Column-validated CSV table built in memory.
#[derive(Clone, Debug)]
pub struct CsvTable {
    schema: String,
    columns: Vec<String>,
    body: String,
    rows: usize,
}

/// One CSV cell.
pub enum Cell<'a> {
    F(f64),
    I(i64),
    U(usize),
    S(&'a str),
}

impl CsvTable {
    pub fn new(schema: &str, columns: &[&str]) -> Self {
        CsvTable {
            schema: schema.to_string(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            body: String::new(),
            rows: 0,
        }
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn push(&mut self, cells: &[Cell]) -> Result<()> {
        if cells.len() != self.columns.len() {
            return Err(Error::Dimension {
                expected: self.columns.len(),
                found: cells.len(),
            });
        }
        for (i, c) in cells.iter().enumerate() {
            if i > 0 {
                self.body.push(',');
            }
            match c {
                Cell::F(x) => {
                    if !x.is_finite() {
                        return Err(Error::Convergence(format!(
                            "non-finite value in column {}",
                            self.columns[i]
                        )));
                    }
                    self.body.push_str(&fmt_f64(*x));
                }
                Cell::I(v) => write!(self.body, "{v}").unwrap(),
                Cell::U(v) => write!(self.body, "{v}").unwrap(),
                Cell::S(s) => {
                    if s.contains([',', '\n', '"']) {
                        return Err(Error::Config(format!("unquotable CSV cell {s:?}")));
                    }
                    self.body.push_str(s)
                }
            }
        }
        self.body.push('\n');
        self.rows += 1;
        Ok(())
    }

    pub fn render(&self) -> String {
        let mut out = format!("# schema: {} v{}\n", self.schema, SCHEMA_VERSION);
        out.push_str(&self.columns.join(","));
        out.push('\n');
        out.push_str(&self.body);
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_text(path, &self.render())
    }
}

/// Parses a table written by [`CsvTable::render`]; returns the header and
/// the rows as strings.
pub fn read_csv(text: &str) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header: Vec<String> = lines
        .next()
        .ok_or_else(|| Error::InsufficientData("empty CSV".into()))?
        .split(',')
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for l in lines {
        let r: Vec<String> = l.split(',').map(str::to_string).collect();
        if r.len() != header.len() {
            return Err(Error::Dimension {
                expected: header.len(),
                found: r.len(),
            });
        }
        rows.push(r);
    }
    Ok((header, rows))
}

/// Writes UTF-8 text with LF line endings, creating parent directories.
pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    fs::write(path, text.replace("\r\n", "\n"))?;
    Ok(())
}

/// NDJSON record of one lattice state.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct StateRecord {
    pub schema_version: u32,
    pub nu: i64,
    pub n: i64,
    pub energy: f64,
    /// `[Lx, m_min, m_max]`
    pub grid_dims: [i64; 3],
    pub amplitudes_re: Vec<f64>,
    pub amplitudes_im: Vec<f64>,
}

impl StateRecord {
    pub fn new(nu: i64, n: i64, energy: f64, psi: &WaveFunction) -> Self {
        let g = psi.grid();
        StateRecord {
            schema_version: SCHEMA_VERSION,
            nu,
            n,
            energy,
            grid_dims: [g.width as i64, g.m_min, g.m_max()],
            amplitudes_re: psi.amplitudes().iter().map(|a| a.re).collect(),
            amplitudes_im: psi.amplitudes().iter().map(|a| a.im).collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let [w, lo, hi] = self.grid_dims;
        let expect = (w.max(0) * (hi - lo + 1).max(0)) as usize;
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!("unsupported schema version {}", self.schema_version)));
        }
        if self.amplitudes_re.len() != expect || self.amplitudes_im.len() != expect {
            return Err(Error::Dimension {
                expected: expect,
                found: self.amplitudes_re.len(),
            });
        }
        Ok(())
    }
}

/// Renders records as NDJSON, one object per line.
pub fn to_ndjson<T: Serialize>(records: &[T]) -> Result<String> {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r)?);
        out.push('\n');
    }
    Ok(out)
}

pub fn from_ndjson<T: for<'de> Deserialize<'de>>(text: &str) -> Result<Vec<T>> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(Error::from))
        .collect()
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}
