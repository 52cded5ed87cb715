//! CSV formats: fields (`x,u`), ledgers (`t,mass,l2sq,dissipation`),
//! tabulated kernels (`z,J`) and generic tables.

use std::fs;
use std::path::Path;

use nlcd_core::kernel::TabulatedKernel;
use nlcd_core::solver::LedgerRow;
use nlcd_core::{Field, Grid, KernelSpec};

use crate::error::{io_err, NlcdError, Result};

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

/// `snap_t<time>.csv` with the shortest decimal form of `t`.
pub fn snapshot_file_name(t: f64) -> String {
    format!("snap_t{t}.csv")
}

/// A CSV table held in memory so that it can be hashed before it is
/// written.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn push_floats(&mut self, row: &[f64]) {
        self.push(row.iter().map(|v| fmt_float(*v)).collect());
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn header(&self) -> &[String] {
        &self.header
    }

    pub fn rows(&self) -> &[Vec<String>] {
        &self.rows
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header).expect("in-memory write");
        for r in &self.rows {
            w.write_record(r).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 csv")
    }
}

pub fn field_table(f: &Field) -> Table {
    let mut t = Table::new(&["x", "u"]);
    for (x, u) in f.grid().centers().zip(f.values()) {
        t.push_floats(&[x, *u]);
    }
    t
}

pub fn ledger_table(rows: &[LedgerRow]) -> Table {
    let mut t = Table::new(&["t", "mass", "l2sq", "dissipation"]);
    for r in rows {
        t.push_floats(&[r.t, r.mass, r.l2_norm_sq, r.dissipation]);
    }
    t
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    fs::write(path, text).map_err(io_err(path))
}

pub fn write_field_csv(path: &Path, f: &Field) -> Result<()> {
    write_text(path, &field_table(f).to_csv())
}

pub fn write_ledger_csv(path: &Path, rows: &[LedgerRow]) -> Result<()> {
    write_text(path, &ledger_table(rows).to_csv())
}

/// Reads any CSV with a header row into a [`Table`].
pub fn read_table(path: &Path) -> Result<Table> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let bad = |line: usize, message: String| NlcdError::Csv { path: path.to_path_buf(), line, message };
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let header: Vec<String> = rdr.headers().map_err(|e| bad(1, e.to_string()))?.iter().map(String::from).collect();
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| bad(e.position().map_or(0, |p| p.line() as usize), e.to_string()))?;
        rows.push(rec.iter().map(String::from).collect());
    }
    Ok(Table { header, rows })
}

/// Reads a two-column numeric CSV with the given header.
fn read_pairs(path: &Path, header: [&str; 2]) -> Result<Vec<(f64, f64)>> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let bad = |line: usize, message: String| NlcdError::Csv { path: path.to_path_buf(), line, message };
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let head = rdr.headers().map_err(|e| bad(1, e.to_string()))?;
    if head.len() != 2 || head[0] != *header[0] || head[1] != *header[1] {
        return Err(bad(1, format!("expected header `{},{}`", header[0], header[1])));
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| bad(e.position().map_or(0, |p| p.line() as usize), e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() != 2 {
            return Err(bad(line, format!("expected 2 columns, found {}", rec.len())));
        }
        let parse = |s: &str| s.parse::<f64>().map_err(|e| bad(line, format!("`{s}`: {e}")));
        out.push((parse(&rec[0])?, parse(&rec[1])?));
    }
    Ok(out)
}

/// Reads an `x,u` field. The cell centers must be uniformly spaced.
pub fn read_field_csv(path: &Path) -> Result<Field> {
    let rows = read_pairs(path, ["x", "u"])?;
    if rows.len() < 2 {
        return Err(NlcdError::Csv {
            path: path.to_path_buf(),
            line: 1,
            message: "a field needs at least two rows".into(),
        });
    }
    let n = rows.len();
    let dx = (rows[n - 1].0 - rows[0].0) / (n - 1) as f64;
    for (i, (x, _)) in rows.iter().enumerate() {
        let want = rows[0].0 + i as f64 * dx;
        if (x - want).abs() > 1e-9 * dx.abs().max(want.abs()) {
            return Err(NlcdError::Csv {
                path: path.to_path_buf(),
                line: i + 2,
                message: format!("x = {x} breaks the uniform spacing {dx}"),
            });
        }
    }
    let grid = Grid::new(rows[0].0 - 0.5 * dx, dx, n)?;
    Ok(Field::new(grid, rows.into_iter().map(|r| r.1).collect())?)
}

/// Reads `z,J` samples; the kernel is symmetrized and renormalized.
pub fn read_kernel_csv(path: &Path) -> Result<KernelSpec> {
    let rows = read_pairs(path, ["z", "J"])?;
    Ok(KernelSpec::Tabulated(TabulatedKernel::from_samples(&rows)?))
}

pub fn write_kernel_csv(path: &Path, k: &TabulatedKernel) -> Result<()> {
    let mut t = Table::new(&["z", "J"]);
    for (j, v) in k.values().iter().enumerate() {
        t.push_floats(&[j as f64 * k.dz(), *v]);
    }
    write_text(path, &t.to_csv())
}
