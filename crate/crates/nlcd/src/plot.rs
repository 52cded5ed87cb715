//! Plot-ready series derived from the study tables: log-log decay curves,
//! rescaled distances against lambda and distance-versus-time curves, one
//! CSV per series under `plot/`.

use std::collections::BTreeMap;

use crate::error::{NlcdError, Result};
use crate::io::{read_table, Table};
use crate::manifest::RunManifest;

fn numeric_column(t: &Table, name: &str) -> Result<Vec<f64>> {
    let i = t.column_index(name).ok_or_else(|| NlcdError::Other(format!("missing column `{name}`")))?;
    t.rows()
        .iter()
        .map(|r| r[i].parse::<f64>().map_err(|e| NlcdError::Other(format!("column `{name}`: {e}"))))
        .collect()
}

fn text_column(t: &Table, name: &str) -> Result<Vec<String>> {
    let i = t.column_index(name).ok_or_else(|| NlcdError::Other(format!("missing column `{name}`")))?;
    Ok(t.rows().iter().map(|r| r[i].clone()).collect())
}

fn load(m: &RunManifest, rel: &str) -> Result<Option<Table>> {
    if m.file(rel).is_none() {
        return Ok(None);
    }
    read_table(&m.output_dir.join(rel)).map(Some)
}

/// Log-log pairs, dropping points where either coordinate is not positive.
fn loglog(xs: &[f64], ys: &[f64], names: [&str; 2]) -> Table {
    let mut t = Table::new(&names);
    for (x, y) in xs.iter().zip(ys) {
        if *x > 0.0 && *y > 0.0 {
            t.push_floats(&[x.ln(), y.ln()]);
        }
    }
    t
}

/// Groups row indices by the bit pattern of a float key, in ascending
/// key order.
fn group_by(keys: &[f64]) -> BTreeMap<u64, (f64, Vec<usize>)> {
    let mut g: BTreeMap<u64, (f64, Vec<usize>)> = BTreeMap::new();
    for (i, k) in keys.iter().enumerate() {
        // order-preserving map of finite floats onto u64
        let bits = k.to_bits();
        let key = if bits >> 63 == 1 { !bits } else { bits | (1 << 63) };
        g.entry(key).or_insert((*k, Vec::new())).1.push(i);
    }
    g
}

/// Writes every series the manifest's tables support and records them.
/// Returns the number of series written.
pub fn emit_plot_data(m: &mut RunManifest) -> Result<usize> {
    let mut out: Vec<(String, Table)> = Vec::new();

    if let Some(norms) = load(m, "norms.csv")? {
        let t = numeric_column(&norms, "t")?;
        let p = numeric_column(&norms, "p")?;
        let v = numeric_column(&norms, "norm")?;
        for (_, (pv, idx)) in group_by(&p) {
            let xs: Vec<f64> = idx.iter().map(|&i| t[i]).collect();
            let ys: Vec<f64> = idx.iter().map(|&i| v[i]).collect();
            let s = loglog(&xs, &ys, ["log_t", "log_norm"]);
            if !s.is_empty() {
                out.push((format!("plot/decay_p{pv}.csv"), s));
            }
        }
    }

    if let Some(r) = load(m, "rescaled.csv")? {
        let l = numeric_column(&r, "lambda")?;
        let d = numeric_column(&r, "distance")?;
        let mut s = Table::new(&["lambda", "distance"]);
        for (x, y) in l.iter().zip(&d) {
            s.push_floats(&[*x, *y]);
        }
        if !s.is_empty() {
            out.push(("plot/rescaling.csv".into(), s));
        }
    }

    if let Some(d) = load(m, "distances.csv")? {
        let t = numeric_column(&d, "t")?;
        let p = numeric_column(&d, "p")?;
        let prof = text_column(&d, "profile")?;
        let v = numeric_column(&d, "distance")?;
        let mut series: BTreeMap<(String, u64), (f64, Table)> = BTreeMap::new();
        for i in 0..t.len() {
            let e = series
                .entry((prof[i].clone(), p[i].to_bits()))
                .or_insert_with(|| (p[i], Table::new(&["t", "distance"])));
            e.1.push_floats(&[t[i], v[i]]);
        }
        for ((name, _), (pv, s)) in series {
            out.push((format!("plot/convergence_{name}_p{pv}.csv"), s));
        }
    }

    let n = out.len();
    for (rel, t) in out {
        m.emit(&rel, &t.to_csv())?;
    }
    Ok(n)
}
