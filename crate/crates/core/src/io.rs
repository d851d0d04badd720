//! File formats: sample paths, forcing signals, custom models, convergence
//! tables, and JSON with 17 significant digits.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Number, Value};

use crate::error::{Error, Result};
use crate::path::{SamplePath, TimeGrid};
use crate::semigroup::{ForcingKind, ForcingSignal};
use crate::solver::ConvergenceTable;
use crate::spectral_model::{CoordVector, SpectralModel};

/// `x` with 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn rewrite_floats(v: &mut Value) {
    match v {
        Value::Number(n) if !(n.is_u64() || n.is_i64()) => {
            if let Some(f) = n.as_f64() {
                if let Ok(m) = fmt_f64(f).parse::<Number>() {
                    *n = m;
                }
            }
        }
        Value::Array(a) => a.iter_mut().for_each(rewrite_floats),
        Value::Object(o) => o.values_mut().for_each(rewrite_floats),
        _ => {}
    }
}

/// Pretty JSON with every float printed to 17 significant digits.
pub fn to_json_string<T: Serialize>(value: &T) -> Result<String> {
    let mut v = serde_json::to_value(value).map_err(|e| Error::Parse(e.to_string()))?;
    rewrite_floats(&mut v);
    let mut s = serde_json::to_string_pretty(&v).map_err(|e| Error::Parse(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let s = to_json_string(value)?;
    fs::write(path, s).map_err(|e| Error::io(path, e))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    csv::Writer::from_path(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    Error::Parse(format!("{}: {e}", path.display()))
}

/// CSV with header `t,mode_0,...,mode_{K-1}`, one row per grid time.
pub fn write_path_csv(path: &Path, sp: &SamplePath) -> Result<()> {
    let mut w = csv_writer(path)?;
    let mut header = vec!["t".to_string()];
    header.extend((0..sp.mode_count()).map(|k| format!("mode_{k}")));
    w.write_record(&header).map_err(|e| csv_err(path, e))?;
    for (t, row) in sp.grid.times().iter().zip(&sp.modes) {
        let mut rec = vec![fmt_f64(*t)];
        rec.extend(row.iter().map(|&x| fmt_f64(x)));
        w.write_record(&rec).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// JSON sidecar next to a path CSV: `<stem>.json`.
pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("json")
}

pub fn write_path_sidecar(csv_path: &Path, model: &SpectralModel, sp: &SamplePath) -> Result<()> {
    let meta = json!({
        "model": model.name(),
        "modes": sp.mode_count(),
        "channels": model.channel_count(),
        "provenance": sp.provenance.tag(),
        "seed": sp.seed,
        "grid_points": sp.grid.len(),
        "tau": sp.grid.tau(),
    });
    write_json(&sidecar_path(csv_path), &meta)
}

/// Reads a path CSV written by [`write_path_csv`]; provenance is not stored
/// in the CSV and is reported as deterministic.
pub fn read_path_csv(path: &Path) -> Result<SamplePath> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let mut times = Vec::new();
    let mut modes = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let vals = parse_row(path, &rec)?;
        times.push(vals[0]);
        modes.push(vals[1..].to_vec());
    }
    Ok(SamplePath {
        grid: TimeGrid::new(times)?,
        modes,
        provenance: crate::path::Provenance::Deterministic,
        seed: None,
    })
}

fn parse_row(path: &Path, rec: &csv::StringRecord) -> Result<Vec<f64>> {
    rec.iter()
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| Error::Parse(format!("{}: '{s}': {e}", path.display())))
        })
        .collect()
}

/// Forcing CSV: column `t`, then any of `w_<c>` (boundary channels),
/// `mode_<k>` (interior modes) and, for cubic forcing, their time derivatives
/// `dw_<c>` / `dmode_<k>`. Missing columns are zero. For piecewise-constant
/// forcing the row at `t_i` holds the value on `[t_i, t_{i+1})` and the last
/// row is ignored.
pub fn read_forcing_csv(
    path: &Path,
    model: &SpectralModel,
    kind: ForcingKind,
) -> Result<ForcingSignal> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let header: Vec<String> = r
        .headers()
        .map_err(|e| csv_err(path, e))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    if header.first().map(String::as_str) != Some("t") {
        return Err(Error::Parse(format!(
            "{}: first column must be 't'",
            path.display()
        )));
    }
    #[derive(Clone, Copy)]
    enum Slot {
        Boundary(usize, bool),
        Mode(usize, bool),
    }
    let (k, c) = (model.modes(), model.channel_count());
    let mut slots = Vec::new();
    for h in &header[1..] {
        let (deriv, name) = match h.strip_prefix('d') {
            Some(rest) if rest.starts_with("w_") || rest.starts_with("mode_") => (true, rest),
            _ => (false, h.as_str()),
        };
        let index = |prefix: &str, limit: usize| -> Result<Option<usize>> {
            match name.strip_prefix(prefix) {
                Some(n) => {
                    let i: usize = n.parse().map_err(|_| {
                        Error::Parse(format!("{}: bad column '{h}'", path.display()))
                    })?;
                    if i >= limit {
                        return Err(Error::InvalidSize(format!(
                            "{}: column '{h}' exceeds the model ({limit})",
                            path.display()
                        )));
                    }
                    Ok(Some(i))
                }
                None => Ok(None),
            }
        };
        if let Some(i) = index("w_", c)? {
            slots.push(Slot::Boundary(i, deriv));
        } else if let Some(i) = index("mode_", k)? {
            slots.push(Slot::Mode(i, deriv));
        } else {
            return Err(Error::Parse(format!(
                "{}: unknown column '{h}'",
                path.display()
            )));
        }
    }
    let has_boundary = slots.iter().any(|s| matches!(s, Slot::Boundary(..)));
    let blank = || {
        if has_boundary {
            CoordVector::with_boundary(vec![0.0; c], vec![0.0; k])
        } else {
            CoordVector::zeros(k)
        }
    };
    let mut times = Vec::new();
    let mut values = Vec::new();
    let mut slopes = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let row = parse_row(path, &rec)?;
        if row.len() != header.len() {
            return Err(Error::Parse(format!("{}: ragged row", path.display())));
        }
        times.push(row[0]);
        let (mut v, mut d) = (blank(), blank());
        for (slot, &x) in slots.iter().zip(&row[1..]) {
            match *slot {
                Slot::Boundary(i, false) => v.boundary.as_mut().expect("boundary present")[i] = x,
                Slot::Boundary(i, true) => d.boundary.as_mut().expect("boundary present")[i] = x,
                Slot::Mode(i, false) => v.modes[i] = x,
                Slot::Mode(i, true) => d.modes[i] = x,
            }
        }
        values.push(v);
        slopes.push(d);
    }
    let grid = TimeGrid::new(times)?;
    match kind {
        ForcingKind::PiecewiseConstant => {
            values.pop();
            ForcingSignal::piecewise_constant(grid, values)
        }
        ForcingKind::PiecewiseLinear => ForcingSignal::piecewise_linear(grid, values),
        ForcingKind::PiecewiseCubic => ForcingSignal::piecewise_cubic(grid, values, slopes),
    }
}

#[derive(Debug, Clone, serde::Deserialize)]
#[serde(deny_unknown_fields)]
struct CustomMeta {
    growth_exponent: f64,
    #[serde(default = "one")]
    spatial_dim: usize,
    #[serde(default)]
    expected_pstar: Option<f64>,
}

fn one() -> usize {
    1
}

/// Custom model: CSV `k,mu,b0,b1,...` (one row per mode) and a JSON sidecar
/// with `growth_exponent`, optional `spatial_dim` and `expected_pstar`.
/// Only the first `modes` rows are used when `modes` is given.
pub fn read_custom_model(path: &Path, modes: Option<usize>) -> Result<SpectralModel> {
    let meta_path = sidecar_path(path);
    let meta_text = fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
    let meta: CustomMeta = serde_json::from_str(&meta_text)
        .map_err(|e| Error::Parse(format!("{}: {e}", meta_path.display())))?;
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let header = r.headers().map_err(|e| csv_err(path, e))?.clone();
    if header.len() < 3 || &header[0] != "k" || &header[1] != "mu" {
        return Err(Error::Parse(format!(
            "{}: header must be k,mu,b0[,b1,...]",
            path.display()
        )));
    }
    let channels = header.len() - 2;
    let mut eigenvalues = Vec::new();
    let mut couplings = vec![Vec::new(); channels];
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let row = parse_row(path, &rec)?;
        if row[0] != i as f64 {
            return Err(Error::Parse(format!(
                "{}: rows must be numbered 0, 1, 2, ...",
                path.display()
            )));
        }
        eigenvalues.push(row[1]);
        for (c, col) in couplings.iter_mut().enumerate() {
            col.push(row[2 + c]);
        }
    }
    let model = SpectralModel::custom(
        eigenvalues,
        couplings,
        meta.growth_exponent,
        meta.spatial_dim,
        meta.expected_pstar,
    )?;
    match modes {
        Some(k) if k < model.modes() => model.truncated(k),
        Some(k) if k > model.modes() => Err(Error::InvalidSize(format!(
            "{} has {} modes, {k} requested",
            path.display(),
            model.modes()
        ))),
        _ => Ok(model),
    }
}

/// CSV `N,eps_mc,eps_analytic,ratio`.
pub fn write_convergence_csv(path: &Path, table: &ConvergenceTable) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["N", "eps_mc", "eps_analytic", "ratio"])
        .map_err(|e| csv_err(path, e))?;
    for r in &table.rows {
        w.write_record([
            r.n.to_string(),
            fmt_f64(r.eps_mc),
            fmt_f64(r.eps_analytic),
            fmt_f64(r.ratio),
        ])
        .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
