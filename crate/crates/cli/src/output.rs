//! Reports and their on-disk forms.
//!
//! A report is a table plus a JSON document. Files are written to a temporary
//! sibling and renamed into place, so a failed run never leaves partial
//! output.

use std::io::Write;
use std::path::Path;

use serde::Serialize;
use serde_json::{json, Map, Value};
use transfer_core::{Grid, C64};

use crate::config::RunConfig;

#[derive(Debug, Clone, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }
}

#[derive(Debug, Clone)]
pub struct Report {
    pub table: Table,
    pub json: Map<String, Value>,
    pub grids: Vec<GridInfo>,
    /// One line per table row, printed to stdout.
    pub summary: Vec<String>,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct GridInfo {
    pub w: f64,
    pub half_length: f64,
    pub n: usize,
}

impl GridInfo {
    pub fn of(w: f64, grid: &Grid) -> Self {
        GridInfo {
            w,
            half_length: grid.half_length,
            n: grid.len(),
        }
    }
}

impl Report {
    pub fn new(table: Table) -> Self {
        Report {
            table,
            json: Map::new(),
            grids: Vec::new(),
            summary: Vec::new(),
        }
    }

    pub fn set(&mut self, key: &str, value: impl Serialize) {
        let v = serde_json::to_value(value).unwrap_or(Value::Null);
        self.json.insert(key.to_string(), v);
    }
}

/// Shortest round-trip decimal form, so output is reproducible to the bit.
pub fn num(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{x:e}")
    }
}

pub fn cnum(z: C64) -> String {
    let sign = if z.im.is_sign_negative() { "" } else { "+" };
    format!("{}{sign}{}i", num(z.re), num(z.im))
}

pub fn complex_json(z: C64) -> Value {
    json!({ "re": z.re, "im": z.im })
}

fn config_json(cfg: &RunConfig) -> Value {
    Value::Object(
        cfg.entries()
            .iter()
            .map(|(k, v)| (k.clone(), Value::String(v.clone())))
            .collect(),
    )
}

fn atomic_write(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

fn preamble(cfg: &RunConfig, grids: &[GridInfo]) -> String {
    let mut s = String::new();
    for (k, v) in cfg.entries() {
        s.push_str(&format!("# {k} = {v}\n"));
    }
    for g in grids {
        s.push_str(&format!("# grid W={} L={} N={}\n", num(g.w), num(g.half_length), g.n));
    }
    s
}

fn csv_bytes(table: &Table) -> std::io::Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&table.header)?;
    for r in &table.rows {
        w.write_record(r)?;
    }
    w.into_inner().map_err(|e| e.into_error())
}

pub fn csv_text(cfg: &RunConfig, report: &Report) -> std::io::Result<Vec<u8>> {
    let mut out = preamble(cfg, &report.grids).into_bytes();
    out.extend(csv_bytes(&report.table)?);
    Ok(out)
}

pub fn json_text(cfg: &RunConfig, command: &str, report: &Report) -> std::io::Result<Vec<u8>> {
    let doc = json!({
        "command": command,
        "config": config_json(cfg),
        "grids": report.grids,
        "columns": report.table.header,
        "rows": report.table.rows,
        "result": Value::Object(report.json.clone()),
    });
    let mut bytes = serde_json::to_vec_pretty(&doc)?;
    bytes.push(b'\n');
    Ok(bytes)
}

/// Whitespace-separated columns with a commented header.
pub fn gnuplot_text(cfg: &RunConfig, report: &Report) -> Vec<u8> {
    let mut s = preamble(cfg, &report.grids);
    s.push_str(&format!("# {}\n", report.table.header.join(" ")));
    for r in &report.table.rows {
        s.push_str(&r.join(" "));
        s.push('\n');
    }
    s.into_bytes()
}

pub struct OutputPaths<'a> {
    pub csv: &'a Path,
    pub json: &'a Path,
    pub gnuplot: Option<&'a Path>,
}

/// Renders every file in memory first; nothing touches disk until all
/// renderings succeed.
pub fn write_all(cfg: &RunConfig, command: &str, report: &Report, paths: &OutputPaths<'_>) -> std::io::Result<()> {
    let csv = csv_text(cfg, report)?;
    let json = json_text(cfg, command, report)?;
    let gp = paths.gnuplot.map(|_| gnuplot_text(cfg, report));
    atomic_write(paths.csv, &csv)?;
    atomic_write(paths.json, &json)?;
    if let (Some(p), Some(bytes)) = (paths.gnuplot, gp) {
        atomic_write(p, &bytes)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Subcommand;

    #[test]
    fn number_format_round_trips() {
        for x in [0.0, 1.0, -2.5e-13, std::f64::consts::PI, 1e300] {
            assert_eq!(num(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(num(f64::NAN), "nan");
    }

    #[test]
    fn atomic_write_replaces_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("out.csv");
        atomic_write(&p, b"one").unwrap();
        atomic_write(&p, b"two").unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), b"two");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }

    #[test]
    fn csv_embeds_config_and_grid() {
        let cfg = RunConfig::load(Subcommand::Spectrum, None, &[]).unwrap();
        let mut t = Table::new(&["j", "value"]);
        t.push(vec!["0".into(), num(1.5)]);
        let mut r = Report::new(t);
        r.grids.push(GridInfo {
            w: 8.0,
            half_length: 4.8,
            n: 320,
        });
        let text = String::from_utf8(csv_text(&cfg, &r).unwrap()).unwrap();
        assert!(text.contains("# model.kind = rotated-log\n"));
        assert!(text.contains("# grid W=8e0 L=4.8e0 N=320\n"));
        assert!(text.ends_with("j,value\n0,1.5e0\n"));
    }
}
