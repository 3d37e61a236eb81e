//! CSV exports, the run manifest, and the plot script.
//!
//! Every CSV starts with a `# mpsim.<kind> v<N>` line. Numbers are written in
//! the shortest form that parses back to the same `f64`.

use std::fmt::Write as _;
use std::io::BufRead;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::engine::AuditRecord;
use crate::error::{Result, SimError};
use crate::lab::ConvergenceReport;
use crate::path::{HybridPath, PathTable, Side};

pub const PATH_SCHEMA: &str = "# mpsim.path v1";
pub const AUDIT_SCHEMA: &str = "# mpsim.audit v1";
pub const INDICATORS_SCHEMA: &str = "# mpsim.indicators v1";
pub const REPORT_SCHEMA: &str = "# mpsim.report v1";

/// Shortest round-trip decimal form.
pub fn fmt_num(v: f64) -> String {
    format!("{v:?}")
}

/// Columns `time,mode,x_1..x_p,side`; event times get a `pre` row then a `post` row.
pub fn path_csv(path: &HybridPath) -> String {
    let tbl = path.table();
    let mut out = String::new();
    out.push_str(PATH_SCHEMA);
    out.push('\n');
    out.push_str("time,mode");
    for i in 1..=tbl.dim {
        let _ = write!(out, ",x_{i}");
    }
    out.push_str(",side\n");
    for k in 0..tbl.len() {
        let _ = write!(out, "{},{}", fmt_num(tbl.times[k]), tbl.modes[k]);
        for v in tbl.value(k) {
            let _ = write!(out, ",{}", fmt_num(*v));
        }
        let _ = writeln!(out, ",{}", tbl.sides[k].as_str());
    }
    out
}

fn parse_err(line: usize, msg: impl std::fmt::Display) -> SimError {
    SimError::domain(format!("path CSV line {line}: {msg}"))
}

/// Rebuild a path from [`path_csv`] output.
pub fn read_path_csv<R: BufRead>(reader: R) -> Result<HybridPath> {
    let mut lines = reader.lines().enumerate();
    let mut next = || -> Result<Option<(usize, String)>> {
        match lines.next() {
            None => Ok(None),
            Some((i, l)) => l
                .map(|l| Some((i + 1, l)))
                .map_err(|e| SimError::domain(format!("cannot read path CSV: {e}"))),
        }
    };
    match next()? {
        Some((_, l)) if l == PATH_SCHEMA => {}
        _ => return Err(parse_err(1, format!("expected schema line `{PATH_SCHEMA}`"))),
    }
    let (_, header) = next()?.ok_or_else(|| parse_err(2, "missing header"))?;
    let cols: Vec<&str> = header.split(',').collect();
    if cols.len() < 4 || cols[0] != "time" || cols[1] != "mode" || cols[cols.len() - 1] != "side" {
        return Err(parse_err(2, "unexpected header"));
    }
    let dim = cols.len() - 3;
    let mut tbl = PathTable::new(dim);
    let mut x = vec![0.0; dim];
    let mut prev_pre = false;
    while let Some((ln, line)) = next()? {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != cols.len() {
            return Err(parse_err(ln, "wrong number of fields"));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|e| parse_err(ln, e));
        let t = num(fields[0])?;
        let mode = fields[1].parse().map_err(|e| parse_err(ln, e))?;
        for (xi, f) in x.iter_mut().zip(&fields[2..2 + dim]) {
            *xi = num(f)?;
        }
        let side = match (fields[dim + 2], prev_pre) {
            ("pre", _) => Side::Pre,
            ("post", true) => Side::Post,
            ("post", false) => Side::Plain,
            (other, _) => return Err(parse_err(ln, format!("unknown side `{other}`"))),
        };
        prev_pre = side == Side::Pre;
        tbl.push(t, side, mode, &x);
    }
    HybridPath::from_table(&tbl)
}

/// Columns `atom_index,time,mode_before,q_total,u,mode_after`.
pub fn audit_csv(audit: &[AuditRecord]) -> String {
    let mut out = String::new();
    out.push_str(AUDIT_SCHEMA);
    out.push('\n');
    out.push_str("atom_index,time,mode_before,q_total,u,mode_after\n");
    for r in audit {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.index,
            fmt_num(r.time),
            r.mode_before,
            fmt_num(r.q_total()),
            fmt_num(r.mark),
            r.mode_after
        );
    }
    out
}

/// Columns `time` followed by `names`; each row is `(time, values)`.
pub fn indicators_csv(names: &[String], rows: &[(f64, Vec<f64>)]) -> String {
    let mut out = String::new();
    out.push_str(INDICATORS_SCHEMA);
    out.push('\n');
    out.push_str("time");
    for n in names {
        let _ = write!(out, ",{n}");
    }
    out.push('\n');
    for (t, vals) in rows {
        out.push_str(&fmt_num(*t));
        for v in vals {
            let _ = write!(out, ",{}", fmt_num(*v));
        }
        out.push('\n');
    }
    out
}

/// Parse [`indicators_csv`] output into column names and rows.
pub fn read_indicators_csv<R: BufRead>(reader: R) -> Result<(Vec<String>, Vec<(f64, Vec<f64>)>)> {
    let mut lines = reader.lines();
    let mut next = || {
        lines
            .next()
            .transpose()
            .map_err(|e| SimError::domain(format!("cannot read indicators CSV: {e}")))
    };
    if next()?.as_deref() != Some(INDICATORS_SCHEMA) {
        return Err(SimError::domain("indicators CSV lacks its schema line"));
    }
    let header = next()?.ok_or_else(|| SimError::domain("indicators CSV lacks a header"))?;
    let names: Vec<String> = header.split(',').skip(1).map(str::to_owned).collect();
    let mut rows = Vec::new();
    while let Some(line) = next()? {
        let vals = line
            .split(',')
            .map(|s| s.parse::<f64>())
            .collect::<std::result::Result<Vec<f64>, _>>()
            .map_err(|e| SimError::domain(format!("indicators CSV: {e}")))?;
        if vals.len() != names.len() + 1 {
            return Err(SimError::domain("indicators CSV row has the wrong width"));
        }
        rows.push((vals[0], vals[1..].to_vec()));
    }
    Ok((names, rows))
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt_num).unwrap_or_default()
}

/// One row per level.
pub fn report_csv(report: &ConvergenceReport) -> String {
    let mut out = String::new();
    out.push_str(REPORT_SCHEMA);
    out.push('\n');
    out.push_str("level,paths,median_error,p90_error,decoupled,decoupling_frequency,coupling_violations\n");
    for l in &report.levels {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            l.level,
            report.config.paths,
            opt(l.median_error),
            opt(l.p90_error),
            l.decoupled,
            fmt_num(l.decoupling_frequency),
            l.coupling_violations
        );
    }
    out
}

/// Human-readable summary of a convergence study.
pub fn report_summary(report: &ConvergenceReport) -> String {
    let mut out = String::new();
    let c = &report.config;
    let _ = writeln!(
        out,
        "coupled study: {} paths, horizon {}, reference level {}, seed {}",
        c.paths,
        fmt_num(c.horizon),
        c.n_fine,
        c.seed
    );
    let _ = writeln!(out, "errors are measured against the reference level as a proxy for the exact process");
    for l in &report.levels {
        let _ = writeln!(
            out,
            "  n={:<6} median={:<24} p90={:<24} decoupled={}/{}",
            l.level,
            opt(l.median_error),
            opt(l.p90_error),
            l.decoupled,
            c.paths
        );
    }
    match &report.fit {
        Some(f) => {
            let _ = writeln!(
                out,
                "fitted log2 slope {:.4} (intercept {:.4}, r^2 {:.4})",
                f.slope, f.intercept, f.r_squared
            );
        }
        None => {
            let _ = writeln!(out, "fitted log2 slope: not available (fewer than 3 levels with positive error)");
        }
    }
    let _ = writeln!(
        out,
        "median error strictly decreasing: {}",
        report.errors_strictly_decreasing()
    );
    let t = &report.trend;
    let _ = writeln!(
        out,
        "decoupling trend: slope {:.5}, bootstrap upper 95% {:.5} ({} resamples) -> non-increasing: {}",
        t.slope,
        t.slope_upper,
        t.resamples,
        t.non_increasing()
    );
    let _ = writeln!(
        out,
        "finest minus coarsest frequency {:.5}, upper 95% {:.5} -> finest not above coarsest: {}",
        t.end_difference,
        t.end_difference_upper,
        t.finest_not_above_coarsest()
    );
    let _ = writeln!(out, "disagreement/decoupling inconsistencies: {}", report.coupling_violations());
    out
}

/// Plot helper consuming `path.csv`, `audit.csv`, and `indicators.csv`.
pub const PLOT_SCRIPT: &str = r##"#!/usr/bin/env python3
"""Plot a run: Euclidean state, mode, and indicators."""
import csv
import sys
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt


def read(name):
    with open(Path(run) / name) as fh:
        rows = [r for r in csv.reader(line for line in fh if not line.startswith("#"))]
    return rows[0], rows[1:]


run = sys.argv[1] if len(sys.argv) > 1 else str(Path(__file__).parent)
head, rows = read("path.csv")
t = [float(r[0]) for r in rows]
mode = [int(r[1]) for r in rows]
x = [float(r[2]) for r in rows]

panels = 3 if (Path(run) / "indicators.csv").exists() else 2
fig, ax = plt.subplots(panels, 1, sharex=True, figsize=(8, 2.6 * panels))
ax[0].step(t, x, where="post")
ax[0].set_ylabel(head[2])
ax[1].step(t, mode, where="post")
ax[1].set_ylabel("mode")
if panels == 3:
    ihead, irows = read("indicators.csv")
    it = [float(r[0]) for r in irows]
    for j, name in enumerate(ihead[1:], start=1):
        ax[2].step(it, [float(r[j]) for r in irows], where="post", label=name)
    ax[2].legend(loc="upper left", fontsize="small")
ax[-1].set_xlabel("time")
fig.tight_layout()
fig.savefig(Path(run) / "plot.png", dpi=120)
"##;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OutputHash {
    pub file: String,
    pub sha256: String,
}

/// Record of a run: what was asked, with which configuration, and what was written.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config: serde_json::Value,
    pub seed: u64,
    pub version: String,
    pub platform: String,
    pub outputs: Vec<OutputHash>,
}

impl RunManifest {
    pub fn new(command: &str, config: &impl Serialize, seed: u64) -> Result<Self> {
        Ok(Self {
            command: command.to_owned(),
            config: serde_json::to_value(config)
                .map_err(|e| SimError::config(format!("cannot serialise config: {e}")))?,
            seed,
            version: env!("CARGO_PKG_VERSION").to_owned(),
            platform: format!("{}-{}", std::env::consts::OS, std::env::consts::ARCH),
            outputs: Vec::new(),
        })
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| SimError::io(path, e))
}

/// Write `files` into `dir`, then `manifest.json` listing their hashes.
pub fn write_run(dir: &Path, files: &[(&str, Vec<u8>)], mut manifest: RunManifest) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| SimError::io(dir, e))?;
    let mut written = Vec::with_capacity(files.len() + 1);
    for (name, bytes) in files {
        let p = dir.join(name);
        write_file(&p, bytes)?;
        manifest.outputs.push(OutputHash {
            file: (*name).to_owned(),
            sha256: sha256_hex(bytes),
        });
        written.push(p);
    }
    let mut json = serde_json::to_vec_pretty(&manifest)
        .map_err(|e| SimError::config(format!("cannot serialise manifest: {e}")))?;
    json.push(b'\n');
    let p = dir.join("manifest.json");
    write_file(&p, &json)?;
    written.push(p);
    Ok(written)
}
