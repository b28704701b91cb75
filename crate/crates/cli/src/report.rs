//! Report files: `report.json`, `report.csv` and `sweep.csv`.
//!
//! Everything here is rendered to a string first and written in one call,
//! so a report either exists in full or not at all. Numbers are printed
//! with Rust's shortest-round-trip float formatting, which means every
//! value in the CSVs parses back to *exactly* the f64 that produced it —
//! downstream tooling can diff reports numerically without tolerance
//! fudge. JSON field order follows the struct declaration and the fold
//! order is fixed by the plan, so identical runs produce identical bytes.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use medeeg_core::{CvReport, SweepTable};

/// Render `report.json`: pretty-printed, trailing newline.
pub fn render_run_json(report: &CvReport) -> String {
    let mut json = serde_json::to_string_pretty(report).expect("report serializes");
    json.push('\n');
    json
}

/// Render `report.csv`: one row per fold in plan order.
pub fn render_run_csv(report: &CvReport) -> String {
    let mut csv = String::from("fold_id,accuracy_pct\n");
    for (id, acc) in report.fold_ids.iter().zip(&report.per_fold_accuracy_pct) {
        csv.push_str(&format!("{id},{acc}\n"));
    }
    csv
}

/// Column label for a regularization strength: powers of ten render as
/// `1e-1` … `1e-10`, and zero — CSP with no penalty at all — as
/// `classical`.
pub fn format_alpha(alpha: f64) -> String {
    if alpha == 0.0 {
        "classical".to_string()
    } else {
        format!("{alpha:e}")
    }
}

/// One sweep cell: `mean±sd` over folds, both sides exact f64 prints.
pub fn format_cell(mean: f64, sd: f64) -> String {
    format!("{mean}±{sd}")
}

/// Parse a sweep cell back into `(mean, sd)`; `None` if it isn't one.
pub fn parse_cell(cell: &str) -> Option<(f64, f64)> {
    let (mean, sd) = cell.split_once('±')?;
    Some((mean.parse().ok()?, sd.parse().ok()?))
}

/// Render `sweep.csv` in the appendix layout: one row per filter-pair
/// count, one column per regularization strength.
pub fn render_sweep_csv(table: &SweepTable) -> String {
    let mut csv = String::from("n_pairs");
    for &alpha in &table.alphas {
        csv.push(',');
        csv.push_str(&format_alpha(alpha));
    }
    csv.push('\n');
    for (r, &pairs) in table.pair_counts.iter().enumerate() {
        csv.push_str(&pairs.to_string());
        for c in 0..table.alphas.len() {
            let cell = table.cell(r, c);
            csv.push(',');
            csv.push_str(&format_cell(cell.mean_accuracy_pct, cell.sd_accuracy_pct));
        }
        csv.push('\n');
    }
    csv
}

/// Write `report.json` and `report.csv` into `out_dir`, creating it if
/// needed. Returns the two paths.
pub fn write_run_reports(out_dir: &Path, report: &CvReport) -> io::Result<(PathBuf, PathBuf)> {
    fs::create_dir_all(out_dir)?;
    let json_path = out_dir.join("report.json");
    let csv_path = out_dir.join("report.csv");
    fs::write(&json_path, render_run_json(report))?;
    fs::write(&csv_path, render_run_csv(report))?;
    Ok((json_path, csv_path))
}

/// Write `sweep.csv` into `out_dir`, creating it if needed.
pub fn write_sweep_csv(out_dir: &Path, table: &SweepTable) -> io::Result<PathBuf> {
    fs::create_dir_all(out_dir)?;
    let path = out_dir.join("sweep.csv");
    fs::write(&path, render_sweep_csv(table))?;
    Ok(path)
}
