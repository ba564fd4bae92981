//! CSV rows for evaluation results.

use std::fs::{self, OpenOptions};
use std::io::{self, Write};
use std::path::Path;

use rip_core::{EvaluationReport, Psnr};

pub const HEADER: &str = "image,block_size,mode_count,provenance,protocol,mse,psnr_db,blocks,mode_histogram";

/// Six significant digits, `inf` for an infinite value.
pub fn sig6(v: f64) -> String {
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v.is_nan() {
        return "nan".into();
    }
    if v == 0.0 {
        return "0".into();
    }
    let exp = v.abs().log10().floor() as i32;
    if (-4..15).contains(&exp) {
        let decimals = (5 - exp).max(0) as usize;
        format!("{v:.decimals$}")
    } else {
        format!("{v:.5e}")
    }
}

pub fn csv_row(report: &EvaluationReport) -> String {
    let psnr = match report.psnr {
        Psnr::Finite(v) => sig6(v),
        Psnr::Infinite => "inf".into(),
    };
    let hist = report
        .mode_histogram
        .iter()
        .map(usize::to_string)
        .collect::<Vec<_>>()
        .join(";");
    format!(
        "{},{},{},{},{},{},{},{},{}",
        report.image_id,
        report.geometry.block_size(),
        report.mode_histogram.len(),
        report.provenance,
        report.protocol.name(),
        sig6(report.mse),
        psnr,
        report.blocks.len(),
        hist
    )
}

/// Appends rows, writing the header first when the file is new or empty.
pub fn append_rows(path: &Path, rows: &[String]) -> io::Result<()> {
    let fresh = fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
    let mut f = OpenOptions::new().create(true).append(true).open(path)?;
    let mut out = String::new();
    if fresh {
        out.push_str(HEADER);
        out.push('\n');
    }
    for row in rows {
        out.push_str(row);
        out.push('\n');
    }
    f.write_all(out.as_bytes())?;
    f.sync_all()
}

/// Concatenates the data rows of several CSV files under one header.
pub fn merge(inputs: &[impl AsRef<Path>]) -> io::Result<Vec<String>> {
    let mut rows = Vec::new();
    for input in inputs {
        let text = fs::read_to_string(input)?;
        rows.extend(
            text.lines()
                .filter(|l| !l.trim().is_empty() && *l != HEADER)
                .map(str::to_owned),
        );
    }
    Ok(rows)
}
