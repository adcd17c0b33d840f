//! Report serialization: a text summary, a JSON document, and one CSV per
//! time series, all byte-deterministic for a given report.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::stats::TimeWindowSeries;
use crate::tided::{TidedError, TidedReport};

/// Writes the full report file set into `out_dir` (created if missing) and
/// returns the paths written.
pub fn emit_report(report: &TidedReport, out_dir: &Path) -> Result<Vec<PathBuf>, TidedError> {
    fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();

    let summary = out_dir.join("summary.txt");
    fs::write(&summary, text_summary(report))?;
    written.push(summary);

    let json = out_dir.join("report.json");
    let mut doc = serde_json::to_string_pretty(report).expect("report serializes");
    doc.push('\n');
    fs::write(&json, doc)?;
    written.push(json);

    for d in &report.diversity {
        for (suffix, series) in [
            ("entropy", &d.entropy_series),
            ("novelty", &d.novelty_series),
            ("cumulative_entropy", &d.cumulative_entropy_series),
        ] {
            let path = out_dir.join(format!("{}_{suffix}.csv", d.feature.name()));
            fs::write(&path, series_csv(series))?;
            written.push(path);
        }
    }
    Ok(written)
}

/// `window_start,value` rows; both columns as decimal floats with six
/// fractional digits, window starts in epoch seconds.
pub fn series_csv(series: &TimeWindowSeries) -> String {
    let mut out = String::from("window_start,value\n");
    for (start, value) in series.window_starts().iter().zip(&series.values) {
        writeln!(out, "{:.6},{:.6}", start.as_secs_f64(), value).unwrap();
    }
    out
}

fn text_summary(report: &TidedReport) -> String {
    let mut s = String::new();
    writeln!(s, "capture: {}", report.source).unwrap();
    writeln!(s, "sha224: {}", report.content_hash).unwrap();
    writeln!(s, "packets: {}", report.packet_count).unwrap();
    match report.payload_availability {
        Some(v) => writeln!(s, "payload availability: {v:.6}").unwrap(),
        None => writeln!(s, "payload availability: n/a (empty capture)").unwrap(),
    }
    let c = &report.checksums;
    writeln!(
        s,
        "tcp checksums: checked={} correct={} incorrect={} ratio={:.6}",
        c.checked, c.correct, c.incorrect, c.incorrect_ratio
    )
    .unwrap();
    let p = &report.ports;
    writeln!(
        s,
        "dst ports: zero={} well_known={} registered={} dynamic={} unassigned={}",
        p.port_zero, p.well_known, p.registered, p.dynamic, p.unassigned
    )
    .unwrap();
    writeln!(s, "diversity:").unwrap();
    for d in &report.diversity {
        writeln!(
            s,
            "  {}: distinct={} normalized_entropy={:.6} novelty_normalized_entropy={:.6}",
            d.feature.name(),
            d.distinct_values,
            d.normalized_entropy,
            d.novelty_normalized_entropy
        )
        .unwrap();
    }
    for note in &report.notes {
        writeln!(s, "note: {note}").unwrap();
    }
    if report.warnings.is_empty() {
        writeln!(s, "warnings: none").unwrap();
    } else {
        writeln!(s, "warnings:").unwrap();
        for w in &report.warnings {
            writeln!(s, "  - {}: {}", w.code, w.message).unwrap();
        }
    }
    s
}
