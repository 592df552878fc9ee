//! Text encodings of [`BoundReport`].
//!
//! CSV columns are fixed; floats carry 17 significant digits so every value
//! round-trips exactly. Absent optional values are empty fields.

use std::fmt::Write as _;

use crate::bounds::BoundReport;

pub const CSV_COLUMNS: [&str; 10] = [
    "family",
    "n",
    "alpha",
    "two_beta2",
    "delta2_c",
    "f_rho",
    "f_rho_bar",
    "main_bound",
    "error_bound",
    "reference_g",
];

pub fn csv_header() -> String {
    CSV_COLUMNS.join(",")
}

/// `{:.16e}`: one leading digit plus sixteen decimals.
pub fn format_float(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "nan".to_string()
    } else if x > 0.0 {
        "inf".to_string()
    } else {
        "-inf".to_string()
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(format_float).unwrap_or_default()
}

pub fn csv_row(report: &BoundReport) -> String {
    let mut row = String::new();
    let _ = write!(
        row,
        "{},{},{},{},{},{},{},{},{},{}",
        report.family,
        report.n,
        opt(report.alpha),
        opt(report.two_beta2),
        format_float(report.delta2_c),
        format_float(report.f_rho),
        opt(report.f_rho_bar),
        format_float(report.main_bound),
        format_float(report.error_bound),
        opt(report.reference_g),
    );
    row
}

/// Header plus one line per report, newline-terminated.
pub fn to_csv(reports: &[BoundReport]) -> String {
    let mut out = csv_header();
    out.push('\n');
    for r in reports {
        out.push_str(&csv_row(r));
        out.push('\n');
    }
    out
}

pub fn to_json(report: &BoundReport) -> String {
    serde_json::to_string(report).expect("BoundReport serialises")
}
