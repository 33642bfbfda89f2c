//! Structural checks for everything the harness writes, so downstream
//! tooling can rely on the files without re-deriving the format.

use folded_attention::cost::{read_csv, read_json, TableRecord, Variant};

use crate::report::{SuiteReport, Verdict, CHECK_HEADER, TIMING_HEADER};
use crate::HarnessError;

fn bad(msg: impl Into<String>) -> HarnessError {
    HarnessError::Schema(msg.into())
}

/// Parses a JSON suite report and checks its internal consistency.
pub fn validate_report_json(text: &str) -> Result<SuiteReport, HarnessError> {
    let report: SuiteReport = serde_json::from_str(text).map_err(|e| bad(e.to_string()))?;
    for c in &report.checks {
        if c.samples.is_empty() {
            return Err(bad(format!("check {} has no samples", c.name)));
        }
        let worst = c.samples.iter().copied().fold(0.0, f64::max);
        if worst != c.metric {
            return Err(bad(format!(
                "check {}: metric {} is not the worst sample {worst}",
                c.name, c.metric
            )));
        }
        if c.passed != c.samples.iter().all(|&s| s <= c.tolerance) {
            return Err(bad(format!(
                "check {}: pass flag disagrees with samples",
                c.name
            )));
        }
        if c.seconds < 0.0 || c.tolerance < 0.0 {
            return Err(bad(format!("check {}: negative time or tolerance", c.name)));
        }
    }
    for t in &report.timings {
        if t.samples_seconds.is_empty() != t.median_seconds.is_none() {
            return Err(bad(format!("timing {}: median without samples", t.variant)));
        }
        if t.samples_seconds.is_empty() && t.skipped.is_none() {
            return Err(bad(format!(
                "timing {}: no samples and no skip reason",
                t.variant
            )));
        }
    }
    let expected = if report.checks.iter().all(|c| c.passed) {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    if report.verdict != expected {
        return Err(bad("verdict disagrees with checks"));
    }
    Ok(report)
}

/// Checks the CSV suite layout: a check block, then optionally a blank
/// line and a timing block. Returns the number of check rows.
pub fn validate_report_csv(text: &str) -> Result<usize, HarnessError> {
    let (checks, timings) = match text.split_once("\n\n") {
        Some((a, b)) => (a, Some(b)),
        None => (text, None),
    };
    let rows = validate_block(checks, &CHECK_HEADER, |row| {
        row[2]
            .parse::<bool>()
            .map_err(|_| bad(format!("passed {:?}", &row[2])))?;
        for i in [4, 5, 6] {
            row[i]
                .parse::<f64>()
                .map_err(|_| bad(format!("{} {:?}", CHECK_HEADER[i], &row[i])))?;
        }
        Ok(())
    })?;
    if let Some(t) = timings {
        validate_block(t, &TIMING_HEADER, |row| {
            row[2]
                .parse::<usize>()
                .map_err(|_| bad(format!("samples {:?}", &row[2])))?;
            if !row[3].is_empty() {
                row[3]
                    .parse::<f64>()
                    .map_err(|_| bad(format!("median {:?}", &row[3])))?;
            } else if row[5].is_empty() {
                return Err(bad("timing row with neither median nor skip reason"));
            }
            Ok(())
        })?;
    }
    Ok(rows)
}

fn validate_block(
    text: &str,
    header: &[&str],
    row_ok: impl Fn(&csv::StringRecord) -> Result<(), HarnessError>,
) -> Result<usize, HarnessError> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let got: Vec<&str> = r
        .headers()
        .map_err(|e| bad(e.to_string()))?
        .iter()
        .collect();
    if got != header {
        return Err(bad(format!("header {got:?}, expected {header:?}")));
    }
    let mut n = 0;
    for rec in r.records() {
        row_ok(&rec.map_err(|e| bad(e.to_string()))?)?;
        n += 1;
    }
    Ok(n)
}

/// Scaling tables come in blocks of four rows per size, in
/// [`Variant::ALL`] order.
pub fn validate_table(records: &[TableRecord]) -> Result<(), HarnessError> {
    if records.is_empty() || !records.len().is_multiple_of(Variant::ALL.len()) {
        return Err(bad(format!(
            "{} rows is not a whole number of sizes",
            records.len()
        )));
    }
    for block in records.chunks(Variant::ALL.len()) {
        let first = &block[0];
        for (rec, v) in block.iter().zip(Variant::ALL) {
            if rec.variant != v
                || (rec.h, rec.w, rec.d, rec.c) != (first.h, first.w, first.d, first.c)
            {
                return Err(bad(format!("unexpected row {rec:?}")));
            }
        }
    }
    Ok(())
}

pub fn validate_table_csv(text: &str) -> Result<Vec<TableRecord>, HarnessError> {
    let recs = read_csv(text.as_bytes()).map_err(|e| bad(e.to_string()))?;
    validate_table(&recs)?;
    Ok(recs)
}

pub fn validate_table_json(text: &str) -> Result<Vec<TableRecord>, HarnessError> {
    let recs = read_json(text.as_bytes()).map_err(|e| bad(e.to_string()))?;
    validate_table(&recs)?;
    Ok(recs)
}
