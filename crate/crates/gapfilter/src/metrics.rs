//! Precision/recall/F1 scoring of detector reports against ground truth,
//! and the report CSV format.
//!
//! Sketches store no flow ids, so a detector report and a truth event are
//! matched on (stream position, variation): the position uniquely
//! identifies the triggering item, the variation must agree. Each truth
//! event can be consumed by at most one report.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use crate::oracle::TruthEvent;
use crate::types::GapReport;
use crate::Error;

/// Scoring outcome.
///
/// `nri` is the number of truth events no report matched
/// (`truth - correct`); the truth count itself is the CI figure.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvalResult {
    pub reported: u64,
    pub correct: u64,
    pub truth: u64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub nri: u64,
}

/// Scores reports against truth by multiset matching on (position, var).
///
/// Empty sides follow the usual conventions: precision is 1 when nothing
/// was reported, recall is 1 when there was nothing to find.
pub fn score(reports: &[GapReport], truth: &[TruthEvent]) -> EvalResult {
    let mut remaining: HashMap<(u64, i64), u32> = HashMap::with_capacity(truth.len());
    for ev in truth {
        *remaining.entry((ev.stream_position, ev.var)).or_insert(0) += 1;
    }
    let mut correct = 0u64;
    for r in reports {
        if let Some(n) = remaining.get_mut(&(r.stream_position, r.var)) {
            if *n > 0 {
                *n -= 1;
                correct += 1;
            }
        }
    }
    let reported = reports.len() as u64;
    let truth_count = truth.len() as u64;
    let precision = if reported == 0 {
        1.0
    } else {
        correct as f64 / reported as f64
    };
    let recall = if truth_count == 0 {
        1.0
    } else {
        correct as f64 / truth_count as f64
    };
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    EvalResult {
        reported,
        correct,
        truth: truth_count,
        precision,
        recall,
        f1,
        nri: truth_count - correct,
    }
}

/// Converts truth events to the report row shape (no bucket/cell
/// coordinates; both zero).
pub fn truth_to_reports(truth: &[TruthEvent]) -> Vec<GapReport> {
    truth
        .iter()
        .map(|ev| GapReport {
            bucket_index: 0,
            cell_index: 0,
            seq_after: ev.seq_after,
            seq_before: ev.seq_before,
            var: ev.var,
            stream_position: ev.stream_position,
        })
        .collect()
}

pub const REPORT_CSV_HEADER: &str = "pos,var,seq_before,seq_after,bucket,cell";

/// Writes reports as CSV: `pos,var,seq_before,seq_after,bucket,cell`.
pub fn write_reports_csv<W: Write>(reports: &[GapReport], mut out: W) -> Result<(), Error> {
    writeln!(out, "{REPORT_CSV_HEADER}")?;
    for r in reports {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.stream_position, r.var, r.seq_before, r.seq_after, r.bucket_index, r.cell_index
        )?;
    }
    Ok(())
}

/// Reads a report CSV produced by [`write_reports_csv`].
pub fn read_reports_csv<R: BufRead>(input: R) -> Result<Vec<GapReport>, Error> {
    let mut reports = Vec::new();
    let mut lines = input.lines();
    let header = lines
        .next()
        .transpose()?
        .ok_or_else(|| Error::MalformedRecord {
            line: 1,
            reason: "missing report header".into(),
        })?;
    if header.trim() != REPORT_CSV_HEADER {
        return Err(Error::MalformedRecord {
            line: 1,
            reason: format!("expected header {REPORT_CSV_HEADER:?}, got {header:?}"),
        });
    }
    for (i, line) in lines.enumerate() {
        let line_no = i as u64 + 2;
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 {
            return Err(Error::MalformedRecord {
                line: line_no,
                reason: format!("expected 6 fields, got {}", fields.len()),
            });
        }
        let parse_err = |what: &str, e: std::num::ParseIntError| Error::MalformedRecord {
            line: line_no,
            reason: format!("bad {what}: {e}"),
        };
        reports.push(GapReport {
            stream_position: fields[0].parse().map_err(|e| parse_err("pos", e))?,
            var: fields[1].parse().map_err(|e| parse_err("var", e))?,
            seq_before: fields[2].parse().map_err(|e| parse_err("seq_before", e))?,
            seq_after: fields[3].parse().map_err(|e| parse_err("seq_after", e))?,
            bucket_index: fields[4].parse().map_err(|e| parse_err("bucket", e))?,
            cell_index: fields[5].parse().map_err(|e| parse_err("cell", e))?,
        });
    }
    Ok(reports)
}
