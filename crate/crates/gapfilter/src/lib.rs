//! Flow-gap detection in data streams.
//!
//! A flow gap is a jump of two or more in the sequence numbers of adjacent
//! surviving items of one flow; gaps with variation in `[t1, t2)` are the
//! reportable "major" condition. This crate provides:
//!
//! - [`so::SoSketch`]: the speed-oriented filter — one bucket per flow
//!   group, similarity-absorption matching, LRU eviction by rearrangement.
//! - [`ao::AoSketch`]: the accuracy-oriented filter — buckets split into
//!   civilian (LRU) and suspect (least-recently-disrupted) regions with
//!   fingerprint-assisted matching.
//! - [`strawman::CuckooBaseline`]: a cuckoo-table baseline storing explicit
//!   32-bit fingerprints, for accuracy/throughput comparison.
//! - [`oracle`]: an exact detector with unbounded per-flow state, plus
//!   precision/recall/F1 scoring in [`metrics`].
//! - [`tracegen`]: synthetic interleaved-flow streams with injected
//!   consecutive and single item loss.
//! - [`bounds`]: closed-form and Monte Carlo evaluation of the collision
//!   and recall bounds that justify the design.

pub mod ao;
pub mod bounds;
pub mod hash;
pub mod metrics;
pub mod oracle;
pub mod seqnum;
pub mod so;
pub mod strawman;
pub mod trace;
pub mod tracegen;
pub mod types;

use thiserror::Error as ThisError;

pub use hash::HashConfig;
pub use types::{FlowId, GapReport, Item, Situation, Thresholds};

/// Errors produced by construction, configuration and trace I/O.
#[derive(Debug, ThisError)]
pub enum Error {
    #[error("flow id must be non-empty")]
    EmptyFlowId,
    #[error("invalid thresholds: {0}")]
    InvalidThresholds(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("fingerprinting is disabled (l_f = 0)")]
    FingerprintDisabled,
    #[error("memory budget of {budget} bytes is below one bucket ({required} bytes)")]
    BudgetTooSmall { budget: usize, required: usize },
    #[error("invalid trace spec: {0}")]
    InvalidTraceSpec(String),
    #[error("malformed record at line {line}: {reason}")]
    MalformedRecord { line: u64, reason: String },
    #[error("unsupported trace format: {0}")]
    UnsupportedFormat(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Streaming detectors share this interface: one item in, at most one
/// major-gap report out.
pub trait Detector {
    /// Observes the item at 0-based stream position `pos`.
    fn observe(&mut self, fid: &[u8], seq: u32, pos: u64) -> Option<GapReport>;

    /// Bytes of cell storage implied by the configuration.
    fn allocated_bytes(&self) -> usize;

    /// Entries discarded under pressure (cuckoo kick exhaustion); zero for
    /// detectors that never drop.
    fn drops(&self) -> u64 {
        0
    }
}

/// Replays a trace through a detector in one streaming pass, collecting
/// the emitted reports.
pub fn replay<D: Detector>(detector: &mut D, trace: &trace::Trace) -> Vec<GapReport> {
    let mut reports = Vec::new();
    for (pos, (fid, seq)) in trace.iter().enumerate() {
        if let Some(r) = detector.observe(fid, seq, pos as u64) {
            reports.push(r);
        }
    }
    reports
}
