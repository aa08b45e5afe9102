//! Exact ground-truth detector with unbounded per-flow state.
//!
//! Embodies the detection contract with perfect memory: one stored
//! sequence value per flow, never evicted. Randomization is applied
//! exactly as the sketches apply it, and a not-matched variation resets
//! the stored value the same way a sketch reinserts the flow, so the
//! oracle's reports are the reference the sketches are scored against.

use crate::hash::{seq_bias, HashConfig};
use crate::seqnum::{classify, seq_diff};
use crate::trace::Trace;
use crate::types::{mask_for, Situation, Thresholds};

/// One ground-truth major-gap event.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TruthEvent {
    /// 0-based index of the triggering item in the stream.
    pub stream_position: u64,
    /// Variation in `[t1, t2)`.
    pub var: i64,
    /// Stored value the item was compared against (randomized domain).
    pub seq_before: u32,
    /// The item's randomized sequence value.
    pub seq_after: u32,
    /// Flow table index within the trace that produced the event.
    pub flow: u32,
}

/// Replays a trace against the ideal per-flow state and returns every
/// major-gap event.
pub fn oracle_run(trace: &Trace, th: &Thresholds, cfg: &HashConfig) -> Vec<TruthEvent> {
    let width = th.seq_width();
    let mask = mask_for(width);
    // Per-flow bias, computed once per flow rather than once per item.
    let mut bias: Vec<Option<u32>> = vec![None; trace.flow_count()];
    let mut stored: Vec<Option<u32>> = vec![None; trace.flow_count()];
    let mut events = Vec::new();

    for (pos, it) in trace.items().iter().enumerate() {
        let flow = it.flow as usize;
        let b = *bias[flow].get_or_insert_with(|| {
            seq_bias(trace.flow_id(it.flow).as_bytes(), cfg, width)
        });
        let s = it.seq.wrapping_add(b) & mask;
        match stored[flow] {
            None => stored[flow] = Some(s),
            Some(prev) => {
                let var = seq_diff(s, prev, width);
                match classify(var, th) {
                    Situation::MajorGap(var) => {
                        events.push(TruthEvent {
                            stream_position: pos as u64,
                            var,
                            seq_before: prev,
                            seq_after: s,
                            flow: it.flow,
                        });
                        stored[flow] = Some(s);
                    }
                    Situation::NotMatched => stored[flow] = Some(s),
                    _ => {
                        if var > 0 {
                            stored[flow] = Some(s);
                        }
                    }
                }
            }
        }
    }
    events
}
