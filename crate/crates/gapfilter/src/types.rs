//! Shared domain types: stream items, thresholds, classification outcomes
//! and gap reports.

use smallvec::SmallVec;

use crate::Error;

/// Opaque flow identifier.
///
/// Real traffic uses something like a 13-byte five-tuple; synthetic traces
/// use an 8-byte big-endian counter. Identifiers up to 16 bytes are stored
/// inline.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FlowId(SmallVec<[u8; 16]>);

impl FlowId {
    /// Builds a flow id from raw bytes. The id must be non-empty.
    pub fn new(bytes: &[u8]) -> Result<Self, Error> {
        if bytes.is_empty() {
            return Err(Error::EmptyFlowId);
        }
        Ok(FlowId(SmallVec::from_slice(bytes)))
    }

    /// Big-endian encoding of a test integer, handy for synthetic flows.
    pub fn from_u64(id: u64) -> Self {
        FlowId(SmallVec::from_slice(&id.to_be_bytes()))
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        false // constructor rejects empty ids
    }
}

impl AsRef<[u8]> for FlowId {
    fn as_ref(&self) -> &[u8] {
        &self.0
    }
}

/// One stream element: a flow id plus the sequence number it carries.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Item {
    pub fid: FlowId,
    pub seq: u32,
}

impl Item {
    pub fn new(fid: FlowId, seq: u32) -> Self {
        Item { fid, seq }
    }
}

/// Detection thresholds and the sequence-number width they act on.
///
/// `t1` separates minor from major gaps, `t2` caps the detectable
/// variation. Sequence numbers live in `[0, 2^seq_width)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Thresholds {
    t1: u32,
    t2: u32,
    seq_width: u8,
}

impl Thresholds {
    /// Validates `2 <= t1 < t2 < 2^(seq_width-1)` and `8 <= seq_width <= 32`.
    ///
    /// The upper bound on `t2` keeps the not-matched region representable
    /// in signed modular space.
    pub fn new(t1: u32, t2: u32, seq_width: u8) -> Result<Self, Error> {
        if !(8..=32).contains(&seq_width) {
            return Err(Error::InvalidThresholds(format!(
                "seq_width must be in 8..=32, got {seq_width}"
            )));
        }
        if t1 < 2 || t1 >= t2 {
            return Err(Error::InvalidThresholds(format!(
                "need 2 <= t1 < t2, got t1={t1}, t2={t2}"
            )));
        }
        let half = 1u64 << (seq_width - 1);
        if u64::from(t2) >= half {
            return Err(Error::InvalidThresholds(format!(
                "t2={t2} is not below 2^(seq_width-1)={half}"
            )));
        }
        Ok(Thresholds { t1, t2, seq_width })
    }

    /// The paper's experimental setting: t1=5, t2=30 over 16-bit sequence
    /// numbers (IP Identification scale).
    pub fn default_ip_id() -> Self {
        Thresholds::new(5, 30, 16).expect("static parameters are valid")
    }

    pub fn t1(&self) -> u32 {
        self.t1
    }

    pub fn t2(&self) -> u32 {
        self.t2
    }

    pub fn seq_width(&self) -> u8 {
        self.seq_width
    }

    /// Bit mask selecting the low `seq_width` bits.
    pub fn seq_mask(&self) -> u32 {
        mask_for(self.seq_width)
    }
}

/// Mask selecting the low `width` bits of a sequence number.
pub(crate) fn mask_for(width: u8) -> u32 {
    if width >= 32 {
        u32::MAX
    } else {
        (1u32 << width) - 1
    }
}

/// Whole bytes needed to store a field of `bits` bits.
pub(crate) fn bytes_for_bits(bits: usize) -> usize {
    bits.div_ceil(8)
}

/// Outcome of classifying the variation between an incoming sequence
/// number and a stored one.
///
/// The first four variants are collectively "matched": the two items are
/// deemed to belong to the same flow. `MinorGap` and `MajorGap` carry the
/// variation itself.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Situation {
    /// Variation in `(-t2, 1)`: a stale or duplicate item, ignored.
    Neglect,
    /// Variation exactly 1: the expected next item.
    Normal,
    /// Variation in `[2, t1)`: tolerated small gap.
    MinorGap(i64),
    /// Variation in `[t1, t2)`: the reportable condition.
    MajorGap(i64),
    /// Variation at or beyond ±t2: the items are not considered related.
    NotMatched,
}

impl Situation {
    /// True for every variant except `NotMatched`.
    pub fn is_matched(&self) -> bool {
        !matches!(self, Situation::NotMatched)
    }

    pub fn is_major_gap(&self) -> bool {
        matches!(self, Situation::MajorGap(_))
    }
}

/// One emitted major-gap event.
///
/// Sketches store no flow ids, so a report identifies the event by the
/// 0-based stream position of the item that triggered it. Sequence values
/// are the (possibly randomized) numbers the detector actually compared.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GapReport {
    pub bucket_index: usize,
    pub cell_index: usize,
    /// Incoming item's sequence value after randomization.
    pub seq_after: u32,
    /// Matched cell's stored value at the time of the match.
    pub seq_before: u32,
    /// Signed modular difference `seq_after - seq_before`, in `[t1, t2)`.
    pub var: i64,
    /// 0-based index of the triggering item in the stream.
    pub stream_position: u64,
}
