//! In-memory traces and the two on-disk trace formats.
//!
//! A trace stores each distinct flow id once and keeps the item sequence
//! as compact (flow, seq) pairs, so multi-million-item streams stay cheap
//! to hold and replay.
//!
//! File formats:
//! - CSV: header `fid,seq`, one item per line, fid as `0x`-prefixed hex
//!   bytes or a decimal integer (encoded as 8 big-endian bytes).
//! - Binary: magic `GFTR`, version u16, seq_width u8, then little-endian
//!   records `[u16 fid_len][fid bytes][u32 seq]`.

use std::collections::HashMap;
use std::io::{BufRead, Read, Write};

use crate::types::{mask_for, FlowId, Item};
use crate::Error;

pub const BINARY_MAGIC: &[u8; 4] = b"GFTR";
pub const BINARY_VERSION: u16 = 1;

/// One trace entry: an index into the flow table plus the sequence value.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TraceItem {
    pub flow: u32,
    pub seq: u32,
}

/// A finite item sequence with interned flow ids.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Trace {
    seq_width: u8,
    flows: Vec<FlowId>,
    items: Vec<TraceItem>,
}

impl Trace {
    pub fn new(seq_width: u8) -> Self {
        Trace {
            seq_width,
            flows: Vec::new(),
            items: Vec::new(),
        }
    }

    pub fn seq_width(&self) -> u8 {
        self.seq_width
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn flow_count(&self) -> usize {
        self.flows.len()
    }

    pub fn flow_id(&self, flow: u32) -> &FlowId {
        &self.flows[flow as usize]
    }

    pub fn items(&self) -> &[TraceItem] {
        &self.items
    }

    /// Registers a flow id and returns its index. Ids are not checked for
    /// prior registration; use [`TraceBuilder`] when reading foreign data.
    pub fn add_flow(&mut self, fid: FlowId) -> u32 {
        let idx = self.flows.len() as u32;
        self.flows.push(fid);
        idx
    }

    pub fn push(&mut self, flow: u32, seq: u32) {
        debug_assert!((flow as usize) < self.flows.len());
        self.items.push(TraceItem { flow, seq });
    }

    /// Iterates items as (flow id bytes, seq) in stream order.
    pub fn iter(&self) -> impl Iterator<Item = (&[u8], u32)> + '_ {
        self.items
            .iter()
            .map(move |it| (self.flows[it.flow as usize].as_bytes(), it.seq))
    }

    pub fn item_at(&self, pos: usize) -> Item {
        let it = self.items[pos];
        Item::new(self.flows[it.flow as usize].clone(), it.seq)
    }
}

/// Builds a trace from externally supplied items, interning flow ids.
pub struct TraceBuilder {
    index: HashMap<FlowId, u32>,
    trace: Trace,
}

impl TraceBuilder {
    pub fn new(seq_width: u8) -> Self {
        TraceBuilder {
            index: HashMap::new(),
            trace: Trace::new(seq_width),
        }
    }

    pub fn push(&mut self, fid: FlowId, seq: u32) {
        let trace = &mut self.trace;
        let flow = *self
            .index
            .entry(fid)
            .or_insert_with_key(|k| {
                let idx = trace.flows.len() as u32;
                trace.flows.push(k.clone());
                idx
            });
        trace.items.push(TraceItem { flow, seq });
    }

    pub fn finish(self) -> Trace {
        self.trace
    }
}

/// On-disk trace encodings.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TraceFormat {
    Csv,
    Binary,
}

impl TraceFormat {
    /// Picks the format from a file extension: `.csv` is CSV, anything
    /// else is the binary format.
    pub fn from_path(path: &std::path::Path) -> TraceFormat {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => TraceFormat::Csv,
            _ => TraceFormat::Binary,
        }
    }
}

fn format_fid(fid: &FlowId) -> String {
    let mut s = String::with_capacity(2 + 2 * fid.len());
    s.push_str("0x");
    for b in fid.as_bytes() {
        s.push_str(&format!("{b:02x}"));
    }
    s
}

fn parse_fid(field: &str, line: u64) -> Result<FlowId, Error> {
    let malformed = |reason: String| Error::MalformedRecord { line, reason };
    if let Some(hex) = field.strip_prefix("0x").or_else(|| field.strip_prefix("0X")) {
        if hex.is_empty() || hex.len() % 2 != 0 {
            return Err(malformed(format!("hex fid must have even length: {field:?}")));
        }
        let mut bytes = Vec::with_capacity(hex.len() / 2);
        for i in (0..hex.len()).step_by(2) {
            let byte = u8::from_str_radix(&hex[i..i + 2], 16)
                .map_err(|e| malformed(format!("bad hex fid {field:?}: {e}")))?;
            bytes.push(byte);
        }
        FlowId::new(&bytes).map_err(|_| malformed("empty fid".into()))
    } else {
        let id: u64 = field
            .parse()
            .map_err(|e| malformed(format!("fid must be hex (0x..) or decimal: {e}")))?;
        Ok(FlowId::from_u64(id))
    }
}

/// Writes a trace as CSV with a `fid,seq` header.
pub fn write_trace_csv<W: Write>(trace: &Trace, mut out: W) -> Result<(), Error> {
    out.write_all(b"fid,seq\n")?;
    for it in &trace.items {
        out.write_all(format_fid(&trace.flows[it.flow as usize]).as_bytes())?;
        writeln!(out, ",{}", it.seq)?;
    }
    Ok(())
}

/// Reads a `fid,seq` CSV. The sequence width is not part of the format,
/// so the caller supplies it; out-of-range sequence numbers are rejected
/// with their line number.
pub fn read_trace_csv<R: BufRead>(input: R, seq_width: u8) -> Result<Trace, Error> {
    let mask = mask_for(seq_width);
    let mut builder = TraceBuilder::new(seq_width);
    let mut lines = input.lines();
    let header = lines
        .next()
        .transpose()?
        .ok_or_else(|| Error::MalformedRecord {
            line: 1,
            reason: "missing fid,seq header".into(),
        })?;
    if header.trim() != "fid,seq" {
        return Err(Error::MalformedRecord {
            line: 1,
            reason: format!("expected header 'fid,seq', got {header:?}"),
        });
    }
    for (i, line) in lines.enumerate() {
        let line_no = i as u64 + 2;
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let (fid_str, seq_str) = line.split_once(',').ok_or_else(|| Error::MalformedRecord {
            line: line_no,
            reason: "expected two comma-separated fields".into(),
        })?;
        let fid = parse_fid(fid_str.trim(), line_no)?;
        let seq: u32 = seq_str
            .trim()
            .parse()
            .map_err(|e| Error::MalformedRecord {
                line: line_no,
                reason: format!("bad seq: {e}"),
            })?;
        if seq > mask {
            return Err(Error::MalformedRecord {
                line: line_no,
                reason: format!("seq {seq} exceeds 2^{seq_width}-1"),
            });
        }
        builder.push(fid, seq);
    }
    Ok(builder.finish())
}

/// Writes the binary trace format.
pub fn write_trace_binary<W: Write>(trace: &Trace, mut out: W) -> Result<(), Error> {
    out.write_all(BINARY_MAGIC)?;
    out.write_all(&BINARY_VERSION.to_le_bytes())?;
    out.write_all(&[trace.seq_width])?;
    for it in &trace.items {
        let fid = trace.flows[it.flow as usize].as_bytes();
        out.write_all(&(fid.len() as u16).to_le_bytes())?;
        out.write_all(fid)?;
        out.write_all(&it.seq.to_le_bytes())?;
    }
    Ok(())
}

/// Reads the binary trace format; the sequence width comes from the
/// header.
pub fn read_trace_binary<R: Read>(mut input: R) -> Result<Trace, Error> {
    let mut magic = [0u8; 4];
    input.read_exact(&mut magic)?;
    if &magic != BINARY_MAGIC {
        return Err(Error::UnsupportedFormat(format!(
            "bad magic {magic:?}, expected {BINARY_MAGIC:?}"
        )));
    }
    let mut version = [0u8; 2];
    input.read_exact(&mut version)?;
    let version = u16::from_le_bytes(version);
    if version != BINARY_VERSION {
        return Err(Error::UnsupportedFormat(format!(
            "unsupported version {version}"
        )));
    }
    let mut width = [0u8; 1];
    input.read_exact(&mut width)?;
    let seq_width = width[0];
    if !(8..=32).contains(&seq_width) {
        return Err(Error::UnsupportedFormat(format!(
            "seq_width {seq_width} out of range"
        )));
    }
    let mask = mask_for(seq_width);

    let mut builder = TraceBuilder::new(seq_width);
    let mut record = 0u64;
    loop {
        let mut len_buf = [0u8; 2];
        match input.read_exact(&mut len_buf) {
            Ok(()) => {}
            Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => break,
            Err(e) => return Err(e.into()),
        }
        record += 1;
        let fid_len = u16::from_le_bytes(len_buf) as usize;
        if fid_len == 0 {
            return Err(Error::MalformedRecord {
                line: record,
                reason: "zero-length fid".into(),
            });
        }
        let mut fid = vec![0u8; fid_len];
        input.read_exact(&mut fid).map_err(|_| Error::MalformedRecord {
            line: record,
            reason: "truncated fid".into(),
        })?;
        let mut seq_buf = [0u8; 4];
        input.read_exact(&mut seq_buf).map_err(|_| Error::MalformedRecord {
            line: record,
            reason: "truncated seq".into(),
        })?;
        let seq = u32::from_le_bytes(seq_buf);
        if seq > mask {
            return Err(Error::MalformedRecord {
                line: record,
                reason: format!("seq {seq} exceeds 2^{seq_width}-1"),
            });
        }
        builder.push(FlowId::new(&fid).expect("length checked"), seq);
    }
    Ok(builder.finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample_trace() -> Trace {
        let mut t = Trace::new(16);
        let a = t.add_flow(FlowId::from_u64(1));
        let b = t.add_flow(FlowId::new(b"five-tuple-13").unwrap());
        t.push(a, 0);
        t.push(b, 500);
        t.push(a, 1);
        t.push(b, 501);
        t
    }

    #[test]
    fn csv_round_trip() {
        let t = sample_trace();
        let mut buf = Vec::new();
        write_trace_csv(&t, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("fid,seq\n"));
        assert!(text.contains("0x0000000000000001,0"));
        let back = read_trace_csv(buf.as_slice(), 16).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn csv_accepts_decimal_fids() {
        let text = "fid,seq\n42,7\n0x2a,8\n";
        let t = read_trace_csv(text.as_bytes(), 16).unwrap();
        // Decimal 42 is 8-byte big-endian; hex 0x2a is a single byte.
        // They are different flows.
        assert_eq!(t.flow_count(), 2);
        assert_eq!(t.len(), 2);
    }

    #[test]
    fn csv_reports_bad_lines_with_numbers() {
        let text = "fid,seq\n0x01,1\nnot-a-record\n";
        match read_trace_csv(text.as_bytes(), 16) {
            Err(Error::MalformedRecord { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected malformed record, got {other:?}"),
        }
        let text = "fid,seq\n0x01,70000\n";
        match read_trace_csv(text.as_bytes(), 16) {
            Err(Error::MalformedRecord { line, reason }) => {
                assert_eq!(line, 2);
                assert!(reason.contains("exceeds"));
            }
            other => panic!("expected malformed record, got {other:?}"),
        }
    }

    #[test]
    fn binary_round_trip_and_header() {
        let t = sample_trace();
        let mut buf = Vec::new();
        write_trace_binary(&t, &mut buf).unwrap();
        assert_eq!(&buf[..4], b"GFTR");
        assert_eq!(u16::from_le_bytes([buf[4], buf[5]]), 1);
        assert_eq!(buf[6], 16);
        let back = read_trace_binary(buf.as_slice()).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn binary_rejects_garbage() {
        assert!(matches!(
            read_trace_binary(&b"NOPE\x01\x00\x10"[..]),
            Err(Error::UnsupportedFormat(_))
        ));
        // Truncated record after a valid header.
        let mut buf = Vec::new();
        write_trace_binary(&Trace::new(16), &mut buf).unwrap();
        buf.extend_from_slice(&[3, 0, b'a']); // fid_len=3 but one byte
        assert!(matches!(
            read_trace_binary(buf.as_slice()),
            Err(Error::MalformedRecord { line: 1, .. })
        ));
    }

    #[test]
    fn format_from_path() {
        use std::path::Path;
        assert_eq!(TraceFormat::from_path(Path::new("x.csv")), TraceFormat::Csv);
        assert_eq!(TraceFormat::from_path(Path::new("x.CSV")), TraceFormat::Csv);
        assert_eq!(
            TraceFormat::from_path(Path::new("x.gftr")),
            TraceFormat::Binary
        );
        assert_eq!(TraceFormat::from_path(Path::new("x")), TraceFormat::Binary);
    }

    proptest! {
        /// Writing then reading either format reproduces the exact item
        /// sequence.
        #[test]
        fn round_trip_any_trace(
            entries in prop::collection::vec(
                (prop::collection::vec(any::<u8>(), 1..20), 0u32..65_536),
                0..200,
            )
        ) {
            let mut builder = TraceBuilder::new(16);
            for (fid, seq) in &entries {
                builder.push(FlowId::new(fid).unwrap(), *seq);
            }
            let t = builder.finish();

            let mut csv = Vec::new();
            write_trace_csv(&t, &mut csv).unwrap();
            prop_assert_eq!(&read_trace_csv(csv.as_slice(), 16).unwrap(), &t);

            let mut bin = Vec::new();
            write_trace_binary(&t, &mut bin).unwrap();
            prop_assert_eq!(&read_trace_binary(bin.as_slice()).unwrap(), &t);
        }
    }
}
