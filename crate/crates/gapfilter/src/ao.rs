//! Accuracy-oriented gap filter.
//!
//! Each bucket is split into `s` suspect cells and `c` civilian cells
//! (`c + s = w`). Civilians are kept in LRU order and broadly monitor all
//! flows; suspects are kept in least-recently-disrupted (LRD) order and
//! shield flows that recently exhibited major gaps from being crowded out
//! by large normal flows. Cells additionally carry a short fingerprint of
//! the flow id to assist matching.
//!
//! New flows enter the suspect region, so whenever the civilian region
//! holds anything the suspect region must already be full.

use crate::hash::{bucket_index, fingerprint_unchecked, randomize_seq, HashConfig};
use crate::seqnum::{classify, seq_diff};
use crate::types::{bytes_for_bits, GapReport, Situation, Thresholds};
use crate::{Detector, Error};

/// Default suspect/civilian split of an 8-cell bucket.
pub const DEFAULT_SUSPECT_CELLS: usize = 3;
pub const DEFAULT_CIVILIAN_CELLS: usize = 5;

/// One accuracy-oriented cell: a stored sequence value plus the flow
/// fingerprint that wrote it.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AoCell {
    pub seq: u32,
    pub fp: u16,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Region {
    Suspect,
    Civilian,
}

/// Accuracy-oriented sketch state.
///
/// Buckets are stored flat: per bucket, cells `0..s` are the suspect slots
/// and `s..s+c` the civilian slots, each region occupied contiguously from
/// the front.
#[derive(Clone, Debug)]
pub struct AoSketch {
    cells: Vec<AoCell>,
    suspect_occ: Vec<u8>,
    civilian_occ: Vec<u8>,
    d: usize,
    c: usize,
    s: usize,
    th: Thresholds,
    cfg: HashConfig,
    refresh_on_neglect: bool,
}

impl AoSketch {
    /// Builds a sketch with an explicit bucket count and region split.
    pub fn with_buckets(
        d: usize,
        c: usize,
        s: usize,
        th: Thresholds,
        cfg: HashConfig,
    ) -> Result<Self, Error> {
        if d < 1 || c < 1 || s < 1 || c > u8::MAX as usize || s > u8::MAX as usize {
            return Err(Error::InvalidConfig(format!(
                "need d >= 1, c >= 1, s >= 1 (each <= 255), got d={d}, c={c}, s={s}"
            )));
        }
        cfg.validate()?;
        let w = c + s;
        Ok(AoSketch {
            cells: vec![AoCell { seq: 0, fp: 0 }; d * w],
            suspect_occ: vec![0; d],
            civilian_occ: vec![0; d],
            d,
            c,
            s,
            th,
            cfg,
            refresh_on_neglect: true,
        })
    }

    /// Builds a sketch sized from a memory budget. Each cell costs
    /// `ceil((seq_width + l_f) / 8)` bytes.
    pub fn with_budget(
        budget_bytes: usize,
        c: usize,
        s: usize,
        th: Thresholds,
        cfg: HashConfig,
    ) -> Result<Self, Error> {
        let bucket_bytes = (c + s) * Self::cell_bytes_for(&th, &cfg);
        let d = budget_bytes.checked_div(bucket_bytes).unwrap_or(0);
        if d == 0 {
            return Err(Error::BudgetTooSmall {
                budget: budget_bytes,
                required: bucket_bytes,
            });
        }
        Self::with_buckets(d, c, s, th, cfg)
    }

    fn cell_bytes_for(th: &Thresholds, cfg: &HashConfig) -> usize {
        bytes_for_bits(th.seq_width() as usize + cfg.l_f as usize)
    }

    /// Whether a matched `Neglect` in the civilian region refreshes LRU
    /// priority (suspect cells never rearrange on case-i matches).
    pub fn set_refresh_on_neglect(&mut self, refresh: bool) {
        self.refresh_on_neglect = refresh;
    }

    pub fn buckets(&self) -> usize {
        self.d
    }

    pub fn suspect_cells(&self) -> usize {
        self.s
    }

    pub fn civilian_cells(&self) -> usize {
        self.c
    }

    pub fn thresholds(&self) -> Thresholds {
        self.th
    }

    /// Ordered copies of a bucket's occupied (suspect, civilian) cells.
    pub fn snapshot(&self, bucket: usize) -> (Vec<AoCell>, Vec<AoCell>) {
        assert!(bucket < self.d, "bucket {bucket} out of range");
        let w = self.c + self.s;
        let base = bucket * w;
        let sus = self.cells[base..base + self.suspect_occ[bucket] as usize].to_vec();
        let civ_base = base + self.s;
        let civ = self.cells[civ_base..civ_base + self.civilian_occ[bucket] as usize].to_vec();
        (sus, civ)
    }

    /// Processes one item; returns a report when a major gap is matched.
    pub fn observe(&mut self, fid: &[u8], seq: u32, pos: u64) -> Option<GapReport> {
        let width = self.th.seq_width();
        let s_val = randomize_seq(fid, seq, &self.cfg, width);
        let fp = fingerprint_unchecked(fid, &self.cfg);
        let b = bucket_index(fid, self.d, &self.cfg);

        let w = self.c + self.s;
        let base = b * w;
        let sus_occ = self.suspect_occ[b] as usize;
        let civ_occ = self.civilian_occ[b] as usize;

        // Candidate cells must carry a matching fingerprint; among them the
        // closest stored value wins, with the same tie-break as the
        // speed-oriented filter. Suspect cells come first in index order.
        let mut matched: Option<(Region, usize, i64)> = None;
        {
            let filtering = self.cfg.l_f > 0;
            let mut consider = |region: Region, idx: usize, cell: &AoCell| {
                if filtering && cell.fp != fp {
                    return;
                }
                let var = seq_diff(s_val, cell.seq, width);
                match matched {
                    None => matched = Some((region, idx, var)),
                    Some((_, _, best)) => {
                        if var.abs() < best.abs()
                            || (var.abs() == best.abs() && var > 0 && best < 0)
                        {
                            matched = Some((region, idx, var));
                        }
                    }
                }
            };
            for j in 0..sus_occ {
                consider(Region::Suspect, j, &self.cells[base + j]);
            }
            for j in 0..civ_occ {
                consider(Region::Civilian, j, &self.cells[base + self.s + j]);
            }
        }

        let situation = match matched {
            Some((_, _, var)) => classify(var, &self.th),
            None => Situation::NotMatched,
        };

        match situation {
            Situation::Neglect | Situation::Normal | Situation::MinorGap(_) => {
                let (region, j, var) = matched.expect("matched implies a chosen cell");
                match region {
                    Region::Suspect => {
                        // Case (i) in suspect: value update only, no
                        // rearrangement.
                        if var > 0 {
                            self.cells[base + j].seq = s_val;
                        }
                    }
                    Region::Civilian => {
                        // Case (i) in civilian: update and move to the
                        // civilian front.
                        if var > 0 {
                            self.cells[base + self.s + j].seq = s_val;
                        }
                        let refresh =
                            self.refresh_on_neglect || situation != Situation::Neglect;
                        if refresh {
                            let civ = &mut self.cells[base + self.s..base + self.s + civ_occ];
                            civ[..=j].rotate_right(1);
                        }
                    }
                }
                None
            }
            Situation::MajorGap(var) => {
                // Case (ii): report, update, and rearrange the cell to the
                // suspect front. A civilian source implies suspect is full,
                // so its last cell is exonerated into the civilian front.
                let (region, j, _) = matched.expect("matched implies a chosen cell");
                let (report_cell, seq_before);
                match region {
                    Region::Suspect => {
                        seq_before = self.cells[base + j].seq;
                        self.cells[base + j].seq = s_val;
                        let sus = &mut self.cells[base..base + sus_occ];
                        sus[..=j].rotate_right(1);
                        report_cell = j;
                    }
                    Region::Civilian => {
                        let cell_idx = base + self.s + j;
                        seq_before = self.cells[cell_idx].seq;
                        let mut cell = self.cells[cell_idx];
                        cell.seq = s_val;
                        // Close the civilian hole, keeping order.
                        self.cells
                            .copy_within(cell_idx + 1..base + self.s + civ_occ, cell_idx);
                        self.civilian_occ[b] -= 1;
                        debug_assert_eq!(sus_occ, self.s, "civilian occupied implies suspect full");
                        // Shift suspect back; its last cell drops out into
                        // the civilian front.
                        let demoted = self.cells[base + sus_occ - 1];
                        let sus = &mut self.cells[base..base + sus_occ];
                        sus.rotate_right(1);
                        sus[0] = cell;
                        self.push_civilian_front(b, demoted);
                        report_cell = self.s + j;
                    }
                }
                Some(GapReport {
                    bucket_index: b,
                    cell_index: report_cell,
                    seq_after: s_val,
                    seq_before,
                    var,
                    stream_position: pos,
                })
            }
            Situation::NotMatched => {
                // Case (iii): unknown flow. Insert into the suspect region
                // with the lowest priority.
                let new_cell = AoCell { seq: s_val, fp };
                if sus_occ < self.s {
                    // First (leftmost) empty suspect slot.
                    self.cells[base + sus_occ] = new_cell;
                    self.suspect_occ[b] += 1;
                } else {
                    // Suspect full: exonerate its last cell into the
                    // civilian front, then take the last suspect slot.
                    let demoted = self.cells[base + self.s - 1];
                    self.cells[base + self.s - 1] = new_cell;
                    self.push_civilian_front(b, demoted);
                }
                None
            }
        }
    }

    /// Inserts a cell at the civilian front; a full civilian region
    /// silently discards its last cell.
    fn push_civilian_front(&mut self, bucket: usize, cell: AoCell) {
        let w = self.c + self.s;
        let civ_base = bucket * w + self.s;
        let occ = self.civilian_occ[bucket] as usize;
        if occ < self.c {
            self.civilian_occ[bucket] += 1;
            let civ = &mut self.cells[civ_base..civ_base + occ + 1];
            civ.rotate_right(1);
        } else {
            let civ = &mut self.cells[civ_base..civ_base + self.c];
            civ.rotate_right(1);
        }
        self.cells[civ_base] = cell;
    }

    pub fn observe_item(&mut self, item: &crate::types::Item, pos: u64) -> Option<GapReport> {
        self.observe(item.fid.as_bytes(), item.seq, pos)
    }
}

impl Detector for AoSketch {
    fn observe(&mut self, fid: &[u8], seq: u32, pos: u64) -> Option<GapReport> {
        AoSketch::observe(self, fid, seq, pos)
    }

    fn allocated_bytes(&self) -> usize {
        self.d * (self.c + self.s) * Self::cell_bytes_for(&self.th, &self.cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::FlowId;

    /// d=1 and no randomization: stored values equal raw sequence numbers
    /// and every flow shares the bucket.
    fn test_sketch(c: usize, s: usize) -> AoSketch {
        let cfg = HashConfig::from_seed(1).with_randomize(false);
        AoSketch::with_buckets(1, c, s, Thresholds::default_ip_id(), cfg).unwrap()
    }

    fn seqs(cells: &[AoCell]) -> Vec<u32> {
        cells.iter().map(|c| c.seq).collect()
    }

    /// Finds a fid whose fingerprint differs from every fid in `others`.
    fn fid_with_distinct_fp(cfg: &HashConfig, others: &[FlowId]) -> FlowId {
        let taken: Vec<u16> = others
            .iter()
            .map(|f| fingerprint_unchecked(f.as_bytes(), cfg))
            .collect();
        (0..u64::MAX)
            .map(FlowId::from_u64)
            .find(|f| !taken.contains(&fingerprint_unchecked(f.as_bytes(), cfg)))
            .expect("some fid has a fresh fingerprint")
    }

    #[test]
    fn normal_in_suspect_updates_without_rearranging() {
        let mut sk = test_sketch(2, 2);
        let cfg = sk.cfg;
        let fa = FlowId::from_u64(1);
        let fb = fid_with_distinct_fp(&cfg, std::slice::from_ref(&fa));
        // Two unmatched inserts fill suspect slots 0 and 1 in order.
        sk.observe(fa.as_bytes(), 100, 0);
        sk.observe(fb.as_bytes(), 50_000, 1);
        let (sus, _) = sk.snapshot(0);
        assert_eq!(seqs(&sus), vec![100, 50_000]);

        // Same flow, next seq: case-i in suspect, value moves, order does
        // not.
        assert!(sk.observe(fa.as_bytes(), 101, 2).is_none());
        let (sus, civ) = sk.snapshot(0);
        assert_eq!(seqs(&sus), vec![101, 50_000]);
        assert!(civ.is_empty());
    }

    #[test]
    fn new_flow_takes_first_empty_suspect_slot() {
        let mut sk = test_sketch(2, 2);
        let f = FlowId::from_u64(5);
        assert!(sk.observe(f.as_bytes(), 500, 0).is_none());
        let (sus, civ) = sk.snapshot(0);
        assert_eq!(seqs(&sus), vec![500]);
        assert!(civ.is_empty());
    }

    #[test]
    fn suspect_overflow_exonerates_tail_into_civilian_front() {
        let mut sk = test_sketch(2, 2);
        let cfg = sk.cfg;
        let fa = FlowId::from_u64(1);
        let fb = fid_with_distinct_fp(&cfg, std::slice::from_ref(&fa));
        let fc = fid_with_distinct_fp(&cfg, &[fa.clone(), fb.clone()]);
        sk.observe(fa.as_bytes(), 100, 0); // suspect [A]
        sk.observe(fb.as_bytes(), 10_000, 1); // suspect [A, B]
        sk.observe(fc.as_bytes(), 30_000, 2); // B demoted, C at last slot
        let (sus, civ) = sk.snapshot(0);
        assert_eq!(seqs(&sus), vec![100, 30_000]); // [A, C]
        assert_eq!(seqs(&civ), vec![10_000]); // [B]
    }

    #[test]
    fn full_bucket_unmatched_drops_civilian_tail() {
        // Suspect {A,B} full, civilian {C,D} full; unmatched E: B moves to
        // the civilian front, D is discarded, E takes suspect slot s-1.
        let mut sk = test_sketch(2, 2);
        let cfg = sk.cfg;
        let mut flows: Vec<FlowId> = Vec::new();
        for _ in 0..5 {
            flows.push(fid_with_distinct_fp(&cfg, &flows));
        }
        let seqs_in: [u32; 4] = [100, 10_000, 20_000, 30_000];
        for (i, (f, q)) in flows.iter().zip(seqs_in).enumerate() {
            sk.observe(f.as_bytes(), q, i as u64);
        }
        // Arrival order fills suspect [A,B]; C demotes B to the civilian
        // front and sits at the last suspect slot, then D demotes C.
        // State: suspect [A, D], civilian [C, B].
        let (sus, civ) = sk.snapshot(0);
        assert_eq!(seqs(&sus), vec![100, 30_000]);
        assert_eq!(seqs(&civ), vec![20_000, 10_000]);

        // E arrives: D exonerated to civilian front, B dropped.
        assert!(sk.observe(flows[4].as_bytes(), 40_000, 4).is_none());
        let (sus, civ) = sk.snapshot(0);
        assert_eq!(seqs(&sus), vec![100, 40_000]); // [A, E]
        assert_eq!(seqs(&civ), vec![30_000, 20_000]); // [D, C]
    }

    #[test]
    fn major_gap_in_civilian_promotes_to_suspect_front() {
        let mut sk = test_sketch(2, 2);
        let cfg = sk.cfg;
        let mut flows: Vec<FlowId> = Vec::new();
        for _ in 0..3 {
            flows.push(fid_with_distinct_fp(&cfg, &flows));
        }
        sk.observe(flows[0].as_bytes(), 200, 0); // suspect [X]
        sk.observe(flows[1].as_bytes(), 10_000, 1); // suspect [X, Y]
        sk.observe(flows[2].as_bytes(), 30_000, 2); // suspect [X, Z], civ [Y]
        // Y is now the civilian; its next item jumps by 10.
        let r = sk.observe(flows[1].as_bytes(), 10_010, 3).unwrap();
        assert_eq!(r.var, 10);
        let (sus, civ) = sk.snapshot(0);
        // Y jumps to suspect front; suspect's tail Z is exonerated to the
        // civilian front.
        assert_eq!(seqs(&sus), vec![10_010, 200]); // [Y, X]
        assert_eq!(seqs(&civ), vec![30_000]); // [Z]
    }

    #[test]
    fn major_gap_in_suspect_moves_to_front() {
        let mut sk = test_sketch(2, 2);
        let cfg = sk.cfg;
        let fa = FlowId::from_u64(1);
        let fb = fid_with_distinct_fp(&cfg, std::slice::from_ref(&fa));
        sk.observe(fa.as_bytes(), 100, 0);
        sk.observe(fb.as_bytes(), 10_000, 1); // suspect [A, B]
        let r = sk.observe(fb.as_bytes(), 10_020, 2).unwrap();
        assert_eq!(r.var, 20);
        let (sus, _) = sk.snapshot(0);
        assert_eq!(seqs(&sus), vec![10_020, 100]); // [B, A]
    }

    #[test]
    fn fingerprint_mismatch_forces_not_matched() {
        // A stored value one step behind the incoming seq, but written by
        // a flow with a different fingerprint: no false normal.
        let mut sk = test_sketch(2, 2);
        let cfg = sk.cfg;
        let fa = FlowId::from_u64(1);
        let fb = fid_with_distinct_fp(&cfg, std::slice::from_ref(&fa));
        sk.observe(fa.as_bytes(), 100, 0);
        assert!(sk.observe(fb.as_bytes(), 101, 1).is_none());
        let (sus, _) = sk.snapshot(0);
        // Both flows occupy cells: B was inserted, not absorbed.
        assert_eq!(seqs(&sus), vec![100, 101]);
    }

    #[test]
    fn zero_fingerprint_bits_degrades_to_seq_matching() {
        let cfg = HashConfig::from_seed(1)
            .with_randomize(false)
            .with_fingerprint_bits(0);
        let mut sk =
            AoSketch::with_buckets(1, 2, 2, Thresholds::default_ip_id(), cfg).unwrap();
        let fa = FlowId::from_u64(1);
        let fb = FlowId::from_u64(2);
        sk.observe(fa.as_bytes(), 100, 0);
        // Different flow, adjacent seq: absorbed by value alone.
        assert!(sk.observe(fb.as_bytes(), 101, 1).is_none());
        let (sus, _) = sk.snapshot(0);
        assert_eq!(seqs(&sus), vec![101]);
    }

    #[test]
    fn civilian_region_invariant_holds_under_churn() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let cfg = HashConfig::from_seed(2);
        let mut sk =
            AoSketch::with_buckets(4, 5, 3, Thresholds::default_ip_id(), cfg).unwrap();
        for pos in 0..20_000u64 {
            let fid = FlowId::from_u64(rng.gen_range(0..256));
            let seq = rng.gen_range(0..65_536u32);
            sk.observe(fid.as_bytes(), seq, pos);
            for b in 0..4 {
                let (sus, civ) = sk.snapshot(b);
                assert!(sus.len() <= 3 && civ.len() <= 5);
                if !civ.is_empty() {
                    assert_eq!(sus.len(), 3, "civilian occupied but suspect not full");
                }
            }
        }
    }

    #[test]
    fn budget_sizing() {
        let th = Thresholds::default_ip_id();
        let cfg = HashConfig::from_seed(1); // l_f = 8 -> 3-byte cells
        let sk = AoSketch::with_budget(24, 5, 3, th, cfg).unwrap();
        assert_eq!(sk.buckets(), 1);
        assert_eq!(sk.allocated_bytes(), 24);
        let sk = AoSketch::with_budget(24_000, 5, 3, th, cfg).unwrap();
        assert_eq!(sk.buckets(), 1_000);
        assert!(AoSketch::with_budget(23, 5, 3, th, cfg).is_err());
    }
}
