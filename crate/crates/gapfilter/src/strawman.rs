//! Cuckoo-table baseline detector.
//!
//! Buckets are divided into two blocks so the table is not forced to a
//! power-of-two size. Each cell stores an explicit 32-bit flow fingerprint
//! next to the sequence value; an item probes the bucket `h1(fp)` in block
//! one and `h2(fp)` in block two for a cell with its fingerprint. Misses
//! insert into an empty candidate cell, displacing residents cuckoo-style
//! when both candidates are full.

use rand::rngs::SmallRng;
use rand::{Rng, SeedableRng};

use crate::hash::{hash64, randomize_seq, HashConfig};
use crate::seqnum::{classify, seq_diff};
use crate::types::{bytes_for_bits, GapReport, Situation, Thresholds};
use crate::{Detector, Error};

/// Cells per bucket; four achieves high utilization.
pub const DEFAULT_BUCKET_CELLS: usize = 4;
/// Displacement bound before the homeless entry is discarded.
pub const DEFAULT_MAX_TURNS: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct CbCell {
    fp: u32,
    seq: u32,
}

/// Cuckoo baseline state: two bucket blocks plus a seeded victim RNG.
#[derive(Clone, Debug)]
pub struct CuckooBaseline {
    // block 0 cells, then block 1 cells, each `buckets_per_block * w_b`.
    cells: Vec<CbCell>,
    occupancy: Vec<u8>,
    buckets_per_block: usize,
    w_b: usize,
    max_turns: usize,
    th: Thresholds,
    cfg: HashConfig,
    seed_h1: u64,
    seed_h2: u64,
    seed_fp: u64,
    rng: SmallRng,
    drops: u64,
}

impl CuckooBaseline {
    /// Builds a baseline with an explicit per-block bucket count.
    pub fn with_buckets(
        buckets_per_block: usize,
        w_b: usize,
        max_turns: usize,
        th: Thresholds,
        cfg: HashConfig,
    ) -> Result<Self, Error> {
        if buckets_per_block < 1 || w_b < 1 || w_b > u8::MAX as usize {
            return Err(Error::InvalidConfig(format!(
                "need buckets_per_block >= 1 and 1 <= w_b <= 255, got {buckets_per_block}, {w_b}"
            )));
        }
        cfg.validate()?;
        Ok(CuckooBaseline {
            cells: vec![CbCell { fp: 0, seq: 0 }; 2 * buckets_per_block * w_b],
            occupancy: vec![0; 2 * buckets_per_block],
            buckets_per_block,
            w_b,
            max_turns,
            th,
            cfg,
            // Sub-seeds for the three hash roles of this structure.
            seed_h1: cfg.seed_bucket,
            seed_h2: cfg.seed_bucket ^ 0x9e37_79b9_7f4a_7c15,
            seed_fp: cfg.seed_fingerprint,
            rng: SmallRng::seed_from_u64(cfg.seed_bucket ^ cfg.seed_fingerprint),
            drops: 0,
        })
    }

    /// Builds a baseline sized from a memory budget with the default cell
    /// count and kick bound. Each cell costs `4 + ceil(seq_width/8)` bytes
    /// for the 32-bit fingerprint plus the sequence value.
    pub fn with_budget(
        budget_bytes: usize,
        th: Thresholds,
        cfg: HashConfig,
    ) -> Result<Self, Error> {
        let bucket_bytes = DEFAULT_BUCKET_CELLS * Self::cell_bytes_for(&th);
        let total_buckets = budget_bytes / bucket_bytes;
        let per_block = total_buckets / 2;
        if per_block == 0 {
            return Err(Error::BudgetTooSmall {
                budget: budget_bytes,
                required: 2 * bucket_bytes,
            });
        }
        Self::with_buckets(per_block, DEFAULT_BUCKET_CELLS, DEFAULT_MAX_TURNS, th, cfg)
    }

    fn cell_bytes_for(th: &Thresholds) -> usize {
        4 + bytes_for_bits(th.seq_width() as usize)
    }

    pub fn buckets_per_block(&self) -> usize {
        self.buckets_per_block
    }

    pub fn thresholds(&self) -> Thresholds {
        self.th
    }

    /// Entries discarded after exhausting the kick budget.
    pub fn dropped_entries(&self) -> u64 {
        self.drops
    }

    fn flow_fingerprint(&self, fid: &[u8]) -> u32 {
        hash64(fid, self.seed_fp) as u32
    }

    /// Candidate bucket of a fingerprint within the given block.
    fn candidate(&self, block: usize, fp: u32) -> usize {
        let seed = if block == 0 { self.seed_h1 } else { self.seed_h2 };
        let h = hash64(&fp.to_le_bytes(), seed);
        (h % self.buckets_per_block as u64) as usize
    }

    /// Flat bucket id for (block, index-within-block).
    fn bucket_id(&self, block: usize, idx: usize) -> usize {
        block * self.buckets_per_block + idx
    }

    fn try_insert(&mut self, bucket: usize, cell: CbCell) -> bool {
        let occ = self.occupancy[bucket] as usize;
        if occ < self.w_b {
            self.cells[bucket * self.w_b + occ] = cell;
            self.occupancy[bucket] = (occ + 1) as u8;
            true
        } else {
            false
        }
    }

    /// Processes one item; returns a report when a major gap is matched.
    pub fn observe(&mut self, fid: &[u8], seq: u32, pos: u64) -> Option<GapReport> {
        let width = self.th.seq_width();
        let s = randomize_seq(fid, seq, &self.cfg, width);
        let fp = self.flow_fingerprint(fid);

        // Probe block 0 then block 1, low cell index first.
        for block in 0..2 {
            let bucket = self.bucket_id(block, self.candidate(block, fp));
            let occ = self.occupancy[bucket] as usize;
            let base = bucket * self.w_b;
            for j in 0..occ {
                if self.cells[base + j].fp != fp {
                    continue;
                }
                let seq_before = self.cells[base + j].seq;
                let var = seq_diff(s, seq_before, width);
                let situation = classify(var, &self.th);
                if var > 0 {
                    self.cells[base + j].seq = s;
                }
                if let Situation::MajorGap(var) = situation {
                    return Some(GapReport {
                        bucket_index: bucket,
                        cell_index: j,
                        seq_after: s,
                        seq_before,
                        var,
                        stream_position: pos,
                    });
                }
                return None;
            }
        }

        // Not resident: insert into an empty candidate cell, else kick.
        let c0 = self.bucket_id(0, self.candidate(0, fp));
        let c1 = self.bucket_id(1, self.candidate(1, fp));
        let new_cell = CbCell { fp, seq: s };
        if self.try_insert(c0, new_cell) || self.try_insert(c1, new_cell) {
            return None;
        }

        // Both candidates full: displace residents along alternate buckets
        // until something fits or the turn budget runs out.
        let mut block = usize::from(self.rng.gen::<bool>());
        let mut bucket = if block == 0 { c0 } else { c1 };
        let mut homeless = new_cell;
        for _ in 0..self.max_turns {
            let victim_slot = self.rng.gen_range(0..self.w_b);
            std::mem::swap(&mut self.cells[bucket * self.w_b + victim_slot], &mut homeless);
            // The victim's other home is in the opposite block.
            block = 1 - block;
            bucket = self.bucket_id(block, self.candidate(block, homeless.fp));
            if self.try_insert(bucket, homeless) {
                return None;
            }
        }
        self.drops += 1;
        None
    }

    pub fn observe_item(&mut self, item: &crate::types::Item, pos: u64) -> Option<GapReport> {
        self.observe(item.fid.as_bytes(), item.seq, pos)
    }
}

impl Detector for CuckooBaseline {
    fn observe(&mut self, fid: &[u8], seq: u32, pos: u64) -> Option<GapReport> {
        CuckooBaseline::observe(self, fid, seq, pos)
    }

    fn allocated_bytes(&self) -> usize {
        self.cells.len() * Self::cell_bytes_for(&self.th)
    }

    fn drops(&self) -> u64 {
        self.drops
    }
}
