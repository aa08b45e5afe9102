//! Speed-oriented gap filter.
//!
//! A bucket array of `d` buckets with `w` sequence-number cells each.
//! Matching uses similarity absorption: the incoming item is matched to
//! the stored value closest to its own, so no flow ids are kept at all.
//! Cell priority decreases from front to back; every matched or inserted
//! item is rearranged to the front, which makes the last cell the
//! least-recently-used one when an eviction is needed.

use crate::hash::{bucket_index, randomize_seq, HashConfig};
use crate::seqnum::{classify, seq_diff};
use crate::types::{bytes_for_bits, GapReport, Situation, Thresholds};
use crate::{Detector, Error};

/// Default cells per bucket; the most robust setting across workloads.
pub const DEFAULT_CELLS_PER_BUCKET: usize = 8;

/// Speed-oriented sketch state: `d` buckets of `w` cells, stored flat.
#[derive(Clone, Debug)]
pub struct SoSketch {
    cells: Vec<u32>,
    occupancy: Vec<u8>,
    d: usize,
    w: usize,
    th: Thresholds,
    cfg: HashConfig,
    refresh_on_neglect: bool,
}

impl SoSketch {
    /// Builds a sketch with an explicit bucket count.
    pub fn with_buckets(
        d: usize,
        w: usize,
        th: Thresholds,
        cfg: HashConfig,
    ) -> Result<Self, Error> {
        if d < 1 || w < 1 || w > u8::MAX as usize {
            return Err(Error::InvalidConfig(format!(
                "need d >= 1 and 1 <= w <= 255, got d={d}, w={w}"
            )));
        }
        cfg.validate()?;
        Ok(SoSketch {
            cells: vec![0; d * w],
            occupancy: vec![0; d],
            d,
            w,
            th,
            cfg,
            refresh_on_neglect: true,
        })
    }

    /// Builds a sketch sized from a memory budget: `d` is the number of
    /// whole `w`-cell buckets that fit, with `ceil(seq_width/8)` bytes per
    /// cell.
    pub fn with_budget(
        budget_bytes: usize,
        w: usize,
        th: Thresholds,
        cfg: HashConfig,
    ) -> Result<Self, Error> {
        let bucket_bytes = w * Self::cell_bytes_for(&th);
        let d = budget_bytes.checked_div(bucket_bytes).unwrap_or(0);
        if d == 0 {
            return Err(Error::BudgetTooSmall {
                budget: budget_bytes,
                required: bucket_bytes,
            });
        }
        Self::with_buckets(d, w, th, cfg)
    }

    fn cell_bytes_for(th: &Thresholds) -> usize {
        bytes_for_bits(th.seq_width() as usize)
    }

    /// Whether a matched `Neglect` refreshes the cell's LRU priority.
    /// On by default: the paper's LRU description implies every arrival
    /// refreshes priority.
    pub fn set_refresh_on_neglect(&mut self, refresh: bool) {
        self.refresh_on_neglect = refresh;
    }

    pub fn buckets(&self) -> usize {
        self.d
    }

    pub fn cells_per_bucket(&self) -> usize {
        self.w
    }

    pub fn thresholds(&self) -> Thresholds {
        self.th
    }

    /// Ordered copy of a bucket's occupied cells, front (most recently
    /// used) to back.
    pub fn snapshot(&self, bucket: usize) -> Vec<u32> {
        assert!(bucket < self.d, "bucket {bucket} out of range");
        let occ = self.occupancy[bucket] as usize;
        self.cells[bucket * self.w..bucket * self.w + occ].to_vec()
    }

    /// Processes one item; returns a report when a major gap is matched.
    pub fn observe(&mut self, fid: &[u8], seq: u32, pos: u64) -> Option<GapReport> {
        let width = self.th.seq_width();
        let s = randomize_seq(fid, seq, &self.cfg, width);
        let b = bucket_index(fid, self.d, &self.cfg);
        let occ = self.occupancy[b] as usize;
        let bucket = &mut self.cells[b * self.w..(b + 1) * self.w];

        // Similarity absorption: pick the occupied cell whose stored value
        // is closest to s. Ties prefer positive variation, then the lower
        // cell index.
        let mut matched: Option<(usize, i64)> = None;
        for (j, &cell) in bucket.iter().enumerate().take(occ) {
            let var = seq_diff(s, cell, width);
            match matched {
                None => matched = Some((j, var)),
                Some((_, best)) => {
                    if var.abs() < best.abs() || (var.abs() == best.abs() && var > 0 && best < 0) {
                        matched = Some((j, var));
                    }
                }
            }
        }

        let situation = match matched {
            Some((_, var)) => classify(var, &self.th),
            None => Situation::NotMatched,
        };

        if situation.is_matched() {
            let (j, var) = matched.expect("matched situation implies a chosen cell");
            let seq_before = bucket[j];
            if var > 0 {
                bucket[j] = s;
            }
            let refresh = self.refresh_on_neglect || situation != Situation::Neglect;
            if refresh {
                bucket[..=j].rotate_right(1);
            }
            if let Situation::MajorGap(var) = situation {
                return Some(GapReport {
                    bucket_index: b,
                    cell_index: j,
                    seq_after: s,
                    seq_before,
                    var,
                    stream_position: pos,
                });
            }
            None
        } else {
            // No cell matched: insert at the front. A full bucket loses
            // its last (least recently used) cell.
            if occ < self.w {
                self.occupancy[b] = (occ + 1) as u8;
                bucket[..=occ].rotate_right(1);
            } else {
                bucket.rotate_right(1);
            }
            bucket[0] = s;
            None
        }
    }

    pub fn observe_item(&mut self, item: &crate::types::Item, pos: u64) -> Option<GapReport> {
        self.observe(item.fid.as_bytes(), item.seq, pos)
    }
}

impl Detector for SoSketch {
    fn observe(&mut self, fid: &[u8], seq: u32, pos: u64) -> Option<GapReport> {
        SoSketch::observe(self, fid, seq, pos)
    }

    fn allocated_bytes(&self) -> usize {
        self.d * self.w * Self::cell_bytes_for(&self.th)
    }
}
