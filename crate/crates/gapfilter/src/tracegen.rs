//! Synthetic data-stream generation.
//!
//! A clean trace interleaves flows whose sequence numbers count up from
//! zero; loss is then injected in two forms. Consecutive loss deletes a
//! block of `j` items (j drawn from `[t1, t2)`) from an abnormal flow with
//! probability `b^j`; single loss drops individual items with probability
//! `p`. Per time window, a ratio `r` of the flows present is marked
//! abnormal. Everything is deterministic per seed.

use std::collections::HashSet;
use std::io::Write;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::trace::Trace;
use crate::types::{mask_for, FlowId, Thresholds};
use crate::Error;

/// How per-flow item counts are chosen.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FlowSizes {
    /// Every flow carries exactly this many items.
    Fixed(usize),
    /// The j-th largest flow carries `floor(scale * j^-alpha)` items
    /// (1-based j); flows that round to zero are dropped.
    Zipf { alpha: f64, scale: f64 },
}

/// How flows are interleaved into one stream.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Interleave {
    /// Cycle through flows in index order until all are exhausted.
    RoundRobin,
    /// Uniformly random positions (seeded), preserving per-flow order.
    Shuffle,
}

/// Parameters of the synthetic stream.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceSpec {
    pub n_flows: usize,
    pub sizes: FlowSizes,
    pub n_windows: usize,
    /// Ratio of flows marked abnormal per window, in (0, 1).
    pub abnormal_ratio: f64,
    pub seed: u64,
    pub interleave: Interleave,
    pub seq_width: u8,
}

impl TraceSpec {
    pub fn validate(&self) -> Result<(), Error> {
        if self.n_flows == 0 {
            return Err(Error::InvalidTraceSpec("n_flows must be >= 1".into()));
        }
        if self.n_windows == 0 {
            return Err(Error::InvalidTraceSpec("n_windows must be >= 1".into()));
        }
        if !(self.abnormal_ratio > 0.0 && self.abnormal_ratio < 1.0) {
            return Err(Error::InvalidTraceSpec(format!(
                "abnormal_ratio must be in (0,1), got {}",
                self.abnormal_ratio
            )));
        }
        if !(8..=32).contains(&self.seq_width) {
            return Err(Error::InvalidTraceSpec(format!(
                "seq_width must be in 8..=32, got {}",
                self.seq_width
            )));
        }
        match self.sizes {
            FlowSizes::Fixed(0) => {
                Err(Error::InvalidTraceSpec("fixed flow size must be >= 1".into()))
            }
            FlowSizes::Zipf { alpha, scale } => {
                if !(alpha > 1.0 && alpha <= 3.0) {
                    return Err(Error::InvalidTraceSpec(format!(
                        "zipf alpha must be in (1,3], got {alpha}"
                    )));
                }
                if scale < 1.0 {
                    return Err(Error::InvalidTraceSpec(format!(
                        "zipf scale must be >= 1, got {scale}"
                    )));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Per-flow item counts; zipf flows whose size floors to zero are
    /// dropped.
    pub fn flow_sizes(&self) -> Vec<usize> {
        match self.sizes {
            FlowSizes::Fixed(n) => vec![n; self.n_flows],
            FlowSizes::Zipf { alpha, scale } => (1..=self.n_flows)
                .map(|j| (scale * (j as f64).powf(-alpha)).floor() as usize)
                .take_while(|&s| s > 0)
                .collect(),
        }
    }
}

/// Parameters of injected loss.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossModel {
    /// Base of the consecutive-loss probability `b^j`; 0 disables bursts.
    pub burst_base: f64,
    /// Independent single-item loss probability.
    pub single_loss: f64,
    /// Burst lengths are drawn uniformly from `[t1, t2)`.
    pub thresholds: Thresholds,
    pub burst_mode: BurstMode,
}

/// Whether an abnormal flow may start several bursts within one window.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BurstMode {
    /// Every abnormal item outside an active burst may start one.
    PerItem,
    /// At most one burst per flow per window.
    OncePerWindow,
}

impl LossModel {
    pub fn validate(&self) -> Result<(), Error> {
        if !(0.0..1.0).contains(&self.burst_base) {
            return Err(Error::InvalidTraceSpec(format!(
                "burst_base must be in [0,1), got {}",
                self.burst_base
            )));
        }
        if !(0.0..=1.0).contains(&self.single_loss) {
            return Err(Error::InvalidTraceSpec(format!(
                "single_loss must be in [0,1], got {}",
                self.single_loss
            )));
        }
        Ok(())
    }
}

/// One injected consecutive-loss burst: items of `flow` with sequence
/// numbers in `[start_seq, start_seq + len)` were deleted.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BurstRecord {
    pub flow: u32,
    pub start_seq: u32,
    pub len: u32,
    pub window: usize,
}

/// Generates the pre-loss stream: every flow's items carry consecutive
/// sequence numbers starting at zero, interleaved per policy.
pub fn gen_clean(spec: &TraceSpec) -> Result<Trace, Error> {
    spec.validate()?;
    let sizes = spec.flow_sizes();
    let mask = mask_for(spec.seq_width);
    let mut trace = Trace::new(spec.seq_width);
    for j in 0..sizes.len() {
        trace.add_flow(FlowId::from_u64(j as u64));
    }

    match spec.interleave {
        Interleave::RoundRobin => {
            let mut remaining = sizes.clone();
            let mut next_seq = vec![0u32; sizes.len()];
            let mut left: usize = sizes.iter().sum();
            while left > 0 {
                for f in 0..sizes.len() {
                    if remaining[f] > 0 {
                        trace.push(f as u32, next_seq[f] & mask);
                        next_seq[f] = next_seq[f].wrapping_add(1);
                        remaining[f] -= 1;
                        left -= 1;
                    }
                }
            }
        }
        Interleave::Shuffle => {
            let total: usize = sizes.iter().sum();
            let mut slots: Vec<u32> = Vec::with_capacity(total);
            for (f, &n) in sizes.iter().enumerate() {
                slots.extend(std::iter::repeat_n(f as u32, n));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            slots.shuffle(&mut rng);
            let mut next_seq = vec![0u32; sizes.len()];
            for f in slots {
                trace.push(f, next_seq[f as usize] & mask);
                next_seq[f as usize] = next_seq[f as usize].wrapping_add(1);
            }
        }
    }
    Ok(trace)
}

/// Applies windowed abnormal-flow marking and the two loss mechanisms.
///
/// Returns the lossy trace (same flow table, surviving items in order)
/// plus the log of every injected burst. Burst lengths `j` make the gap
/// seen by the surviving neighbours `j + 1` when the burst is interior to
/// the flow.
pub fn apply_loss(
    trace: &Trace,
    model: &LossModel,
    spec: &TraceSpec,
) -> Result<(Trace, Vec<BurstRecord>), Error> {
    model.validate()?;
    let th = &model.thresholds;
    let width = trace.seq_width();
    let n = trace.len();
    let n_windows = spec.n_windows.min(n.max(1));
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed ^ 0x6c05_5e3a_9bc4_41f7);

    let mut out = Trace::new(width);
    for f in 0..trace.flow_count() {
        out.add_flow(trace.flow_id(f as u32).clone());
    }
    let mut bursts = Vec::new();

    // Active burst per flow: (start, len); cleared when the flow's items
    // leave the deleted range.
    let mut active: Vec<Option<(u32, u32)>> = vec![None; trace.flow_count()];
    let mut abnormal: Vec<bool> = vec![false; trace.flow_count()];
    let mut burst_started_this_window: Vec<bool> = vec![false; trace.flow_count()];

    let items = trace.items();
    for window in 0..n_windows {
        let lo = window * n / n_windows;
        let hi = if window + 1 == n_windows {
            n
        } else {
            (window + 1) * n / n_windows
        };
        // Mark ceil(r * present) random flows abnormal for this window.
        let mut present: Vec<u32> = {
            let set: HashSet<u32> = items[lo..hi].iter().map(|it| it.flow).collect();
            let mut v: Vec<u32> = set.into_iter().collect();
            v.sort_unstable();
            v
        };
        let k = ((spec.abnormal_ratio * present.len() as f64).ceil() as usize).min(present.len());
        present.shuffle(&mut rng);
        abnormal.iter_mut().for_each(|a| *a = false);
        for &f in &present[..k] {
            abnormal[f as usize] = true;
        }
        burst_started_this_window.iter_mut().for_each(|s| *s = false);

        for it in &items[lo..hi] {
            let f = it.flow as usize;
            if let Some((start, len)) = active[f] {
                let offset = it.seq.wrapping_sub(start) & mask_for(width);
                if offset < len {
                    continue; // consumed by the active burst
                }
                active[f] = None;
            }
            if abnormal[f] {
                let may_start = match model.burst_mode {
                    BurstMode::PerItem => true,
                    BurstMode::OncePerWindow => !burst_started_this_window[f],
                };
                if may_start && model.burst_base > 0.0 {
                    let j = rng.gen_range(th.t1()..th.t2());
                    if rng.gen::<f64>() < model.burst_base.powi(j as i32) {
                        active[f] = Some((it.seq, j));
                        burst_started_this_window[f] = true;
                        bursts.push(BurstRecord {
                            flow: it.flow,
                            start_seq: it.seq,
                            len: j,
                            window,
                        });
                        continue; // the item itself is inside the burst
                    }
                }
            }
            // Single item loss for normal flows and for abnormal items
            // that escaped the burst draw.
            if model.single_loss > 0.0 && rng.gen::<f64>() < model.single_loss {
                continue;
            }
            out.push(it.flow, it.seq);
        }
    }
    Ok((out, bursts))
}

/// Writes the burst log as CSV: `fid,start_seq,len,window`.
pub fn write_burst_log<W: Write>(
    bursts: &[BurstRecord],
    trace: &Trace,
    mut out: W,
) -> Result<(), Error> {
    writeln!(out, "fid,start_seq,len,window")?;
    for b in bursts {
        let fid = trace.flow_id(b.flow);
        let hex: String = fid.as_bytes().iter().map(|x| format!("{x:02x}")).collect();
        writeln!(out, "0x{hex},{},{},{}", b.start_seq, b.len, b.window)?;
    }
    Ok(())
}
