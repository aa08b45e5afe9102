//! Modular sequence-number arithmetic and the situation classifier.

use crate::types::{mask_for, Situation, Thresholds};

/// Signed modular difference between two sequence numbers.
///
/// Returns the unique `v` in `(-2^(w-1), 2^(w-1)]` with
/// `(b + v) mod 2^w == a`. Without this, every wrap of the counter would
/// look like a giant negative variation.
pub fn seq_diff(a: u32, b: u32, seq_width: u8) -> i64 {
    let mask = u64::from(mask_for(seq_width));
    let modulus = mask + 1;
    let half = modulus / 2;
    let d = (u64::from(a).wrapping_sub(u64::from(b))) & mask;
    if d > half {
        d as i64 - modulus as i64
    } else {
        d as i64
    }
}

/// Maps a signed variation onto its situation.
///
/// Total over all integers:
/// normal at 1, minor gap in `[2, t1)`, major gap in `[t1, t2)`,
/// neglect in `(-t2, 1)`, not matched everywhere else.
pub fn classify(var: i64, th: &Thresholds) -> Situation {
    let t1 = i64::from(th.t1());
    let t2 = i64::from(th.t2());
    if var == 1 {
        Situation::Normal
    } else if var >= 2 && var < t1 {
        Situation::MinorGap(var)
    } else if var >= t1 && var < t2 {
        Situation::MajorGap(var)
    } else if var > -t2 && var < 1 {
        Situation::Neglect
    } else {
        Situation::NotMatched
    }
}
