//! Collision and recall bounds, evaluated in closed form and by Monte
//! Carlo.
//!
//! `pdiff` is the probability that the `M` largest flows hash into `M`
//! distinct buckets of `d` (the balls-into-bins event behind the
//! analysis); `recall_lower_bound` is the resulting guarantee on the
//! recall rate of the sketch over a Zipf workload, and `nri_bound` caps
//! the expected not-reported instances for one flow given its traffic
//! share. Products and powers run in log space so nothing underflows at
//! realistic table sizes.

use rand::rngs::SmallRng;
use rand::{Rng, SeedableRng};

use crate::Error;

/// Exact probability that `M` uniform throws land in `M` distinct
/// buckets: the product of `(1 - j/d)` for `j` in `1..M`.
///
/// Returns 1 for `M <= 1` and 0 when `M > d` (pigeonhole).
pub fn pdiff_exact(m: u64, d: u64) -> f64 {
    if m <= 1 {
        return 1.0;
    }
    if m > d {
        return 0.0;
    }
    let d = d as f64;
    let log_sum: f64 = (1..m).map(|j| (1.0 - j as f64 / d).ln()).sum();
    log_sum.exp()
}

/// Closed-form lower bound `(1 - M/d)^(M-d) * e^(-M)`, valid for `M < d`.
pub fn pdiff_lower_bound(m: u64, d: u64) -> Result<f64, Error> {
    if m >= d {
        return Err(Error::InvalidConfig(format!(
            "lower bound requires M < d, got M={m}, d={d}"
        )));
    }
    let mf = m as f64;
    let df = d as f64;
    let log_val = (mf - df) * (1.0 - mf / df).ln() - mf;
    Ok(log_val.exp())
}

/// Monte Carlo estimate of `pdiff` with its binomial standard error.
pub fn pdiff_montecarlo(m: u64, d: u64, trials: u64, seed: u64) -> (f64, f64) {
    assert!(trials >= 1, "need at least one trial");
    let mut rng = SmallRng::seed_from_u64(seed);
    let mut throws: Vec<u64> = Vec::with_capacity(m as usize);
    let mut successes = 0u64;
    for _ in 0..trials {
        throws.clear();
        for _ in 0..m {
            throws.push(rng.gen_range(0..d));
        }
        throws.sort_unstable();
        if throws.windows(2).all(|w| w[0] != w[1]) {
            successes += 1;
        }
    }
    let estimate = successes as f64 / trials as f64;
    let stderr = (estimate * (1.0 - estimate) / trials as f64).sqrt();
    (estimate, stderr)
}

/// Recall-rate lower bound for a Zipf workload with exponent `alpha`,
/// taking the `M` largest flows into account:
/// `1 - 2^alpha * (alpha-1)^(1/alpha - 1) * M^(-(alpha-1)^2 / alpha)`,
/// clamped to `[0, 1]`. The formula is vacuous (negative) at small `M`;
/// [`recall_lower_bound_raw`] exposes the unclamped value.
pub fn recall_lower_bound(alpha: f64, m: u64) -> Result<f64, Error> {
    Ok(recall_lower_bound_raw(alpha, m)?.clamp(0.0, 1.0))
}

/// The recall bound before clamping; may be negative.
pub fn recall_lower_bound_raw(alpha: f64, m: u64) -> Result<f64, Error> {
    if alpha <= 1.0 {
        return Err(Error::InvalidConfig(format!(
            "recall bound requires alpha > 1, got {alpha}"
        )));
    }
    if m < 1 {
        return Err(Error::InvalidConfig("recall bound requires M >= 1".into()));
    }
    let mf = m as f64;
    // log of 2^alpha * (alpha-1)^(1/alpha - 1) * M^(-(alpha-1)^2/alpha)
    let log_term = alpha * 2f64.ln() + (1.0 / alpha - 1.0) * (alpha - 1.0).ln()
        - (alpha - 1.0).powi(2) / alpha * mf.ln();
    Ok(1.0 - log_term.exp())
}

/// Expected not-reported instances of one flow: `beta * L * (1 - share)^w`
/// where `share` is the flow's fraction of its bucket's traffic and `w`
/// the cells per bucket.
pub fn nri_bound(flow_size: f64, share: f64, w: u32, beta: f64) -> f64 {
    assert!(share > 0.0 && share <= 1.0, "share must be in (0, 1]");
    beta * flow_size * (1.0 - share).powi(w as i32)
}
