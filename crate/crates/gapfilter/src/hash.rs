//! Seeded hash roles: bucket mapping, per-flow sequence bias and
//! fingerprints.
//!
//! All three roles come from one keyed 64-bit hash family (xxHash64) with
//! distinct seeds; determinism per seed is the contract.

use std::hash::Hasher;

use twox_hash::XxHash64;

use crate::types::mask_for;
use crate::Error;

/// Maximum fingerprint length in bits.
pub const MAX_FINGERPRINT_BITS: u8 = 16;

/// Seeds for the three independent hash roles plus fingerprint length.
///
/// `l_f = 0` disables fingerprinting; `randomize = false` forces a zero
/// per-flow bias (the test hook for collision-controlled experiments).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct HashConfig {
    pub seed_bucket: u64,
    pub seed_bias: u64,
    pub seed_fingerprint: u64,
    /// Fingerprint length in bits, 0..=16.
    pub l_f: u8,
    /// Apply the per-flow sequence-number bias.
    pub randomize: bool,
}

impl HashConfig {
    /// Derives three distinct role seeds from one master seed.
    pub fn from_seed(seed: u64) -> Self {
        HashConfig {
            seed_bucket: splitmix64(seed),
            seed_bias: splitmix64(seed ^ 0x9e37_79b9_7f4a_7c15),
            seed_fingerprint: splitmix64(seed ^ 0x2545_f491_4f6c_dd1d),
            l_f: 8,
            randomize: true,
        }
    }

    pub fn with_fingerprint_bits(mut self, l_f: u8) -> Self {
        self.l_f = l_f;
        self
    }

    pub fn with_randomize(mut self, randomize: bool) -> Self {
        self.randomize = randomize;
        self
    }

    pub fn validate(&self) -> Result<(), Error> {
        if self.l_f > MAX_FINGERPRINT_BITS {
            return Err(Error::InvalidConfig(format!(
                "fingerprint length {} exceeds {} bits",
                self.l_f, MAX_FINGERPRINT_BITS
            )));
        }
        if self.seed_bucket == self.seed_bias
            || self.seed_bucket == self.seed_fingerprint
            || self.seed_bias == self.seed_fingerprint
        {
            return Err(Error::InvalidConfig(
                "hash role seeds must be pairwise distinct".into(),
            ));
        }
        Ok(())
    }
}

impl Default for HashConfig {
    fn default() -> Self {
        HashConfig::from_seed(0)
    }
}

/// SplitMix64 finalizer, used only to spread one master seed into roles.
fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Keyed 64-bit hash of arbitrary bytes.
#[inline]
pub fn hash64(bytes: &[u8], seed: u64) -> u64 {
    let mut h = XxHash64::with_seed(seed);
    h.write(bytes);
    h.finish()
}

/// Maps a flow id to its bucket in `[0, d)`.
#[inline]
pub fn bucket_index(fid: &[u8], d: usize, cfg: &HashConfig) -> usize {
    debug_assert!(d >= 1);
    (hash64(fid, cfg.seed_bucket) % d as u64) as usize
}

/// Per-flow sequence bias in `[0, 2^seq_width)`.
#[inline]
pub fn seq_bias(fid: &[u8], cfg: &HashConfig, seq_width: u8) -> u32 {
    if !cfg.randomize {
        return 0;
    }
    (hash64(fid, cfg.seed_bias) as u32) & mask_for(seq_width)
}

/// Adds the per-flow bias to a sequence number, modulo `2^seq_width`.
///
/// The bias is constant per flow, so intra-flow differences are preserved
/// under `seq_diff`; distinct flows' ranges get pushed apart.
#[inline]
pub fn randomize_seq(fid: &[u8], seq: u32, cfg: &HashConfig, seq_width: u8) -> u32 {
    seq.wrapping_add(seq_bias(fid, cfg, seq_width)) & mask_for(seq_width)
}

/// `l_f`-bit fingerprint of a flow id.
///
/// Errors when fingerprinting is disabled (`l_f == 0`).
#[inline]
pub fn fingerprint(fid: &[u8], cfg: &HashConfig) -> Result<u16, Error> {
    if cfg.l_f == 0 {
        return Err(Error::FingerprintDisabled);
    }
    Ok(fingerprint_unchecked(fid, cfg))
}

/// Fingerprint without the `l_f > 0` check; returns 0 when disabled.
#[inline]
pub(crate) fn fingerprint_unchecked(fid: &[u8], cfg: &HashConfig) -> u16 {
    if cfg.l_f == 0 {
        return 0;
    }
    let mask = if cfg.l_f >= 16 {
        u16::MAX
    } else {
        (1u16 << cfg.l_f) - 1
    };
    (hash64(fid, cfg.seed_fingerprint) as u16) & mask
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::FlowId;

    #[test]
    fn bucket_index_is_deterministic_and_in_range() {
        let cfg = HashConfig::from_seed(7);
        let fid = FlowId::from_u64(42);
        let first = bucket_index(fid.as_bytes(), 1024, &cfg);
        for _ in 0..8 {
            assert_eq!(bucket_index(fid.as_bytes(), 1024, &cfg), first);
        }
        assert!(first < 1024);
        assert_eq!(bucket_index(fid.as_bytes(), 1, &cfg), 0);
    }

    #[test]
    fn distinct_seeds_change_the_mapping() {
        let a = HashConfig::from_seed(1);
        let b = HashConfig::from_seed(2);
        let differs = (0..64u64).any(|i| {
            let fid = FlowId::from_u64(i);
            bucket_index(fid.as_bytes(), 1 << 20, &a) != bucket_index(fid.as_bytes(), 1 << 20, &b)
        });
        assert!(differs);
    }

    #[test]
    fn bucket_distribution_chi_square() {
        // 10^5 random fids over d=1024 buckets. The statistic is compared
        // against the 99.9% quantile of chi-squared with 1023 degrees of
        // freedom, computed independently by statrs.
        use statrs::distribution::{ChiSquared, ContinuousCDF};
        let cfg = HashConfig::from_seed(12345);
        let d = 1024usize;
        let n = 100_000u64;
        let mut counts = vec![0u64; d];
        for i in 0..n {
            let fid = FlowId::from_u64(i.wrapping_mul(0x_dead_beef_cafe_f00d));
            counts[bucket_index(fid.as_bytes(), d, &cfg)] += 1;
        }
        let expected = n as f64 / d as f64;
        let chi2: f64 = counts
            .iter()
            .map(|&c| {
                let diff = c as f64 - expected;
                diff * diff / expected
            })
            .sum();
        let critical = ChiSquared::new((d - 1) as f64)
            .unwrap()
            .inverse_cdf(0.999);
        assert!(
            chi2 < critical,
            "chi2={chi2:.1} exceeds 99.9% critical value {critical:.1}"
        );
    }

    #[test]
    fn zero_bias_hook_disables_randomization() {
        let cfg = HashConfig::from_seed(3).with_randomize(false);
        let fid = FlowId::from_u64(9);
        for seq in [0u32, 1, 500, 65535] {
            assert_eq!(randomize_seq(fid.as_bytes(), seq, &cfg, 16), seq & 0xFFFF);
        }
    }

    #[test]
    fn randomization_preserves_intra_flow_differences() {
        use crate::seqnum::seq_diff;
        let cfg = HashConfig::from_seed(4);
        let fid = FlowId::from_u64(77);
        for (s, k) in [(0u32, 1i64), (100, 250), (65530, 10), (40000, 32000)] {
            let base = randomize_seq(fid.as_bytes(), s, &cfg, 16);
            let moved = randomize_seq(
                fid.as_bytes(),
                (s as i64 + k) as u32 & 0xFFFF,
                &cfg,
                16,
            );
            assert_eq!(seq_diff(moved, base, 16), k, "s={s} k={k}");
        }
    }

    #[test]
    fn randomize_is_bijective_per_flow() {
        let cfg = HashConfig::from_seed(5);
        let fid = FlowId::from_u64(11);
        let mut seen = vec![false; 256];
        for seq in 0..256u32 {
            let r = randomize_seq(fid.as_bytes(), seq, &cfg, 8) as usize;
            assert!(!seen[r], "collision at seq={seq}");
            seen[r] = true;
        }
    }

    #[test]
    fn equal_starts_diverge_after_randomizing() {
        // Monte Carlo over 10^4 flow pairs sharing a raw starting seq:
        // the randomized starts should collide only with probability
        // ~2^-16, i.e. an expected 0.15 collisions here.
        let cfg = HashConfig::from_seed(6);
        let mut collisions = 0;
        for i in 0..10_000u64 {
            let a = FlowId::from_u64(2 * i);
            let b = FlowId::from_u64(2 * i + 1);
            if randomize_seq(a.as_bytes(), 1000, &cfg, 16)
                == randomize_seq(b.as_bytes(), 1000, &cfg, 16)
            {
                collisions += 1;
            }
        }
        assert!(collisions <= 3, "unexpectedly many collisions: {collisions}");
    }

    #[test]
    fn fingerprint_contract() {
        let cfg = HashConfig::from_seed(8).with_fingerprint_bits(8);
        let fid = FlowId::from_u64(123);
        let fp = fingerprint(fid.as_bytes(), &cfg).unwrap();
        assert_eq!(fp, fingerprint(fid.as_bytes(), &cfg).unwrap());
        assert!(fp < 256);

        let disabled = cfg.with_fingerprint_bits(0);
        assert!(matches!(
            fingerprint(fid.as_bytes(), &disabled),
            Err(Error::FingerprintDisabled)
        ));
    }

    #[test]
    fn fingerprint_histogram_is_flat() {
        // 10^5 random fids at l_f=8: every value observed and the
        // max/min bin ratio stays below 1.5.
        let cfg = HashConfig::from_seed(9).with_fingerprint_bits(8);
        let mut bins = [0u64; 256];
        for i in 0..100_000u64 {
            let fid = FlowId::from_u64(i.wrapping_mul(0x9e37_79b9_7f4a_7c15));
            bins[fingerprint(fid.as_bytes(), &cfg).unwrap() as usize] += 1;
        }
        let max = *bins.iter().max().unwrap() as f64;
        let min = *bins.iter().min().unwrap() as f64;
        assert!(min > 0.0, "some fingerprint value never observed");
        assert!(max / min < 1.5, "bin ratio {max}/{min} too skewed");
    }

    #[test]
    fn config_validation() {
        assert!(HashConfig::from_seed(0).validate().is_ok());
        let bad = HashConfig {
            seed_bucket: 1,
            seed_bias: 1,
            seed_fingerprint: 2,
            l_f: 8,
            randomize: true,
        };
        assert!(bad.validate().is_err());
        let too_long = HashConfig::from_seed(0).with_fingerprint_bits(17);
        assert!(too_long.validate().is_err());
    }
}
