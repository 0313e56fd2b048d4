//! Deterministic counter-based random streams.
//!
//! Every random draw in this crate is a pure function of `(seed, domain,
//! counter)`, so any consumer can replay any draw in any order. A draw is
//! computed by the splitmix64 output function evaluated at position
//! `counter` of the stream keyed by `(seed, domain)`:
//!
//! ```text
//! value(key, counter) = finalize(key + counter * 0x9E3779B97F4A7C15)
//! ```
//!
//! where `finalize` is the splitmix64 avalanche (xor-shift-multiply). The
//! same construction is used for graph edge draws (indexed by pair rank),
//! test-slot assignments (indexed by packed `(level, iteration, block)`),
//! and permutation parameter draws. This makes replay order-independent:
//! two independently written consumers of the same `(seed, domain, counter)`
//! triple observe identical values.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// splitmix64 avalanche function.
#[inline(always)]
fn finalize(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// The value at position `counter` of the stream with the given key.
#[inline(always)]
fn mix(key: u64, counter: u64) -> u64 {
    finalize(key.wrapping_add(counter.wrapping_mul(GOLDEN)))
}

/// Domain tags keeping unrelated draws on disjoint streams even when they
/// share a numeric seed.
pub mod domain {
    /// Erdős–Rényi edge inclusion draws, indexed by pair rank.
    pub const GRAPH_EDGES: u64 = 0x4544_4745;
    /// Basic-design slot assignments, indexed by (level, iteration, block).
    pub const DESIGN_ASSIGN: u64 = 0x4153_5347;
    /// Partitioned-design sub-streams, derived per (pair, permutation, repetition).
    pub const PARTITION: u64 = 0x5041_5254;
    /// Affine permutation parameter draws.
    pub const PERMUTATION: u64 = 0x5045_524D;
    /// Trial orchestration (graph seeds per trial index).
    pub const TRIAL: u64 = 0x5452_4941;
}

/// A keyed counter-based stream. Cheap to copy; all methods are pure.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Stream {
    key: u64,
}

impl Stream {
    /// Root stream for a seed within a domain.
    pub fn new(seed: u64, domain: u64) -> Self {
        Stream {
            key: mix(seed, domain),
        }
    }

    /// Sub-stream keyed by an additional index.
    #[inline(always)]
    pub fn derive(&self, index: u64) -> Self {
        Stream {
            key: mix(self.key, index),
        }
    }

    /// Raw 64-bit draw at `counter`.
    #[inline(always)]
    pub fn value(&self, counter: u64) -> u64 {
        mix(self.key, counter)
    }

    /// Uniform draw in `[0, bound)` via the multiply-shift reduction.
    ///
    /// The reduction bias is at most `bound / 2^64`, far below anything the
    /// statistical tests in this crate can resolve.
    #[inline(always)]
    pub fn uniform(&self, counter: u64, bound: u32) -> u32 {
        debug_assert!(bound > 0);
        ((self.value(counter) as u128 * bound as u128) >> 64) as u32
    }
}

/// A Bernoulli(q) coin evaluated against stream draws.
#[derive(Clone, Copy, Debug)]
pub enum Coin {
    Never,
    Always,
    /// Succeeds when the draw is below the threshold: P = threshold / 2^64.
    Threshold(u64),
}

impl Coin {
    /// Coin with success probability `q`, clamped to [0, 1]. For
    /// 0 < q < 1 the realized probability is `round(q * 2^64) / 2^64`,
    /// within 2^-64 of the requested value.
    pub fn new(q: f64) -> Coin {
        if q <= 0.0 {
            Coin::Never
        } else if q >= 1.0 {
            Coin::Always
        } else {
            let t = (q * (u64::MAX as f64 + 1.0)).round();
            if t >= u64::MAX as f64 + 1.0 {
                Coin::Always
            } else {
                Coin::Threshold(t as u64)
            }
        }
    }

    #[inline(always)]
    pub fn flip(&self, stream: &Stream, counter: u64) -> bool {
        match self {
            Coin::Never => false,
            Coin::Always => true,
            Coin::Threshold(t) => stream.value(counter) < *t,
        }
    }
}

/// Packs a (level, iteration, block) triple into one counter.
///
/// Field widths: level 12 bits, iteration 30 bits, block 22 bits. These are
/// generous for everything this crate builds (levels <= 32, iterations below
/// 2^30, blocks below 2^22) and are checked in debug builds.
#[inline(always)]
pub fn pack_liw(level: u32, iteration: u64, block: u32) -> u64 {
    debug_assert!(level < (1 << 12));
    debug_assert!(iteration < (1 << 30));
    debug_assert!(block < (1 << 22));
    ((level as u64) << 52) | (iteration << 22) | block as u64
}
