//! Deterministic sub-seed derivation.
//!
//! A single master seed drives every randomized stage. Each stage derives
//! its own seed from the master plus a fixed list of counters (stage tag,
//! repetition index, group-spec parameters, ...) by chaining splitmix64,
//! so stages can run in any order or in parallel and still reproduce.

/// Stage tags used by the experiment pipeline.
pub mod stage {
    pub const SPLIT: u64 = 1;
    pub const FACTORIZE: u64 = 2;
    pub const GROUPS: u64 = 3;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a sub-seed from `master` and an ordered list of counters.
pub fn derive_seed(master: u64, counters: &[u64]) -> u64 {
    let mut s = splitmix64(master);
    for &c in counters {
        s = splitmix64(s ^ c.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    }
    s
}
