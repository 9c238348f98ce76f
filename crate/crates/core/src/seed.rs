//! Deterministic seed derivation.
//!
//! Per-item seeds are `splitmix64(master ^ splitmix64(stream) + index)`, so
//! results never depend on the order or thread in which items are processed.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// One round of the splitmix64 output function.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for item `index` of the named `stream` under `master`.
pub fn derive_seed(master: u64, stream: u64, index: u64) -> u64 {
    splitmix64((master ^ splitmix64(stream)).wrapping_add(index))
}

/// Stream identifiers used across the crate.
pub mod streams {
    pub const DATASET: u64 = 1;
    pub const CLASSIFY: u64 = 2;
    pub const PRUNE: u64 = 3;
    pub const VARIANCE: u64 = 4;
    pub const ORACLE: u64 = 5;
    pub const TRAIN: u64 = 6;
}
