//! Seed derivation.
//!
//! Every random choice in the pipeline flows from a single user-visible base
//! seed. Downstream consumers derive their own seed with [`derive_seed`] and a
//! documented stream tag, so repeated trials are auditable and reproducible:
//!
//! * `STREAM_INIT` — initial Stiefel point of an optimization run,
//! * `STREAM_SPLIT` + trial index — train/test split of evaluation trial t,
//! * `STREAM_DATA` — synthetic data generation.

/// Stream tag for initial-point construction.
pub const STREAM_INIT: u64 = 0x01;
/// Base stream tag for per-trial split seeds; trial t uses `STREAM_SPLIT + t`.
pub const STREAM_SPLIT: u64 = 0x1000;
/// Stream tag for synthetic dataset generation.
pub const STREAM_DATA: u64 = 0x02;

/// Derives a child seed from `base` and a `stream` tag (SplitMix64 finalizer).
///
/// Distinct streams give statistically independent child seeds; the map is a
/// pure integer function, identical on every platform.
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    let mut z = base ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic() {
        assert_eq!(derive_seed(42, STREAM_INIT), derive_seed(42, STREAM_INIT));
    }

    #[test]
    fn streams_differ() {
        let a = derive_seed(42, STREAM_INIT);
        let b = derive_seed(42, STREAM_SPLIT);
        let c = derive_seed(43, STREAM_INIT);
        assert_ne!(a, b);
        assert_ne!(a, c);
    }
}
