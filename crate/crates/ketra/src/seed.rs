//! Sub-seed derivation.
//!
//! Every command takes a single `--seed`. Components that need their own
//! random stream (factor init, test sampling, negative generation, ...)
//! derive a sub-seed from the base seed and a short label, so that runs are
//! reproducible and streams stay independent of each other.

/// Derive a sub-seed from `base` and a stream label.
///
/// FNV-1a over the label bytes, mixed with the base seed, finalized with the
/// splitmix64 permutation. Stable across platforms and releases.
pub fn derive_seed(base: u64, label: &str) -> u64 {
    const FNV_OFFSET: u64 = 0xcbf29ce484222325;
    const FNV_PRIME: u64 = 0x100000001b3;
    let mut h = FNV_OFFSET ^ base;
    for b in label.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    splitmix64(h)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}
