//! Deterministic sub-seed derivation.

/// One round of the splitmix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for the `index`-th child of a master seed. Stable across platforms
/// and releases.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    mix(mix(master.wrapping_add(0x9e37_79b9_7f4a_7c15)) ^ index.wrapping_mul(0xd1b5_4a32_d192_ed03))
}

/// [`derive_seed`] applied along a path of indices.
pub fn derive_seed_path(master: u64, path: &[u64]) -> u64 {
    path.iter().fold(master, |s, &i| derive_seed(s, i))
}
