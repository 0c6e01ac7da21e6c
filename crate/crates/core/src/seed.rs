//! Named seed substreams.

/// Seed for the stream `tag` under `seed`. Distinct tags give unrelated
/// streams, so adding a stage never shifts another stage's draws.
pub fn derive(seed: u64, tag: &str) -> u64 {
    // FNV-1a over the tag, then a SplitMix64 finalizer over seed ^ hash.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in tag.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    let mut z = seed ^ h;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
