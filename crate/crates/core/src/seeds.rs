//! Stable hashing and named sub-seeds.
//!
//! `std`'s hashers are not guaranteed stable across releases, and seeds must
//! reproduce across builds, so a fixed FNV-1a + splitmix64 mix is used.

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Hash a seed together with a byte string.
pub fn stable_hash(seed: u64, bytes: &[u8]) -> u64 {
    let mut h = FNV_OFFSET ^ splitmix64(seed);
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(FNV_PRIME);
    }
    splitmix64(h)
}

/// Seed for a named stage derived from a master seed.
pub fn sub_seed(master: u64, name: &str) -> u64 {
    stable_hash(master, name.as_bytes())
}
