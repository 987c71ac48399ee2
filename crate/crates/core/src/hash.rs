//! Stable, platform-independent hashing.
//!
//! Everything that ends up on disk or decides an output (shard routing,
//! shingle hashes, LSH buckets) goes through these functions rather than
//! `std::hash`, whose output is not guaranteed across releases.

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// FNV-1a over raw bytes.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h = FNV_OFFSET;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

/// SplitMix64 finalizer. Bijective on u64.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seeded 64-bit hash of a byte string.
pub fn seeded_hash(bytes: &[u8], seed: u64) -> u64 {
    mix64(fnv1a64(bytes) ^ mix64(seed))
}

/// Seeded hash over a slice of u64 words (used for LSH band digests).
pub fn hash_words(words: &[u64], seed: u64) -> u64 {
    let mut h = mix64(seed);
    for &w in words {
        h = mix64(h ^ w);
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fnv_reference_vectors() {
        assert_eq!(fnv1a64(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a64(b"a"), 0xaf63dc4c8601ec8c);
        assert_eq!(fnv1a64(b"foobar"), 0x85944171f73967e8);
    }

    #[test]
    fn seed_changes_hash() {
        assert_ne!(seeded_hash(b"x", 1), seeded_hash(b"x", 2));
        assert_eq!(seeded_hash(b"x", 7), seeded_hash(b"x", 7));
    }
}
