//! Pinned 64-bit hashing.
//!
//! Signatures and stub embeddings must be reproducible across runs, machines
//! and Rust releases, so nothing here touches `std::hash::DefaultHasher`.

use serde::{Deserialize, Serialize};

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// Identifier of a stable hash algorithm, recorded in configs so that
/// fingerprints can be matched to the function that produced them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum HashAlgo {
    /// FNV-1a over UTF-8 bytes followed by the SplitMix64 finalizer.
    #[default]
    #[serde(rename = "fnv1a64-splitmix")]
    Fnv1aSplitMix,
    /// Plain FNV-1a over UTF-8 bytes.
    #[serde(rename = "fnv1a64")]
    Fnv1a,
}

impl HashAlgo {
    pub fn id(self) -> &'static str {
        match self {
            HashAlgo::Fnv1aSplitMix => "fnv1a64-splitmix",
            HashAlgo::Fnv1a => "fnv1a64",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "fnv1a64-splitmix" => Some(HashAlgo::Fnv1aSplitMix),
            "fnv1a64" => Some(HashAlgo::Fnv1a),
            _ => None,
        }
    }

    #[inline]
    pub fn hash_bytes(self, bytes: &[u8]) -> u64 {
        match self {
            HashAlgo::Fnv1aSplitMix => splitmix64(fnv1a64(bytes)),
            HashAlgo::Fnv1a => fnv1a64(bytes),
        }
    }

    #[inline]
    pub fn hash_str(self, s: &str) -> u64 {
        self.hash_bytes(s.as_bytes())
    }
}

#[inline]
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h = FNV_OFFSET;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

#[inline]
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Hex fingerprint used for content-derived ids and fixture keys.
pub fn fingerprint(s: &str) -> String {
    format!("{:016x}", HashAlgo::Fnv1aSplitMix.hash_str(s))
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
    fn splitmix_reference() {
        // First output of the SplitMix64 generator seeded with 0.
        assert_eq!(splitmix64(0), 0xe220a8397b1dcdaf);
    }
}
