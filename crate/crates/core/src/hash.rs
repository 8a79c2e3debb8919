//! Platform-stable hashing. `std`'s `DefaultHasher` is not guaranteed stable
//! across releases, so anything that feeds seeds or signatures uses these.

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv_extend(mut h: u64, bytes: &[u8]) -> u64 {
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

/// Hashes a token sequence; a 0xff separator keeps ["ab","c"] and ["a","bc"] apart.
pub fn hash_tokens<S: AsRef<str>>(tokens: &[S]) -> u64 {
    let mut h = FNV_OFFSET;
    for t in tokens {
        h = fnv_extend(h, t.as_ref().as_bytes());
        h = fnv_extend(h, &[0xff]);
    }
    mix64(h)
}

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fnv1a64(bytes: &[u8]) -> u64 {
        fnv_extend(FNV_OFFSET, bytes)
    }

    #[test]
    fn fnv_reference_vectors() {
        assert_eq!(fnv1a64(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a64(b"a"), 0xaf63dc4c8601ec8c);
        assert_eq!(fnv1a64(b"foobar"), 0x85944171f73967e8);
    }

    #[test]
    fn separator_matters() {
        assert_ne!(hash_tokens(&["ab", "c"]), hash_tokens(&["a", "bc"]));
    }
}
