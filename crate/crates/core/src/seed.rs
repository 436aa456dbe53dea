use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Mixes a base seed with a list of stream identifiers (splitmix64 finalizer).
///
/// All randomness in the crate flows from declared seeds through this function,
/// so that e.g. the sample drawn for instance 3 in run 7 does not depend on the
/// order in which other instances were processed.
pub fn derive_seed(base: u64, streams: &[u64]) -> u64 {
    let mut state = base ^ 0x9E37_79B9_7F4A_7C15;
    for &s in streams {
        state = mix(state.wrapping_add(s).wrapping_add(0x9E37_79B9_7F4A_7C15));
    }
    mix(state)
}

fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stable 64-bit hash of a string, used to turn identifiers into seed streams.
pub(crate) fn str_stream(s: &str) -> u64 {
    // FNV-1a; std's hasher is randomly keyed and not stable across runs.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in s.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    h
}

pub(crate) fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
