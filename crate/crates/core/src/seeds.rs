//! Seed derivation for independent, reproducible random streams.

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of stream `stream` under `master`; a pure function of both.
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    mix(mix(master) ^ mix(stream.wrapping_add(0x5EED)))
}
