//! Counter-addressed random streams.
//!
//! Every Monte Carlo replication owns a ChaCha stream keyed by
//! `(seed, experiment id, replication index)`. Streams are statistically
//! independent and addressable in any order, so replication-parallel code
//! produces identical results for any number of worker threads.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a distinct experiment id from a base id and a list of sub-indices
/// (curve point, gamma index, ...).
pub fn sub_experiment(base: u64, parts: &[u64]) -> u64 {
    let mut state = base;
    let mut acc = splitmix64(&mut state);
    for &p in parts {
        let mut s = acc ^ p;
        acc = splitmix64(&mut s);
    }
    acc
}

/// Returns the RNG for one replication of one experiment.
///
/// The 256-bit ChaCha key is expanded from `(seed, experiment)`; the
/// replication index selects the ChaCha stream within that key.
pub fn stream_rng(seed: u64, experiment: u64, replication: u64) -> ChaCha8Rng {
    let mut state = seed ^ 0x51ab_5f1c_0e66_d9cd;
    let mut key = [0u8; 32];
    let mix = splitmix64(&mut state) ^ experiment;
    let mut state = state ^ mix;
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(replication);
    rng
}
