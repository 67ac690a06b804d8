//! Named, independently seeded random streams.
//!
//! Every random choice in the simulator draws from a stream derived from
//! the master seed plus a (purpose, qubit) tag, so adding qubits or
//! reordering the per-qubit loops never perturbs existing streams, and
//! parallel generation is bit-identical to sequential.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// What a stream is used for. The discriminant is part of the key.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamPurpose {
    Impacts = 1,
    Charge = 2,
    ShotsM0 = 3,
    ShotsM1 = 4,
    TlsSpectrum = 5,
    TlsDetector = 6,
    TlsScramble = 7,
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive the stream for `(seed, purpose, qubit)`.
///
/// The 256-bit ChaCha key is expanded from the tagged seed with
/// splitmix64, so nearby seeds and tags give unrelated streams.
pub fn stream(seed: u64, purpose: StreamPurpose, qubit: u32) -> ChaCha8Rng {
    let mut state = seed
        ^ (purpose as u64).wrapping_mul(0xa076_1d64_78bd_642f)
        ^ u64::from(qubit).wrapping_mul(0xe703_7ed1_a0b4_28db);
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}
