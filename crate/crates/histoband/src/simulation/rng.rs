//! Counter-based random streams.
//!
//! Every `(seed, point, replication, stage)` tuple addresses its own ChaCha8
//! stream: `(seed, point)` selects the key and `(replication, stage)` the
//! 64-bit stream id. Draws therefore never depend on scheduling order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// What a stream is used for within one replication.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum Stage {
    Covariates = 0,
    Noise = 1,
}

const STAGE_BITS: u32 = 4;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stream for one stage of one replication at sweep point `point`.
pub fn stream(seed: u64, point: u64, replication: u64, stage: Stage) -> ChaCha8Rng {
    assert!(replication < 1 << (64 - STAGE_BITS), "replication index too large");
    let mut state = seed;
    let first = splitmix64(&mut state);
    let mut state = first ^ point.wrapping_mul(0xD1B5_4A32_D192_ED03);
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream((replication << STAGE_BITS) | stage as u64);
    rng
}
