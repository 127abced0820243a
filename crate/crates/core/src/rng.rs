//! Counter-addressed random streams.
//!
//! Every random draw in an evolution run comes from a ChaCha stream keyed by
//! `(run seed, purpose, generation, slot)`, so results do not depend on
//! evaluation order or thread count, and a resumed run replays exactly.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    /// Generation-0 parameter initialisation.
    Init = 1,
    /// Parent choice and mutation noise for one offspring slot.
    Breed = 2,
}

/// Stream identifier packed as `purpose:2 | generation:30 | slot:32`.
pub fn stream_id(purpose: Purpose, generation: u64, slot: u64) -> u64 {
    ((purpose as u64) << 62) | ((generation & 0x3fff_ffff) << 32) | (slot & 0xffff_ffff)
}

pub fn stream(seed: u64, purpose: Purpose, generation: u64, slot: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id(purpose, generation, slot));
    rng
}
