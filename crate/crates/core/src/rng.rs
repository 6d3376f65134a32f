//! Seeded random streams.
//!
//! All randomness in the crate comes from ChaCha8 (`rand_chacha`), seeded with
//! `seed_from_u64` and split into independent streams with `set_stream`. The
//! generator is portable, so a `(seed, stream)` pair produces the same numbers
//! on every platform.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Independent stream `stream` of generator `seed`.
pub fn stream(seed: u64, stream: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
