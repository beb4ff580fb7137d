//! Seeded random streams.
//!
//! Every attack draws from ChaCha8 keyed by the run seed. Image `i` of a batch
//! uses stream `i` of that key, so results do not depend on the order or
//! concurrency with which images are processed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type AttackRng = ChaCha8Rng;

pub fn stream_rng(seed: u64, stream: u64) -> AttackRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
