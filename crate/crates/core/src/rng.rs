//! Seeded random streams.
//!
//! Every stochastic step takes a caller-supplied [`StreamRng`]. Independent
//! streams for (campaign seed, item id) pairs come from ChaCha's stream
//! selector, so items can run in any order or in parallel.

use rand::SeedableRng;
pub use rand_chacha::ChaCha8Rng as StreamRng;

pub fn stream(seed: u64, stream_id: u64) -> StreamRng {
    let mut rng = StreamRng::seed_from_u64(seed);
    rng.set_stream(stream_id);
    rng
}
