//! Deterministic random substreams.
//!
//! Every replicate draws from its own ChaCha stream keyed by
//! `(seed, key, index)`, so results do not depend on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

pub fn substream(seed: u64, key: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ key.wrapping_add(1).wrapping_mul(GOLDEN));
    rng.set_stream(index);
    rng
}
