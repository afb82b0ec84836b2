//! Seeded, splittable randomness for the chains.
//!
//! One generator per chain. `seed` selects the keystream and `stream`
//! separates parallel chains sharing a seed, so multi-chain runs stay
//! reproducible. All per-step draws happen in a fixed documented order (see
//! the stepping module).

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

pub type ChainRng = ChaCha12Rng;

pub fn chain_rng(seed: u64, stream: u64) -> ChainRng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
