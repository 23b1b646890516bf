//! Counter-based seeding: every random draw is addressed by a `(seed, stream)`
//! pair, so results never depend on scheduling order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream identifiers used by the instance generator.
pub mod streams {
    pub const SIGNAL: u64 = 0;
    pub const DESIGN: u64 = 1;
    pub const NOISE: u64 = 2;
    pub const CONTAMINATION: u64 = 3;
    pub const SPLIT: u64 = 4;
}

/// Independent generator for `(seed, stream)`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Seed of the `trial`-th Monte Carlo replicate.
pub fn trial_seed(base_seed: u64, trial: u64) -> u64 {
    base_seed.wrapping_add(trial)
}
