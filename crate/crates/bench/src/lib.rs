//! Fixtures shared by the criterion benches in `benches/`.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use spbe_core::{games, GameSpec};

/// Two players, three types and two actions each, horizon 3.
pub fn medium_game() -> GameSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    games::random_game(&mut rng, &[3, 3], &[2, 2], 3)
}
