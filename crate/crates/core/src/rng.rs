//! Seeded random streams. Each consumer draws from its own stream so that
//! changing how one stage samples leaves the others' draws intact.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Scenario = 1,
    Channel = 2,
    Init = 3,
    Scheme = 4,
    Oracle = 5,
}

pub fn stream_rng(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}
