use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent ChaCha streams derived from one user seed, so adding a draw
/// in one component never shifts the numbers seen by another.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Synth = 1,
    Noise = 2,
    Init = 3,
    Minibatch = 4,
    ClusterGmm = 5,
    KMeans = 6,
}

pub fn stream_rng(seed: u64, stream: Stream) -> ChaCha8Rng {
    stream_rng_at(seed, stream, 0)
}

/// Stream `stream`, sub-stream `index` (e.g. an epoch or a view).
pub fn stream_rng_at(seed: u64, stream: Stream, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((stream as u64) << 48) ^ index);
    rng
}
