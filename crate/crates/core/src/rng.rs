//! Labelled random streams derived from one master seed.
//!
//! Each consumer gets its own ChaCha stream id, so adding a consumer never
//! shifts the draws of another one.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stream {
    Topology,
    FadingTrain,
    FadingEval,
    Policy,
    Demand,
    Init,
    Baseline,
}

impl Stream {
    fn id(self) -> u64 {
        match self {
            Stream::Topology => 1,
            Stream::FadingTrain => 2,
            Stream::FadingEval => 3,
            Stream::Policy => 4,
            Stream::Demand => 5,
            Stream::Init => 6,
            Stream::Baseline => 7,
        }
    }
}

/// Returns the generator for `stream` under `seed`.
pub fn stream(seed: u64, stream: Stream) -> Rng {
    substream(seed, stream, 0)
}

/// Returns an indexed sub-stream, e.g. one per evaluation worker or network.
pub fn substream(seed: u64, stream: Stream, index: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((stream.id() << 32) | (index & 0xffff_ffff));
    rng
}
