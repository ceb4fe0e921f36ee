//! Named, independently seeded random streams.
//!
//! Every consumer of randomness draws from its own ChaCha stream derived from
//! the run seed and a fixed stream id. Adding or removing one consumer (say,
//! the discriminator) therefore never shifts the numbers another consumer sees.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Encoder,
    SupervisedHead,
    SemiHead,
    Discriminator,
    LabeledBatches,
    PseudoBatches,
    Split,
    Synthetic,
    Logreg,
    Baseline,
}

impl Stream {
    fn id(self) -> u64 {
        match self {
            Stream::Encoder => 1,
            Stream::SupervisedHead => 2,
            Stream::SemiHead => 3,
            Stream::Discriminator => 4,
            Stream::LabeledBatches => 5,
            Stream::PseudoBatches => 6,
            Stream::Split => 7,
            Stream::Synthetic => 8,
            Stream::Logreg => 9,
            Stream::Baseline => 10,
        }
    }
}

pub fn stream(seed: u64, which: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(which.id());
    rng
}
