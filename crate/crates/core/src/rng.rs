//! Reproducible random substreams.
//!
//! A stream is identified by `(master seed, domain, index)`. ChaCha's 64-bit
//! stream selector carries `domain` and `index`, so substreams never overlap
//! and do not depend on the order in which they are consumed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Stream namespaces, so that e.g. frame 3 and bootstrap replicate 3 differ.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Domain {
    Frame = 1,
    Background = 2,
    Bootstrap = 3,
    Scan = 4,
    Misc = 5,
}

pub fn substream(seed: u64, domain: Domain, index: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((domain as u64) << 56) ^ index);
    rng
}
