//! Deterministic random streams.
//!
//! Every consumer of randomness gets its own ChaCha stream keyed by the master
//! seed, a domain and an index. Streams never overlap, so results do not
//! depend on how work is scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum StreamDomain {
    /// Symbols and channel noise for equalizer training sets.
    Training = 1,
    /// Symbols and channel noise for BER measurement.
    Evaluation = 2,
    /// Weight initialization and mini-batch shuffling.
    Model = 3,
    /// Information bits for coded blocks.
    Payload = 4,
    /// Anything else (tests, calibration probes).
    Auxiliary = 5,
}

pub fn stream(master_seed: u64, domain: StreamDomain, index: u64) -> ChaCha8Rng {
    assert!(index < 1 << 48, "stream index {index} out of range");
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(((domain as u64) << 48) | index);
    rng
}
