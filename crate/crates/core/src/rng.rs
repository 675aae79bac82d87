//! Counter-addressed random streams.
//!
//! Every binomial draw in a forward simulation comes from its own ChaCha8
//! stream addressed by (seed, ensemble member, day, stratum, transition), so
//! a trajectory is a pure function of its address and does not depend on
//! the order in which members or strata are evaluated.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Transition {
    SusceptibleExposed = 0,
    ExposedInfectious = 1,
    InfectiousRemoved = 2,
}

impl Transition {
    pub const ALL: [Transition; 3] = [
        Transition::SusceptibleExposed,
        Transition::ExposedInfectious,
        Transition::InfectiousRemoved,
    ];
}

/// Key material for one ensemble member (or one MCMC chain).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StreamSeed {
    key: [u8; 32],
}

const MAX_DAY: usize = 1 << 32;
const MAX_STRATUM: usize = 1 << 30;
// Transition codes use 0..=2; code 3 is reserved for the sequential stream.
const SEQUENTIAL_STREAM: u64 = u64::MAX;

impl StreamSeed {
    pub fn new(seed: u64, member: u64) -> Self {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&seed.to_le_bytes());
        key[8..16].copy_from_slice(&member.to_le_bytes());
        StreamSeed { key }
    }

    pub fn stream(&self, day: usize, stratum: usize, transition: Transition) -> ChaCha8Rng {
        assert!(day < MAX_DAY && stratum < MAX_STRATUM, "stream address out of range");
        let id = ((day as u64) << 32) | ((stratum as u64) << 2) | transition as u64;
        let mut rng = ChaCha8Rng::from_seed(self.key);
        rng.set_stream(id);
        rng
    }

    /// A single stream for consumers that draw sequentially (MCMC chains).
    pub fn sequential(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::from_seed(self.key);
        rng.set_stream(SEQUENTIAL_STREAM);
        rng
    }
}
