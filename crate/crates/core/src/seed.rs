//! Reproducible random streams.
//!
//! A master seed and a textual label (plus optional integer counters such as
//! step and member index) are hashed into the key of an independent ChaCha
//! generator. Streams therefore do not depend on the order in which they are
//! requested, which keeps per-member noise independent of any parallel schedule.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// Dynamics noise of the simulated truth.
pub const TRUTH_W: &str = "truth.w";
/// Observation noise of the simulated truth.
pub const TRUTH_V: &str = "truth.v";
/// Draws of the initial prior.
pub const PRIOR_INIT: &str = "prior.init";
/// Predicted-observation noise inside the filter.
pub const FILTER_V: &str = "filter.v";
/// Dynamics noise injected into filter members.
pub const FILTER_W: &str = "filter.w";
/// Monte Carlo sampling of polynomial chaos variables.
pub const PCE_SAMPLING: &str = "pce.sampling";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Seeder {
    master: u64,
}

impl Seeder {
    pub fn new(master: u64) -> Self {
        Self { master }
    }

    pub fn master(&self) -> u64 {
        self.master
    }

    pub fn stream(&self, label: &str, counters: &[u64]) -> ChaCha8Rng {
        let mut hasher = Sha256::new();
        hasher.update(self.master.to_le_bytes());
        hasher.update((label.len() as u64).to_le_bytes());
        hasher.update(label.as_bytes());
        for c in counters {
            hasher.update(c.to_le_bytes());
        }
        let digest = hasher.finalize();
        let mut key = [0u8; 32];
        key.copy_from_slice(&digest);
        ChaCha8Rng::from_seed(key)
    }
}
