//! Deterministic stream-per-purpose RNG.
//!
//! Every consumer of randomness gets its own ChaCha stream keyed by
//! `(seed, purpose, ids...)`, so path i always sees the same numbers no
//! matter how many workers run or in which order paths complete.

use rand_chacha::ChaCha8Rng;
use rand_chacha::rand_core::SeedableRng;
use sha2::{Digest, Sha256};

/// What a stream is for. Part of the stream key, so adding a purpose never
/// perturbs existing ones.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    /// Price Brownian increments W^S.
    PriceNoise,
    /// Intensity Brownian increments W.
    IntensityNoise,
    /// Event times and marks of the Cox jump stream.
    CoxEvents,
    /// One layer of the Hawkes thinning field.
    HawkesLayer(u32),
    /// Uniforms for the within-cell bridge maximum.
    BridgeMax,
    /// Inner branch of a nested conditional estimate, keyed by node index.
    InnerBranch(u32),
    /// Mark choice when thresholding/aux sampling is needed.
    Aux,
}

impl Purpose {
    fn tag(self) -> (u32, u32) {
        match self {
            Purpose::PriceNoise => (1, 0),
            Purpose::IntensityNoise => (2, 0),
            Purpose::CoxEvents => (3, 0),
            Purpose::HawkesLayer(l) => (4, l),
            Purpose::BridgeMax => (5, 0),
            Purpose::InnerBranch(k) => (6, k),
            Purpose::Aux => (7, 0),
        }
    }
}

/// Root of a stream family: a user seed plus a scope id (outer path index,
/// or a derived scope for inner branches).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StreamFamily {
    pub seed: u64,
    pub scope: u64,
}

impl StreamFamily {
    pub fn new(seed: u64, scope: u64) -> Self {
        StreamFamily { seed, scope }
    }

    /// Child family for inner branch `inner` spawned at node `node` of this
    /// scope. Collision-free by hashing, not arithmetic.
    pub fn child(&self, node: u64, inner: u64) -> StreamFamily {
        let mut h = Sha256::new();
        h.update(b"runmax-child");
        h.update(self.seed.to_le_bytes());
        h.update(self.scope.to_le_bytes());
        h.update(node.to_le_bytes());
        h.update(inner.to_le_bytes());
        let d = h.finalize();
        StreamFamily {
            seed: self.seed,
            scope: u64::from_le_bytes(d[0..8].try_into().unwrap()),
        }
    }

    pub fn stream(&self, purpose: Purpose) -> ChaCha8Rng {
        let (a, b) = purpose.tag();
        let mut h = Sha256::new();
        h.update(b"runmax-stream");
        h.update(self.seed.to_le_bytes());
        h.update(self.scope.to_le_bytes());
        h.update(a.to_le_bytes());
        h.update(b.to_le_bytes());
        let d = h.finalize();
        let mut key = [0u8; 32];
        key.copy_from_slice(&d);
        ChaCha8Rng::from_seed(key)
    }
}
