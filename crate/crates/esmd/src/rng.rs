//! Seeded, splittable randomness.
//!
//! Every stochastic operation in the crate draws from an [`RngStream`], a
//! value-like handle on a counter-based generator. The same `(seed, stream_id)`
//! pair produces bitwise-identical draws regardless of thread count or call
//! order, and substreams can be forked per work unit so parallel replicates
//! never share state.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Handle on a reproducible random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngStream {
    pub seed: u64,
    pub stream_id: u64,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        RngStream { seed, stream_id }
    }

    /// Forks an independent child stream. Mixing keeps distinct `(parent,
    /// child)` pairs from colliding, so work units can derive their own
    /// streams in any order.
    pub fn substream(&self, child: u64) -> Self {
        RngStream {
            seed: self.seed,
            stream_id: splitmix64(self.stream_id ^ splitmix64(child.wrapping_add(0xa076_1d64_78bd_642f))),
        }
    }

    /// Instantiates the generator positioned at the start of this stream.
    pub fn rng(&self) -> ChaCha8Rng {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&self.seed.to_le_bytes());
        key[8..16].copy_from_slice(&splitmix64(self.seed).to_le_bytes());
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(self.stream_id);
        rng
    }

    /// Draws a vector of i.i.d. standard normals.
    pub fn normal_vector(&self, len: usize) -> DVector<f64> {
        let mut rng = self.rng();
        DVector::from_fn(len, |_, _| rng.sample(StandardNormal))
    }
}
