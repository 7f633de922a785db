//! Seeded random streams.
//!
//! Every replication draws from its own ChaCha stream keyed by the master
//! seed and a 64-bit stream id, so results do not depend on scheduling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Provenance of a random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Lineage {
    pub master_seed: u64,
    pub stream_id: u64,
}

#[derive(Debug, Clone)]
pub struct StreamRng {
    inner: ChaCha8Rng,
    lineage: Lineage,
}

impl StreamRng {
    pub fn new(master_seed: u64, stream_id: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(master_seed);
        inner.set_stream(stream_id);
        Self {
            inner,
            lineage: Lineage {
                master_seed,
                stream_id,
            },
        }
    }

    pub fn lineage(&self) -> Lineage {
        self.lineage
    }

    pub fn normal(&mut self) -> f64 {
        self.inner.sample(StandardNormal)
    }

    pub fn fill_normal(&mut self, out: &mut [f64]) {
        for x in out {
            *x = self.normal();
        }
    }

    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }
}

/// Stream id for replication `rep` of the `t_index`-th horizon.
pub fn stream_id(t_index: usize, rep: usize) -> u64 {
    assert!(t_index < (1 << 24) && rep < (1 << 40));
    ((t_index as u64) << 40) | rep as u64
}
