//! Reproducible per-replica random streams.
//!
//! Every replica owns a ChaCha8 stream keyed by `(seed, index)`: the key
//! schedule is counter based, so the draws of replica `i` depend only on the
//! master seed and `i`, never on how replicas are scheduled across workers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Identifies one random stream: a 64-bit seed and a stream index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamId {
    pub seed: u64,
    pub index: u64,
}

impl StreamId {
    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.index);
        rng
    }
}

/// `replica_count` independent streams under `master_seed`.
pub fn make_streams(master_seed: u64, replica_count: usize) -> Vec<StreamId> {
    (0..replica_count as u64).map(|index| StreamId { seed: master_seed, index }).collect()
}

/// Seed of a disjoint stream family derived from `master_seed` and a label.
///
/// Used to give independent batches (two sides of a two-sample test,
/// auxiliary Gaussian draws, permutation shuffles) non-overlapping streams.
pub fn derive_seed(master_seed: u64, label: &str) -> u64 {
    let mut h = splitmix64(master_seed ^ 0x243f_6a88_85a3_08d3);
    for b in label.bytes() {
        h = splitmix64(h ^ b as u64);
    }
    h
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
