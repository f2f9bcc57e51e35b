//! Keyed random streams.
//!
//! A stream is named by a run seed plus a tuple of indices (iteration,
//! update kind, region, ...). The seed selects the ChaCha key and the hashed
//! index tuple selects the 64-bit ChaCha stream, so every keyed stream is a
//! disjoint counter range and no draw depends on which thread consumed which
//! stream first.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Domain tags for the second key component.
pub mod tag {
    pub const THETA: u64 = 1;
    pub const BETA: u64 = 2;
    pub const Z: u64 = 3;
    pub const TAU2: u64 = 4;
    pub const YEAR_COVS: u64 = 5;
    pub const HYPER_COV: u64 = 6;
    pub const RHO: u64 = 7;
    pub const REPLICATES: u64 = 8;
    pub const SIMULATE: u64 = 9;
    pub const BASELINE: u64 = 10;
    pub const GEWEKE: u64 = 11;
}

#[inline]
fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A `(seed, key)` pair; cheap to copy and send between threads.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct RngStream {
    seed: u64,
    key: u64,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        RngStream { seed, key: splitmix(0x6D73_7463_6172) }
    }

    /// Extends the key tuple with one more index.
    #[inline]
    pub fn child(self, idx: u64) -> Self {
        RngStream { seed: self.seed, key: splitmix(self.key ^ splitmix(idx.wrapping_add(0x5851_F42D_4C95_7F2D))) }
    }

    /// Extends the key tuple with several indices, in order.
    pub fn keyed(self, idx: &[u64]) -> Self {
        idx.iter().fold(self, |s, &i| s.child(i))
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Materializes the generator positioned at the start of this stream.
    pub fn rng(&self) -> ChaCha8Rng {
        let mut r = ChaCha8Rng::seed_from_u64(self.seed);
        r.set_stream(self.key);
        r
    }
}
