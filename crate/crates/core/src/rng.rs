//! Deterministic random streams.
//!
//! Every consumer gets a ChaCha8 generator keyed by `(seed, stream)`; the
//! stream id is the ChaCha stream counter, so distinct ids never overlap.
//! Replication seeds are derived from a master seed with SplitMix64 applied
//! to `master + j·φ`, so replication `j` can be rerun on its own.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub mod streams {
    pub const DATA: u64 = 1;
    pub const PANEL: u64 = 2;
    pub const STARTS: u64 = 3;
    pub const DIAG_OBSERVED: u64 = 10;
    pub const DIAG_MODEL: u64 = 11;
    pub const DIAG_SECOND: u64 = 12;
}

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of replication `index` under `master`.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    splitmix64(master.wrapping_add(index.wrapping_mul(GOLDEN)))
}

pub fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Uniform draw strictly inside `(0, 1)`.
pub fn open_unit<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return u;
        }
    }
}
