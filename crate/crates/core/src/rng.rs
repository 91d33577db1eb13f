//! Deterministic random streams.
//!
//! Every stream is a ChaCha8 generator keyed by a 64-bit seed and positioned
//! on one of its 2^64 independent streams. The seed is expanded into the
//! ChaCha key with `SeedableRng::seed_from_u64` (PCG32 expansion, fixed by
//! `rand_core`), so a given `(seed, stream_id)` pair produces the same
//! sequence on every platform for a given build.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Name of the generator algorithm, recorded in output artifacts.
pub const RNG_ALGORITHM: &str = "chacha8/seed_from_u64";

#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    inner: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream_id);
        RngStream {
            seed,
            stream_id,
            inner,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Derives an independent child stream identified by `label`.
    ///
    /// The child depends only on `(seed, stream_id, label)`, never on how much
    /// of the parent has been consumed, so children can be created in any
    /// order (or in parallel) with identical results.
    pub fn derive(&self, label: u64) -> RngStream {
        let child_seed = splitmix64(self.seed ^ splitmix64(self.stream_id.wrapping_add(0x9E37_79B9_7F4A_7C15)));
        RngStream::new(child_seed, label)
    }

    /// Derives a child stream from a two-part label.
    pub fn derive2(&self, a: u64, b: u64) -> RngStream {
        self.derive(splitmix64(a) ^ b.rotate_left(32))
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.inner.fill_bytes(dest)
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
