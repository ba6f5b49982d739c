use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Deterministic pseudo-random source.
///
/// Backed by ChaCha8, whose output is portable across platforms and crate
/// versions of the same major release. Independent streams for parallel
/// trials are obtained with [`RandomStream::derive`], which selects a distinct
/// ChaCha stream under the same key.
#[derive(Clone, Debug)]
pub struct RandomStream(ChaCha8Rng);

impl RandomStream {
    pub fn from_seed(seed: u64) -> Self {
        Self(ChaCha8Rng::seed_from_u64(seed))
    }

    /// Stream `index` of the family keyed by `seed`.
    pub fn derive(seed: u64, index: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(index);
        Self(rng)
    }

    /// A child stream, advancing this one by a single draw.
    pub fn fork(&mut self) -> Self {
        let seed = self.0.next_u64();
        Self::from_seed(seed)
    }

    /// Uniform draw on the half-open interval (0, 1].
    pub fn uniform_open0(&mut self) -> f64 {
        // 53 random mantissa bits, shifted off zero.
        ((self.0.next_u64() >> 11) as f64 + 1.0) * (1.0 / (1u64 << 53) as f64)
    }
}

impl RngCore for RandomStream {
    fn next_u32(&mut self) -> u32 {
        self.0.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.0.fill_bytes(dst)
    }
}
