use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Seeded ChaCha8 stream.
///
/// Purpose-specific streams are derived from the *seed*, never from the
/// current position: `substream(label)` seeds a new generator with
/// `splitmix64(seed ^ fnv1a64(label))`, and `substream_indexed` mixes an
/// index in with one more splitmix64 round. Drawing from a parent stream
/// therefore never shifts its children.
#[derive(Clone, Debug)]
pub struct Prng {
    seed: u64,
    inner: ChaCha8Rng,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a64(label: &str) -> u64 {
    label.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01B3)
    })
}

impl Prng {
    pub fn new(seed: u64) -> Self {
        Prng {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn derive_seed(seed: u64, label: &str) -> u64 {
        splitmix64(seed ^ fnv1a64(label))
    }

    pub fn substream(&self, label: &str) -> Prng {
        Prng::new(Prng::derive_seed(self.seed, label))
    }

    pub fn substream_indexed(&self, label: &str, index: u64) -> Prng {
        Prng::new(splitmix64(
            Prng::derive_seed(self.seed, label) ^ splitmix64(index),
        ))
    }

    /// Uniform in [0, 1).
    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    pub fn normal(&mut self) -> f64 {
        self.inner.sample(StandardNormal)
    }

    /// Uniform integer in [0, n). `n` must be positive.
    pub fn below(&mut self, n: usize) -> usize {
        self.inner.random_range(0..n)
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        use rand::seq::SliceRandom;
        items.shuffle(&mut self.inner);
    }
}

impl RngCore for Prng {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}
