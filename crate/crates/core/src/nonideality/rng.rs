//! Deterministic random streams keyed by seed, domain and indices.
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Independent random domains; the discriminant is part of every key.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum RngDomain {
    Profile = 1,
    Noise = 2,
    Stimulus = 3,
    Dataset = 4,
    Training = 5,
}

fn splitmix(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// ChaCha8 generator seeded from `(seed, domain, a, b)`.
pub fn keyed_rng(seed: u64, domain: RngDomain, a: u64, b: u64) -> ChaCha8Rng {
    let mut state = seed;
    let mut bytes = [0u8; 32];
    let words = [
        splitmix(&mut state) ^ domain as u64,
        splitmix(&mut state) ^ a,
        splitmix(&mut state) ^ b.rotate_left(17),
        splitmix(&mut state),
    ];
    let mut mix = words[0] ^ words[1].rotate_left(7) ^ words[2].rotate_left(29) ^ words[3];
    for (chunk, w) in bytes.chunks_mut(8).zip(words) {
        let v = splitmix(&mut mix) ^ w;
        chunk.copy_from_slice(&v.to_le_bytes());
    }
    ChaCha8Rng::from_seed(bytes)
}

/// Counter-addressed draws: value `index` of a field does not depend on other draws.
pub(crate) struct FieldStream {
    rng: ChaCha8Rng,
}

impl FieldStream {
    pub fn new(seed: u64, field: u64) -> Self {
        Self { rng: keyed_rng(seed, RngDomain::Profile, field, 0) }
    }

    fn words(&mut self, index: u64) -> (u64, u64) {
        self.rng.set_word_pos(index as u128 * 4);
        (self.rng.next_u64(), self.rng.next_u64())
    }

    /// Uniform in [0, 1).
    pub fn uniform(&mut self, index: u64) -> f64 {
        let (a, _) = self.words(index);
        (a >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal via Box-Muller on two counter-addressed words.
    pub fn normal(&mut self, index: u64) -> f64 {
        let (a, b) = self.words(index);
        let u1 = ((a >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64);
        let u2 = (b >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }
}
