//! Deterministic random number generation and seed derivation.
//!
//! Every random decision in the pipeline is drawn from [`Xoshiro256StarStar`],
//! whose 256-bit state is expanded from a single 64-bit seed with
//! [`SplitMix64`]. Per-instance seeds come from [`derive_seed`], a pure
//! function of the global seed and a tuple of stream coordinates, so the
//! outputs never depend on how work is scheduled across threads.
//!
//! The exact algorithms are part of the external contract:
//!
//! * `splitmix64`: `state += 0x9E3779B97F4A7C15`, then the Stafford "mix13"
//!   finalizer.
//! * `xoshiro256**`: Blackman & Vigna, 2018, state seeded by four successive
//!   splitmix64 outputs.
//! * uniform real: `(next_u64 >> 11) * 2^-53`, in `[0, 1)`.
//! * uniform index below `n`: high 64 bits of `next_u64 * n` (one draw).
//! * [`derive_seed`]: see its docs.

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// The splitmix64 output finalizer (Stafford variant 13).
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Steele, Lea & Flood's SplitMix64 generator.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        mix64(self.state)
    }
}

/// xoshiro256** 1.0.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Xoshiro256StarStar {
    s: [u64; 4],
}

impl Xoshiro256StarStar {
    /// Seeds the state with four consecutive splitmix64 outputs.
    pub fn seed_from_u64(seed: u64) -> Self {
        let mut sm = SplitMix64::new(seed);
        let s = [sm.next_u64(), sm.next_u64(), sm.next_u64(), sm.next_u64()];
        Self { s }
    }

    /// Builds a generator from a raw state. The all-zero state is a fixed
    /// point and is rejected.
    pub fn from_state(s: [u64; 4]) -> Option<Self> {
        if s == [0; 4] {
            None
        } else {
            Some(Self { s })
        }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        let result = self.s[1].wrapping_mul(5).rotate_left(7).wrapping_mul(9);
        let t = self.s[1] << 17;

        self.s[2] ^= self.s[0];
        self.s[3] ^= self.s[1];
        self.s[1] ^= self.s[2];
        self.s[0] ^= self.s[3];

        self.s[2] ^= t;
        self.s[3] = self.s[3].rotate_left(45);

        result
    }

    /// Uniform draw in `[0, 1)` with 53 bits of precision.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform index in `0..n`, consuming exactly one draw. Panics if `n == 0`.
    #[inline]
    pub fn below(&mut self, n: usize) -> usize {
        assert!(n > 0, "below(0)");
        ((self.next_u64() as u128 * n as u128) >> 64) as usize
    }

    /// Fisher-Yates shuffle, highest index first.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }
}

/// Domain tags keep the augmentation and shuffling streams disjoint.
pub mod domain {
    pub const AUGMENT: u64 = 0x6175_676d_656e_7400; // "augment\0"
    pub const SHUFFLE: u64 = 0x7368_7566_666c_6500; // "shuffle\0"
}

/// Derives a 64-bit seed from a global seed and a tuple of coordinates.
///
/// `h0 = mix64(global ^ GOLDEN_GAMMA)`, then for each field `f_i` (1-based
/// position `i`): `h_i = mix64(h_{i-1} ^ mix64(f_i + i * GOLDEN_GAMMA))`.
/// Field positions are folded in so that permuted tuples diverge.
pub fn derive_seed(global: u64, fields: &[u64]) -> u64 {
    let mut h = mix64(global ^ GOLDEN_GAMMA);
    for (i, &f) in fields.iter().enumerate() {
        let salt = (i as u64 + 1).wrapping_mul(GOLDEN_GAMMA);
        h = mix64(h ^ mix64(f.wrapping_add(salt)));
    }
    h
}

/// Generator for one instance's augmentation at `(epoch, batch, ordinal)`.
pub fn instance_rng(global: u64, epoch: u64, batch: u64, ordinal: u64) -> Xoshiro256StarStar {
    Xoshiro256StarStar::seed_from_u64(derive_seed(
        global,
        &[domain::AUGMENT, epoch, batch, ordinal],
    ))
}

/// Generator for the per-epoch corpus permutation.
pub fn shuffle_rng(global: u64, epoch: u64) -> Xoshiro256StarStar {
    Xoshiro256StarStar::seed_from_u64(derive_seed(global, &[domain::SHUFFLE, epoch]))
}
