//! Self-contained deterministic random number generator.
//!
//! Every random decision in the crate flows through [`RngState`] so that a
//! run is a pure function of its seeds. The generator is xoshiro256++ with
//! SplitMix64 seeding; [`derive_stream`] splits one seed into independent,
//! collision-free child streams (per iteration, per epoch, per example).
//! Nothing here depends on an external RNG crate, so byte-identical replay
//! survives dependency upgrades.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer: a bijective avalanche on 64 bits.
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives an independent child seed from `(seed, stream)`.
///
/// For a fixed `seed` the map `stream -> child` is injective: `stream` goes
/// through an odd multiplier and two bijective finalizers, so distinct
/// streams can never collide.
pub fn derive_stream(seed: u64, stream: u64) -> u64 {
    mix64(
        seed ^ mix64(
            stream
                .wrapping_mul(GOLDEN)
                .wrapping_add(0x6A09_E667_F3BC_C909),
        ),
    )
}

/// Deterministic generator state.
///
/// Identical seed + identical call sequence produce identical outputs on
/// every platform.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RngState {
    seed: u64,
    s: [u64; 4],
    draws: u64,
}

impl RngState {
    pub fn new(seed: u64) -> Self {
        // SplitMix64 stream expands the seed into the xoshiro state; the
        // all-zero state is unreachable this way.
        let mut z = seed;
        let mut s = [0u64; 4];
        for slot in &mut s {
            z = z.wrapping_add(GOLDEN);
            *slot = mix64(z);
        }
        RngState { seed, s, draws: 0 }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Number of raw 64-bit draws made so far (the stream position).
    pub fn draws(&self) -> u64 {
        self.draws
    }

    /// xoshiro256++ core step.
    pub fn next_u64(&mut self) -> u64 {
        let s = &mut self.s;
        let result = s[0].wrapping_add(s[3]).rotate_left(23).wrapping_add(s[0]);
        let t = s[1] << 17;
        s[2] ^= s[0];
        s[3] ^= s[1];
        s[1] ^= s[2];
        s[0] ^= s[3];
        s[2] ^= t;
        s[3] = s[3].rotate_left(45);
        self.draws += 1;
        result
    }

    /// Uniform f64 in [0, 1) with 53 bits of precision.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform f64 in [lo, hi).
    pub fn next_range_f64(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Uniform integer in [0, n). `n` must be nonzero.
    ///
    /// Multiply-shift mapping; the bias is below 2^-32 for any n that fits
    /// in 32 bits, far beneath anything our statistics can see.
    pub fn next_index(&mut self, n: usize) -> usize {
        debug_assert!(n > 0, "next_index requires n > 0");
        (((self.next_u64() as u128) * (n as u128)) >> 64) as usize
    }

    /// Standard normal draw via Box-Muller (no spare caching, so the call
    /// sequence maps 1:1 onto raw draws).
    pub fn next_normal(&mut self) -> f64 {
        let u1 = 1.0 - self.next_f64(); // (0, 1]
        let u2 = self.next_f64();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    /// Normal(mean, sd) truncated to [0, 1] by rejection.
    pub fn next_truncated_unit_normal(&mut self, mean: f64, sd: f64) -> f64 {
        loop {
            let x = mean + sd * self.next_normal();
            if (0.0..=1.0).contains(&x) {
                return x;
            }
        }
    }

    /// In-place Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, xs: &mut [T]) {
        for i in (1..xs.len()).rev() {
            let j = self.next_index(i + 1);
            xs.swap(i, j);
        }
    }
}
