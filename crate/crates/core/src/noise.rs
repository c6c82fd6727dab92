//! Seeded Laplace noise with per-(trial, channel) substreams.

use rand::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

use crate::error::{Error, Result};

/// Scale `b` of a centered Laplace distribution, density `exp(−|x|/b) / 2b`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct LaplaceScale(f64);

impl LaplaceScale {
    pub fn new(b: f64) -> Result<Self> {
        if !(b.is_finite() && b > 0.0) {
            return Err(Error::domain(format!("Laplace scale must be positive, got {b}")));
        }
        Ok(LaplaceScale(b))
    }

    /// Scale `Δ/ε` for a query of L1-sensitivity `Δ` released under budget `ε`.
    pub fn for_sensitivity(sensitivity: f64, epsilon: f64) -> Result<Self> {
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(Error::domain(format!("epsilon must be positive, got {epsilon}")));
        }
        LaplaceScale::new(sensitivity / epsilon)
    }

    #[inline]
    pub fn get(self) -> f64 {
        self.0
    }

    /// Variance `2b²`.
    pub fn variance(self) -> f64 {
        2.0 * self.0 * self.0
    }
}

/// Inverse-CDF transform of a uniform `u ∈ (−1/2, 1/2)`:
/// `−b · sign(u) · ln(1 − 2|u|)`.
#[inline]
pub fn laplace_from_uniform(u: f64, scale: LaplaceScale) -> f64 {
    let magnitude = -scale.get() * (-2.0 * u.abs()).ln_1p();
    if u < 0.0 {
        -magnitude
    } else {
        magnitude
    }
}

/// SplitMix64 output function.
#[inline]
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of the substream for `(seed, trial, channel)`.
pub fn derive_seed(seed: u64, trial_index: u64, channel: u64) -> u64 {
    mix64(mix64(mix64(seed) ^ trial_index) ^ channel.rotate_left(32))
}

/// A stream of Laplace variates.
///
/// A source is single-consumer: it is `Send` but holds mutable stream state.
/// Derive one substream per trial to parallelize.
#[derive(Clone, Debug)]
pub struct NoiseSource {
    kind: Kind,
    consumed: usize,
    trace: Option<Vec<f64>>,
}

#[derive(Clone, Debug)]
enum Kind {
    Seeded { seed: u64, rng: Xoshiro256PlusPlus },
    Zero,
    Replay { values: Vec<f64> },
}

impl NoiseSource {
    /// xoshiro256++ seeded through SplitMix64; identical on every platform.
    pub fn seeded(seed: u64) -> Self {
        NoiseSource::from_kind(Kind::Seeded {
            seed,
            rng: Xoshiro256PlusPlus::seed_from_u64(seed),
        })
    }

    /// Every draw is exactly `0.0`.
    pub fn zero() -> Self {
        NoiseSource::from_kind(Kind::Zero)
    }

    /// Returns the stored values in order, ignoring the requested scale.
    pub fn replay(values: Vec<f64>) -> Self {
        NoiseSource::from_kind(Kind::Replay { values })
    }

    fn from_kind(kind: Kind) -> Self {
        NoiseSource {
            kind,
            consumed: 0,
            trace: None,
        }
    }

    /// Records the scale of every subsequent draw (see [`NoiseSource::scales`]).
    pub fn with_trace(mut self) -> Self {
        self.trace = Some(Vec::new());
        self
    }

    pub fn seed(&self) -> Option<u64> {
        match self.kind {
            Kind::Seeded { seed, .. } => Some(seed),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.kind, Kind::Zero)
    }

    /// Number of draws taken so far.
    pub fn consumed(&self) -> usize {
        self.consumed
    }

    /// Scales requested so far, when tracing is on.
    pub fn scales(&self) -> Option<&[f64]> {
        self.trace.as_deref()
    }

    /// Uniform on the open interval `(−1/2, 1/2)` from 53 random bits.
    fn next_uniform(rng: &mut Xoshiro256PlusPlus) -> f64 {
        let bits = rng.next_u64() >> 11;
        (bits as f64 + 0.5) * (1.0 / (1u64 << 53) as f64) - 0.5
    }

    pub fn laplace(&mut self, scale: LaplaceScale) -> Result<f64> {
        let value = match &mut self.kind {
            Kind::Seeded { rng, .. } => laplace_from_uniform(Self::next_uniform(rng), scale),
            Kind::Zero => 0.0,
            Kind::Replay { values } => match values.get(self.consumed) {
                Some(&v) => v,
                None => {
                    return Err(Error::Exhausted {
                        consumed: self.consumed,
                    })
                }
            },
        };
        self.consumed += 1;
        if let Some(trace) = &mut self.trace {
            trace.push(scale.get());
        }
        Ok(value)
    }

    /// Fills `out` with independent draws at a common scale.
    pub fn fill_laplace(&mut self, scale: LaplaceScale, out: &mut [f64]) -> Result<()> {
        for slot in out.iter_mut() {
            *slot = self.laplace(scale)?;
        }
        Ok(())
    }
}

/// Seeded source for trial `trial_index` on `channel`; streams for distinct
/// `(trial, channel)` pairs share no state.
pub fn derive_substream(seed: u64, trial_index: u64, channel: u64) -> NoiseSource {
    NoiseSource::seeded(derive_seed(seed, trial_index, channel))
}
