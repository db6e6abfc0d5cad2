//! Random sources for the decay generators.
//!
//! Two backends: a Fibonacci LFSR that is bit-exact with respect to the
//! hardware random source, and a seeded ChaCha stream used when the tests
//! need draws that are independent from step to step. Both produce draws on
//! the dyadic grid `k / 2^E`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MIN_LFSR_WIDTH: u32 = 2;
pub const MAX_LFSR_WIDTH: u32 = 16;

/// Known maximal-length tap sets, indexed by register width.
pub fn default_taps(width: u32) -> Option<&'static [u32]> {
    let taps: &'static [u32] = match width {
        2 => &[2, 1],
        3 => &[3, 2],
        4 => &[4, 3],
        5 => &[5, 3],
        6 => &[6, 5],
        7 => &[7, 6],
        8 => &[8, 6, 5, 4],
        9 => &[9, 5],
        10 => &[10, 7],
        11 => &[11, 9],
        12 => &[12, 11, 10, 4],
        13 => &[13, 12, 11, 8],
        14 => &[14, 13, 12, 2],
        15 => &[15, 14],
        16 => &[16, 15, 13, 4],
        _ => return None,
    };
    Some(taps)
}

/// A Fibonacci linear feedback shift register.
///
/// Tap positions are 1-based: tap `t` reads bit `t - 1`. On every step the
/// register shifts left by one and the XOR of the tapped bits enters at bit 0.
/// The register is never zero.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LfsrState {
    width: u32,
    tap_mask: u32,
    reg: u32,
}

impl LfsrState {
    /// Builds a register, rejecting tap sets that are not maximal-length for
    /// `width` and seeds outside `[1, 2^width - 1]`.
    pub fn new(width: u32, taps: &[u32], seed: u32) -> Result<Self> {
        if !(MIN_LFSR_WIDTH..=MAX_LFSR_WIDTH).contains(&width) {
            return Err(Error::config(format!(
                "LFSR width {width} outside {MIN_LFSR_WIDTH}..={MAX_LFSR_WIDTH}"
            )));
        }
        let mut tap_mask = 0u32;
        for &t in taps {
            if t == 0 || t > width {
                return Err(Error::config(format!("tap {t} outside 1..={width}")));
            }
            tap_mask |= 1 << (t - 1);
        }
        if tap_mask & (1 << (width - 1)) == 0 {
            return Err(Error::config(format!(
                "taps {taps:?} do not include the register length {width}"
            )));
        }
        let full = (1u32 << width) - 1;
        if seed == 0 || seed > full {
            return Err(Error::config(format!(
                "LFSR seed {seed} outside 1..={full} for width {width}"
            )));
        }
        let probe = LfsrState {
            width,
            tap_mask,
            reg: 1,
        };
        if probe.period() != full {
            return Err(Error::config(format!(
                "taps {taps:?} are not maximal-length for width {width}"
            )));
        }
        Ok(LfsrState {
            width,
            tap_mask,
            reg: seed,
        })
    }

    pub fn with_default_taps(width: u32, seed: u32) -> Result<Self> {
        let taps = default_taps(width)
            .ok_or_else(|| Error::config(format!("no default taps for width {width}")))?;
        Self::new(width, taps, seed)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn reg(&self) -> u32 {
        self.reg
    }

    pub fn taps(&self) -> Vec<u32> {
        (1..=self.width)
            .filter(|t| self.tap_mask & (1 << (t - 1)) != 0)
            .collect()
    }

    /// The state one shift later.
    pub fn successor(&self) -> LfsrState {
        let feedback = (self.reg & self.tap_mask).count_ones() & 1;
        let mask = (1u32 << self.width) - 1;
        LfsrState {
            reg: ((self.reg << 1) | feedback) & mask,
            ..*self
        }
    }

    /// Advances in place and returns the new register value.
    pub fn step(&mut self) -> u32 {
        *self = self.successor();
        self.reg
    }

    /// Number of steps until the register returns to its current value.
    pub fn period(&self) -> u32 {
        let mut s = self.successor();
        let mut n = 1;
        // A degenerate tap set can enter a cycle that excludes the start.
        let bound = 1u32 << self.width;
        while s.reg != self.reg && n <= bound {
            s = s.successor();
            n += 1;
        }
        n
    }
}

/// One random draw `k / 2^bits`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Draw {
    pub k: u32,
    pub bits: u32,
}

impl Draw {
    pub fn new(k: u32, bits: u32) -> Self {
        debug_assert!(k < (1 << bits));
        Draw { k, bits }
    }

    pub fn as_f64(self) -> f64 {
        self.k as f64 / (1u64 << self.bits) as f64
    }
}

/// Declarative description of a random source, as it appears in config files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RngConfig {
    Lfsr {
        width: u32,
        mask_bits: u32,
        seed: u32,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        taps: Option<Vec<u32>>,
    },
    Uniform {
        mask_bits: u32,
        seed: u64,
        /// Restrict draws to `1..2^mask_bits`, mimicking a never-zero register.
        #[serde(default)]
        exclude_zero: bool,
    },
}

impl RngConfig {
    /// Full-width 5-bit register, the configuration used for the decay analytics.
    pub fn lfsr5(seed: u32) -> Self {
        RngConfig::Lfsr {
            width: 5,
            mask_bits: 5,
            seed,
            taps: None,
        }
    }

    /// The engine's 7-bit register with only its five low bits used.
    pub fn hardware(seed: u32) -> Self {
        RngConfig::Lfsr {
            width: 7,
            mask_bits: 5,
            seed,
            taps: None,
        }
    }

    pub fn seed(&self) -> u64 {
        match *self {
            RngConfig::Lfsr { seed, .. } => seed as u64,
            RngConfig::Uniform { seed, .. } => seed,
        }
    }

    /// Same source with a seed derived from `seed`, mapped into the valid
    /// range of the backend (`1..2^width` for a register).
    pub fn reseeded(&self, seed: u64) -> Self {
        match *self {
            RngConfig::Lfsr { width, .. } => {
                let states = (1u64 << width) - 1;
                self.with_seed(1 + seed % states)
            }
            RngConfig::Uniform { .. } => self.with_seed(seed),
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        let mut out = self.clone();
        match &mut out {
            RngConfig::Lfsr { seed: s, .. } => *s = seed as u32,
            RngConfig::Uniform { seed: s, .. } => *s = seed,
        }
        out
    }
}

impl Default for RngConfig {
    fn default() -> Self {
        RngConfig::hardware(1)
    }
}

#[derive(Debug, Clone)]
enum Backend {
    Lfsr(LfsrState),
    Uniform {
        rng: Box<ChaCha8Rng>,
        exclude_zero: bool,
    },
}

/// A stream of draws; one call to [`RandomSource::draw`] per decay step.
#[derive(Debug, Clone)]
pub struct RandomSource {
    backend: Backend,
    mask_bits: u32,
}

impl RandomSource {
    pub fn from_config(cfg: &RngConfig) -> Result<Self> {
        match cfg {
            RngConfig::Lfsr {
                width,
                mask_bits,
                seed,
                taps,
            } => {
                let state = match taps {
                    Some(t) => LfsrState::new(*width, t, *seed)?,
                    None => LfsrState::with_default_taps(*width, *seed)?,
                };
                Self::from_lfsr(state, *mask_bits)
            }
            RngConfig::Uniform {
                mask_bits,
                seed,
                exclude_zero,
            } => Self::uniform_inner(*mask_bits, *seed, *exclude_zero),
        }
    }

    pub fn from_lfsr(state: LfsrState, mask_bits: u32) -> Result<Self> {
        if mask_bits == 0 || mask_bits > state.width() {
            return Err(Error::config(format!(
                "mask of {mask_bits} bits does not fit a {}-bit LFSR",
                state.width()
            )));
        }
        Ok(RandomSource {
            backend: Backend::Lfsr(state),
            mask_bits,
        })
    }

    /// LFSR with default taps.
    pub fn lfsr(width: u32, mask_bits: u32, seed: u32) -> Result<Self> {
        Self::from_lfsr(LfsrState::with_default_taps(width, seed)?, mask_bits)
    }

    /// Uniform draws on `{0, ..., 2^mask_bits - 1} / 2^mask_bits`.
    pub fn uniform(mask_bits: u32, seed: u64) -> Result<Self> {
        Self::uniform_inner(mask_bits, seed, false)
    }

    /// Uniform draws on `{1, ..., 2^mask_bits - 1} / 2^mask_bits`.
    pub fn uniform_nonzero(mask_bits: u32, seed: u64) -> Result<Self> {
        Self::uniform_inner(mask_bits, seed, true)
    }

    fn uniform_inner(mask_bits: u32, seed: u64, exclude_zero: bool) -> Result<Self> {
        if mask_bits == 0 || mask_bits > MAX_LFSR_WIDTH {
            return Err(Error::config(format!(
                "uniform draw width {mask_bits} outside 1..={MAX_LFSR_WIDTH}"
            )));
        }
        Ok(RandomSource {
            backend: Backend::Uniform {
                rng: Box::new(ChaCha8Rng::seed_from_u64(seed)),
                exclude_zero,
            },
            mask_bits,
        })
    }

    pub fn mask_bits(&self) -> u32 {
        self.mask_bits
    }

    /// `true` when the source can never produce `k = 0`.
    pub fn never_zero(&self) -> bool {
        match &self.backend {
            Backend::Lfsr(s) => s.width() == self.mask_bits,
            Backend::Uniform { exclude_zero, .. } => *exclude_zero,
        }
    }

    #[inline]
    pub fn draw(&mut self) -> Draw {
        let mask = (1u32 << self.mask_bits) - 1;
        let k = match &mut self.backend {
            Backend::Lfsr(s) => s.step() & mask,
            Backend::Uniform { rng, exclude_zero } => {
                let lo = *exclude_zero as u32;
                rng.gen_range(lo..=mask)
            }
        };
        Draw {
            k,
            bits: self.mask_bits,
        }
    }

    /// Stationary distribution of a single draw from this source.
    pub fn grid(&self) -> DrawGrid {
        match &self.backend {
            Backend::Lfsr(s) => DrawGrid::masked_lfsr(s.width(), self.mask_bits),
            Backend::Uniform {
                exclude_zero: false,
                ..
            } => DrawGrid::full(self.mask_bits),
            Backend::Uniform {
                exclude_zero: true, ..
            } => DrawGrid::nonzero(self.mask_bits),
        }
    }
}

/// A discrete distribution over the draws `k / 2^bits`, stored as integer
/// weights so that probabilities stay exact ratios.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DrawGrid {
    bits: u32,
    counts: Vec<u64>,
}

impl DrawGrid {
    pub fn from_counts(bits: u32, counts: Vec<u64>) -> Result<Self> {
        if counts.len() != 1usize << bits {
            return Err(Error::config(format!(
                "grid of {bits} bits needs {} weights, got {}",
                1usize << bits,
                counts.len()
            )));
        }
        if counts.iter().all(|&c| c == 0) {
            return Err(Error::config("grid has no mass"));
        }
        Ok(DrawGrid { bits, counts })
    }

    pub fn full(bits: u32) -> Self {
        DrawGrid {
            bits,
            counts: vec![1; 1 << bits],
        }
    }

    pub fn nonzero(bits: u32) -> Self {
        let mut counts = vec![1; 1 << bits];
        counts[0] = 0;
        DrawGrid { bits, counts }
    }

    /// Low `bits` of a uniformly chosen nonzero `width`-bit register.
    pub fn masked_lfsr(width: u32, bits: u32) -> Self {
        let per_value = 1u64 << (width - bits);
        let mut counts = vec![per_value; 1 << bits];
        counts[0] -= 1;
        DrawGrid { bits, counts }
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn count(&self, k: u32) -> u64 {
        self.counts[k as usize]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn prob(&self, k: u32) -> f64 {
        self.count(k) as f64 / self.total() as f64
    }

    /// Draws with nonzero weight, paired with their weight.
    pub fn iter(&self) -> impl Iterator<Item = (Draw, u64)> + '_ {
        let bits = self.bits;
        self.counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(move |(k, &c)| (Draw { k: k as u32, bits }, c))
    }

    pub fn min_draw(&self) -> Draw {
        self.iter().next().map(|(d, _)| d).expect("grid has mass")
    }

    pub fn mean(&self) -> f64 {
        let total = self.total() as f64;
        self.iter().map(|(d, c)| d.as_f64() * c as f64).sum::<f64>() / total
    }
}
