//! Exponential decay: the ideal IIR recursion, the low-bitwidth stochastic
//! update that replaces it in hardware, and the analytics that describe the
//! stochastic update's statistics.
//!
//! The hardware path is exact integer arithmetic. The coefficient is a 9-bit
//! integer `a` with `alpha = a / 512`, the decay value `v` is a `v_width`-bit
//! integer and a draw is `k / 2^E`. One step computes
//!
//! ```text
//! v' = floor((a * v * 2^(F - 9) + k * 2^(F - E)) / 2^F),   F = max(9, E)
//! ```
//!
//! which for `E <= 9` is `floor((a * v + (k << (9 - E))) / 512)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{Draw, DrawGrid, RandomSource};

pub const ALPHA_FRAC_BITS: u32 = 9;
pub const ALPHA_ONE: u32 = 1 << ALPHA_FRAC_BITS;
pub const MAX_V_WIDTH: u32 = 8;

/// Nearest 9-bit coefficient for a time constant of `tau` steps.
pub fn alpha_q_from_tau(tau: u32) -> u16 {
    let num = ALPHA_ONE as u64 * tau as u64;
    let den = tau as u64 + 1;
    ((2 * num + den) / (2 * den)) as u16
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DecayParams {
    /// Coefficient numerator; `alpha = alpha_q / 512`.
    pub alpha_q: u16,
    pub v_width: u32,
    pub v_init: u8,
}

impl Default for DecayParams {
    fn default() -> Self {
        DecayParams {
            alpha_q: 495,
            v_width: 4,
            v_init: 15,
        }
    }
}

impl DecayParams {
    pub fn new(alpha_q: u16, v_width: u32, v_init: u8) -> Result<Self> {
        let p = DecayParams {
            alpha_q,
            v_width,
            v_init,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_alpha(alpha_q: u16) -> Result<Self> {
        Self::new(alpha_q, 4, 15)
    }

    pub fn validate(&self) -> Result<()> {
        if self.alpha_q as u32 >= ALPHA_ONE {
            return Err(Error::config(format!(
                "alpha_q {} must be < 512",
                self.alpha_q
            )));
        }
        if self.v_width == 0 || self.v_width > MAX_V_WIDTH {
            return Err(Error::config(format!(
                "v_width {} outside 1..={MAX_V_WIDTH}",
                self.v_width
            )));
        }
        if self.v_init as u32 > self.v_max() as u32 {
            return Err(Error::config(format!(
                "v_init {} does not fit in {} bits",
                self.v_init, self.v_width
            )));
        }
        Ok(())
    }

    pub fn v_max(&self) -> u8 {
        ((1u32 << self.v_width) - 1) as u8
    }

    pub fn alpha(&self) -> f64 {
        self.alpha_q as f64 / ALPHA_ONE as f64
    }

    /// Time constant realized by the quantized coefficient, `a / (512 - a)`.
    pub fn tau_eff(&self) -> f64 {
        self.alpha_q as f64 / (ALPHA_ONE - self.alpha_q as u32) as f64
    }

    /// Width of the multiplier output `a * v`.
    pub fn product_bits(&self) -> u32 {
        ALPHA_FRAC_BITS + self.v_width
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct DecayState {
    pub v: u8,
}

impl DecayState {
    pub fn started(params: &DecayParams) -> Self {
        DecayState { v: params.v_init }
    }

    pub fn is_expired(&self) -> bool {
        self.v == 0
    }
}

/// `alpha * v`.
pub fn ideal_iir_step(v: f64, alpha: f64) -> f64 {
    alpha * v
}

/// `v_init * alpha^t`.
pub fn ideal_value(v_init: f64, alpha: f64, t: u32) -> f64 {
    v_init * alpha.powi(t as i32)
}

/// Intermediate values of one stochastic step, for width checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StepDetail {
    /// Multiplier output `a * v`.
    pub product: u32,
    /// Fractional bits of the adder, `max(9, E)`.
    pub frac_bits: u32,
    pub aligned_product: u64,
    pub aligned_draw: u64,
    pub sum: u64,
    pub next: u8,
}

pub fn stochastic_step_detail(v: u8, alpha_q: u16, draw: Draw) -> StepDetail {
    let product = alpha_q as u32 * v as u32;
    let frac_bits = ALPHA_FRAC_BITS.max(draw.bits);
    let aligned_product = (product as u64) << (frac_bits - ALPHA_FRAC_BITS);
    let aligned_draw = (draw.k as u64) << (frac_bits - draw.bits);
    let sum = aligned_product + aligned_draw;
    StepDetail {
        product,
        frac_bits,
        aligned_product,
        aligned_draw,
        sum,
        next: (sum >> frac_bits) as u8,
    }
}

/// One stochastic decay step on the raw value.
#[inline]
pub fn step_value(v: u8, alpha_q: u16, draw: Draw) -> u8 {
    let product = alpha_q as u32 * v as u32;
    if draw.bits <= ALPHA_FRAC_BITS {
        ((product + (draw.k << (ALPHA_FRAC_BITS - draw.bits))) >> ALPHA_FRAC_BITS) as u8
    } else {
        let shift = draw.bits - ALPHA_FRAC_BITS;
        ((((product as u64) << shift) + draw.k as u64) >> draw.bits) as u8
    }
}

/// `V[t+1] = floor(alpha * V[t] + r[t])` on the integer grid.
#[inline]
pub fn stochastic_step(state: DecayState, params: &DecayParams, draw: Draw) -> DecayState {
    DecayState {
        v: step_value(state.v, params.alpha_q, draw),
    }
}

/// Decomposition of one step's decrement into a forced integer part and a
/// Bernoulli extra decrement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecrementLaw {
    pub forced: u32,
    /// Probability of the extra unit decrement.
    pub p: f64,
}

/// Exact decrement law of [`stochastic_step`] at `v` when the draw follows `grid`.
pub fn decrement_law(v: u8, params: &DecayParams, grid: &DrawGrid) -> Result<DecrementLaw> {
    if v == 0 {
        return Err(Error::Domain(
            "decrement probability is undefined at v = 0".into(),
        ));
    }
    let decrements: Vec<(u32, u64)> = grid
        .iter()
        .map(|(d, w)| ((v - step_value(v, params.alpha_q, d)) as u32, w))
        .collect();
    let forced = decrements
        .iter()
        .map(|&(d, _)| d)
        .min()
        .expect("grid has mass");
    let extra: u64 = decrements
        .iter()
        .filter(|&&(d, _)| d > forced)
        .map(|&(d, w)| {
            debug_assert_eq!(d, forced + 1);
            w
        })
        .sum();
    Ok(DecrementLaw {
        forced,
        p: extra as f64 / grid.total() as f64,
    })
}

/// Probability of the extra decrement at `v` on the draw grid.
pub fn decrement_probability(v: u8, params: &DecayParams, grid: &DrawGrid) -> Result<f64> {
    decrement_law(v, params, grid).map(|law| law.p)
}

/// Continuous-draw form: the fractional part of `v / (tau + 1)`.
pub fn ideal_decrement_probability(v: u8, tau: f64) -> Result<f64> {
    if v == 0 {
        return Err(Error::Domain(
            "decrement probability is undefined at v = 0".into(),
        ));
    }
    Ok((v as f64 / (tau + 1.0)) % 1.0)
}

/// Geometric law of the number of steps per stochastic decrement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecrementStats {
    pub p: f64,
    pub var_n: f64,
}

impl DecrementStats {
    /// `P(n) = (1 - p)^(n - 1) p` for `n >= 1`.
    pub fn pmf(&self, n: u64) -> f64 {
        if n == 0 {
            return 0.0;
        }
        (1.0 - self.p).powf((n - 1) as f64) * self.p
    }

    /// `P(N > n)`.
    pub fn survival(&self, n: u64) -> f64 {
        (1.0 - self.p).powf(n as f64)
    }

    pub fn mean(&self) -> f64 {
        1.0 / self.p
    }
}

pub fn geometric_law(p: f64) -> Result<DecrementStats> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::Domain(format!(
            "geometric law needs 0 < p <= 1, got {p} (p = 0 never decrements)"
        )));
    }
    Ok(DecrementStats {
        p,
        var_n: (1.0 - p) / (p * p),
    })
}

/// `((tau + 1) / v)^2 - (tau + 1) / v`, the variance for `p = v / (tau + 1)`.
pub fn ideal_steps_variance(tau: f64, v: u8) -> f64 {
    let ratio = (tau + 1.0) / v as f64;
    ratio * ratio - ratio
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Feasibility {
    Feasible,
    /// A decay at `v = 1` can never reach 0.
    Stall,
}

/// Whether `tau/(tau+1) + 2^-L < 1`, i.e. `tau < 2^L - 1`.
pub fn lfsr_feasibility(tau: u32, lfsr_bits: u32) -> Feasibility {
    if (tau as u64) < (1u64 << lfsr_bits) - 1 {
        Feasibility::Feasible
    } else {
        Feasibility::Stall
    }
}

/// Exact check for a quantized coefficient: can the smallest draw of `grid`
/// take `v = 1` to 0?
pub fn grid_feasibility(alpha_q: u16, grid: &DrawGrid) -> Feasibility {
    if step_value(1, alpha_q, grid.min_draw()) == 0 {
        Feasibility::Feasible
    } else {
        Feasibility::Stall
    }
}

/// Exact distribution of `V[t]` for `t = 0..=t_max`.
///
/// Propagates probability mass through the Markov chain on
/// `{0, ..., 2^v_width - 1}` induced by the stochastic step, enumerating
/// every grid draw at every state. Transitions are computed by exact integer
/// division of `a * v * 2^E + k * 512` by `512 * 2^E`, not through the
/// shift-based hardware path.
pub fn exact_expectation_oracle(
    params: &DecayParams,
    grid: &DrawGrid,
    t_max: usize,
) -> Vec<Vec<f64>> {
    let n_states = params.v_max() as usize + 1;
    let total = grid.total() as f64;
    let scale = 1u64 << grid.bits();
    let mut transition = vec![vec![0.0; n_states]; n_states];
    for (v, row) in transition.iter_mut().enumerate() {
        for (d, w) in grid.iter() {
            let num = params.alpha_q as u64 * v as u64 * scale + d.k as u64 * ALPHA_ONE as u64;
            let next = (num / (ALPHA_ONE as u64 * scale)) as usize;
            row[next] += w as f64 / total;
        }
    }

    let mut dist = vec![0.0; n_states];
    dist[params.v_init as usize] = 1.0;
    let mut out = Vec::with_capacity(t_max + 1);
    out.push(dist.clone());
    for _ in 0..t_max {
        let mut next = vec![0.0; n_states];
        for (v, &mass) in dist.iter().enumerate() {
            if mass == 0.0 {
                continue;
            }
            for (u, &p) in transition[v].iter().enumerate() {
                next[u] += mass * p;
            }
        }
        dist = next;
        out.push(dist.clone());
    }
    out
}

pub fn dist_mean(dist: &[f64]) -> f64 {
    dist.iter().enumerate().map(|(v, p)| v as f64 * p).sum()
}

pub fn dist_variance(dist: &[f64]) -> f64 {
    let m = dist_mean(dist);
    dist.iter()
        .enumerate()
        .map(|(v, p)| (v as f64 - m).powi(2) * p)
        .sum()
}

/// Runs the stochastic decay for `t_max` steps.
///
/// The returned trajectory has `t_max + 1` entries; entry 0 is `v_init`.
/// At each listed reset time the value is reloaded with `v_init` instead of
/// stepping. The source is advanced exactly once per step either way.
pub fn run_trace(
    params: &DecayParams,
    src: &mut RandomSource,
    reset_times: &[usize],
    t_max: usize,
) -> Vec<u8> {
    let mut v = params.v_init;
    let mut trace = Vec::with_capacity(t_max + 1);
    trace.push(v);
    for t in 1..=t_max {
        let draw = src.draw();
        v = if reset_times.contains(&t) {
            params.v_init
        } else {
            step_value(v, params.alpha_q, draw)
        };
        trace.push(v);
    }
    trace
}

/// Ideal IIR trajectory aligned with [`run_trace`] (same resets).
pub fn ideal_trace(params: &DecayParams, reset_times: &[usize], t_max: usize) -> Vec<f64> {
    let mut since = 0u32;
    (0..=t_max)
        .map(|t| {
            if t > 0 {
                since = if reset_times.contains(&t) {
                    0
                } else {
                    since + 1
                };
            }
            ideal_value(params.v_init as f64, params.alpha(), since)
        })
        .collect()
}

/// First step at which the trajectory reads 0.
pub fn time_to_zero(trace: &[u8]) -> Option<usize> {
    trace.iter().position(|&v| v == 0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn d5(k: u32) -> Draw {
        Draw::new(k, 5)
    }

    #[test]
    fn ideal_step_examples() {
        let y = ideal_iir_step(15.0, 30.0 / 31.0);
        assert!((y - 14.516129).abs() < 1e-6);
        assert!((15.0 - y - 15.0 / 31.0).abs() < 1e-12);
        assert_eq!(ideal_iir_step(0.0, 0.7), 0.0);
        assert!((ideal_iir_step(15.0, 495.0 / 512.0) - 14.501953125).abs() < 1e-12);
    }

    #[test]
    fn tau_conversion() {
        assert_eq!(alpha_q_from_tau(30), 495);
        assert_eq!(alpha_q_from_tau(31), 496);
        assert_eq!(alpha_q_from_tau(20), 488);
        let p = DecayParams::default();
        assert!((p.tau_eff() - 495.0 / 17.0).abs() < 1e-12);
    }

    #[test]
    fn stochastic_step_examples() {
        let p = DecayParams::default();
        let s = DecayState::started(&p);
        assert_eq!(stochastic_step(s, &p, d5(8)).v, 14);
        assert_eq!(stochastic_step(s, &p, d5(16)).v, 15);
        for k in 0..32 {
            assert_eq!(stochastic_step(DecayState { v: 0 }, &p, d5(k)).v, 0);
        }
    }

    #[test]
    fn wide_draws_use_extra_fraction_bits() {
        // 12-bit draw: 7425 * 8 + k >= 15 * 4096 iff k >= 2040
        assert_eq!(step_value(15, 495, Draw::new(2040, 12)), 15);
        assert_eq!(step_value(15, 495, Draw::new(2039, 12)), 14);
        let d = stochastic_step_detail(15, 495, Draw::new(2039, 12));
        assert_eq!(d.frac_bits, 12);
        assert_eq!(d.next, 14);
    }

    #[test]
    fn params_validation() {
        assert!(DecayParams::new(512, 4, 15).is_err());
        assert!(DecayParams::new(495, 4, 16).is_err());
        assert!(DecayParams::new(495, 0, 0).is_err());
        assert!(DecayParams::new(511, 4, 15).is_ok());
    }

    #[test]
    fn decrement_probability_examples() {
        let p = DecayParams::default();
        assert!((ideal_decrement_probability(15, 30.0).unwrap() - 15.0 / 31.0).abs() < 1e-12);
        assert!((ideal_decrement_probability(1, 30.0).unwrap() - 1.0 / 31.0).abs() < 1e-12);
        // 7425 + 16k < 7680 for k = 1..=15
        let law = decrement_law(15, &p, &DrawGrid::nonzero(5)).unwrap();
        assert_eq!(law.forced, 0);
        assert!((law.p - 15.0 / 31.0).abs() < 1e-12);
        assert!(decrement_probability(0, &p, &DrawGrid::nonzero(5)).is_err());
        assert!(ideal_decrement_probability(0, 30.0).is_err());
    }

    #[test]
    fn forced_decrement_for_fast_decays() {
        // alpha = 256/512: v = 15 -> 7.5 + r, always at least 7 lost.
        let p = DecayParams::with_alpha(256).unwrap();
        let law = decrement_law(15, &p, &DrawGrid::full(5)).unwrap();
        assert_eq!(law.forced, 7);
        assert!((law.p - 0.5).abs() < 1e-12);
    }

    #[test]
    fn geometric_examples() {
        let s = geometric_law(1.0 / 31.0).unwrap();
        assert!((s.var_n - 930.0).abs() < 1e-9);
        assert!((ideal_steps_variance(30.0, 1) - 930.0).abs() < 1e-9);
        let s = geometric_law(1.0).unwrap();
        assert_eq!(s.var_n, 0.0);
        assert_eq!(s.pmf(1), 1.0);
        assert_eq!(s.pmf(2), 0.0);
        let s = geometric_law(0.5).unwrap();
        assert_eq!((s.pmf(1), s.pmf(2), s.pmf(3)), (0.5, 0.25, 0.125));
        assert!(geometric_law(0.0).is_err());
        assert!(geometric_law(1.5).is_err());
    }

    #[test]
    fn geometric_pmf_sums_to_one() {
        for &p in &[0.01, 1.0 / 31.0, 0.3, 0.9] {
            let s = geometric_law(p).unwrap();
            let n_max = 5000;
            let sum: f64 = (1..=n_max).map(|n| s.pmf(n)).sum();
            assert!((sum - 1.0).abs() < 1e-9 + s.survival(n_max));
            assert!((sum + s.survival(n_max) - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn feasibility_examples() {
        assert_eq!(lfsr_feasibility(30, 5), Feasibility::Feasible);
        assert_eq!(lfsr_feasibility(31, 5), Feasibility::Stall);
        assert_eq!(lfsr_feasibility(30, 9), Feasibility::Feasible);
        assert_eq!(
            grid_feasibility(495, &DrawGrid::nonzero(5)),
            Feasibility::Feasible
        );
        assert_eq!(
            grid_feasibility(496, &DrawGrid::nonzero(5)),
            Feasibility::Stall
        );
        // a zero draw always lets v = 1 fall to 0
        assert_eq!(
            grid_feasibility(511, &DrawGrid::masked_lfsr(7, 5)),
            Feasibility::Feasible
        );
    }

    #[test]
    fn oracle_examples() {
        let p = DecayParams::default();
        let dists = exact_expectation_oracle(&p, &DrawGrid::nonzero(5), 200);
        assert_eq!(dists[0][15], 1.0);
        assert!((dists[1][14] - 15.0 / 31.0).abs() < 1e-12);
        assert!((dists[1][15] - 16.0 / 31.0).abs() < 1e-12);
        assert!((dists[1][14] + dists[1][15] - 1.0).abs() < 1e-12);
        for w in dists.windows(2) {
            assert!(w[1][0] >= w[0][0] - 1e-15);
        }
        for d in &dists {
            assert!((d.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn oracle_conditional_mean_is_v_minus_expected_decrement() {
        let p = DecayParams::default();
        let grid = DrawGrid::nonzero(5);
        for v in 1..=15u8 {
            let one = DecayParams { v_init: v, ..p };
            let d = exact_expectation_oracle(&one, &grid, 1);
            let law = decrement_law(v, &p, &grid).unwrap();
            let expected = v as f64 - law.forced as f64 - law.p;
            assert!((dist_mean(&d[1]) - expected).abs() < 1e-12, "v = {v}");
        }
    }

    #[test]
    fn trace_resets_and_staircase() {
        let p = DecayParams::default();
        let mut src = RandomSource::lfsr(5, 5, 1).unwrap();
        let trace = run_trace(&p, &mut src, &[], 199);
        assert_eq!(trace.len(), 200);
        assert_eq!(trace[0], 15);
        assert_eq!(*trace.last().unwrap(), 0);
        assert!(trace.windows(2).all(|w| w[1] <= w[0]));

        let mut src = RandomSource::lfsr(5, 5, 1).unwrap();
        let trace = run_trace(&p, &mut src, &[50], 100);
        assert_eq!(trace[50], 15);
        assert!(trace[49] < 15);
        let ideal = ideal_trace(&p, &[50], 100);
        assert_eq!(ideal[50], 15.0);
        assert!((ideal[51] - 15.0 * p.alpha()).abs() < 1e-12);
    }

    #[test]
    fn stall_at_tau_31() {
        let p = DecayParams {
            alpha_q: alpha_q_from_tau(31),
            v_init: 1,
            ..Default::default()
        };
        for seed in 1..32 {
            let mut src = RandomSource::lfsr(5, 5, seed).unwrap();
            let trace = run_trace(&p, &mut src, &[], 1000);
            assert!(trace.iter().all(|&v| v == 1));
        }
    }

    proptest! {
        #[test]
        fn step_never_increases(v in 0u8..16, a in 0u16..512, k in 0u32..32) {
            prop_assert!(step_value(v, a, d5(k)) <= v);
        }

        #[test]
        fn step_product_fits_thirteen_bits(v in 0u8..16, a in 0u16..512, k in 0u32..32) {
            let d = stochastic_step_detail(v, a, d5(k));
            prop_assert!(d.product < 1 << 13);
            prop_assert!(d.sum < 1 << 14);
            prop_assert_eq!(d.next, step_value(v, a, d5(k)));
        }

        #[test]
        fn trace_monotone_between_resets(seed in 1u32..128, a in 400u16..512) {
            let p = DecayParams::with_alpha(a).unwrap();
            let mut src = RandomSource::lfsr(7, 5, seed).unwrap();
            let trace = run_trace(&p, &mut src, &[], 300);
            prop_assert!(trace.windows(2).all(|w| w[1] <= w[0]));
        }
    }
}
