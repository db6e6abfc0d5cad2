//! Pair-based exponential STDP driven by the stochastic decay.
//!
//! One decay generator is shared by both spike kinds of an adaptor: every
//! spike restarts it, so a spike only ever pairs with the most recent spike
//! of the opposite kind and the weight change is the decay value read at
//! that moment.
//!
//! Sign convention: `delta_t = t_pre - t_post`. Negative `delta_t` (pre first)
//! potentiates.

use serde::{Deserialize, Serialize};

use crate::decay::{self, alpha_q_from_tau, DecayParams};
use crate::error::{Error, Result};
use crate::rng::RandomSource;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpikeKind {
    Pre,
    Post,
}

impl SpikeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SpikeKind::Pre => "pre",
            SpikeKind::Post => "post",
        }
    }
}

impl std::str::FromStr for SpikeKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim() {
            "pre" => Ok(SpikeKind::Pre),
            "post" => Ok(SpikeKind::Post),
            other => Err(format!("unknown spike kind {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecayCommand {
    Reset,
    None,
}

/// How weights are initialised.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case", deny_unknown_fields)]
pub enum WeightInit {
    /// Independent uniform integers in `[0, w_max]`.
    Uniform,
    Constant {
        value: u32,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StdpConfig {
    pub a_plus: f64,
    pub a_minus: f64,
    pub w_max: u32,
    pub w_init: WeightInit,
    pub tau_plus_steps: u32,
    pub tau_minus_steps: u32,
}

impl Default for StdpConfig {
    fn default() -> Self {
        StdpConfig {
            a_plus: 1.0,
            a_minus: 1.0,
            w_max: 1023,
            w_init: WeightInit::Uniform,
            tau_plus_steps: 20,
            tau_minus_steps: 20,
        }
    }
}

impl StdpConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.a_plus >= 0.0 && self.a_minus >= 0.0) {
            return Err(Error::config("STDP amplitudes must be non-negative"));
        }
        if self.w_max == 0 {
            return Err(Error::config("w_max must be positive"));
        }
        if let WeightInit::Constant { value } = self.w_init {
            if value > self.w_max {
                return Err(Error::config(format!(
                    "constant initial weight {value} exceeds w_max {}",
                    self.w_max
                )));
            }
        }
        if self.tau_plus_steps == 0 || self.tau_minus_steps == 0 {
            return Err(Error::config(
                "STDP time constants must be at least one step",
            ));
        }
        Ok(())
    }

    /// Coefficient for decays started by a spike of `kind`. A pre spike opens
    /// the potentiation window, a post spike the depression window.
    pub fn alpha_q_for(&self, kind: SpikeKind) -> u16 {
        match kind {
            SpikeKind::Pre => alpha_q_from_tau(self.tau_plus_steps),
            SpikeKind::Post => alpha_q_from_tau(self.tau_minus_steps),
        }
    }

    pub fn plasticity_enabled(&self) -> bool {
        self.a_plus > 0.0 || self.a_minus > 0.0
    }
}

/// `floor(x + 0.5)`.
pub fn round_half_up(x: f64) -> i64 {
    (x + 0.5).floor() as i64
}

/// Reference curve: `A+ exp(dt/tau+)` for `dt < 0`, `-A- exp(-dt/tau-)` otherwise.
pub fn ideal_delta_w(delta_t: i64, cfg: &StdpConfig) -> f64 {
    if delta_t < 0 {
        cfg.a_plus * (delta_t as f64 / cfg.tau_plus_steps as f64).exp()
    } else {
        -cfg.a_minus * (-(delta_t as f64) / cfg.tau_minus_steps as f64).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SpikeOutcome {
    pub command: DecayCommand,
    /// Signed change requested by the rule, before clamping.
    pub weight_delta: i64,
    pub old_weight: u32,
    pub new_weight: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AdaptorState {
    pub weight: u32,
    /// Kind of the spike that started the running decay.
    pub last_kind: Option<SpikeKind>,
}

impl AdaptorState {
    pub fn new(weight: u32) -> Self {
        AdaptorState {
            weight,
            last_kind: None,
        }
    }

    /// Applies one spike. `decay_v` is the adaptor's decay value at this step.
    pub fn on_spike(&mut self, kind: SpikeKind, decay_v: u8, cfg: &StdpConfig) -> SpikeOutcome {
        let weight_delta = match (self.last_kind, kind) {
            (Some(SpikeKind::Pre), SpikeKind::Post) => round_half_up(cfg.a_plus * decay_v as f64),
            (Some(SpikeKind::Post), SpikeKind::Pre) => -round_half_up(cfg.a_minus * decay_v as f64),
            _ => 0,
        };
        let old_weight = self.weight;
        self.weight = (old_weight as i64 + weight_delta).clamp(0, cfg.w_max as i64) as u32;
        self.last_kind = Some(kind);
        SpikeOutcome {
            command: DecayCommand::Reset,
            weight_delta,
            old_weight,
            new_weight: self.weight,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvePoint {
    pub delta_t: i64,
    pub mean_dw: f64,
    pub std_dw: f64,
}

/// Empirical STDP window of the hardware pipeline.
///
/// For each `delta_t`, runs `n_trials` isolated spike pairs `|delta_t|` steps
/// apart. The first spike starts the decay, the decay steps once per elapsed
/// step, and the second spike reads it. `src_factory(delta_t, trial)` supplies
/// a fresh source per trial. Simultaneous pairs produce no adaptation.
pub fn measure_stdp_curve<F>(
    cfg: &StdpConfig,
    params: &DecayParams,
    delta_ts: &[i64],
    n_trials: usize,
    mut src_factory: F,
) -> Vec<CurvePoint>
where
    F: FnMut(i64, usize) -> RandomSource,
{
    let start_weight = cfg.w_max / 2;
    delta_ts
        .iter()
        .map(|&dt| {
            let mut sum = 0.0;
            let mut sum_sq = 0.0;
            for trial in 0..n_trials {
                let dw = if dt == 0 {
                    0.0
                } else {
                    let mut src = src_factory(dt, trial);
                    let (first, second) = if dt < 0 {
                        (SpikeKind::Pre, SpikeKind::Post)
                    } else {
                        (SpikeKind::Post, SpikeKind::Pre)
                    };
                    let mut adaptor = AdaptorState::new(start_weight);
                    adaptor.on_spike(first, 0, cfg);
                    let mut v = params.v_init;
                    for _ in 0..dt.unsigned_abs() {
                        v = decay::step_value(v, params.alpha_q, src.draw());
                    }
                    let out = adaptor.on_spike(second, v, cfg);
                    out.new_weight as f64 - out.old_weight as f64
                };
                sum += dw;
                sum_sq += dw * dw;
            }
            let n = n_trials as f64;
            let mean = sum / n;
            let var = if n_trials > 1 {
                (sum_sq - n * mean * mean) / (n - 1.0)
            } else {
                0.0
            };
            CurvePoint {
                delta_t: dt,
                mean_dw: mean,
                std_dw: var.max(0.0).sqrt(),
            }
        })
        .collect()
}

/// Least-squares fit of `ln|mean_dw| = c - |delta_t| / tau` over the points
/// with a nonzero mean. Returns `tau`.
pub fn fit_decay_constant(points: &[CurvePoint]) -> Option<f64> {
    let xy: Vec<(f64, f64)> = points
        .iter()
        .filter(|p| p.delta_t != 0 && p.mean_dw.abs() > 0.0)
        .map(|p| (p.delta_t.unsigned_abs() as f64, p.mean_dw.abs().ln()))
        .collect();
    if xy.len() < 2 {
        return None;
    }
    let n = xy.len() as f64;
    let mx = xy.iter().map(|p| p.0).sum::<f64>() / n;
    let my = xy.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = xy.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = xy.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (slope < 0.0).then(|| -1.0 / slope)
}
