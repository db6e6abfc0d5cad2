use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::lif::{LifNeuron, LifParams};
use super::poisson::{poisson_train, TICKS_PER_SECOND};
use crate::engine::{Engine, EngineConfig, SpikeEvent};
use crate::error::{Error, Result};
use crate::stdp::SpikeKind;

/// Bin count used by reports.
pub const DEFAULT_BINS: usize = 20;

/// Weight counts over `counts.len()` equal bins spanning `[0, w_max]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Histogram {
    pub w_max: u32,
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn from_weights(weights: &[u32], w_max: u32, bins: usize) -> Result<Self> {
        if bins == 0 || !bins.is_multiple_of(10) {
            return Err(Error::config(format!(
                "bin count {bins} must be a positive multiple of 10"
            )));
        }
        let mut counts = vec![0u64; bins];
        let span = w_max as u64 + 1;
        for &w in weights {
            if w > w_max {
                return Err(Error::Domain(format!("weight {w} exceeds w_max {w_max}")));
            }
            counts[(w as u64 * bins as u64 / span) as usize] += 1;
        }
        Ok(Histogram { w_max, counts })
    }

    pub fn bins(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Half-open weight range `[low, high)` covered by bin `i`, in weight units.
    pub fn bin_range(&self, i: usize) -> (f64, f64) {
        let width = (self.w_max as f64 + 1.0) / self.bins() as f64;
        (i as f64 * width, (i + 1) as f64 * width)
    }
}

/// `(outer_fraction, middle_fraction)`: the mass in the lowest and highest
/// tenth of the range, and the mass in the central 60%.
pub fn bimodality_metric(hist: &Histogram) -> Result<(f64, f64)> {
    let b = hist.bins();
    let total = hist.total();
    if b == 0 || !b.is_multiple_of(10) || total == 0 {
        return Err(Error::Domain(
            "bimodality needs a nonempty histogram whose bin count is a multiple of 10".into(),
        ));
    }
    let dec = b / 10;
    let sum = |r: std::ops::Range<usize>| hist.counts[r].iter().sum::<u64>() as f64;
    let outer = sum(0..dec) + sum(b - dec..b);
    let middle = sum(2 * dec..8 * dec);
    Ok((outer / total as f64, middle / total as f64))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BimodalityReport {
    pub histogram: Histogram,
    pub initial_histogram: Histogram,
    pub outer_fraction: f64,
    pub middle_fraction: f64,
    pub mean_rate_hz: f64,
    pub output_spikes: u64,
    pub input_spikes: u64,
    pub seed: u64,
    pub snapshots: Vec<Snapshot>,
    pub final_weights: Vec<u32>,
}

/// Metric state after `tick` ticks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub tick: u64,
    pub outer_fraction: f64,
    pub middle_fraction: f64,
    /// Mass in the highest tenth alone.
    pub top_fraction: f64,
    /// Output rate since the previous snapshot.
    pub rate_hz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BalancedConfig {
    pub n_synapses: usize,
    pub rate_hz: f64,
    pub duration_ticks: u64,
    pub engine: EngineConfig,
    pub lif: LifParams,
    /// Ticks between an output spike and its post events reaching the
    /// adaptors. With 0 the inputs that caused the spike coincide with it.
    pub post_delay_ticks: u64,
    pub bins: usize,
    /// Non-plastic inhibitory Poisson inputs at `rate_hz`; each spike
    /// subtracts `inhibitory_drive` from the neuron.
    pub n_inhibitory: usize,
    pub inhibitory_drive: f64,
    /// Record the metric every this many ticks; 0 disables.
    pub snapshot_interval: u64,
}

impl Default for BalancedConfig {
    fn default() -> Self {
        let mut engine = EngineConfig::default();
        engine.stdp.a_minus = 1.05;
        BalancedConfig {
            n_synapses: 1000,
            rate_hz: 10.0,
            duration_ticks: 100_000,
            engine,
            lif: LifParams::default(),
            post_delay_ticks: 1,
            bins: DEFAULT_BINS,
            n_inhibitory: 200,
            inhibitory_drive: 0.2,
            snapshot_interval: 10_000,
        }
    }
}

impl BalancedConfig {
    pub fn validate(&self) -> Result<()> {
        self.engine.validate()?;
        self.lif.validate()?;
        if self.n_synapses > self.engine.n_slots {
            return Err(Error::config(format!(
                "{} synapses do not fit in {} slots",
                self.n_synapses, self.engine.n_slots
            )));
        }
        if self.n_synapses == 0 {
            return Err(Error::config("need at least one synapse"));
        }
        if !(0.0..=TICKS_PER_SECOND).contains(&self.rate_hz) {
            return Err(Error::config(format!(
                "rate {} Hz outside [0, 1000]",
                self.rate_hz
            )));
        }
        if self.inhibitory_drive.is_nan() || self.inhibitory_drive < 0.0 {
            return Err(Error::config("inhibitory_drive must be non-negative"));
        }
        if self.bins == 0 || !self.bins.is_multiple_of(10) {
            return Err(Error::config("bins must be a positive multiple of 10"));
        }
        Ok(())
    }

    /// Engine configuration actually used for `seed`: the weight
    /// initialisation and the decay random source are both reseeded.
    pub fn engine_for_seed(&self, seed: u64) -> EngineConfig {
        let mut e = self.engine.clone();
        e.weight_seed = seed;
        e.rng = e.rng.reseeded(seed);
        e
    }
}

/// Excitatory spike addresses grouped by tick, and inhibitory spike counts.
fn input_schedule(cfg: &BalancedConfig, seed: u64) -> Result<(Vec<Vec<u32>>, Vec<u32>)> {
    let mut seeds = ChaCha8Rng::seed_from_u64(seed ^ 0x05ee_d0f1_a7e5_u64);
    let mut by_tick = vec![Vec::new(); cfg.duration_ticks as usize];
    for addr in 0..cfg.n_synapses {
        for t in poisson_train(cfg.rate_hz, cfg.duration_ticks, seeds.next_u64())? {
            by_tick[t as usize].push(addr as u32);
        }
    }
    let mut inhibitory = vec![0u32; cfg.duration_ticks as usize];
    for _ in 0..cfg.n_inhibitory {
        for t in poisson_train(cfg.rate_hz, cfg.duration_ticks, seeds.next_u64())? {
            inhibitory[t as usize] += 1;
        }
    }
    Ok((by_tick, inhibitory))
}

/// Poisson inputs drive one LIF neuron through the engine. Each excitatory
/// spike is a pre event for its adaptor and adds `weight * current_scale` to
/// the neuron, using the weight held before this tick's update. Inhibitory
/// inputs only reach the neuron. Each output spike
/// becomes a post event on every synapse `post_delay_ticks` later.
pub fn run_balanced_excitation(cfg: &BalancedConfig, seed: u64) -> Result<BimodalityReport> {
    cfg.validate()?;
    let ecfg = cfg.engine_for_seed(seed);
    let mut engine = Engine::new(ecfg)?;
    let n = cfg.n_synapses;
    let w_max = cfg.engine.stdp.w_max;
    let initial_histogram =
        Histogram::from_weights(&engine.weights().cells()[..n], w_max, cfg.bins)?;

    let (schedule, inhibitory) = input_schedule(cfg, seed)?;
    let mut neuron = LifNeuron::new(cfg.lif);
    // ticks at which post events are due
    let mut post_due = std::collections::VecDeque::new();
    let mut events = Vec::new();
    let (mut output_spikes, mut input_spikes) = (0u64, 0u64);
    let mut snapshots = Vec::new();
    let mut spikes_at_last_snapshot = 0u64;

    for (t, inputs) in schedule.iter().enumerate() {
        let t = t as u64;
        let weights = engine.weights();
        let drive: f64 = inputs
            .iter()
            .map(|&a| weights.read(a as usize) as f64)
            .sum::<f64>()
            * cfg.lif.current_scale
            - inhibitory[t as usize] as f64 * cfg.inhibitory_drive;
        input_spikes += inputs.len() as u64;
        if neuron.step(drive) {
            output_spikes += 1;
            post_due.push_back(t + cfg.post_delay_ticks);
        }
        events.clear();
        events.extend(
            inputs
                .iter()
                .map(|&a| SpikeEvent::new(t, a as usize, SpikeKind::Pre)),
        );
        while post_due.front() == Some(&t) {
            post_due.pop_front();
            events.extend((0..n).map(|a| SpikeEvent::new(t, a, SpikeKind::Post)));
        }
        engine.tick(&events)?;
        let done = t + 1;
        if cfg.snapshot_interval > 0 && done.is_multiple_of(cfg.snapshot_interval) {
            let h = Histogram::from_weights(&engine.weights().cells()[..n], w_max, cfg.bins)?;
            let (outer_fraction, middle_fraction) = bimodality_metric(&h)?;
            let dec = h.bins() / 10;
            let top = h.counts[h.bins() - dec..].iter().sum::<u64>() as f64 / n as f64;
            snapshots.push(Snapshot {
                tick: done,
                outer_fraction,
                middle_fraction,
                top_fraction: top,
                rate_hz: (output_spikes - spikes_at_last_snapshot) as f64 * TICKS_PER_SECOND
                    / cfg.snapshot_interval as f64,
            });
            spikes_at_last_snapshot = output_spikes;
        }
    }

    let final_weights = engine.weights().cells()[..n].to_vec();
    let histogram = Histogram::from_weights(&final_weights, w_max, cfg.bins)?;
    let (outer_fraction, middle_fraction) = bimodality_metric(&histogram)?;
    let mean_rate_hz = if cfg.duration_ticks == 0 {
        0.0
    } else {
        output_spikes as f64 * TICKS_PER_SECOND / cfg.duration_ticks as f64
    };
    Ok(BimodalityReport {
        histogram,
        initial_histogram,
        outer_fraction,
        middle_fraction,
        mean_rate_hz,
        output_spikes,
        input_spikes,
        seed,
        snapshots,
        final_weights,
    })
}

/// Independent runs for several seeds, in parallel.
pub fn run_balanced_seeds(cfg: &BalancedConfig, seeds: &[u64]) -> Result<Vec<BimodalityReport>> {
    use rayon::prelude::*;
    cfg.validate()?;
    seeds
        .par_iter()
        .map(|&s| run_balanced_excitation(cfg, s))
        .collect()
}
