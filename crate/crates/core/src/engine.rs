//! Time-multiplexed STDP adaptor array.
//!
//! One physical adaptor and one physical decay generator serve `n_slots`
//! virtual units. Per-unit state lives in two memories, the Decay RAM (one
//! `v_width`-bit cell per slot) and the weight store. Every tick the global
//! counter visits slots `0..n_slots` in order. A single random source is
//! shared by all slots and advanced once per slot visit, so slot `i` at tick
//! `t` always consumes draw number `t * n_slots + i`.
//!
//! Per slot visit:
//! 1. read `v` from the Decay RAM and take the next draw;
//! 2. step the decay, `v' = floor(alpha * v + r)`;
//! 3. no spike: store `v'`;
//! 4. a single pre or post spike: run the adaptor with `v'` as the decay
//!    value, update the weight, store `v_init`;
//! 5. pre and post in the same tick: no adaptation; the decay restarts
//!    (or keeps running, see [`EngineConfig::reset_on_simultaneous`]).

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::decay::{self, alpha_q_from_tau, DecayParams, ALPHA_ONE, MAX_V_WIDTH};
use crate::error::{Error, Result};
use crate::rng::{Draw, RandomSource, RngConfig};
use crate::stdp::{AdaptorState, SpikeKind, StdpConfig, WeightInit};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SpikeEvent {
    pub tick: u64,
    pub addr: usize,
    pub kind: SpikeKind,
}

impl SpikeEvent {
    pub fn new(tick: u64, addr: usize, kind: SpikeKind) -> Self {
        SpikeEvent { tick, addr, kind }
    }
}

/// What arrived at one slot during one tick.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlotSpikes {
    Pre,
    Post,
    Both,
}

impl SlotSpikes {
    fn add(current: Option<SlotSpikes>, kind: SpikeKind) -> SlotSpikes {
        match (current, kind) {
            (None, SpikeKind::Pre) | (Some(SlotSpikes::Pre), SpikeKind::Pre) => SlotSpikes::Pre,
            (None, SpikeKind::Post) | (Some(SlotSpikes::Post), SpikeKind::Post) => SlotSpikes::Post,
            _ => SlotSpikes::Both,
        }
    }
}

/// Per-slot summary of one tick's spikes. Slots absent from the map saw nothing.
pub type RoutedSpikes = BTreeMap<usize, SlotSpikes>;

/// Controller: sorts one tick's addressed spikes onto their slots.
pub fn route_spikes(events: &[SpikeEvent], tick: u64, n_slots: usize) -> Result<RoutedSpikes> {
    let mut routed = RoutedSpikes::new();
    for &event in events {
        if event.tick != tick {
            return Err(Error::WrongTick { event, tick });
        }
        if event.addr >= n_slots {
            return Err(Error::Routing { event, n_slots });
        }
        let slot = routed.entry(event.addr).or_insert(match event.kind {
            SpikeKind::Pre => SlotSpikes::Pre,
            SpikeKind::Post => SlotSpikes::Post,
        });
        *slot = SlotSpikes::add(Some(*slot), event.kind);
    }
    Ok(routed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClockModel {
    pub cycles_per_slot: u64,
    pub clock_hz: u64,
    /// Length of one time step. The default is the hardware's own schedule,
    /// 8192 slots of 125 ns.
    pub tick_period_ns: u64,
}

impl Default for ClockModel {
    fn default() -> Self {
        ClockModel {
            cycles_per_slot: 25,
            clock_hz: 200_000_000,
            tick_period_ns: 1_024_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EngineConfig {
    pub n_slots: usize,
    /// Coefficients selectable by the alpha multiplexer; slot `i` uses entry
    /// `i % len`.
    pub alpha_table: Vec<u16>,
    /// Coefficients for decays started by a post spike. When absent the
    /// decays of both kinds use `alpha_table`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub post_alpha_table: Option<Vec<u16>>,
    pub v_width: u32,
    pub v_init: u8,
    pub rng: RngConfig,
    pub stdp: StdpConfig,
    /// Seed for the uniform weight initialisation.
    pub weight_seed: u64,
    pub clock: ClockModel,
    /// Whether coincident pre and post spikes restart the decay.
    pub reset_on_simultaneous: bool,
}

impl Default for EngineConfig {
    fn default() -> Self {
        let stdp = StdpConfig::default();
        EngineConfig {
            n_slots: 8192,
            alpha_table: vec![alpha_q_from_tau(stdp.tau_plus_steps)],
            post_alpha_table: None,
            v_width: 4,
            v_init: 15,
            rng: RngConfig::hardware(1),
            stdp,
            weight_seed: 0,
            clock: ClockModel::default(),
            reset_on_simultaneous: true,
        }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_slots == 0 {
            return Err(Error::config("n_slots must be positive"));
        }
        let check_table = |name: &str, t: &[u16]| -> Result<()> {
            if t.is_empty() {
                return Err(Error::config(format!("{name} is empty")));
            }
            if let Some(a) = t.iter().find(|&&a| a as u32 >= ALPHA_ONE) {
                return Err(Error::config(format!("{name} entry {a} must be < 512")));
            }
            Ok(())
        };
        check_table("alpha_table", &self.alpha_table)?;
        if let Some(t) = &self.post_alpha_table {
            check_table("post_alpha_table", t)?;
        }
        if self.v_width == 0 || self.v_width > MAX_V_WIDTH {
            return Err(Error::config(format!(
                "v_width {} outside 1..={MAX_V_WIDTH}",
                self.v_width
            )));
        }
        if self.v_init as u32 > (1 << self.v_width) - 1 {
            return Err(Error::config(format!(
                "v_init {} does not fit in {} bits",
                self.v_init, self.v_width
            )));
        }
        self.stdp.validate()?;
        RandomSource::from_config(&self.rng)?;
        if self.clock.clock_hz == 0 || self.clock.cycles_per_slot == 0 {
            return Err(Error::config(
                "clock model needs positive cycles and frequency",
            ));
        }
        Ok(())
    }

    /// Coefficient used by `slot` for a decay started by `started_by`.
    #[inline]
    pub fn alpha_for(&self, slot: usize, started_by: Option<SpikeKind>) -> u16 {
        let table = match (started_by, &self.post_alpha_table) {
            (Some(SpikeKind::Post), Some(t)) => t,
            _ => &self.alpha_table,
        };
        table[slot % table.len()]
    }

    /// Decay parameters seen by one slot for decays started by `started_by`.
    pub fn decay_params(&self, slot: usize, started_by: Option<SpikeKind>) -> DecayParams {
        DecayParams {
            alpha_q: self.alpha_for(slot, started_by),
            v_width: self.v_width,
            v_init: self.v_init,
        }
    }

    /// Initial weight store contents.
    pub fn initial_weights(&self) -> Vec<u32> {
        match self.stdp.w_init {
            WeightInit::Constant { value } => vec![value; self.n_slots],
            WeightInit::Uniform => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.weight_seed);
                (0..self.n_slots)
                    .map(|_| rng.gen_range(0..=self.stdp.w_max))
                    .collect()
            }
        }
    }
}

/// `n_slots` cells of `v_width` bits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecayRam {
    cells: Vec<u8>,
    v_width: u32,
}

impl DecayRam {
    pub fn new(n_slots: usize, v_width: u32) -> Self {
        DecayRam {
            cells: vec![0; n_slots],
            v_width,
        }
    }

    pub fn cells(&self) -> &[u8] {
        &self.cells
    }

    /// Modeled capacity in bits.
    pub fn capacity_bits(&self) -> usize {
        self.cells.len() * self.v_width as usize
    }

    #[inline]
    pub fn read(&self, slot: usize) -> u8 {
        self.cells[slot]
    }

    #[inline]
    pub fn write(&mut self, slot: usize, v: u8) {
        debug_assert!((v as u32) < (1 << self.v_width));
        self.cells[slot] = v;
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WeightStore {
    cells: Vec<u32>,
    w_max: u32,
}

impl WeightStore {
    pub fn new(cells: Vec<u32>, w_max: u32) -> Self {
        WeightStore { cells, w_max }
    }

    pub fn cells(&self) -> &[u32] {
        &self.cells
    }

    pub fn w_max(&self) -> u32 {
        self.w_max
    }

    #[inline]
    pub fn read(&self, slot: usize) -> u32 {
        self.cells[slot]
    }

    #[inline]
    pub fn write(&mut self, slot: usize, w: u32) {
        debug_assert!(w <= self.w_max);
        self.cells[slot] = w;
    }
}

/// A weight change, as sent out to the post-synaptic neuron.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct WeightUpdate {
    pub tick: u64,
    pub addr: usize,
    pub old_w: u32,
    pub new_w: u32,
}

/// Updated state of one slot after a visit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct SlotResult {
    v: u8,
    weight: u32,
    last_kind: Option<SpikeKind>,
}

#[inline]
fn visit_slot(
    cfg: &EngineConfig,
    slot: usize,
    v: u8,
    weight: u32,
    last_kind: Option<SpikeKind>,
    draw: Draw,
    spikes: Option<SlotSpikes>,
) -> SlotResult {
    let stepped = decay::step_value(v, cfg.alpha_for(slot, last_kind), draw);
    match spikes {
        None => SlotResult {
            v: stepped,
            weight,
            last_kind,
        },
        Some(SlotSpikes::Both) => {
            if cfg.reset_on_simultaneous {
                SlotResult {
                    v: cfg.v_init,
                    weight,
                    last_kind: None,
                }
            } else {
                SlotResult {
                    v: stepped,
                    weight,
                    last_kind,
                }
            }
        }
        Some(SlotSpikes::Pre) | Some(SlotSpikes::Post) => {
            let kind = if spikes == Some(SlotSpikes::Pre) {
                SpikeKind::Pre
            } else {
                SpikeKind::Post
            };
            let mut adaptor = AdaptorState { weight, last_kind };
            adaptor.on_spike(kind, stepped, &cfg.stdp);
            SlotResult {
                v: cfg.v_init,
                weight: adaptor.weight,
                last_kind: adaptor.last_kind,
            }
        }
    }
}

/// The time-multiplexed engine and its memories.
#[derive(Debug, Clone)]
pub struct Engine {
    cfg: EngineConfig,
    tick: u64,
    decay_ram: DecayRam,
    weights: WeightStore,
    last_kind: Vec<Option<SpikeKind>>,
    src: RandomSource,
}

impl Engine {
    pub fn new(cfg: EngineConfig) -> Result<Self> {
        cfg.validate()?;
        let src = RandomSource::from_config(&cfg.rng)?;
        let weights = WeightStore::new(cfg.initial_weights(), cfg.stdp.w_max);
        Ok(Engine {
            decay_ram: DecayRam::new(cfg.n_slots, cfg.v_width),
            last_kind: vec![None; cfg.n_slots],
            weights,
            src,
            tick: 0,
            cfg,
        })
    }

    pub fn config(&self) -> &EngineConfig {
        &self.cfg
    }

    /// Index of the next tick to run.
    pub fn tick_index(&self) -> u64 {
        self.tick
    }

    pub fn decay_ram(&self) -> &DecayRam {
        &self.decay_ram
    }

    pub fn weights(&self) -> &WeightStore {
        &self.weights
    }

    pub fn last_kind(&self, slot: usize) -> Option<SpikeKind> {
        self.last_kind[slot]
    }

    /// Runs one tick. `events` must all carry the current tick.
    /// Nothing is modified when routing fails.
    pub fn tick(&mut self, events: &[SpikeEvent]) -> Result<Vec<WeightUpdate>> {
        let routed = route_spikes(events, self.tick, self.cfg.n_slots)?;
        let mut updates = Vec::new();
        let mut pending = routed.iter().peekable();
        for slot in 0..self.cfg.n_slots {
            let spikes = match pending.peek() {
                Some(&(&addr, &s)) if addr == slot => {
                    pending.next();
                    Some(s)
                }
                _ => None,
            };
            let draw = self.src.draw();
            let old_w = self.weights.read(slot);
            let r = visit_slot(
                &self.cfg,
                slot,
                self.decay_ram.read(slot),
                old_w,
                self.last_kind[slot],
                draw,
                spikes,
            );
            self.decay_ram.write(slot, r.v);
            self.last_kind[slot] = r.last_kind;
            if r.weight != old_w {
                self.weights.write(slot, r.weight);
                updates.push(WeightUpdate {
                    tick: self.tick,
                    addr: slot,
                    old_w,
                    new_w: r.weight,
                });
            }
        }
        self.tick += 1;
        Ok(updates)
    }

    /// Same result as [`Engine::tick`]; the tick's draws are taken up front in
    /// slot order and the slots are then processed in parallel.
    pub fn tick_parallel(&mut self, events: &[SpikeEvent]) -> Result<Vec<WeightUpdate>> {
        let routed = route_spikes(events, self.tick, self.cfg.n_slots)?;
        let draws: Vec<Draw> = (0..self.cfg.n_slots).map(|_| self.src.draw()).collect();
        let cfg = &self.cfg;
        let tick = self.tick;
        let updates: Vec<WeightUpdate> = self
            .decay_ram
            .cells
            .par_iter_mut()
            .zip(self.weights.cells.par_iter_mut())
            .zip(self.last_kind.par_iter_mut())
            .zip(draws.par_iter())
            .enumerate()
            .filter_map(|(slot, (((v, w), last), &draw))| {
                let old_w = *w;
                let r = visit_slot(
                    cfg,
                    slot,
                    *v,
                    old_w,
                    *last,
                    draw,
                    routed.get(&slot).copied(),
                );
                *v = r.v;
                *w = r.weight;
                *last = r.last_kind;
                (r.weight != old_w).then_some(WeightUpdate {
                    tick,
                    addr: slot,
                    old_w,
                    new_w: r.weight,
                })
            })
            .collect();
        self.tick += 1;
        Ok(updates)
    }

    /// Runs `ticks` ticks over a tick-sorted or unsorted event list. Events at
    /// or beyond the horizon are not delivered.
    pub fn run(&mut self, events: &[SpikeEvent], ticks: u64) -> Result<Vec<WeightUpdate>> {
        let by_tick = group_by_tick(events);
        let mut updates = Vec::new();
        let empty = Vec::new();
        for _ in 0..ticks {
            let evs = by_tick.get(&self.tick).unwrap_or(&empty);
            updates.extend(self.tick(evs)?);
        }
        Ok(updates)
    }
}

fn group_by_tick(events: &[SpikeEvent]) -> BTreeMap<u64, Vec<SpikeEvent>> {
    let mut by_tick: BTreeMap<u64, Vec<SpikeEvent>> = BTreeMap::new();
    for &e in events {
        by_tick.entry(e.tick).or_default().push(e);
    }
    by_tick
}

/// Final memories of a run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlatState {
    pub weights: Vec<u32>,
    pub decay: Vec<u8>,
}

/// One adaptor with its own decay generator.
#[derive(Debug, Clone, Copy)]
struct VirtualUnit {
    adaptor: AdaptorState,
    v: u8,
}

/// Reference for the engine: `n_slots` separate adaptor + generator units,
/// each run over the whole horizon on its own, fed with the slice of the
/// shared random stream the hardware would give it.
pub fn flattened_reference(
    cfg: &EngineConfig,
    events: &[SpikeEvent],
    ticks: u64,
) -> Result<FlatState> {
    cfg.validate()?;
    let n = cfg.n_slots;
    let mut per_slot: Vec<BTreeMap<u64, SlotSpikes>> = vec![BTreeMap::new(); n];
    for &e in events {
        if e.addr >= n {
            return Err(Error::Routing {
                event: e,
                n_slots: n,
            });
        }
        if e.tick < ticks {
            let entry = per_slot[e.addr].get(&e.tick).copied();
            per_slot[e.addr].insert(e.tick, SlotSpikes::add(entry, e.kind));
        }
    }

    let mut src = RandomSource::from_config(&cfg.rng)?;
    let bits = src.mask_bits();
    let stream: Vec<u16> = (0..ticks as usize * n)
        .map(|_| src.draw().k as u16)
        .collect();

    let weights0 = cfg.initial_weights();
    let mut out = FlatState {
        weights: Vec::with_capacity(n),
        decay: Vec::with_capacity(n),
    };
    for slot in 0..n {
        let mut unit = VirtualUnit {
            adaptor: AdaptorState::new(weights0[slot]),
            v: 0,
        };
        for t in 0..ticks {
            let draw = Draw::new(stream[t as usize * n + slot] as u32, bits);
            let params = cfg.decay_params(slot, unit.adaptor.last_kind);
            let stepped = decay::step_value(unit.v, params.alpha_q, draw);
            match per_slot[slot].get(&t) {
                None => unit.v = stepped,
                Some(SlotSpikes::Both) => {
                    if cfg.reset_on_simultaneous {
                        unit.v = params.v_init;
                        unit.adaptor.last_kind = None;
                    } else {
                        unit.v = stepped;
                    }
                }
                Some(&s) => {
                    let kind = if s == SlotSpikes::Pre {
                        SpikeKind::Pre
                    } else {
                        SpikeKind::Post
                    };
                    unit.adaptor.on_spike(kind, stepped, &cfg.stdp);
                    unit.v = params.v_init;
                }
            }
        }
        out.weights.push(unit.adaptor.weight);
        out.decay.push(unit.v);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CycleReport {
    pub ticks: u64,
    /// Duration of one full slot sweep.
    pub schedule_ns: f64,
    pub tick_period_ns: u64,
    /// Modeled hardware time for `ticks` sweeps.
    pub modeled_seconds: f64,
    /// `true` when a sweep does not fit into one tick.
    pub overrun: bool,
}

pub fn cycle_accounting(cfg: &EngineConfig, ticks: u64) -> CycleReport {
    let cycles_per_tick = cfg.n_slots as u128 * cfg.clock.cycles_per_slot as u128;
    let clock = cfg.clock.clock_hz as u128;
    CycleReport {
        ticks,
        schedule_ns: cycles_per_tick as f64 * 1e9 / clock as f64,
        tick_period_ns: cfg.clock.tick_period_ns,
        modeled_seconds: ticks as f64 * cycles_per_tick as f64 / clock as f64,
        overrun: cycles_per_tick * 1_000_000_000 > cfg.clock.tick_period_ns as u128 * clock,
    }
}
