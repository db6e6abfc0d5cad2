//! Declarative TOML configuration shared by the command-line tools.
//!
//! Every section and key is optional; missing values take their defaults.
//! A nested table that is present starts from that type's own defaults, so a
//! `[balanced.engine.stdp]` table resets `a_minus` to 1 unless it is given.
//!
//! ```toml
//! seeds = [1, 2, 3, 4, 5]
//!
//! [decay]                 # single decay: decay-trace, variance-sweep
//! alpha_q = 495
//! v_width = 4
//! v_init = 15
//!
//! [engine]                # engine-run, stdp-curve
//! n_slots = 8192
//! alpha_table = [488]
//! v_width = 4
//! v_init = 15
//! weight_seed = 0
//! reset_on_simultaneous = true
//! [engine.rng]
//! kind = "lfsr"           # or "uniform" with seed and exclude_zero
//! width = 7
//! mask_bits = 5
//! seed = 1
//! [engine.stdp]
//! a_plus = 1.0
//! a_minus = 1.0
//! w_max = 1023
//! tau_plus_steps = 20
//! tau_minus_steps = 20
//! w_init = { policy = "uniform" }   # or { policy = "constant", value = 512 }
//! [engine.clock]
//! cycles_per_slot = 25
//! clock_hz = 200000000
//! tick_period_ns = 1024000
//!
//! [balanced]              # balanced-excitation; has its own engine and neuron
//! n_synapses = 1000
//! rate_hz = 10.0
//! duration_ticks = 100000
//! post_delay_ticks = 1
//! n_inhibitory = 200
//! inhibitory_drive = 0.2
//! bins = 20
//! snapshot_interval = 10000
//! [balanced.lif]
//! tau_m = 20.0
//! current_scale = 1e-4
//! [balanced.engine.stdp]
//! a_minus = 1.05
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::decay::DecayParams;
use crate::engine::EngineConfig;
use crate::error::Result;
use crate::experiments::BalancedConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    pub seeds: Vec<u64>,
    pub decay: DecayParams,
    pub engine: EngineConfig,
    pub balanced: BalancedConfig,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            seeds: vec![1],
            decay: DecayParams::default(),
            engine: EngineConfig::default(),
            balanced: BalancedConfig::default(),
        }
    }
}

impl SimConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: SimConfig = toml::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.decay.validate()?;
        self.engine.validate()?;
        self.balanced.validate()
    }
}
