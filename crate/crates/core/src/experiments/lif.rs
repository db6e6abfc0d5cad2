use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Current-based leaky integrate-and-fire neuron, one update per tick, with
/// dimensionless potentials.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LifParams {
    pub tau_m: f64,
    pub v_rest: f64,
    pub v_thresh: f64,
    pub v_reset: f64,
    pub refractory_ticks: u32,
    /// Membrane drive per unit of synaptic weight per input spike.
    pub current_scale: f64,
}

impl Default for LifParams {
    fn default() -> Self {
        LifParams {
            tau_m: 20.0,
            v_rest: 0.0,
            v_thresh: 1.0,
            v_reset: 0.0,
            refractory_ticks: 1,
            current_scale: 1e-4,
        }
    }
}

impl LifParams {
    pub fn validate(&self) -> Result<()> {
        if self.v_reset.is_nan() || self.v_thresh.is_nan() || self.v_reset >= self.v_thresh {
            return Err(Error::config("LIF needs v_reset < v_thresh"));
        }
        if self.tau_m.is_nan() || self.tau_m < 1.0 {
            return Err(Error::config("LIF needs tau_m >= 1"));
        }
        if self.current_scale.is_nan() || self.current_scale < 0.0 {
            return Err(Error::config("LIF current_scale must be non-negative"));
        }
        Ok(())
    }
}

/// `v' = v + (v_rest - v) / tau_m + drive`; fires and resets at threshold.
pub fn lif_step(v_m: f64, input_drive: f64, params: &LifParams) -> (f64, bool) {
    let v = v_m + (params.v_rest - v_m) / params.tau_m + input_drive;
    if v >= params.v_thresh {
        (params.v_reset, true)
    } else {
        (v, false)
    }
}

#[derive(Debug, Clone)]
pub struct LifNeuron {
    pub params: LifParams,
    pub v_m: f64,
    refractory_left: u32,
}

impl LifNeuron {
    pub fn new(params: LifParams) -> Self {
        LifNeuron {
            params,
            v_m: params.v_rest,
            refractory_left: 0,
        }
    }

    /// Advances one tick. Input arriving during the refractory period is lost.
    pub fn step(&mut self, input_drive: f64) -> bool {
        if self.refractory_left > 0 {
            self.refractory_left -= 1;
            self.v_m = self.params.v_reset;
            return false;
        }
        let (v, fired) = lif_step(self.v_m, input_drive, &self.params);
        self.v_m = v;
        if fired {
            self.refractory_left = self.params.refractory_ticks;
        }
        fired
    }
}
