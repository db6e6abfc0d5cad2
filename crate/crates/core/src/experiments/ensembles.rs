use rayon::prelude::*;
use serde::Serialize;

use crate::decay::{exact_expectation_oracle, ideal_trace, run_trace, time_to_zero, DecayParams};
use crate::error::Result;
use crate::rng::{DrawGrid, LfsrState, RandomSource};

/// Every seed of one LFSR width, run from `v_init` with full-width draws.
#[derive(Debug, Clone, Serialize)]
pub struct Ensemble {
    pub lfsr_width: u32,
    pub seeds: Vec<u32>,
    pub traces: Vec<Vec<u8>>,
    /// `None` when the trace had not reached 0 by the horizon.
    pub time_to_zero: Vec<Option<usize>>,
    pub ttz_mean: f64,
    /// Population variance over the seeds that reached 0.
    pub ttz_variance: f64,
    pub mean_trace: Vec<f64>,
    /// Expectation from the exact Markov-chain oracle for the uniform draw grid.
    pub oracle_mean: Vec<f64>,
    /// `max_t |mean_trace[t] - ideal[t]|`.
    pub max_dev_from_ideal: f64,
}

impl Ensemble {
    pub fn run(params: &DecayParams, lfsr_width: u32, horizon: usize) -> Result<Self> {
        params.validate()?;
        let n_seeds = (1u32 << lfsr_width) - 1;
        let seeds: Vec<u32> = (1..=n_seeds).collect();
        let traces = seeds
            .par_iter()
            .map(|&s| {
                let mut src = RandomSource::from_lfsr(
                    LfsrState::with_default_taps(lfsr_width, s)?,
                    lfsr_width,
                )?;
                Ok(run_trace(params, &mut src, &[], horizon))
            })
            .collect::<Result<Vec<_>>>()?;
        let time_to_zero: Vec<Option<usize>> = traces.iter().map(|t| time_to_zero(t)).collect();
        let hit: Vec<f64> = time_to_zero.iter().flatten().map(|&z| z as f64).collect();
        let ttz_mean = hit.iter().sum::<f64>() / hit.len().max(1) as f64;
        let ttz_variance =
            hit.iter().map(|z| (z - ttz_mean).powi(2)).sum::<f64>() / hit.len().max(1) as f64;
        let mean_trace: Vec<f64> = (0..=horizon)
            .map(|t| traces.iter().map(|tr| tr[t] as f64).sum::<f64>() / traces.len() as f64)
            .collect();
        let grid = DrawGrid::nonzero(lfsr_width);
        let oracle_mean = exact_expectation_oracle(params, &grid, horizon)
            .iter()
            .map(|d| crate::decay::dist_mean(d))
            .collect();
        let ideal = ideal_trace(params, &[], horizon);
        let max_dev_from_ideal = mean_trace
            .iter()
            .zip(&ideal)
            .map(|(m, i)| (m - i).abs())
            .fold(0.0, f64::max);
        Ok(Ensemble {
            lfsr_width,
            seeds,
            traces,
            time_to_zero,
            ttz_mean,
            ttz_variance,
            mean_trace,
            oracle_mean,
            max_dev_from_ideal,
        })
    }

    /// Number of pairwise distinct trajectories.
    pub fn distinct_traces(&self) -> usize {
        let mut t = self.traces.clone();
        t.sort();
        t.dedup();
        t.len()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EnsembleReport {
    pub params: DecayParams,
    pub horizon: usize,
    /// 5-bit LFSR, seed 1.
    pub example: Vec<u8>,
    pub ideal: Vec<f64>,
    pub lfsr5: Ensemble,
    pub lfsr9: Ensemble,
}

/// Decay ensembles over every 5-bit and every 9-bit LFSR seed.
pub fn run_decay_ensembles(params: &DecayParams, horizon: usize) -> Result<EnsembleReport> {
    let (lfsr5, lfsr9) = rayon::join(
        || Ensemble::run(params, 5, horizon),
        || Ensemble::run(params, 9, horizon),
    );
    let lfsr5 = lfsr5?;
    Ok(EnsembleReport {
        params: *params,
        horizon,
        example: lfsr5.traces[0].clone(),
        ideal: ideal_trace(params, &[], horizon),
        lfsr5,
        lfsr9: lfsr9?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ensemble_properties() {
        let params = DecayParams::with_alpha(495).unwrap();
        let r = run_decay_ensembles(&params, 400).unwrap();
        assert_eq!(r.lfsr5.traces.len(), 31);
        assert_eq!(r.lfsr5.distinct_traces(), 31);
        assert_eq!(r.lfsr9.traces.len(), 511);
        assert!(r.lfsr5.time_to_zero.iter().all(Option::is_some));
        assert!(r.lfsr9.time_to_zero.iter().all(Option::is_some));
        assert!(r.lfsr9.ttz_variance > r.lfsr5.ttz_variance);
        assert!(r.lfsr5.max_dev_from_ideal <= 2.0);
        assert!(r.lfsr9.max_dev_from_ideal <= 2.0);
        for tr in r.lfsr5.traces.iter().chain(&r.lfsr9.traces) {
            assert!(tr.windows(2).all(|w| w[1] <= w[0]));
        }
        assert_eq!(r.example[0], 15);
    }
}
