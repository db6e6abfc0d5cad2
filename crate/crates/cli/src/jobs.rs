//! Fully resolved runs. A job determines its outputs byte for byte, which is
//! what makes manifests replayable.

use std::path::PathBuf;

use anyhow::{bail, ensure, Context, Result};
use serde::{Deserialize, Serialize};
use stochastic_stdp::decay::{
    alpha_q_from_tau, grid_feasibility, ideal_trace, lfsr_feasibility, run_trace, DecayParams,
    Feasibility,
};
use stochastic_stdp::engine::{cycle_accounting, Engine, EngineConfig};
use stochastic_stdp::experiments::{run_balanced_seeds, BalancedConfig, Ensemble};
use stochastic_stdp::io;
use stochastic_stdp::rng::{DrawGrid, LfsrState, RandomSource, RngConfig};
use stochastic_stdp::stdp::{fit_decay_constant, measure_stdp_curve, CurvePoint, StdpConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Job {
    DecayTrace {
        params: DecayParams,
        lfsr_width: u32,
        mask_bits: u32,
        seeds: Vec<u32>,
        steps: usize,
    },
    VarianceSweep {
        params: DecayParams,
        lfsr_widths: Vec<u32>,
        horizon: usize,
    },
    Feasibility {
        taus: Vec<u32>,
        lfsr_widths: Vec<u32>,
    },
    StdpCurve {
        stdp: StdpConfig,
        params: DecayParams,
        delta_ts: Vec<i64>,
        trials: usize,
        /// Template source; each trial gets a derived seed.
        rng: RngConfig,
        seed: u64,
    },
    EngineRun {
        engine: EngineConfig,
        events: PathBuf,
        ticks: u64,
        parallel: bool,
    },
    BalancedExcitation {
        experiment: BalancedConfig,
        seeds: Vec<u64>,
    },
}

/// Files produced by a job, held in memory until the whole run succeeded.
pub struct Outputs {
    pub files: Vec<(String, Vec<u8>)>,
    pub summary: Vec<String>,
}

impl Job {
    pub fn name(&self) -> &'static str {
        match self {
            Job::DecayTrace { .. } => "decay-trace",
            Job::VarianceSweep { .. } => "variance-sweep",
            Job::Feasibility { .. } => "feasibility",
            Job::StdpCurve { .. } => "stdp-curve",
            Job::EngineRun { .. } => "engine-run",
            Job::BalancedExcitation { .. } => "balanced-excitation",
        }
    }

    pub fn seeds(&self) -> Vec<u64> {
        match self {
            Job::DecayTrace { seeds, .. } => seeds.iter().map(|&s| s as u64).collect(),
            Job::StdpCurve { seed, .. } => vec![*seed],
            Job::EngineRun { engine, .. } => vec![engine.rng.seed(), engine.weight_seed],
            Job::BalancedExcitation { seeds, .. } => seeds.clone(),
            Job::VarianceSweep { .. } | Job::Feasibility { .. } => Vec::new(),
        }
    }

    /// Checks everything that can be checked without running.
    pub fn validate(&self) -> Result<()> {
        match self {
            Job::DecayTrace {
                params,
                lfsr_width,
                mask_bits,
                seeds,
                ..
            } => {
                params.validate()?;
                ensure!(!seeds.is_empty(), "no seeds given");
                for &s in seeds {
                    RandomSource::lfsr(*lfsr_width, *mask_bits, s)?;
                }
            }
            Job::VarianceSweep {
                params,
                lfsr_widths,
                ..
            } => {
                params.validate()?;
                ensure!(!lfsr_widths.is_empty(), "no LFSR widths given");
                for &w in lfsr_widths {
                    LfsrState::with_default_taps(w, 1)?;
                }
            }
            Job::Feasibility { taus, lfsr_widths } => {
                ensure!(
                    !taus.is_empty() && !lfsr_widths.is_empty(),
                    "empty tau or width list"
                );
                for &w in lfsr_widths {
                    LfsrState::with_default_taps(w, 1)?;
                }
            }
            Job::StdpCurve {
                stdp,
                params,
                trials,
                rng,
                ..
            } => {
                stdp.validate()?;
                params.validate()?;
                ensure!(*trials > 0, "trials must be positive");
                RandomSource::from_config(rng)?;
            }
            Job::EngineRun { engine, events, .. } => {
                engine.validate()?;
                ensure!(
                    events.is_file(),
                    "event file {} not found",
                    events.display()
                );
            }
            Job::BalancedExcitation { experiment, seeds } => {
                experiment.validate()?;
                ensure!(!seeds.is_empty(), "no seeds given");
            }
        }
        Ok(())
    }

    pub fn run(&self) -> Result<Outputs> {
        self.validate()?;
        match self {
            Job::DecayTrace {
                params,
                lfsr_width,
                mask_bits,
                seeds,
                steps,
            } => decay_trace(params, *lfsr_width, *mask_bits, seeds, *steps),
            Job::VarianceSweep {
                params,
                lfsr_widths,
                horizon,
            } => variance_sweep(params, lfsr_widths, *horizon),
            Job::Feasibility { taus, lfsr_widths } => feasibility(taus, lfsr_widths),
            Job::StdpCurve {
                stdp,
                params,
                delta_ts,
                trials,
                rng,
                seed,
            } => stdp_curve(stdp, params, delta_ts, *trials, rng, *seed),
            Job::EngineRun {
                engine,
                events,
                ticks,
                parallel,
            } => engine_run(engine, events, *ticks, *parallel),
            Job::BalancedExcitation { experiment, seeds } => balanced(experiment, seeds),
        }
    }
}

fn csv_bytes(f: impl FnOnce(&mut Vec<u8>) -> stochastic_stdp::Result<()>) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(buf)
}

fn decay_trace(
    params: &DecayParams,
    width: u32,
    mask: u32,
    seeds: &[u32],
    steps: usize,
) -> Result<Outputs> {
    let mut summary = Vec::new();
    let grid = RandomSource::lfsr(width, mask, seeds[0])?.grid();
    if grid_feasibility(params.alpha_q, &grid) == Feasibility::Stall {
        summary.push(format!(
            "warning: alpha_q {} with {mask}-bit draws can never take v=1 to 0; decays will stall at 1",
            params.alpha_q
        ));
    }
    let t_max = steps.saturating_sub(1);
    let traces: Vec<Vec<u8>> = seeds
        .iter()
        .map(|&s| {
            let mut src = RandomSource::lfsr(width, mask, s)?;
            let tr = run_trace(params, &mut src, &[], t_max);
            Ok(tr[..steps.min(tr.len())].to_vec())
        })
        .collect::<Result<_>>()?;
    let ideal = ideal_trace(params, &[], t_max);
    let ideal = &ideal[..steps.min(ideal.len())];
    let file = if let [single] = traces.as_slice() {
        csv_bytes(|b| io::write_trace(b, single, ideal))?
    } else {
        let mut s = String::from("t,ideal_v");
        for seed in seeds {
            s.push_str(&format!(",v_seed{seed}"));
        }
        s.push('\n');
        for (t, iv) in ideal.iter().enumerate() {
            s.push_str(&format!("{t},{iv:?}"));
            for tr in &traces {
                s.push_str(&format!(",{}", tr[t]));
            }
            s.push('\n');
        }
        s.into_bytes()
    };
    for (seed, tr) in seeds.iter().zip(&traces) {
        if tr.last() == Some(&1) && tr.len() > 1 && summary.iter().any(|l| l.starts_with("warning"))
        {
            summary.push(format!("seed {seed}: stalled at v=1"));
        }
    }
    summary.push(format!("{} trace(s), {steps} samples each", traces.len()));
    Ok(Outputs {
        files: vec![("trace.csv".into(), file)],
        summary,
    })
}

fn variance_sweep(params: &DecayParams, widths: &[u32], horizon: usize) -> Result<Outputs> {
    let mut s =
        String::from("lfsr_width,n_seeds,reached_zero,ttz_mean,ttz_variance,max_dev_from_ideal\n");
    let mut summary = Vec::new();
    for &w in widths {
        let e = Ensemble::run(params, w, horizon)?;
        let reached = e.time_to_zero.iter().flatten().count();
        s.push_str(&format!(
            "{w},{},{reached},{:?},{:?},{:?}\n",
            e.seeds.len(),
            e.ttz_mean,
            e.ttz_variance,
            e.max_dev_from_ideal
        ));
        summary.push(format!(
            "{w}-bit: var(time to zero) = {:.2} over {} seeds",
            e.ttz_variance,
            e.seeds.len()
        ));
    }
    Ok(Outputs {
        files: vec![("variance.csv".into(), s.into_bytes())],
        summary,
    })
}

fn verdict(f: Feasibility) -> &'static str {
    match f {
        Feasibility::Feasible => "feasible",
        Feasibility::Stall => "stall",
    }
}

fn feasibility(taus: &[u32], widths: &[u32]) -> Result<Outputs> {
    let mut s = String::from("tau,alpha_q,lfsr_width,bound,exact\n");
    for &w in widths {
        for &tau in taus {
            let a = alpha_q_from_tau(tau);
            let exact = grid_feasibility(a, &DrawGrid::nonzero(w));
            s.push_str(&format!(
                "{tau},{a},{w},{},{}\n",
                verdict(lfsr_feasibility(tau, w)),
                verdict(exact)
            ));
        }
    }
    Ok(Outputs {
        files: vec![("feasibility.csv".into(), s.into_bytes())],
        summary: vec![format!("{} rows", taus.len() * widths.len())],
    })
}

/// Per-trial seed for the curve measurement.
fn trial_seed(seed: u64, dt: i64, trial: usize) -> u64 {
    let mut x = seed
        ^ (dt as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ (trial as u64).wrapping_mul(0xD1B5_4A32_D192_ED03);
    x ^= x >> 31;
    x
}

fn stdp_curve(
    stdp: &StdpConfig,
    params: &DecayParams,
    delta_ts: &[i64],
    trials: usize,
    rng: &RngConfig,
    seed: u64,
) -> Result<Outputs> {
    let points = measure_stdp_curve(stdp, params, delta_ts, trials, |dt, trial| {
        RandomSource::from_config(&rng.reseeded(trial_seed(seed, dt, trial)))
            .expect("validated source")
    });
    let branch = |neg: bool| -> Vec<CurvePoint> {
        points
            .iter()
            .copied()
            .filter(|p| (p.delta_t < 0) == neg && p.delta_t != 0)
            .collect()
    };
    let mut summary = Vec::new();
    for (name, pts) in [
        ("potentiation", branch(true)),
        ("depression", branch(false)),
    ] {
        match fit_decay_constant(&pts) {
            Some(tau) => summary.push(format!(
                "{name} branch: fitted tau = {tau:.2} (tau_eff {:.2})",
                params.tau_eff()
            )),
            None => summary.push(format!("{name} branch: not enough points to fit")),
        }
    }
    let file = csv_bytes(|b| io::write_curve(b, &points))?;
    Ok(Outputs {
        files: vec![("curve.csv".into(), file)],
        summary,
    })
}

fn engine_run(cfg: &EngineConfig, events: &PathBuf, ticks: u64, parallel: bool) -> Result<Outputs> {
    let file =
        std::fs::File::open(events).with_context(|| format!("opening {}", events.display()))?;
    let events =
        io::read_events(file).with_context(|| format!("reading {}", events_name(events)))?;
    if let Some(e) = events.iter().find(|e| e.tick >= ticks) {
        bail!(
            "event {e:?} lies beyond the last tick {}",
            ticks.saturating_sub(1)
        );
    }
    let mut engine = Engine::new(cfg.clone())?;
    let initial = engine.weights().cells().to_vec();
    let updates = if parallel {
        let mut by_tick = vec![Vec::new(); ticks as usize];
        for e in &events {
            by_tick[e.tick as usize].push(*e);
        }
        let mut all = Vec::new();
        for evs in &by_tick {
            all.extend(engine.tick_parallel(evs)?);
        }
        all
    } else {
        engine.run(&events, ticks)?
    };
    let mut w = String::from("addr,initial_w,final_w\n");
    for (addr, (a, b)) in initial.iter().zip(engine.weights().cells()).enumerate() {
        w.push_str(&format!("{addr},{a},{b}\n"));
    }
    let report = cycle_accounting(cfg, ticks);
    let mut summary = vec![
        format!(
            "{} events, {} weight updates over {ticks} ticks",
            events.len(),
            updates.len()
        ),
        format!(
            "modeled hardware time {:.6} s, sweep {:.1} ns per {} ns tick",
            report.modeled_seconds, report.schedule_ns, report.tick_period_ns
        ),
    ];
    if report.overrun {
        summary.push("warning: one slot sweep does not fit into a tick period".into());
    }
    Ok(Outputs {
        files: vec![
            ("weights.csv".into(), w.into_bytes()),
            (
                "updates.csv".into(),
                csv_bytes(|b| io::write_updates(b, &updates))?,
            ),
        ],
        summary,
    })
}

fn events_name(p: &std::path::Path) -> String {
    p.display().to_string()
}

fn balanced(cfg: &BalancedConfig, seeds: &[u64]) -> Result<Outputs> {
    let reports = run_balanced_seeds(cfg, seeds)?;
    let mut files = Vec::new();
    let mut table =
        String::from("seed,outer_fraction,middle_fraction,mean_rate_hz,output_spikes\n");
    let mut snaps = String::from("seed,tick,outer_fraction,middle_fraction,top_fraction,rate_hz\n");
    let mut summary = Vec::new();
    for r in &reports {
        let name = if seeds.len() == 1 {
            "histogram.csv".to_string()
        } else {
            format!("histogram_seed{}.csv", r.seed)
        };
        files.push((name, csv_bytes(|b| io::write_histogram(b, &r.histogram))?));
        table.push_str(&format!(
            "{},{:?},{:?},{:?},{}\n",
            r.seed, r.outer_fraction, r.middle_fraction, r.mean_rate_hz, r.output_spikes
        ));
        for s in &r.snapshots {
            snaps.push_str(&format!(
                "{},{},{:?},{:?},{:?},{:?}\n",
                r.seed, s.tick, s.outer_fraction, s.middle_fraction, s.top_fraction, s.rate_hz
            ));
        }
        summary.push(format!(
            "seed {}: outer {:.3}, middle {:.3}, output {:.1} Hz",
            r.seed, r.outer_fraction, r.middle_fraction, r.mean_rate_hz
        ));
    }
    files.push(("summary.csv".into(), table.into_bytes()));
    files.push(("snapshots.csv".into(), snaps.into_bytes()));
    Ok(Outputs { files, summary })
}
