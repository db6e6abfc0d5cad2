mod jobs;
mod manifest;

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use stochastic_stdp::config::SimConfig;
use stochastic_stdp::decay::{alpha_q_from_tau, DecayParams};
use stochastic_stdp::rng::RngConfig;

use crate::jobs::Job;
use crate::manifest::{commit, RunManifest};

/// Simulator for a time-multiplexed STDP engine with stochastic decays.
#[derive(Debug, Parser)]
#[command(name = "stdp-sim", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Debug, Args)]
struct Common {
    /// Directory receiving the CSV outputs and manifest.json.
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    /// TOML configuration file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
}

impl Common {
    fn load(&self) -> Result<SimConfig> {
        match &self.config {
            Some(p) => SimConfig::load(p).with_context(|| format!("loading {}", p.display())),
            None => Ok(SimConfig::default()),
        }
    }
}

#[derive(Debug, Args)]
struct DecaySelect {
    /// Quantized coefficient a (multiplier of 1/512).
    #[arg(long, conflicts_with = "tau")]
    alpha: Option<u16>,
    /// Decay time constant in steps; a = round(512 tau / (tau + 1)).
    #[arg(long)]
    tau: Option<u32>,
}

impl DecaySelect {
    fn resolve(&self, base: DecayParams) -> DecayParams {
        let alpha_q = match (self.alpha, self.tau) {
            (Some(a), _) => a,
            (None, Some(t)) => alpha_q_from_tau(t),
            (None, None) => base.alpha_q,
        };
        DecayParams { alpha_q, ..base }
    }
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Stochastic decay trajectory against the ideal curve.
    DecayTrace {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        decay: DecaySelect,
        /// LFSR width in bits.
        #[arg(long, default_value_t = 5)]
        lfsr: u32,
        /// Low bits of the register used per draw; defaults to the width.
        #[arg(long)]
        mask: Option<u32>,
        #[arg(long, default_value_t = 1)]
        seed: u32,
        /// Number of samples, starting at t = 0.
        #[arg(long, default_value_t = 200)]
        steps: usize,
        /// One column per register seed instead of a single trace.
        #[arg(long)]
        all_seeds: bool,
    },
    /// Time-to-zero variance over every seed of each LFSR width.
    VarianceSweep {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        decay: DecaySelect,
        #[arg(long, value_delimiter = ',', default_values_t = [5, 9])]
        lfsr: Vec<u32>,
        /// Steps simulated per trace.
        #[arg(long, default_value_t = 2000)]
        horizon: usize,
    },
    /// Stall check of the decay at v = 1 for each tau and LFSR width.
    Feasibility {
        #[command(flatten)]
        common: Common,
        /// Explicit tau list; defaults to 1..=tau-max.
        #[arg(long, value_delimiter = ',')]
        tau: Vec<u32>,
        #[arg(long, default_value_t = 40)]
        tau_max: u32,
        #[arg(long, value_delimiter = ',', default_values_t = [5])]
        lfsr: Vec<u32>,
    },
    /// Mean and spread of the weight change against spike timing.
    StdpCurve {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        decay: DecaySelect,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true,
              default_values_t = [-40, -20, -10, -5, -1, 0, 1, 5, 10, 20, 40])]
        dt: Vec<i64>,
        #[arg(long, default_value_t = 10_000)]
        trials: usize,
        /// Random source: uniform, lfsr5 or hardware.
        #[arg(long, default_value = "uniform")]
        backend: String,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Runs the engine on a `tick,addr,kind` event file.
    EngineRun {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        events: PathBuf,
        #[arg(long)]
        ticks: u64,
        /// Visit slots in parallel within each tick.
        #[arg(long)]
        parallel: bool,
    },
    /// Poisson inputs driving one LIF neuron through the engine.
    BalancedExcitation {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        synapses: Option<usize>,
        #[arg(long)]
        rate: Option<f64>,
        #[arg(long)]
        ticks: Option<u64>,
        /// Seeds; defaults to the config file's list.
        #[arg(long, value_delimiter = ',')]
        seed: Vec<u64>,
    },
    /// Re-runs the job recorded in a manifest.
    Replay {
        manifest: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
}

fn resolve(cmd: Cmd) -> Result<(Job, PathBuf)> {
    Ok(match cmd {
        Cmd::DecayTrace {
            common,
            decay,
            lfsr,
            mask,
            seed,
            steps,
            all_seeds,
        } => {
            let cfg = common.load()?;
            let seeds = if all_seeds {
                if !(2..=16).contains(&lfsr) {
                    bail!("LFSR width {lfsr} outside 2..=16");
                }
                (1..(1u32 << lfsr)).collect()
            } else {
                vec![seed]
            };
            let job = Job::DecayTrace {
                params: decay.resolve(cfg.decay),
                lfsr_width: lfsr,
                mask_bits: mask.unwrap_or(lfsr),
                seeds,
                steps,
            };
            (job, common.out_dir)
        }
        Cmd::VarianceSweep {
            common,
            decay,
            lfsr,
            horizon,
        } => {
            let cfg = common.load()?;
            (
                Job::VarianceSweep {
                    params: decay.resolve(cfg.decay),
                    lfsr_widths: lfsr,
                    horizon,
                },
                common.out_dir,
            )
        }
        Cmd::Feasibility {
            common,
            tau,
            tau_max,
            lfsr,
        } => {
            common.load()?;
            let taus = if tau.is_empty() {
                (1..=tau_max).collect()
            } else {
                tau
            };
            (
                Job::Feasibility {
                    taus,
                    lfsr_widths: lfsr,
                },
                common.out_dir,
            )
        }
        Cmd::StdpCurve {
            common,
            decay,
            dt,
            trials,
            backend,
            seed,
        } => {
            let cfg = common.load()?;
            let base = DecayParams {
                alpha_q: cfg.engine.alpha_table[0],
                ..cfg.decay
            };
            let rng = match backend.as_str() {
                "uniform" => RngConfig::Uniform {
                    mask_bits: 5,
                    seed,
                    exclude_zero: false,
                },
                "lfsr5" => RngConfig::lfsr5(1),
                "hardware" => RngConfig::hardware(1),
                other => bail!("unknown backend {other:?}; expected uniform, lfsr5 or hardware"),
            };
            let job = Job::StdpCurve {
                stdp: cfg.engine.stdp.clone(),
                params: decay.resolve(base),
                delta_ts: dt,
                trials,
                rng,
                seed,
            };
            (job, common.out_dir)
        }
        Cmd::EngineRun {
            common,
            events,
            ticks,
            parallel,
        } => {
            let cfg = common.load()?;
            let events = std::fs::canonicalize(&events)
                .with_context(|| format!("event file {}", events.display()))?;
            (
                Job::EngineRun {
                    engine: cfg.engine,
                    events,
                    ticks,
                    parallel,
                },
                common.out_dir,
            )
        }
        Cmd::BalancedExcitation {
            common,
            synapses,
            rate,
            ticks,
            seed,
        } => {
            let cfg = common.load()?;
            let mut experiment = cfg.balanced;
            if let Some(n) = synapses {
                experiment.n_synapses = n;
            }
            if let Some(r) = rate {
                experiment.rate_hz = r;
            }
            if let Some(t) = ticks {
                experiment.duration_ticks = t;
            }
            let seeds = if seed.is_empty() { cfg.seeds } else { seed };
            (
                Job::BalancedExcitation { experiment, seeds },
                common.out_dir,
            )
        }
        Cmd::Replay { manifest, out_dir } => (RunManifest::load(&manifest)?.config, out_dir),
    })
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let (job, out_dir) = resolve(cli.cmd)?;
    job.validate()?;
    let outputs = job.run()?;
    for line in &outputs.summary {
        if line.starts_with("warning") {
            eprintln!("{line}");
        } else {
            println!("{line}");
        }
    }
    for path in commit(&out_dir, &job, &outputs)? {
        println!("wrote {}", path.display());
    }
    Ok(())
}
