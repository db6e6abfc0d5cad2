//! Experiment harnesses: the decay ensembles over every LFSR seed and the
//! balanced-excitation run that drives one LIF neuron through the engine.

pub mod balanced;
pub mod ensembles;
pub mod lif;
pub mod poisson;

pub use balanced::{
    bimodality_metric, run_balanced_excitation, run_balanced_seeds, BalancedConfig,
    BimodalityReport, Histogram, Snapshot,
};
pub use ensembles::{run_decay_ensembles, Ensemble, EnsembleReport};
pub use lif::{lif_step, LifNeuron, LifParams};
pub use poisson::poisson_train;
