use thiserror::Error;

use crate::engine::SpikeEvent;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("routing error: event {event:?} addresses slot {} but the engine has {n_slots} slots", event.addr)]
    Routing { event: SpikeEvent, n_slots: usize },

    #[error("routing error: event {event:?} was delivered at tick {tick}")]
    WrongTick { event: SpikeEvent, tick: u64 },

    #[error("line {line}: {msg}")]
    Parse { line: u64, msg: String },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
