//! Backplane models for large intelligent surfaces built from common
//! modules: closed-form throughput figures, module interconnect topologies,
//! distributed beamforming and a hop-level traffic simulator.

pub mod beamforming;
pub mod cli;
pub mod config;
pub mod netsim;
pub mod rates;
pub mod topology;
pub mod verify;

use thiserror::Error;

pub use config::{ConfigError, SurfaceConfig};
pub use rates::{BitRate, Scheme, ThroughputReport};
pub use topology::{Node, Topology, TopologyError, TopologyKind};

/// Any error raised by this crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Beamforming(#[from] beamforming::BeamformingError),
    #[error(transparent)]
    Simulation(#[from] netsim::SimError),
}
