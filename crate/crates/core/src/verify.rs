//! Distributed-versus-centralized equivalence check on random data.

use num_complex::Complex64;

use crate::beamforming::{
    centralized_downlink, centralized_uplink, compute_weights, distributed_downlink,
    distributed_uplink, generate_channel, random_qpsk, transmit, BeamformingWeights, ModuleState,
    SampleBlock, WeightMethod,
};
use crate::config::SurfaceConfig;
use crate::netsim::{compute_buffer_depths, stream_uplink};
use crate::topology::{self, TopologyKind};
use crate::Error;

/// Channel, weights and symbols for one seed, with the centralized results
/// as reference.
#[derive(Debug, Clone)]
pub struct VerifyCase {
    pub weights: BeamformingWeights,
    /// Received antenna samples for the uplink.
    pub received: SampleBlock,
    /// Terminal samples for the downlink.
    pub downlink_symbols: SampleBlock,
    pub want_uplink: SampleBlock,
    pub want_downlink: SampleBlock,
}

/// Largest absolute component deviation from the centralized reference.
#[derive(Debug, Clone)]
pub struct Deviation {
    pub topology: TopologyKind,
    pub uplink: f64,
    pub downlink: f64,
    /// Uplink pushed symbol by symbol through the delay buffers; infinite
    /// if any partial sum arrived misaligned.
    pub streamed: f64,
    pub uplink_output: SampleBlock,
}

impl Deviation {
    pub fn max(&self) -> f64 {
        self.uplink.max(self.downlink).max(self.streamed)
    }
}

impl VerifyCase {
    /// The channel uses `seed`, uplink symbols `seed + 1` and downlink
    /// symbols `seed + 2`.
    pub fn generate(
        cfg: &SurfaceConfig,
        seed: u64,
        method: WeightMethod,
        subcarriers: usize,
        symbols: usize,
    ) -> Result<Self, Error> {
        let h = generate_channel(cfg.antennas, cfg.terminals, subcarriers, seed)?;
        let weights = compute_weights(&h, method)?;
        let x_up = random_qpsk(cfg.terminals, symbols, subcarriers, seed.wrapping_add(1))?;
        let downlink_symbols =
            random_qpsk(cfg.terminals, symbols, subcarriers, seed.wrapping_add(2))?;
        let received = transmit(&h, &x_up)?;
        Ok(Self {
            want_uplink: centralized_uplink(&weights, &received)?,
            want_downlink: centralized_downlink(&weights, &downlink_symbols)?,
            weights,
            received,
            downlink_symbols,
        })
    }

    pub fn check(&self, cfg: &SurfaceConfig, kind: TopologyKind) -> Result<Deviation, Error> {
        self.check_with(cfg, kind, |_| {})
    }

    /// Like [`check`](Self::check), but `tamper` may alter the per-module
    /// state before anything runs.
    pub fn check_with(
        &self,
        cfg: &SurfaceConfig,
        kind: TopologyKind,
        tamper: impl FnOnce(&mut [ModuleState]),
    ) -> Result<Deviation, Error> {
        let topo = topology::build(cfg, kind)?;
        let mut modules = ModuleState::partition(&self.weights, cfg.modules)?;
        tamper(&mut modules);
        let up = distributed_uplink(&mut modules, &self.received, &topo)?;
        let down = distributed_downlink(&modules, &self.downlink_symbols, &topo)?;
        let depths = compute_buffer_depths(&topo);
        let streamed = stream_uplink(&mut modules, &self.received, &topo, &depths)?;
        Ok(Deviation {
            topology: kind,
            uplink: up.max_abs_diff(&self.want_uplink),
            downlink: down.max_abs_diff(&self.want_downlink),
            streamed: if streamed.violations.is_empty() {
                streamed.block.max_abs_diff(&self.want_uplink)
            } else {
                f64::INFINITY
            },
            uplink_output: up,
        })
    }
}

/// Negative control: perturbs one weight of the first module.
pub fn corrupt_first_module(modules: &mut [ModuleState]) {
    if let Some(m) = modules.first_mut() {
        m.local_weights_mut(0)[(0, 0)] += Complex64::new(1.0, 0.0);
    }
}
