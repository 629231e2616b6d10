//! Sample-level linear beamforming.
//!
//! Matrices are stored per subcarrier. A channel or weight matrix is M×K
//! (antennas × terminals); a [`SampleBlock`] holds one `dim × symbols`
//! matrix per subcarrier, where `dim` is M in the antenna domain and K in
//! the terminal domain.
//!
//! Centralized combining applies `Wᴴ` to all M antenna samples at once.
//! Distributed combining hands each [`ModuleState`] its own antenna rows of
//! `W`; modules form K-dimensional partial sums and add them up along the
//! topology's route tree. Both paths produce the same terminal samples.

mod channel;
mod combine;
mod io;
mod quantize;
mod weights;

use nalgebra::DMatrix;
use num_complex::Complex64;
use thiserror::Error;

pub use channel::{
    add_noise, dft_pilots, estimate_channel, generate_channel, random_qpsk, transmit,
};
pub use combine::{
    aggregate_in_order, centralized_downlink, centralized_uplink, check_partition,
    distributed_downlink, distributed_uplink, distributed_uplink_with, local_partials,
    per_subcarrier_process, DelayBuffer, Direction, ModuleState, Processing, TaggedPartial,
    UplinkOptions, UplinkOutput,
};
pub use io::{read_block, write_block, BLOCK_HEADER_LEN};
pub use quantize::{quantize, Quantizer};
pub use weights::{column_space_residual, compute_weights, zf_residual, WeightMethod};

pub type CMatrix = DMatrix<Complex64>;

#[derive(Debug, Error)]
pub enum BeamformingError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("pilot matrix has rank {rank}, need {needed}")]
    Rank { rank: usize, needed: usize },
    #[error("channel matrix is rank deficient (rank {rank} < {needed} terminals)")]
    SingularMatrix { rank: usize, needed: usize },
    #[error("antenna partition: {0}")]
    Partition(String),
    #[error("topology: {0}")]
    Topology(String),
    #[error("sample block format: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = BeamformingError> = std::result::Result<T, E>;

/// Numerical rank from singular values, relative tolerance scaled by size.
pub(crate) fn rank(m: &CMatrix) -> usize {
    if m.is_empty() {
        return 0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let max = sv.iter().cloned().fold(0.0, f64::max);
    let tol = max * 1e-10 * m.nrows().max(m.ncols()) as f64;
    sv.iter().filter(|&&s| s > tol).count()
}

/// M×K channel gains, one matrix per subcarrier.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelMatrix {
    subcarriers: Vec<CMatrix>,
}

impl ChannelMatrix {
    pub fn from_subcarriers(subcarriers: Vec<CMatrix>) -> Result<Self> {
        let first = subcarriers
            .first()
            .ok_or_else(|| BeamformingError::Dimension("no subcarriers".into()))?;
        let shape = first.shape();
        if subcarriers.iter().any(|h| h.shape() != shape) {
            return Err(BeamformingError::Dimension(
                "subcarrier matrices differ in shape".into(),
            ));
        }
        if subcarriers
            .iter()
            .flat_map(|h| h.iter())
            .any(|z| !(z.re.is_finite() && z.im.is_finite()))
        {
            return Err(BeamformingError::Dimension(
                "non-finite channel gain".into(),
            ));
        }
        Ok(Self { subcarriers })
    }

    pub fn antennas(&self) -> usize {
        self.subcarriers[0].nrows()
    }

    pub fn terminals(&self) -> usize {
        self.subcarriers[0].ncols()
    }

    pub fn n_subcarriers(&self) -> usize {
        self.subcarriers.len()
    }

    pub fn subcarrier(&self, i: usize) -> &CMatrix {
        &self.subcarriers[i]
    }

    pub fn subcarriers(&self) -> &[CMatrix] {
        &self.subcarriers
    }
}

/// Combining/precoding matrix W (M×K) per subcarrier.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamformingWeights {
    subcarriers: Vec<CMatrix>,
    method: WeightMethod,
}

impl BeamformingWeights {
    pub fn new(subcarriers: Vec<CMatrix>, method: WeightMethod) -> Result<Self> {
        ChannelMatrix::from_subcarriers(subcarriers.clone())?;
        Ok(Self {
            subcarriers,
            method,
        })
    }

    pub fn method(&self) -> WeightMethod {
        self.method
    }

    pub fn antennas(&self) -> usize {
        self.subcarriers[0].nrows()
    }

    pub fn terminals(&self) -> usize {
        self.subcarriers[0].ncols()
    }

    pub fn n_subcarriers(&self) -> usize {
        self.subcarriers.len()
    }

    pub fn subcarrier(&self, i: usize) -> &CMatrix {
        &self.subcarriers[i]
    }

    pub fn subcarriers(&self) -> &[CMatrix] {
        &self.subcarriers
    }

    /// Mutable access for fault-injection tests (corrupting weights).
    pub fn subcarrier_mut(&mut self, i: usize) -> &mut CMatrix {
        &mut self.subcarriers[i]
    }

    pub fn only_subcarrier(&self, i: usize) -> Self {
        Self {
            subcarriers: vec![self.subcarriers[i].clone()],
            method: self.method,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    /// One row per antenna element.
    Antenna,
    /// One row per terminal.
    Terminal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quantization {
    Exact,
    Quantized(u32),
}

/// Complex samples: per subcarrier, a `dim × symbols` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBlock {
    domain: Domain,
    subcarriers: Vec<CMatrix>,
    quantization: Quantization,
}

impl SampleBlock {
    pub fn new(domain: Domain, subcarriers: Vec<CMatrix>) -> Result<Self> {
        let first = subcarriers
            .first()
            .ok_or_else(|| BeamformingError::Dimension("no subcarriers".into()))?;
        let shape = first.shape();
        if subcarriers.iter().any(|s| s.shape() != shape) {
            return Err(BeamformingError::Dimension(
                "subcarrier blocks differ in shape".into(),
            ));
        }
        Ok(Self {
            domain,
            subcarriers,
            quantization: Quantization::Exact,
        })
    }

    pub(crate) fn with_quantization(mut self, q: Quantization) -> Self {
        self.quantization = q;
        self
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn quantization(&self) -> Quantization {
        self.quantization
    }

    /// Rows per symbol: M for antenna blocks, K for terminal blocks.
    pub fn dim(&self) -> usize {
        self.subcarriers[0].nrows()
    }

    pub fn symbols(&self) -> usize {
        self.subcarriers[0].ncols()
    }

    pub fn n_subcarriers(&self) -> usize {
        self.subcarriers.len()
    }

    pub fn subcarrier(&self, i: usize) -> &CMatrix {
        &self.subcarriers[i]
    }

    pub fn subcarriers(&self) -> &[CMatrix] {
        &self.subcarriers
    }

    pub fn only_subcarrier(&self, i: usize) -> Self {
        Self {
            domain: self.domain,
            subcarriers: vec![self.subcarriers[i].clone()],
            quantization: self.quantization,
        }
    }

    /// Largest absolute difference of any real or imaginary component.
    pub fn max_abs_diff(&self, other: &SampleBlock) -> f64 {
        assert_eq!(self.subcarriers.len(), other.subcarriers.len());
        self.subcarriers
            .iter()
            .zip(&other.subcarriers)
            .flat_map(|(a, b)| {
                assert_eq!(a.shape(), b.shape());
                a.iter()
                    .zip(b.iter())
                    .map(|(x, y)| (x.re - y.re).abs().max((x.im - y.im).abs()))
            })
            .fold(0.0, f64::max)
    }

    pub(crate) fn expect(&self, domain: Domain, dim: usize, subcarriers: usize) -> Result<()> {
        if self.domain != domain {
            return Err(BeamformingError::Dimension(format!(
                "expected {domain:?}-domain samples, got {:?}",
                self.domain
            )));
        }
        if self.dim() != dim {
            return Err(BeamformingError::Dimension(format!(
                "expected {dim} rows per symbol, got {}",
                self.dim()
            )));
        }
        if self.n_subcarriers() != subcarriers {
            return Err(BeamformingError::Dimension(format!(
                "expected {subcarriers} subcarriers, got {}",
                self.n_subcarriers()
            )));
        }
        Ok(())
    }
}
