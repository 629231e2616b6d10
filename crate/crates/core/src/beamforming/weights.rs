use std::fmt;
use std::str::FromStr;

use super::{rank, BeamformingError, BeamformingWeights, CMatrix, ChannelMatrix, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightMethod {
    /// Maximum-ratio combining, W = H.
    Mrc,
    /// Zero-forcing, W = H·(HᴴH)⁻¹ so that WᴴH = I.
    Zf,
}

impl fmt::Display for WeightMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            WeightMethod::Mrc => "mrc",
            WeightMethod::Zf => "zf",
        })
    }
}

impl FromStr for WeightMethod {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "mrc" => Ok(WeightMethod::Mrc),
            "zf" => Ok(WeightMethod::Zf),
            other => Err(format!("unknown weight method `{other}`")),
        }
    }
}

fn zero_forcing(h: &CMatrix) -> Result<CMatrix> {
    let k = h.ncols();
    let r = rank(h);
    if r < k {
        return Err(BeamformingError::SingularMatrix { rank: r, needed: k });
    }
    let gram = h.adjoint() * h;
    let inv = gram
        .try_inverse()
        .ok_or(BeamformingError::SingularMatrix { rank: r, needed: k })?;
    Ok(h * inv)
}

pub fn compute_weights(h: &ChannelMatrix, method: WeightMethod) -> Result<BeamformingWeights> {
    let subcarriers = match method {
        WeightMethod::Mrc => h.subcarriers().to_vec(),
        WeightMethod::Zf => h
            .subcarriers()
            .iter()
            .map(zero_forcing)
            .collect::<Result<_>>()?,
    };
    BeamformingWeights::new(subcarriers, method)
}

/// Worst ‖WᴴH − I‖_F over subcarriers.
pub fn zf_residual(w: &BeamformingWeights, h: &ChannelMatrix) -> f64 {
    w.subcarriers()
        .iter()
        .zip(h.subcarriers())
        .map(|(w, h)| {
            let k = h.ncols();
            (w.adjoint() * h - CMatrix::identity(k, k)).norm()
        })
        .fold(0.0, f64::max)
}

/// Relative distance of `y` (M×S) from the column space of `h` (M×K):
/// ‖y − H(HᴴH)⁻¹Hᴴy‖_F / ‖y‖_F.
pub fn column_space_residual(h: &CMatrix, y: &CMatrix) -> Result<f64> {
    let w = zero_forcing(h)?;
    let projected = h * (w.adjoint() * y);
    let norm = y.norm();
    Ok(if norm == 0.0 {
        0.0
    } else {
        (y - projected).norm() / norm
    })
}
