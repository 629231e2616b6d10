use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{rank, BeamformingError, CMatrix, ChannelMatrix, Domain, Result, SampleBlock};

fn complex_gaussian(rng: &mut ChaCha8Rng, variance: f64) -> Complex64 {
    let scale = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re * scale, im * scale)
}

/// I.i.d. Rayleigh channel: unit-variance circularly-symmetric complex
/// Gaussian gains, reproducible from `seed`.
pub fn generate_channel(
    antennas: usize,
    terminals: usize,
    n_subcarriers: usize,
    seed: u64,
) -> Result<ChannelMatrix> {
    if terminals == 0 || terminals > antennas {
        return Err(BeamformingError::Dimension(format!(
            "need 1 <= K <= M, got M={antennas}, K={terminals}"
        )));
    }
    if n_subcarriers == 0 {
        return Err(BeamformingError::Dimension("no subcarriers".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let subcarriers = (0..n_subcarriers)
        .map(|_| CMatrix::from_fn(antennas, terminals, |_, _| complex_gaussian(&mut rng, 1.0)))
        .collect();
    ChannelMatrix::from_subcarriers(subcarriers)
}

/// Unit-power QPSK symbols for `terminals` streams.
pub fn random_qpsk(
    terminals: usize,
    symbols: usize,
    n_subcarriers: usize,
    seed: u64,
) -> Result<SampleBlock> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = std::f64::consts::FRAC_1_SQRT_2;
    let subcarriers = (0..n_subcarriers)
        .map(|_| {
            CMatrix::from_fn(terminals, symbols, |_, _| {
                let re = if rng.random::<bool>() { a } else { -a };
                let im = if rng.random::<bool>() { a } else { -a };
                Complex64::new(re, im)
            })
        })
        .collect();
    SampleBlock::new(Domain::Terminal, subcarriers)
}

/// Orthogonal training sequences: row k of the K×P matrix is the k-th DFT
/// basis vector of length P (P ≥ K gives orthogonal rows).
pub fn dft_pilots(terminals: usize, length: usize) -> Result<SampleBlock> {
    let p = CMatrix::from_fn(terminals, length, |k, t| {
        Complex64::from_polar(1.0, -2.0 * PI * (k * t) as f64 / length as f64)
    });
    SampleBlock::new(Domain::Terminal, vec![p])
}

/// Noiseless reception y = H·x on every subcarrier.
pub fn transmit(h: &ChannelMatrix, x: &SampleBlock) -> Result<SampleBlock> {
    let x_sc = |i: usize| {
        if x.n_subcarriers() == 1 {
            x.subcarrier(0)
        } else {
            x.subcarrier(i)
        }
    };
    if x.domain() != Domain::Terminal || x.dim() != h.terminals() {
        return Err(BeamformingError::Dimension(format!(
            "transmit needs {}-row terminal samples",
            h.terminals()
        )));
    }
    if x.n_subcarriers() != 1 && x.n_subcarriers() != h.n_subcarriers() {
        return Err(BeamformingError::Dimension(
            "subcarrier count mismatch".into(),
        ));
    }
    let out = (0..h.n_subcarriers())
        .map(|i| h.subcarrier(i) * x_sc(i))
        .collect();
    SampleBlock::new(Domain::Antenna, out)
}

/// Adds complex Gaussian noise at `snr_db` relative to the block's mean
/// per-sample power.
pub fn add_noise(block: &SampleBlock, snr_db: f64, seed: u64) -> SampleBlock {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let count: usize = block.subcarriers().iter().map(|m| m.len()).sum();
    let power: f64 = block
        .subcarriers()
        .iter()
        .flat_map(|m| m.iter())
        .map(|z| z.norm_sqr())
        .sum::<f64>()
        / count.max(1) as f64;
    let variance = power / 10f64.powf(snr_db / 10.0);
    let noisy = block
        .subcarriers()
        .iter()
        .map(|m| m.map(|z| z + complex_gaussian(&mut rng, variance)))
        .collect();
    SampleBlock::new(block.domain(), noisy).expect("shape preserved")
}

/// Least-squares channel estimate Ĥ = Y·Pᴴ·(P·Pᴴ)⁻¹ from known K×P pilots
/// and the M×P received training block. A single pilot subcarrier is reused
/// on every received subcarrier.
pub fn estimate_channel(pilots: &SampleBlock, received: &SampleBlock) -> Result<ChannelMatrix> {
    if pilots.domain() != Domain::Terminal || received.domain() != Domain::Antenna {
        return Err(BeamformingError::Dimension(
            "pilots must be terminal-domain and received antenna-domain".into(),
        ));
    }
    if pilots.symbols() != received.symbols() {
        return Err(BeamformingError::Dimension(format!(
            "pilot length {} != received length {}",
            pilots.symbols(),
            received.symbols()
        )));
    }
    if pilots.n_subcarriers() != 1 && pilots.n_subcarriers() != received.n_subcarriers() {
        return Err(BeamformingError::Dimension(
            "subcarrier count mismatch".into(),
        ));
    }
    let k = pilots.dim();
    let estimates = (0..received.n_subcarriers())
        .map(|i| {
            let p = pilots.subcarrier(if pilots.n_subcarriers() == 1 { 0 } else { i });
            let r = rank(p);
            if r < k {
                return Err(BeamformingError::Rank { rank: r, needed: k });
            }
            let p_h = p.adjoint();
            let gram = p * &p_h;
            let inv = gram
                .try_inverse()
                .ok_or(BeamformingError::Rank { rank: r, needed: k })?;
            Ok(received.subcarrier(i) * p_h * inv)
        })
        .collect::<Result<Vec<_>>>()?;
    ChannelMatrix::from_subcarriers(estimates)
}
