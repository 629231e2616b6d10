//! Closed-form backplane throughput and energy.
//!
//! Every rate is an exact rational number of bits per second. With integral
//! inputs (whole hertz, integer oversampling, chain count dividing the module
//! count) every rate is an integer and [`BitRate::exact`] returns it.

use std::fmt;
use std::ops::{Add, Mul};
use std::str::FromStr;

use num_rational::Ratio;
use num_traits::{ToPrimitive, Zero};

use crate::config::SurfaceConfig;

/// Bits per second, held exactly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct BitRate(Ratio<u128>);

impl BitRate {
    pub const ZERO: BitRate = BitRate(Ratio::new_raw(0, 1));

    pub fn from_bits_per_sec(bps: u128) -> Self {
        Self(Ratio::from_integer(bps))
    }

    pub fn from_ratio(r: Ratio<u128>) -> Self {
        Self(r)
    }

    pub fn ratio(&self) -> Ratio<u128> {
        self.0
    }

    /// The rate as an integer, when it is one.
    pub fn exact(&self) -> Option<u128> {
        self.0.is_integer().then(|| self.0.to_integer())
    }

    pub fn as_f64(&self) -> f64 {
        self.0.to_f64().unwrap_or(f64::NAN)
    }

    /// Decimal gigabits per second (10⁹).
    pub fn gbps(&self) -> f64 {
        self.as_f64() / 1e9
    }

    /// Binary gibibits per second (2³⁰).
    pub fn gibps(&self) -> f64 {
        self.as_f64() / (1u64 << 30) as f64
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }
}

impl fmt::Display for BitRate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_integer() {
            write!(f, "{}", self.0.to_integer())
        } else {
            write!(f, "{}/{}", self.0.numer(), self.0.denom())
        }
    }
}

impl FromStr for BitRate {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parse = |v: &str| v.trim().parse::<u128>().map_err(|e| format!("{v}: {e}"));
        match s.split_once('/') {
            Some((n, d)) => {
                let d = parse(d)?;
                if d == 0 {
                    return Err("zero denominator".into());
                }
                Ok(Self(Ratio::new(parse(n)?, d)))
            }
            None => Ok(Self::from_bits_per_sec(parse(s)?)),
        }
    }
}

impl Add for BitRate {
    type Output = BitRate;
    fn add(self, rhs: BitRate) -> BitRate {
        BitRate(self.0 + rhs.0)
    }
}

impl Mul<u128> for BitRate {
    type Output = BitRate;
    fn mul(self, rhs: u128) -> BitRate {
        BitRate(self.0 * rhs)
    }
}

impl Mul<Ratio<u128>> for BitRate {
    type Output = BitRate;
    fn mul(self, rhs: Ratio<u128>) -> BitRate {
        BitRate(self.0 * rhs)
    }
}

impl std::iter::Sum for BitRate {
    fn sum<I: Iterator<Item = BitRate>>(iter: I) -> BitRate {
        iter.fold(BitRate::ZERO, Add::add)
    }
}

fn widen(r: Ratio<u64>) -> Ratio<u128> {
    Ratio::new(*r.numer() as u128, *r.denom() as u128)
}

/// How beamforming and routing are arranged on the backplane.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Scheme {
    /// Every module has its own link to the central processor, which
    /// receives all antenna waveforms.
    CentralizedParallel,
    /// Antenna waveforms relayed to the central processor along chains.
    CentralizedChained,
    /// Modules combine locally; only per-terminal partial sums travel.
    DistributedBeamforming,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [
        Scheme::CentralizedParallel,
        Scheme::CentralizedChained,
        Scheme::DistributedBeamforming,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Scheme::CentralizedParallel => "centralized-parallel",
            Scheme::CentralizedChained => "centralized-chained",
            Scheme::DistributedBeamforming => "distributed",
        }
    }

    pub fn is_distributed(&self) -> bool {
        matches!(self, Scheme::DistributedBeamforming)
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "centralized-parallel" | "parallel" => Ok(Scheme::CentralizedParallel),
            "centralized-chained" | "chained" => Ok(Scheme::CentralizedChained),
            "distributed" => Ok(Scheme::DistributedBeamforming),
            other => Err(format!("unknown scheme `{other}`")),
        }
    }
}

/// Throughput of one antenna element: 2·B·n_res·n_oversamp.
pub fn per_element_rate(bandwidth_hz: u64, adc_bits: u32, oversampling: Ratio<u64>) -> BitRate {
    BitRate(widen(oversampling) * (2 * bandwidth_hz as u128 * adc_bits as u128))
}

fn element_rate(cfg: &SurfaceConfig) -> BitRate {
    per_element_rate(cfg.bandwidth_hz, cfg.adc_bits, cfg.oversampling)
}

/// Throughput generated by one module: (M/N)·R.
pub fn per_module_rate(cfg: &SurfaceConfig) -> BitRate {
    element_rate(cfg) * Ratio::new(cfg.antennas as u128, cfg.modules as u128)
}

/// All M waveforms exchanged with the central processor: M·R.
pub fn centralized_max(cfg: &SurfaceConfig) -> BitRate {
    element_rate(cfg) * cfg.antennas as u128
}

/// Aggregate over every chain link when M waveforms are relayed along N_ch
/// chains of depth Δ = N/N_ch: (M/2)·(Δ+1)·R.
///
/// The link at depth ℓ carries the traffic of ℓ modules, so the sum over
/// all chains is N_ch·Σℓ·(M/N)·R, which closes to the expression above. A
/// fractional Δ (chains not dividing modules) is evaluated by the same
/// closed form.
pub fn centralized_aggregate(cfg: &SurfaceConfig) -> BitRate {
    let depth = widen(cfg.chain_depth());
    let m = cfg.antennas as u128;
    // multiply by M before halving so odd M stays exact
    element_rate(cfg) * ((depth + 1) * m / 2)
}

/// Aggregate when every module's waveforms are relayed over `hops` links to
/// the central processor: (M/N)·R·Σ hops. Reduces to
/// [`centralized_aggregate`] for daisy chains and to [`centralized_max`]
/// for a star.
pub fn routed_aggregate(cfg: &SurfaceConfig, hops: impl IntoIterator<Item = usize>) -> BitRate {
    let total: u128 = hops.into_iter().map(|h| h as u128).sum();
    per_module_rate(cfg) * total
}

/// Central-processor throughput with distributed beamforming: 2·K·B·n_bit.
pub fn distributed_max(cfg: &SurfaceConfig) -> BitRate {
    BitRate::from_bits_per_sec(
        2 * cfg.terminals as u128 * cfg.bandwidth_hz as u128 * cfg.beamf_bits as u128,
    )
}

/// All K terminal streams delivered to all N modules: 2·N·K·B·n_bit.
pub fn distributed_aggregate(cfg: &SurfaceConfig) -> BitRate {
    distributed_max(cfg) * cfg.modules as u128
}

/// Watts drawn by the backplane moving `rate` at `energy_per_bit` J/bit.
pub fn backplane_power(rate: BitRate, energy_per_bit: f64) -> f64 {
    // bits per joule is a round number for pJ-scale energies, so dividing
    // keeps results like 0.4096 W free of representation noise
    rate.as_f64() / (1.0 / energy_per_bit)
}

/// Throughput figures for one (config, scheme) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct ThroughputReport {
    pub scheme: Scheme,
    pub r_element: BitRate,
    pub r_module: BitRate,
    pub r_max_central: BitRate,
    pub r_aggregate: BitRate,
    pub power_w: f64,
}

pub fn report(cfg: &SurfaceConfig, scheme: Scheme) -> ThroughputReport {
    let (r_max_central, r_aggregate) = match scheme {
        Scheme::CentralizedParallel => (centralized_max(cfg), centralized_max(cfg)),
        Scheme::CentralizedChained => (centralized_max(cfg), centralized_aggregate(cfg)),
        Scheme::DistributedBeamforming => (distributed_max(cfg), distributed_aggregate(cfg)),
    };
    build_report(cfg, scheme, r_max_central, r_aggregate)
}

/// Report whose aggregate is taken from explicit per-module hop counts, for
/// routings that are not plain chains (e.g. a mesh route tree).
pub fn report_for_hops(
    cfg: &SurfaceConfig,
    scheme: Scheme,
    hops: impl IntoIterator<Item = usize>,
) -> ThroughputReport {
    match scheme {
        Scheme::DistributedBeamforming => report(cfg, scheme),
        _ => build_report(
            cfg,
            scheme,
            centralized_max(cfg),
            routed_aggregate(cfg, hops),
        ),
    }
}

fn build_report(
    cfg: &SurfaceConfig,
    scheme: Scheme,
    r_max_central: BitRate,
    r_aggregate: BitRate,
) -> ThroughputReport {
    ThroughputReport {
        scheme,
        r_element: element_rate(cfg),
        r_module: per_module_rate(cfg),
        r_max_central,
        r_aggregate,
        power_w: backplane_power(r_aggregate, cfg.energy_per_bit),
    }
}

pub const CSV_HEADER: &str = "scheme,M,N,K,B_hz,n_res,n_oversamp,n_bit_beamf,n_ch,\
r_element,r_module,r_max_central,r_aggregate,power_w";

impl ThroughputReport {
    pub fn csv_row(&self, cfg: &SurfaceConfig) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{:?}",
            self.scheme,
            cfg.antennas,
            cfg.modules,
            cfg.terminals,
            cfg.bandwidth_hz,
            cfg.adc_bits,
            cfg.oversampling,
            cfg.beamf_bits,
            cfg.chains,
            self.r_element,
            self.r_module,
            self.r_max_central,
            self.r_aggregate,
            self.power_w,
        )
    }
}

/// A report CSV row parsed back into its parameters and figures.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub scheme: Scheme,
    pub antennas: usize,
    pub modules: usize,
    pub terminals: usize,
    pub bandwidth_hz: u64,
    pub adc_bits: u32,
    pub oversampling: Ratio<u64>,
    pub beamf_bits: u32,
    pub chains: usize,
    pub r_element: BitRate,
    pub r_module: BitRate,
    pub r_max_central: BitRate,
    pub r_aggregate: BitRate,
    pub power_w: f64,
}

impl FromStr for ReportRow {
    type Err = String;

    fn from_str(line: &str) -> Result<Self, Self::Err> {
        let f: Vec<&str> = line.trim().split(',').collect();
        if f.len() != 14 {
            return Err(format!("expected 14 fields, got {}", f.len()));
        }
        fn num<T: FromStr>(s: &str, what: &str) -> Result<T, String> {
            s.parse().map_err(|_| format!("bad {what}: `{s}`"))
        }
        Ok(Self {
            scheme: f[0].parse()?,
            antennas: num(f[1], "M")?,
            modules: num(f[2], "N")?,
            terminals: num(f[3], "K")?,
            bandwidth_hz: num(f[4], "B_hz")?,
            adc_bits: num(f[5], "n_res")?,
            oversampling: crate::config::parse_ratio(f[6])
                .ok_or_else(|| format!("bad n_oversamp: `{}`", f[6]))?,
            beamf_bits: num(f[7], "n_bit_beamf")?,
            chains: num(f[8], "n_ch")?,
            r_element: f[9].parse()?,
            r_module: f[10].parse()?,
            r_max_central: f[11].parse()?,
            r_aggregate: f[12].parse()?,
            power_w: num(f[13], "power_w")?,
        })
    }
}

impl ReportRow {
    /// Config carrying this row's parameters; grid and energy come from
    /// `template`.
    pub fn to_config(&self, template: &SurfaceConfig) -> SurfaceConfig {
        SurfaceConfig {
            antennas: self.antennas,
            modules: self.modules,
            terminals: self.terminals,
            bandwidth_hz: self.bandwidth_hz,
            adc_bits: self.adc_bits,
            oversampling: self.oversampling,
            beamf_bits: self.beamf_bits,
            chains: self.chains,
            ..template.clone()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(m: usize, n: usize, k: usize, n_ch: usize) -> SurfaceConfig {
        SurfaceConfig::new(m, n, k).with_chains(n_ch)
    }

    fn bps(v: u128) -> BitRate {
        BitRate::from_bits_per_sec(v)
    }

    #[test]
    fn element_rate_examples() {
        let one = Ratio::from_integer(1);
        assert_eq!(per_element_rate(20_000_000, 10, one), bps(400_000_000));
        assert_eq!(
            per_element_rate(20_000_000, 10, Ratio::from_integer(2)),
            bps(800_000_000)
        );
        assert_eq!(
            per_element_rate(20_000_000, 10, Ratio::new(5, 4)).exact(),
            Some(500_000_000)
        );
    }

    #[test]
    fn module_rate_examples() {
        assert_eq!(per_module_rate(&cfg(1024, 256, 32, 8)), bps(1_600_000_000));
        assert_eq!(per_module_rate(&cfg(1024, 128, 32, 8)), bps(3_200_000_000));
        let c = cfg(64, 64, 4, 1);
        assert_eq!(per_module_rate(&c), element_rate(&c));
    }

    #[test]
    fn centralized_max_examples() {
        let c = cfg(1024, 256, 32, 8);
        assert_eq!(centralized_max(&c), bps(409_600_000_000));
        assert!((centralized_max(&c).gibps() - 381.4697).abs() < 1e-3);
        assert_eq!(
            centralized_max(&cfg(2048, 256, 32, 8)),
            bps(819_200_000_000)
        );
        assert_eq!(centralized_max(&cfg(1, 1, 1, 1)), bps(400_000_000));
    }

    #[test]
    fn centralized_aggregate_examples() {
        // Δ = 32: 512 · 33 · 4e8
        assert_eq!(
            centralized_aggregate(&cfg(1024, 256, 32, 8)),
            bps(6_758_400_000_000)
        );
        let star = cfg(1024, 256, 32, 256);
        assert_eq!(centralized_aggregate(&star), centralized_max(&star));
    }

    #[test]
    fn odd_antenna_count_stays_exact() {
        // M = 9, N = 3, N_ch = 1 -> Δ = 3, (9/2)·4·R = 18 R
        let c = cfg(9, 3, 1, 1);
        assert_eq!(centralized_aggregate(&c), element_rate(&c) * 18);
        // M = 9, N = 9, N_ch = 3 -> Δ = 3 again, 18 R
        assert_eq!(
            centralized_aggregate(&cfg(9, 9, 1, 3)),
            element_rate(&c) * 18
        );
        // M = 3, N = 3, N_ch = 3 -> Δ = 1, 3 R
        assert_eq!(
            centralized_aggregate(&cfg(3, 3, 1, 3)),
            element_rate(&c) * 3
        );
    }

    #[test]
    fn fractional_chain_depth_closed_form() {
        // N = 16, N_ch = 10: (64/2)(1.6 + 1) R = 83.2 R
        let c = cfg(64, 16, 2, 10);
        assert_eq!(
            centralized_aggregate(&c),
            element_rate(&c) * Ratio::new(832u128, 10)
        );
    }

    #[test]
    fn routed_matches_chain_closed_form() {
        let c = cfg(1024, 256, 32, 8);
        let hops = (0..8).flat_map(|_| 1..=32usize);
        assert_eq!(routed_aggregate(&c, hops), centralized_aggregate(&c));
        assert_eq!(routed_aggregate(&c, vec![1; 256]), centralized_max(&c));
    }

    #[test]
    fn distributed_examples() {
        let c = cfg(1024, 256, 32, 8);
        assert_eq!(distributed_max(&c), bps(19_200_000_000));
        assert_eq!(distributed_aggregate(&c), bps(4_915_200_000_000));
        assert_eq!(distributed_max(&cfg(2048, 256, 32, 8)), distributed_max(&c));
        let one = cfg(32, 1, 1, 1);
        assert_eq!(distributed_aggregate(&one), distributed_max(&one));
        assert_eq!(distributed_max(&cfg(32, 1, 1, 1)), bps(2 * 20_000_000 * 15));
    }

    #[test]
    fn power_examples() {
        assert!((backplane_power(bps(409_600_000_000), 1e-12) - 0.4096).abs() < 1e-12);
        assert_eq!(backplane_power(BitRate::ZERO, 1e-12), 0.0);
        assert!((backplane_power(bps(19_200_000_000), 1e-12) - 0.0192).abs() < 1e-12);
    }

    #[test]
    fn report_schemes() {
        let mut c = SurfaceConfig::new(1000, 250, 32).with_chains(10);
        c.grid = crate::config::Grid::new(10, 25);
        let c = c.validate().unwrap();
        let chained = report(&c, Scheme::CentralizedChained);
        // Δ = 25: (1000/2)·26·4e8
        assert_eq!(chained.r_aggregate, bps(500 * 26 * 400_000_000));
        let dist = report(&c, Scheme::DistributedBeamforming);
        assert_eq!(dist.r_max_central, bps(19_200_000_000));
        let par = report(&c, Scheme::CentralizedParallel);
        assert_eq!(par.r_aggregate, par.r_max_central);
        assert_eq!(par.r_element, chained.r_element);
        assert_eq!(par.r_element, dist.r_element);
    }

    #[test]
    fn csv_row_round_trip() {
        let mut c = cfg(1024, 256, 32, 8).with_grid(16, 16);
        c.oversampling = Ratio::new(3, 2);
        for scheme in Scheme::ALL {
            let r = report(&c, scheme);
            let line = r.csv_row(&c);
            let row: ReportRow = line.parse().unwrap();
            let again = report(&row.to_config(&c), row.scheme);
            assert_eq!(again.csv_row(&c), line);
            assert_eq!(row.r_aggregate, r.r_aggregate);
            assert_eq!(row.power_w, r.power_w);
        }
    }

    #[test]
    fn bitrate_text() {
        assert_eq!(bps(42).to_string(), "42");
        let half = BitRate::from_ratio(Ratio::new(1, 2));
        assert_eq!(half.to_string(), "1/2");
        assert_eq!("1/2".parse::<BitRate>().unwrap(), half);
        assert!("1/0".parse::<BitRate>().is_err());
        assert_eq!(half.exact(), None);
    }
}
