//! Surface parameterization and the `key = value` config format.
//!
//! A [`SurfaceConfig`] describes one surface: how many antennas it carries,
//! how they are split across common modules, how many terminals it serves,
//! converter resolutions and how the modules are laid out and chained.
//! Construct one directly or parse a config file, then call
//! [`SurfaceConfig::validate`] before handing it to the rest of the crate.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use num_rational::Ratio;
use thiserror::Error;

/// Default link efficiency in joules per bit (1 pJ/bit).
pub const DEFAULT_ENERGY_PER_BIT: f64 = 1.0e-12;

/// Default center-to-center distance between neighbouring modules.
pub const DEFAULT_MODULE_PITCH_M: f64 = 0.1;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("divisibility: {what}")]
    Divisibility { what: String },
    #[error("geometry: grid {rows}x{cols} holds {} modules, expected {modules}", rows * cols)]
    Geometry {
        rows: usize,
        cols: usize,
        modules: usize,
    },
    #[error("range: {field} {why}")]
    Range { field: &'static str, why: String },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("missing required key `{0}`")]
    MissingKey(&'static str),
    #[error("bad value for `{key}`: {msg}")]
    BadValue { key: String, msg: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Physical arrangement of the modules on the surface, row-major.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Grid {
    pub rows: usize,
    pub cols: usize,
}

impl Grid {
    pub fn new(rows: usize, cols: usize) -> Self {
        Self { rows, cols }
    }

    /// Most square factorization of `n` (rows ≤ cols).
    pub fn near_square(n: usize) -> Self {
        let mut rows = 1;
        let mut d = 1;
        while d * d <= n {
            if n.is_multiple_of(d) {
                rows = d;
            }
            d += 1;
        }
        Self {
            rows,
            cols: n / rows.max(1),
        }
    }

    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Grid cell of module `id`.
    pub fn position(&self, id: usize) -> (usize, usize) {
        (id / self.cols, id % self.cols)
    }

    pub fn id(&self, row: usize, col: usize) -> usize {
        row * self.cols + col
    }
}

/// Full parameterization of a surface and its backplane.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceConfig {
    /// Total antenna elements (M).
    pub antennas: usize,
    /// Common modules (N).
    pub modules: usize,
    /// Served terminals (K).
    pub terminals: usize,
    /// System bandwidth in Hz (B).
    pub bandwidth_hz: u64,
    /// AD/DA resolution in bits.
    pub adc_bits: u32,
    /// Oversampling factor, ≥ 1.
    pub oversampling: Ratio<u64>,
    /// Bits per I or Q component of a beamformed terminal sample.
    pub beamf_bits: u32,
    /// Parallel daisy-chains feeding the central processor.
    pub chains: usize,
    /// Backplane link efficiency, J/bit.
    pub energy_per_bit: f64,
    pub grid: Grid,
    /// Center-to-center module distance in meters.
    pub module_pitch: f64,
    /// Central processor location in grid units (row, col). `None` picks the
    /// per-topology default.
    pub cp_position: Option<(f64, f64)>,
}

impl SurfaceConfig {
    /// A config with the reference link parameters (20 MHz, 10-bit
    /// converters, no oversampling, 15-bit beamformed samples, one chain,
    /// 1 pJ/bit) and a near-square module grid. Not validated.
    pub fn new(antennas: usize, modules: usize, terminals: usize) -> Self {
        Self {
            antennas,
            modules,
            terminals,
            bandwidth_hz: 20_000_000,
            adc_bits: 10,
            oversampling: Ratio::from_integer(1),
            beamf_bits: 15,
            chains: 1,
            energy_per_bit: DEFAULT_ENERGY_PER_BIT,
            grid: Grid::near_square(modules),
            module_pitch: DEFAULT_MODULE_PITCH_M,
            cp_position: None,
        }
    }

    pub fn with_chains(mut self, chains: usize) -> Self {
        self.chains = chains;
        self
    }

    pub fn with_grid(mut self, rows: usize, cols: usize) -> Self {
        self.grid = Grid::new(rows, cols);
        self
    }

    /// Checks every invariant and returns the config unchanged if they hold.
    pub fn validate(self) -> Result<Self, ConfigError> {
        self.check_ranges()?;
        self.check_module_split()?;
        if !self.modules.is_multiple_of(self.chains) {
            return Err(ConfigError::Divisibility {
                what: format!(
                    "chains ({}) must divide modules ({})",
                    self.chains, self.modules
                ),
            });
        }
        self.check_grid()?;
        Ok(self)
    }

    /// Like [`validate`](Self::validate) but tolerates a chain count that
    /// does not divide the module count. Closed-form rate sweeps use this;
    /// the resulting chain depth is fractional and no physical chain
    /// topology can be built from such a config.
    pub fn validate_analytic(self) -> Result<Self, ConfigError> {
        self.check_ranges()?;
        self.check_module_split()?;
        self.check_grid()?;
        Ok(self)
    }

    fn check_ranges(&self) -> Result<(), ConfigError> {
        let counts: [(&'static str, usize); 6] = [
            ("antennas", self.antennas),
            ("modules", self.modules),
            ("terminals", self.terminals),
            ("chains", self.chains),
            ("grid_rows", self.grid.rows),
            ("grid_cols", self.grid.cols),
        ];
        for (field, v) in counts {
            if v == 0 {
                return Err(range(field, "must be at least 1"));
            }
        }
        if self.bandwidth_hz == 0 {
            return Err(range("bandwidth_hz", "must be positive"));
        }
        if self.adc_bits == 0 {
            return Err(range("adc_bits", "must be at least 1"));
        }
        if self.beamf_bits == 0 {
            return Err(range("beamf_bits", "must be at least 1"));
        }
        if self.oversampling < Ratio::from_integer(1) {
            return Err(range("oversampling", "must be at least 1"));
        }
        if !(self.energy_per_bit.is_finite() && self.energy_per_bit > 0.0) {
            return Err(range("energy_pj_per_bit", "must be positive and finite"));
        }
        if !(self.module_pitch.is_finite() && self.module_pitch > 0.0) {
            return Err(range("module_pitch_m", "must be positive and finite"));
        }
        if let Some((r, c)) = self.cp_position {
            if !(r.is_finite() && c.is_finite()) {
                return Err(range("cp_position", "must be finite"));
            }
        }
        Ok(())
    }

    fn check_module_split(&self) -> Result<(), ConfigError> {
        if !self.antennas.is_multiple_of(self.modules) {
            return Err(ConfigError::Divisibility {
                what: format!(
                    "modules ({}) must divide antennas ({})",
                    self.modules, self.antennas
                ),
            });
        }
        Ok(())
    }

    fn check_grid(&self) -> Result<(), ConfigError> {
        if self.grid.len() != self.modules {
            return Err(ConfigError::Geometry {
                rows: self.grid.rows,
                cols: self.grid.cols,
                modules: self.modules,
            });
        }
        Ok(())
    }

    /// Antennas driven by each module (M/N).
    pub fn antennas_per_module(&self) -> usize {
        self.antennas / self.modules
    }

    /// Modules per chain (N/N_ch), as an exact ratio.
    pub fn chain_depth(&self) -> Ratio<u64> {
        Ratio::new(self.modules as u64, self.chains as u64)
    }

    /// Parses the `key = value` format. Keys not in [`CONFIG_KEYS`] are
    /// rejected. The result is not validated.
    pub fn from_config_str(text: &str) -> Result<Self, ConfigError> {
        let kv = KeyValues::parse(text)?;
        Self::from_key_values(&kv)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        Self::from_config_str(&read_text(path.as_ref())?)
    }

    pub fn from_key_values(kv: &KeyValues) -> Result<Self, ConfigError> {
        if let Some(k) = kv.keys().find(|k| !CONFIG_KEYS.contains(k)) {
            return Err(ConfigError::UnknownKey(k.to_string()));
        }
        let modules: usize = kv.required("modules")?;
        let grid = match (kv.get::<usize>("grid_rows")?, kv.get::<usize>("grid_cols")?) {
            (Some(rows), Some(cols)) => Grid::new(rows, cols),
            (None, None) => Grid::near_square(modules),
            (Some(_), None) => return Err(ConfigError::MissingKey("grid_cols")),
            (None, Some(_)) => return Err(ConfigError::MissingKey("grid_rows")),
        };
        let cp_position = match kv.raw("cp_position") {
            None => None,
            Some(v) => Some(parse_point(v).ok_or_else(|| ConfigError::BadValue {
                key: "cp_position".into(),
                msg: format!("expected `row,col`, got `{v}`"),
            })?),
        };
        Ok(Self {
            antennas: kv.required("antennas")?,
            modules,
            terminals: kv.required("terminals")?,
            bandwidth_hz: kv
                .raw("bandwidth_hz")
                .map(|v| {
                    parse_hz(v).ok_or_else(|| ConfigError::BadValue {
                        key: "bandwidth_hz".into(),
                        msg: format!("expected a whole number of Hz, got `{v}`"),
                    })
                })
                .transpose()?
                .ok_or(ConfigError::MissingKey("bandwidth_hz"))?,
            adc_bits: kv.required("adc_bits")?,
            oversampling: match kv.raw("oversampling") {
                None => Ratio::from_integer(1),
                Some(v) => parse_ratio(v).ok_or_else(|| ConfigError::BadValue {
                    key: "oversampling".into(),
                    msg: format!("expected a decimal or `num/den`, got `{v}`"),
                })?,
            },
            beamf_bits: kv.required("beamf_bits")?,
            chains: kv.get("chains")?.unwrap_or(1),
            energy_per_bit: kv
                .get::<f64>("energy_pj_per_bit")?
                .map_or(DEFAULT_ENERGY_PER_BIT, |pj| pj * 1e-12),
            grid,
            module_pitch: kv.get("module_pitch_m")?.unwrap_or(DEFAULT_MODULE_PITCH_M),
            cp_position,
        })
    }

    /// Renders the config in the file format; parsing the output gives back
    /// an equal config.
    pub fn to_config_string(&self) -> String {
        let mut s = format!(
            "antennas = {}\nmodules = {}\nterminals = {}\nbandwidth_hz = {}\n\
             adc_bits = {}\noversampling = {}\nbeamf_bits = {}\nchains = {}\n\
             energy_pj_per_bit = {:?}\ngrid_rows = {}\ngrid_cols = {}\nmodule_pitch_m = {:?}\n",
            self.antennas,
            self.modules,
            self.terminals,
            self.bandwidth_hz,
            self.adc_bits,
            self.oversampling,
            self.beamf_bits,
            self.chains,
            self.energy_per_bit * 1e12,
            self.grid.rows,
            self.grid.cols,
            self.module_pitch,
        );
        if let Some((r, c)) = self.cp_position {
            s.push_str(&format!("cp_position = {r:?},{c:?}\n"));
        }
        s
    }
}

fn range(field: &'static str, why: &str) -> ConfigError {
    ConfigError::Range {
        field,
        why: why.to_string(),
    }
}

/// Keys accepted in a surface config file.
pub const CONFIG_KEYS: &[&str] = &[
    "antennas",
    "modules",
    "terminals",
    "bandwidth_hz",
    "adc_bits",
    "oversampling",
    "beamf_bits",
    "chains",
    "energy_pj_per_bit",
    "grid_rows",
    "grid_cols",
    "module_pitch_m",
    "cp_position",
];

/// Ordered `key = value` pairs from a config or sweep file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KeyValues {
    entries: BTreeMap<String, String>,
}

impl KeyValues {
    /// Blank lines and `#` comments are ignored; a key may appear only once.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut entries = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| ConfigError::Parse {
                line: i + 1,
                msg: format!("expected `key = value`, got `{line}`"),
            })?;
            let (k, v) = (k.trim(), v.trim());
            if k.is_empty() || v.is_empty() {
                return Err(ConfigError::Parse {
                    line: i + 1,
                    msg: "empty key or value".into(),
                });
            }
            if entries.insert(k.to_string(), v.to_string()).is_some() {
                return Err(ConfigError::Parse {
                    line: i + 1,
                    msg: format!("duplicate key `{k}`"),
                });
            }
        }
        Ok(Self { entries })
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.entries.insert(key.to_string(), value.to_string());
    }

    pub fn remove(&mut self, key: &str) -> Option<String> {
        self.entries.remove(key)
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>, ConfigError>
    where
        T::Err: fmt::Display,
    {
        self.raw(key)
            .map(|v| {
                v.parse::<T>().map_err(|e| ConfigError::BadValue {
                    key: key.to_string(),
                    msg: e.to_string(),
                })
            })
            .transpose()
    }

    pub fn required<T: FromStr>(&self, key: &'static str) -> Result<T, ConfigError>
    where
        T::Err: fmt::Display,
    {
        self.get(key)?.ok_or(ConfigError::MissingKey(key))
    }
}

pub(crate) fn read_text(path: &Path) -> Result<String, ConfigError> {
    std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Whole hertz, written either as an integer or in float notation (`20e6`).
fn parse_hz(s: &str) -> Option<u64> {
    if let Ok(v) = s.parse::<u64>() {
        return Some(v);
    }
    let f: f64 = s.parse().ok()?;
    (f.is_finite() && f >= 0.0 && f.fract() == 0.0 && f < u64::MAX as f64).then_some(f as u64)
}

/// Exact rational from `3`, `1.25` or `5/4`.
pub fn parse_ratio(s: &str) -> Option<Ratio<u64>> {
    let s = s.trim();
    if let Some((n, d)) = s.split_once('/') {
        let (n, d): (u64, u64) = (n.trim().parse().ok()?, d.trim().parse().ok()?);
        return (d != 0).then(|| Ratio::new(n, d));
    }
    match s.split_once('.') {
        None => s.parse().ok().map(Ratio::from_integer),
        Some((int, frac)) => {
            if frac.is_empty() || frac.len() > 18 || !frac.bytes().all(|b| b.is_ascii_digit()) {
                return None;
            }
            let int: u64 = if int.is_empty() { 0 } else { int.parse().ok()? };
            let den = 10u64.pow(frac.len() as u32);
            let num = int.checked_mul(den)?.checked_add(frac.parse().ok()?)?;
            Some(Ratio::new(num, den))
        }
    }
}

fn parse_point(s: &str) -> Option<(f64, f64)> {
    let (r, c) = s.split_once(',')?;
    Some((r.trim().parse().ok()?, c.trim().parse().ok()?))
}
