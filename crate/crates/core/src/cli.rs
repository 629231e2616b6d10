//! Command-line front end. [`run`] takes the argument list and output
//! streams and returns the process exit status, so it can be driven
//! in-process as well as from the `lis` binary.
//!
//! Exit status: 0 success, 1 verification or agreement failure, 2 usage,
//! configuration or I/O error.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use num_rational::Ratio;
use rayon::prelude::*;

use crate::beamforming::{read_block, write_block, Direction, SampleBlock, WeightMethod};
use crate::config::{parse_ratio, ConfigError, KeyValues, SurfaceConfig, CONFIG_KEYS};
use crate::netsim::{Mode, SimError, Simulation};
use crate::rates::{self, BitRate, Scheme, CSV_HEADER};
use crate::topology::{self, TopologyError, TopologyKind};
use crate::verify::{corrupt_first_module, VerifyCase};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Deviation below which distributed and centralized results count as equal.
pub const VERIFY_TOLERANCE: f64 = 1e-9;

#[derive(Parser, Debug)]
#[command(
    name = "lis",
    version,
    about = "Backplane throughput models and simulator for large intelligent surfaces"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Closed-form throughput report as CSV.
    Rates {
        #[arg(long)]
        config: PathBuf,
        /// centralized, distributed, centralized-parallel or
        /// centralized-chained; all schemes when omitted.
        #[arg(long)]
        scheme: Option<String>,
        /// Picks the centralized variant (parallel or chain).
        #[arg(long, value_enum)]
        topology: Option<KindArg>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sweep the antenna count and emit one report row per point and scheme.
    Scan {
        #[arg(long, alias = "config")]
        sweep: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check distributed against centralized beamforming on random data.
    Verify {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Defaults to all three topologies.
        #[arg(long, value_enum)]
        topology: Option<KindArg>,
        #[arg(long, value_enum, default_value_t = WeightsArg::Zf)]
        weights: WeightsArg,
        #[arg(long, default_value_t = 1)]
        subcarriers: usize,
        #[arg(long, default_value_t = 8)]
        symbols: usize,
        /// Write the centralized uplink output as a sample-block file.
        #[arg(long)]
        write_golden: Option<PathBuf>,
        /// Compare the distributed uplink output against a sample-block file.
        #[arg(long)]
        golden: Option<PathBuf>,
        #[arg(long, hide = true)]
        corrupt_weights: bool,
    },
    /// Hop-level simulation with per-link bit accounting.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum)]
        topology: KindArg,
        #[arg(long, value_enum)]
        scheme: ModeArg,
        /// Number of symbols to push through the backplane.
        #[arg(long, default_value_t = 100)]
        duration: u64,
        #[arg(long, value_enum, default_value_t = DirectionArg::Uplink)]
        direction: DirectionArg,
        /// Payload overhead factor, decimal or `num/den`.
        #[arg(long, default_value = "1")]
        overhead: String,
        #[arg(long)]
        fail_link: Option<usize>,
        #[arg(long, default_value_t = 0, requires = "fail_link")]
        fail_at: u64,
        /// Accepted for uniformity; the simulator is deterministic.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Directory for trace.csv and loads.csv.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print a topology as an edge list with routes.
    ExportTopology {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum)]
        topology: KindArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum KindArg {
    Parallel,
    Chain,
    Mesh,
}

impl From<KindArg> for TopologyKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Parallel => TopologyKind::FullyParallel,
            KindArg::Chain => TopologyKind::DaisyChain,
            KindArg::Mesh => TopologyKind::Mesh,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Centralized,
    Distributed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum WeightsArg {
    Zf,
    Mrc,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum DirectionArg {
    Uplink,
    Downlink,
}

struct Failure {
    code: i32,
    msg: String,
}

impl Failure {
    fn usage(msg: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            msg: msg.into(),
        }
    }

    fn check(msg: impl Into<String>) -> Self {
        Self {
            code: EXIT_CHECK_FAILED,
            msg: msg.into(),
        }
    }
}

macro_rules! usage_from {
    ($($t:ty),*) => {$(
        impl From<$t> for Failure {
            fn from(e: $t) -> Self {
                Failure::usage(e.to_string())
            }
        }
    )*};
}
usage_from!(
    ConfigError,
    TopologyError,
    crate::beamforming::BeamformingError,
    std::io::Error
);

impl From<crate::Error> for Failure {
    fn from(e: crate::Error) -> Self {
        match e {
            crate::Error::Simulation(SimError::Topology(TopologyError::Disconnected {
                ..
            }))
            | crate::Error::Topology(TopologyError::Disconnected { .. }) => {
                Failure::check(e.to_string())
            }
            other => Failure::usage(other.to_string()),
        }
    }
}

type CmdResult = Result<i32, Failure>;

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                stderr.write_all(text.as_bytes())
            } else {
                stdout.write_all(text.as_bytes())
            };
            return code;
        }
    };
    let result = match cli.command {
        Command::Rates {
            config,
            scheme,
            topology,
            out,
        } => cmd_rates(
            &config,
            scheme.as_deref(),
            topology,
            out.as_deref(),
            stdout,
            stderr,
        ),
        Command::Scan { sweep, out } => cmd_scan(&sweep, out.as_deref(), stdout, stderr),
        Command::Verify {
            config,
            seed,
            topology,
            weights,
            subcarriers,
            symbols,
            write_golden,
            golden,
            corrupt_weights,
        } => cmd_verify(
            &VerifyArgs {
                config,
                seed,
                topology,
                weights,
                subcarriers,
                symbols,
                write_golden,
                golden,
                corrupt_weights,
            },
            stdout,
        ),
        Command::Simulate {
            config,
            topology,
            scheme,
            duration,
            direction,
            overhead,
            fail_link,
            fail_at,
            seed: _,
            out,
        } => cmd_simulate(
            &SimulateArgs {
                config,
                topology,
                scheme,
                duration,
                direction,
                overhead,
                fail_link,
                fail_at,
                out,
            },
            stdout,
            stderr,
        ),
        Command::ExportTopology {
            config,
            topology,
            out,
        } => cmd_export_topology(&config, topology, out.as_deref(), stdout),
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(stderr, "error: {}", f.msg);
            f.code
        }
    }
}

fn emit(text: &str, out: Option<&Path>, stdout: &mut dyn Write) -> Result<(), Failure> {
    match out {
        Some(p) => fs::write(p, text)
            .map_err(|e| Failure::usage(format!("cannot write {}: {e}", p.display()))),
        None => stdout.write_all(text.as_bytes()).map_err(Failure::from),
    }
}

/// `409600000000 b/s (409.60 Gb/s, 381.47 Gib/s)`
pub fn render_rate(r: BitRate) -> String {
    format!("{r} b/s ({:.2} Gb/s, {:.2} Gib/s)", r.gbps(), r.gibps())
}

fn load_config(path: &Path) -> Result<SurfaceConfig, Failure> {
    Ok(SurfaceConfig::from_path(path)?)
}

fn note_fractional_depth(cfg: &SurfaceConfig, stderr: &mut dyn Write) {
    if !cfg.modules.is_multiple_of(cfg.chains) {
        let _ = writeln!(
            stderr,
            "note: M={} N={}: chains ({}) do not divide modules; chained figures use fractional depth {}",
            cfg.antennas,
            cfg.modules,
            cfg.chains,
            cfg.chain_depth()
        );
    }
}

fn rates_schemes(scheme: Option<&str>, kind: Option<KindArg>) -> Result<Vec<Scheme>, Failure> {
    let centralized =
        match kind {
            None => vec![Scheme::CentralizedParallel, Scheme::CentralizedChained],
            Some(KindArg::Parallel) => vec![Scheme::CentralizedParallel],
            Some(KindArg::Chain) => vec![Scheme::CentralizedChained],
            Some(KindArg::Mesh) => return Err(Failure::usage(
                "closed-form rates cover parallel and chained routing; use `simulate` for a mesh",
            )),
        };
    match scheme {
        None => {
            let mut all = centralized;
            all.push(Scheme::DistributedBeamforming);
            Ok(all)
        }
        Some("centralized") => Ok(centralized),
        Some(s) => s.parse::<Scheme>().map(|s| vec![s]).map_err(Failure::usage),
    }
}

fn cmd_rates(
    config: &Path,
    scheme: Option<&str>,
    kind: Option<KindArg>,
    out: Option<&Path>,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> CmdResult {
    let schemes = rates_schemes(scheme, kind)?;
    let cfg = load_config(config)?.validate_analytic()?;
    note_fractional_depth(&cfg, stderr);
    let mut csv = format!("{CSV_HEADER}\n");
    for s in schemes {
        let r = rates::report(&cfg, s);
        csv.push_str(&r.csv_row(&cfg));
        csv.push('\n');
        let _ = writeln!(
            stderr,
            "{s}: max {}; aggregate {}; backplane power {:.4} W",
            render_rate(r.r_max_central),
            render_rate(r.r_aggregate),
            r.power_w
        );
    }
    emit(&csv, out, stdout)?;
    Ok(EXIT_OK)
}

/// A sweep over the antenna count with fixed M/K and antennas per module.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub antennas: Vec<usize>,
    pub ratio_m_over_k: usize,
    pub modules_per: usize,
    pub schemes: Vec<Scheme>,
    /// Remaining config keys, shared by every point.
    pub base: KeyValues,
}

const SWEEP_KEYS: &[&str] = &["sweep_m", "ratio_m_over_k", "modules_per", "schemes"];
const DERIVED_KEYS: &[&str] = &["antennas", "modules", "terminals", "grid_rows", "grid_cols"];

/// Expands `start:stop:xF` (multiplicative), `start:stop:S` or
/// `start:stop:+S` (additive), or a single value.
pub fn parse_range(s: &str) -> Result<Vec<usize>, String> {
    let parts: Vec<&str> = s.split(':').map(str::trim).collect();
    let num = |v: &str| {
        v.parse::<usize>()
            .map_err(|_| format!("bad number `{v}` in sweep range `{s}`"))
    };
    match parts.as_slice() {
        [single] => Ok(vec![num(single)?]),
        [start, stop, step] => {
            let (start, stop) = (num(start)?, num(stop)?);
            if start == 0 || stop < start {
                return Err(format!("sweep range `{s}` must satisfy 0 < start <= stop"));
            }
            let mut out = Vec::new();
            if let Some(f) = step.strip_prefix('x') {
                let f = num(f)?;
                if f < 2 {
                    return Err(format!("sweep factor must be at least 2 in `{s}`"));
                }
                let mut m = start;
                while m <= stop {
                    out.push(m);
                    m = match m.checked_mul(f) {
                        Some(v) => v,
                        None => break,
                    };
                }
            } else {
                let d = num(step.trim_start_matches('+'))?;
                if d == 0 {
                    return Err(format!("sweep step must be positive in `{s}`"));
                }
                out.extend((start..=stop).step_by(d));
            }
            Ok(out)
        }
        _ => Err(format!(
            "expected `start:stop:xfactor` or `start:stop:step`, got `{s}`"
        )),
    }
}

impl SweepSpec {
    pub fn parse(text: &str) -> Result<Self, String> {
        let mut kv = KeyValues::parse(text).map_err(|e| e.to_string())?;
        if let Some(k) = kv.keys().find(|k| DERIVED_KEYS.contains(k)) {
            return Err(format!(
                "`{k}` is derived per sweep point and cannot be set"
            ));
        }
        if let Some(k) = kv
            .keys()
            .find(|k| !SWEEP_KEYS.contains(k) && !CONFIG_KEYS.contains(k))
        {
            return Err(format!("unknown key `{k}`"));
        }
        let take = |kv: &mut KeyValues, key: &str| {
            kv.remove(key).ok_or_else(|| format!("missing key `{key}`"))
        };
        let antennas = parse_range(&take(&mut kv, "sweep_m")?)?;
        let positive = |key: &str, v: String| match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(format!("`{key}` must be a positive integer, got `{v}`")),
        };
        let ratio_m_over_k = positive("ratio_m_over_k", take(&mut kv, "ratio_m_over_k")?)?;
        let modules_per = positive("modules_per", take(&mut kv, "modules_per")?)?;
        let schemes = match kv.remove("schemes") {
            None => vec![Scheme::CentralizedChained, Scheme::DistributedBeamforming],
            Some(v) => v
                .split(',')
                .map(|s| s.trim().parse::<Scheme>())
                .collect::<Result<Vec<_>, _>>()?,
        };
        if schemes.is_empty() {
            return Err("`schemes` is empty".into());
        }
        Ok(Self {
            antennas,
            ratio_m_over_k,
            modules_per,
            schemes,
            base: kv,
        })
    }

    /// Config for one sweep point, or the reason it is skipped.
    pub fn point(&self, antennas: usize) -> Result<SurfaceConfig, String> {
        if !antennas.is_multiple_of(self.ratio_m_over_k) {
            return Err(format!(
                "M={antennas}: ratio_m_over_k ({}) does not divide M",
                self.ratio_m_over_k
            ));
        }
        if !antennas.is_multiple_of(self.modules_per) {
            return Err(format!(
                "M={antennas}: modules_per ({}) does not divide M",
                self.modules_per
            ));
        }
        let mut kv = self.base.clone();
        kv.set("antennas", antennas);
        kv.set("modules", antennas / self.modules_per);
        kv.set("terminals", antennas / self.ratio_m_over_k);
        SurfaceConfig::from_key_values(&kv)
            .and_then(SurfaceConfig::validate_analytic)
            .map_err(|e| format!("M={antennas}: {e}"))
    }
}

/// Report rows for every valid point, sorted by M then scheme, plus one
/// warning per skipped point.
pub fn scan(spec: &SweepSpec) -> (Vec<(SurfaceConfig, rates::ThroughputReport)>, Vec<String>) {
    let points: Vec<(usize, Result<SurfaceConfig, String>)> = spec
        .antennas
        .par_iter()
        .map(|&m| (m, spec.point(m)))
        .collect();
    let mut rows = Vec::new();
    let mut warnings = Vec::new();
    for (_, p) in points {
        match p {
            Ok(cfg) => {
                for &s in &spec.schemes {
                    rows.push((cfg.clone(), rates::report(&cfg, s)));
                }
            }
            Err(w) => warnings.push(w),
        }
    }
    rows.sort_by_key(|(cfg, r)| (cfg.antennas, r.scheme));
    (rows, warnings)
}

fn cmd_scan(
    sweep: &Path,
    out: Option<&Path>,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> CmdResult {
    let text = crate::config::read_text(sweep)?;
    let spec = SweepSpec::parse(&text).map_err(Failure::usage)?;
    let (rows, warnings) = scan(&spec);
    for w in warnings {
        let _ = writeln!(stderr, "warning: skipping {w}");
    }
    let mut csv = format!("{CSV_HEADER}\n");
    let mut last_m = None;
    for (cfg, r) in &rows {
        if last_m != Some(cfg.antennas) {
            note_fractional_depth(cfg, stderr);
            last_m = Some(cfg.antennas);
        }
        csv.push_str(&r.csv_row(cfg));
        csv.push('\n');
        let _ = writeln!(
            stderr,
            "M={} {}: max {:.2} Gib/s, aggregate {:.2} Gib/s",
            cfg.antennas,
            r.scheme,
            r.r_max_central.gibps(),
            r.r_aggregate.gibps()
        );
    }
    emit(&csv, out, stdout)?;
    Ok(EXIT_OK)
}

struct VerifyArgs {
    config: PathBuf,
    seed: u64,
    topology: Option<KindArg>,
    weights: WeightsArg,
    subcarriers: usize,
    symbols: usize,
    write_golden: Option<PathBuf>,
    golden: Option<PathBuf>,
    corrupt_weights: bool,
}

fn cmd_verify(a: &VerifyArgs, stdout: &mut dyn Write) -> CmdResult {
    let cfg = load_config(&a.config)?.validate()?;
    if a.subcarriers == 0 || a.symbols == 0 {
        return Err(Failure::usage(
            "--subcarriers and --symbols must be positive",
        ));
    }
    let method = match a.weights {
        WeightsArg::Zf => WeightMethod::Zf,
        WeightsArg::Mrc => WeightMethod::Mrc,
    };
    let case = VerifyCase::generate(&cfg, a.seed, method, a.subcarriers, a.symbols)?;
    if let Some(p) = &a.write_golden {
        write_block(fs::File::create(p)?, &case.want_uplink)?;
    }
    let golden: Option<SampleBlock> = match &a.golden {
        Some(p) => Some(read_block(std::io::BufReader::new(fs::File::open(p)?))?),
        None => None,
    };

    let kinds: Vec<TopologyKind> = match a.topology {
        Some(k) => vec![k.into()],
        None => TopologyKind::ALL.to_vec(),
    };
    let mut worst: f64 = 0.0;
    writeln!(stdout, "topology,uplink,downlink,streamed,golden")?;
    for kind in kinds {
        let dev = if a.corrupt_weights {
            case.check_with(&cfg, kind, corrupt_first_module)?
        } else {
            case.check(&cfg, kind)?
        };
        let up = &dev.uplink_output;
        let d_golden = match &golden {
            Some(g)
                if (g.dim(), g.symbols(), g.n_subcarriers())
                    == (up.dim(), up.symbols(), up.n_subcarriers()) =>
            {
                up.max_abs_diff(g)
            }
            Some(_) => return Err(Failure::usage("golden block shape does not match this run")),
            None => 0.0,
        };
        writeln!(
            stdout,
            "{kind},{:e},{:e},{:e},{d_golden:e}",
            dev.uplink, dev.downlink, dev.streamed
        )?;
        worst = worst.max(dev.max()).max(d_golden);
    }
    let pass = worst < VERIFY_TOLERANCE;
    writeln!(
        stdout,
        "max deviation {worst:e} (tolerance {VERIFY_TOLERANCE:e}): {}",
        if pass { "PASS" } else { "FAIL" }
    )?;
    Ok(if pass { EXIT_OK } else { EXIT_CHECK_FAILED })
}

struct SimulateArgs {
    config: PathBuf,
    topology: KindArg,
    scheme: ModeArg,
    duration: u64,
    direction: DirectionArg,
    overhead: String,
    fail_link: Option<usize>,
    fail_at: u64,
    out: Option<PathBuf>,
}

fn cmd_simulate(a: &SimulateArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> CmdResult {
    let cfg = load_config(&a.config)?.validate()?;
    let overhead: Ratio<u64> = parse_ratio(&a.overhead)
        .filter(|r| *r.numer() > 0)
        .ok_or_else(|| Failure::usage(format!("bad --overhead `{}`", a.overhead)))?;
    if a.duration == 0 {
        return Err(Failure::usage("--duration must be positive"));
    }
    let mode = match a.scheme {
        ModeArg::Centralized => Mode::Centralized,
        ModeArg::Distributed => Mode::Distributed,
    };
    let direction = match a.direction {
        DirectionArg::Uplink => Direction::Uplink,
        DirectionArg::Downlink => Direction::Downlink,
    };
    let topo = topology::build(&cfg, a.topology.into())?;
    let sim_err = |e: SimError| match e {
        SimError::Topology(TopologyError::Disconnected { .. }) => Failure::check(e.to_string()),
        other => Failure::usage(other.to_string()),
    };
    let mut sim = Simulation::new(&cfg, &topo, mode)
        .map_err(sim_err)?
        .with_direction(direction)
        .with_overhead(overhead)
        .with_trace(a.out.is_some());
    if let Some(link) = a.fail_link {
        sim = sim.inject_failure(link, a.fail_at).map_err(sim_err)?;
    }
    let outcome = sim.run(a.duration).map_err(sim_err)?;

    match &a.out {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            fs::write(dir.join("trace.csv"), outcome.trace_csv())?;
            fs::write(dir.join("loads.csv"), outcome.loads_csv())?;
        }
        None => stdout.write_all(outcome.loads_csv().as_bytes())?,
    }

    let simulated = outcome.aggregate_rate(cfg.bandwidth_hz);
    let expected = sim.expected_aggregate(a.duration);
    let _ = writeln!(stderr, "simulated aggregate: {}", render_rate(simulated));
    let _ = writeln!(stderr, "analytic aggregate:  {}", render_rate(expected));
    let _ = writeln!(
        stderr,
        "peak link load: {}",
        render_rate(outcome.peak_rate(cfg.bandwidth_hz))
    );
    let _ = writeln!(
        stderr,
        "delivered {}/{} symbols, {} alignment violations",
        outcome.delivered_symbols,
        outcome.duration_symbols,
        outcome.violations.len()
    );
    let pass = simulated == expected && outcome.fully_delivered() && outcome.violations.is_empty();
    let _ = writeln!(stderr, "agreement: {}", if pass { "PASS" } else { "FAIL" });
    Ok(if pass { EXIT_OK } else { EXIT_CHECK_FAILED })
}

fn cmd_export_topology(
    config: &Path,
    kind: KindArg,
    out: Option<&Path>,
    stdout: &mut dyn Write,
) -> CmdResult {
    let cfg = load_config(config)?.validate()?;
    let topo = topology::build(&cfg, kind.into())?;
    emit(&topo.to_edge_list(), out, stdout)?;
    Ok(EXIT_OK)
}
