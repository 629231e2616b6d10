//! C interface to `lis-core`.
//!
//! Configs and topologies are opaque heap handles released with their
//! `_free` function. Every fallible call returns a [`LisStatus`]; on failure
//! [`lis_last_error`] describes the most recent error on the calling thread.
//! Panics never cross the boundary and are reported as
//! `LIS_STATUS_ERR_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use lis_core::beamforming::{Direction, WeightMethod};
use lis_core::netsim::{Mode, SimError, Simulation};
use lis_core::rates::{self, BitRate, Scheme};
use lis_core::topology::{self, Topology, TopologyError, TopologyKind};
use lis_core::verify::VerifyCase;
use lis_core::{ConfigError, Error, SurfaceConfig};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LisStatus {
    Ok = 0,
    ErrNullPointer = -1,
    ErrInvalidArgument = -2,
    ErrConfig = -3,
    ErrTopology = -4,
    ErrDisconnected = -5,
    ErrBeamforming = -6,
    ErrSimulation = -7,
    ErrIo = -8,
    ErrBufferTooSmall = -9,
    ErrPanic = -99,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LisScheme {
    CentralizedParallel = 0,
    CentralizedChained = 1,
    Distributed = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LisTopologyKind {
    Parallel = 0,
    Chain = 1,
    Mesh = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LisMode {
    Centralized = 0,
    Distributed = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LisDirection {
    Uplink = 0,
    Downlink = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LisWeights {
    Zf = 0,
    Mrc = 1,
}

/// A rate in bits per second. `numer / denom` is exact when both fit in 64
/// bits; otherwise both are zero and only `bps` is meaningful.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LisRate {
    pub bps: f64,
    pub numer: u64,
    pub denom: u64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LisReport {
    pub r_element: LisRate,
    pub r_module: LisRate,
    pub r_max_central: LisRate,
    pub r_aggregate: LisRate,
    pub power_w: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LisSimOptions {
    pub mode: LisMode,
    pub direction: LisDirection,
    pub duration_symbols: u64,
    /// When true, `fail_link` fails for symbols sampled at or after
    /// `fail_at_step`.
    pub inject_failure: bool,
    pub fail_link: usize,
    pub fail_at_step: u64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LisSimSummary {
    pub simulated: LisRate,
    pub analytic: LisRate,
    pub peak_link: LisRate,
    pub delivered_symbols: u64,
    pub alignment_violations: u64,
    /// Simulated and analytic aggregates agree exactly, every symbol was
    /// delivered and no alignment violation occurred.
    pub agrees: bool,
}

/// Opaque surface configuration.
pub struct LisConfig(SurfaceConfig);

/// Opaque routed topology.
pub struct LisTopology(Topology);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).unwrap_or_default());
}

fn fail(status: LisStatus, msg: impl Into<String>) -> LisStatus {
    set_error(msg);
    status
}

fn topology_status(e: &TopologyError) -> LisStatus {
    match e {
        TopologyError::Disconnected { .. } => LisStatus::ErrDisconnected,
        TopologyError::Config(_) => LisStatus::ErrConfig,
        _ => LisStatus::ErrTopology,
    }
}

fn error_status(e: &Error) -> LisStatus {
    match e {
        Error::Config(_) => LisStatus::ErrConfig,
        Error::Topology(t) | Error::Simulation(SimError::Topology(t)) => topology_status(t),
        Error::Beamforming(_) | Error::Simulation(SimError::Beamforming(_)) => {
            LisStatus::ErrBeamforming
        }
        Error::Simulation(_) => LisStatus::ErrSimulation,
    }
}

fn config_status(e: &ConfigError) -> LisStatus {
    match e {
        ConfigError::Io { .. } => LisStatus::ErrIo,
        _ => LisStatus::ErrConfig,
    }
}

/// Runs `f`, converting a panic into `ErrPanic` and clearing the thread's
/// error message on success.
fn guard(f: impl FnOnce() -> Result<(), LisStatus>) -> LisStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            LisStatus::Ok
        }
        Ok(Err(status)) => status,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            fail(LisStatus::ErrPanic, format!("panic: {msg}"))
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, LisStatus> {
    if p.is_null() {
        return Err(fail(LisStatus::ErrNullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p).to_str().map_err(|_| {
        fail(
            LisStatus::ErrInvalidArgument,
            format!("{what} is not UTF-8"),
        )
    })
}

unsafe fn ref_arg<'a, T>(p: *const T, what: &str) -> Result<&'a T, LisStatus> {
    p.as_ref()
        .ok_or_else(|| fail(LisStatus::ErrNullPointer, format!("{what} is null")))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, LisStatus> {
    p.as_mut()
        .ok_or_else(|| fail(LisStatus::ErrNullPointer, format!("{what} is null")))
}

fn lis_rate(r: BitRate) -> LisRate {
    let q = r.ratio();
    match (u64::try_from(*q.numer()), u64::try_from(*q.denom())) {
        (Ok(numer), Ok(denom)) => LisRate {
            bps: r.as_f64(),
            numer,
            denom,
        },
        _ => LisRate {
            bps: r.as_f64(),
            numer: 0,
            denom: 0,
        },
    }
}

fn kind(k: LisTopologyKind) -> TopologyKind {
    match k {
        LisTopologyKind::Parallel => TopologyKind::FullyParallel,
        LisTopologyKind::Chain => TopologyKind::DaisyChain,
        LisTopologyKind::Mesh => TopologyKind::Mesh,
    }
}

/// Static, NUL-terminated library version.
#[no_mangle]
pub extern "C" fn lis_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message for the last failed call on this thread, or an empty string.
/// Valid until the next call into this library from the same thread.
#[no_mangle]
pub extern "C" fn lis_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn lis_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

fn store_config(cfg: SurfaceConfig, out: &mut *mut LisConfig) {
    *out = Box::into_raw(Box::new(LisConfig(cfg)));
}

/// Parses `key = value` config text. The config is not validated.
///
/// # Safety
/// `text` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lis_config_parse(
    text: *const c_char,
    out: *mut *mut LisConfig,
) -> LisStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let text = str_arg(text, "text")?;
        let cfg = SurfaceConfig::from_config_str(text)
            .map_err(|e| fail(config_status(&e), e.to_string()))?;
        store_config(cfg, out);
        Ok(())
    })
}

/// Reads and parses a config file. The config is not validated.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lis_config_load(
    path: *const c_char,
    out: *mut *mut LisConfig,
) -> LisStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let path = str_arg(path, "path")?;
        let cfg =
            SurfaceConfig::from_path(path).map_err(|e| fail(config_status(&e), e.to_string()))?;
        store_config(cfg, out);
        Ok(())
    })
}

/// Config with default radio parameters and a near-square grid.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lis_config_new(
    antennas: usize,
    modules: usize,
    terminals: usize,
    chains: usize,
    out: *mut *mut LisConfig,
) -> LisStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        if modules == 0 {
            return Err(fail(LisStatus::ErrConfig, "modules must be at least 1"));
        }
        store_config(
            SurfaceConfig::new(antennas, modules, terminals).with_chains(chains),
            out,
        );
        Ok(())
    })
}

/// # Safety
/// `cfg` must be null or a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn lis_config_free(cfg: *mut LisConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Checks every config invariant, including that chains divide modules.
///
/// # Safety
/// `cfg` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn lis_config_validate(cfg: *const LisConfig) -> LisStatus {
    guard(|| {
        let cfg = ref_arg(cfg, "cfg")?;
        cfg.0
            .clone()
            .validate()
            .map(drop)
            .map_err(|e| fail(LisStatus::ErrConfig, e.to_string()))
    })
}

/// Renders the config in the file format. Free the result with
/// [`lis_string_free`].
///
/// # Safety
/// `cfg` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lis_config_to_string(
    cfg: *const LisConfig,
    out: *mut *mut c_char,
) -> LisStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let cfg = ref_arg(cfg, "cfg")?;
        *out = to_c_string(cfg.0.to_config_string());
        Ok(())
    })
}

fn to_c_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " "))
        .unwrap_or_default()
        .into_raw()
}

/// Closed-form throughput figures. Chain depth may be fractional.
///
/// # Safety
/// `cfg` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lis_rates_report(
    cfg: *const LisConfig,
    scheme: LisScheme,
    out: *mut LisReport,
) -> LisStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let cfg = ref_arg(cfg, "cfg")?;
        let cfg = cfg
            .0
            .clone()
            .validate_analytic()
            .map_err(|e| fail(LisStatus::ErrConfig, e.to_string()))?;
        let scheme = match scheme {
            LisScheme::CentralizedParallel => Scheme::CentralizedParallel,
            LisScheme::CentralizedChained => Scheme::CentralizedChained,
            LisScheme::Distributed => Scheme::DistributedBeamforming,
        };
        let r = rates::report(&cfg, scheme);
        *out = LisReport {
            r_element: lis_rate(r.r_element),
            r_module: lis_rate(r.r_module),
            r_max_central: lis_rate(r.r_max_central),
            r_aggregate: lis_rate(r.r_aggregate),
            power_w: r.power_w,
        };
        Ok(())
    })
}

/// # Safety
/// `cfg` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lis_topology_build(
    cfg: *const LisConfig,
    topology_kind: LisTopologyKind,
    out: *mut *mut LisTopology,
) -> LisStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let cfg = ref_arg(cfg, "cfg")?;
        let t = topology::build(&cfg.0, kind(topology_kind))
            .map_err(|e| fail(topology_status(&e), e.to_string()))?;
        *out = Box::into_raw(Box::new(LisTopology(t)));
        Ok(())
    })
}

/// # Safety
/// `topology` must be null or a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn lis_topology_free(topology: *mut LisTopology) {
    if !topology.is_null() {
        drop(Box::from_raw(topology));
    }
}

/// Number of links; 0 for a null handle.
///
/// # Safety
/// `topology` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lis_topology_link_count(topology: *const LisTopology) -> usize {
    topology.as_ref().map_or(0, |t| t.0.links().len())
}

/// Hop count from `module` to the central processor.
///
/// # Safety
/// `topology` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lis_topology_hops(
    topology: *const LisTopology,
    module: usize,
    out: *mut usize,
) -> LisStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let t = ref_arg(topology, "topology")?;
        if module >= t.0.module_count() {
            return Err(fail(
                LisStatus::ErrInvalidArgument,
                format!("module {module} out of range"),
            ));
        }
        *out = t.0.hops(module);
        Ok(())
    })
}

/// Edge list with routes. Free the result with [`lis_string_free`].
///
/// # Safety
/// `topology` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lis_topology_edge_list(
    topology: *const LisTopology,
    out: *mut *mut c_char,
) -> LisStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let t = ref_arg(topology, "topology")?;
        *out = to_c_string(t.0.to_edge_list());
        Ok(())
    })
}

/// New topology with link `link` removed and routes recomputed.
///
/// # Safety
/// `topology` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lis_topology_reroute(
    topology: *const LisTopology,
    link: usize,
    out: *mut *mut LisTopology,
) -> LisStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let t = ref_arg(topology, "topology")?;
        let r = topology::reroute_on_failure(&t.0, link)
            .map_err(|e| fail(topology_status(&e), e.to_string()))?;
        *out = Box::into_raw(Box::new(LisTopology(r)));
        Ok(())
    })
}

/// Writes one buffer depth per module into `out[0..len]`; `len` must be at
/// least the module count.
///
/// # Safety
/// `topology` must be a live handle; `out` must point to `len` writable
/// elements.
#[no_mangle]
pub unsafe extern "C" fn lis_buffer_depths(
    topology: *const LisTopology,
    out: *mut usize,
    len: usize,
) -> LisStatus {
    guard(|| {
        let t = ref_arg(topology, "topology")?;
        if out.is_null() {
            return Err(fail(LisStatus::ErrNullPointer, "out is null"));
        }
        let depths = lis_core::netsim::compute_buffer_depths(&t.0);
        if len < depths.len() {
            return Err(fail(
                LisStatus::ErrBufferTooSmall,
                format!("need {} elements, got {len}", depths.len()),
            ));
        }
        std::slice::from_raw_parts_mut(out, depths.len()).copy_from_slice(&depths);
        Ok(())
    })
}

/// Runs the hop-level simulator and compares against the closed forms.
///
/// # Safety
/// `cfg` and `topology` must be live handles; `options` readable and `out`
/// writable.
#[no_mangle]
pub unsafe extern "C" fn lis_simulate(
    cfg: *const LisConfig,
    topology: *const LisTopology,
    options: *const LisSimOptions,
    out: *mut LisSimSummary,
) -> LisStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let cfg = ref_arg(cfg, "cfg")?;
        let t = ref_arg(topology, "topology")?;
        let o = ref_arg(options, "options")?;
        let sim_err = |e: SimError| {
            let e = Error::from(e);
            fail(error_status(&e), e.to_string())
        };
        let mode = match o.mode {
            LisMode::Centralized => Mode::Centralized,
            LisMode::Distributed => Mode::Distributed,
        };
        let direction = match o.direction {
            LisDirection::Uplink => Direction::Uplink,
            LisDirection::Downlink => Direction::Downlink,
        };
        let mut sim = Simulation::new(&cfg.0, &t.0, mode)
            .map_err(sim_err)?
            .with_direction(direction);
        if o.inject_failure {
            sim = sim
                .inject_failure(o.fail_link, o.fail_at_step)
                .map_err(sim_err)?;
        }
        let outcome = sim.run(o.duration_symbols).map_err(sim_err)?;
        let b = cfg.0.bandwidth_hz;
        let simulated = outcome.aggregate_rate(b);
        let analytic = sim.expected_aggregate(o.duration_symbols);
        *out = LisSimSummary {
            simulated: lis_rate(simulated),
            analytic: lis_rate(analytic),
            peak_link: lis_rate(outcome.peak_rate(b)),
            delivered_symbols: outcome.delivered_symbols,
            alignment_violations: outcome.violations.len() as u64,
            agrees: simulated == analytic
                && outcome.fully_delivered()
                && outcome.violations.is_empty(),
        };
        Ok(())
    })
}

/// Largest deviation of distributed from centralized beamforming (uplink,
/// downlink and buffered streaming) on a random channel drawn from `seed`.
///
/// # Safety
/// `cfg` must be a live handle; `max_deviation` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lis_verify(
    cfg: *const LisConfig,
    topology_kind: LisTopologyKind,
    seed: u64,
    weights: LisWeights,
    subcarriers: usize,
    symbols: usize,
    max_deviation: *mut f64,
) -> LisStatus {
    guard(|| {
        let out = out_arg(max_deviation, "max_deviation")?;
        let cfg = ref_arg(cfg, "cfg")?;
        let cfg = cfg
            .0
            .clone()
            .validate()
            .map_err(|e| fail(LisStatus::ErrConfig, e.to_string()))?;
        if subcarriers == 0 || symbols == 0 {
            return Err(fail(
                LisStatus::ErrInvalidArgument,
                "subcarriers and symbols must be positive",
            ));
        }
        let method = match weights {
            LisWeights::Zf => WeightMethod::Zf,
            LisWeights::Mrc => WeightMethod::Mrc,
        };
        let err = |e: Error| fail(error_status(&e), e.to_string());
        let case = VerifyCase::generate(&cfg, seed, method, subcarriers, symbols).map_err(err)?;
        *out = case.check(&cfg, kind(topology_kind)).map_err(err)?.max();
        Ok(())
    })
}
