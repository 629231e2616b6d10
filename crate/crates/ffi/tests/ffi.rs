use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use lis_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(lis_last_error()) }
        .to_string_lossy()
        .into_owned()
}

fn parse(text: &str) -> *mut LisConfig {
    let text = CString::new(text).unwrap();
    let mut cfg = ptr::null_mut();
    assert_eq!(
        unsafe { lis_config_parse(text.as_ptr(), &mut cfg) },
        LisStatus::Ok
    );
    assert!(!cfg.is_null());
    cfg
}

const SURFACE: &str = "antennas = 64\nmodules = 16\nterminals = 8\nbandwidth_hz = 20e6\n\
adc_bits = 10\nbeamf_bits = 15\nchains = 4\ngrid_rows = 4\ngrid_cols = 4\n";

#[test]
fn headline_rate_is_exact() {
    let cfg = parse(
        "antennas = 1024\nmodules = 256\nterminals = 32\nbandwidth_hz = 20e6\nadc_bits = 10\nbeamf_bits = 15\n",
    );
    let mut r = std::mem::MaybeUninit::<LisReport>::uninit();
    let status = unsafe { lis_rates_report(cfg, LisScheme::CentralizedParallel, r.as_mut_ptr()) };
    assert_eq!(status, LisStatus::Ok);
    let r = unsafe { r.assume_init() };
    assert_eq!(
        (r.r_max_central.numer, r.r_max_central.denom),
        (409_600_000_000, 1)
    );
    assert!((r.power_w - 0.4096).abs() < 1e-12);
    unsafe { lis_config_free(cfg) };
}

#[test]
fn config_errors_set_message() {
    let text = CString::new(
        "antennas = 10\nmodules = 3\nterminals = 1\nbandwidth_hz = 1\nadc_bits = 1\nbeamf_bits = 1",
    )
    .unwrap();
    let mut cfg = ptr::null_mut();
    assert_eq!(
        unsafe { lis_config_parse(text.as_ptr(), &mut cfg) },
        LisStatus::Ok
    );
    assert_eq!(unsafe { lis_config_validate(cfg) }, LisStatus::ErrConfig);
    assert!(last_error().contains("divide"));
    unsafe { lis_config_free(cfg) };

    let bad = CString::new("antennas = x").unwrap();
    let mut cfg = ptr::null_mut();
    assert_eq!(
        unsafe { lis_config_parse(bad.as_ptr(), &mut cfg) },
        LisStatus::ErrConfig
    );
    assert!(cfg.is_null());

    let missing = CString::new("/nonexistent/surface.conf").unwrap();
    assert_eq!(
        unsafe { lis_config_load(missing.as_ptr(), &mut cfg) },
        LisStatus::ErrIo
    );
}

#[test]
fn null_arguments_are_rejected() {
    let mut cfg = ptr::null_mut();
    assert_eq!(
        unsafe { lis_config_parse(ptr::null(), &mut cfg) },
        LisStatus::ErrNullPointer
    );
    assert_eq!(
        unsafe { lis_config_parse(c"a = 1".as_ptr(), ptr::null_mut()) },
        LisStatus::ErrNullPointer
    );
    assert_eq!(
        unsafe { lis_config_validate(ptr::null()) },
        LisStatus::ErrNullPointer
    );
    unsafe {
        lis_config_free(ptr::null_mut());
        lis_topology_free(ptr::null_mut());
        lis_string_free(ptr::null_mut());
    }
    assert_eq!(unsafe { lis_topology_link_count(ptr::null()) }, 0);
}

#[test]
fn topology_round_trip() {
    let cfg = parse(SURFACE);
    let mut mesh = ptr::null_mut();
    assert_eq!(
        unsafe { lis_topology_build(cfg, LisTopologyKind::Mesh, &mut mesh) },
        LisStatus::Ok
    );
    // 4x4 grid: 2*4*3 internal links plus the attachment
    assert_eq!(unsafe { lis_topology_link_count(mesh) }, 25);

    let mut hops = 0;
    assert_eq!(
        unsafe { lis_topology_hops(mesh, 15, &mut hops) },
        LisStatus::Ok
    );
    assert_eq!(hops, 7);
    assert_eq!(
        unsafe { lis_topology_hops(mesh, 16, &mut hops) },
        LisStatus::ErrInvalidArgument
    );

    let mut depths = [usize::MAX; 16];
    assert_eq!(
        unsafe { lis_buffer_depths(mesh, depths.as_mut_ptr(), 16) },
        LisStatus::Ok
    );
    assert_eq!(depths[0], 6);
    assert_eq!(depths[15], 0);
    assert_eq!(
        unsafe { lis_buffer_depths(mesh, depths.as_mut_ptr(), 3) },
        LisStatus::ErrBufferTooSmall
    );

    let mut text = ptr::null_mut();
    assert_eq!(
        unsafe { lis_topology_edge_list(mesh, &mut text) },
        LisStatus::Ok
    );
    let s = unsafe { CStr::from_ptr(text) }.to_str().unwrap().to_owned();
    unsafe { lis_string_free(text) };
    assert!(s.starts_with("0 cp 0.1\n"));
    assert!(s.contains("# routes"));

    let mut rerouted = ptr::null_mut();
    assert_eq!(
        unsafe { lis_topology_reroute(mesh, 1, &mut rerouted) },
        LisStatus::Ok
    );
    assert_eq!(unsafe { lis_topology_link_count(rerouted) }, 24);
    let mut cut = ptr::null_mut();
    assert_eq!(
        unsafe { lis_topology_reroute(mesh, 0, &mut cut) },
        LisStatus::ErrDisconnected
    );
    assert!(cut.is_null());

    unsafe {
        lis_topology_free(rerouted);
        lis_topology_free(mesh);
        lis_config_free(cfg);
    }
}

#[test]
fn simulation_agrees_with_closed_form() {
    let cfg = parse(SURFACE);
    for (kind, mode) in [
        (LisTopologyKind::Parallel, LisMode::Centralized),
        (LisTopologyKind::Chain, LisMode::Centralized),
        (LisTopologyKind::Mesh, LisMode::Centralized),
        (LisTopologyKind::Mesh, LisMode::Distributed),
    ] {
        let mut t = ptr::null_mut();
        assert_eq!(
            unsafe { lis_topology_build(cfg, kind, &mut t) },
            LisStatus::Ok
        );
        let opts = LisSimOptions {
            mode,
            direction: LisDirection::Uplink,
            duration_symbols: 12,
            inject_failure: kind == LisTopologyKind::Mesh,
            fail_link: 3,
            fail_at_step: 5,
        };
        let mut out = std::mem::MaybeUninit::<LisSimSummary>::uninit();
        assert_eq!(
            unsafe { lis_simulate(cfg, t, &opts, out.as_mut_ptr()) },
            LisStatus::Ok
        );
        let out = unsafe { out.assume_init() };
        assert!(out.agrees, "{kind:?} {mode:?}");
        assert_eq!(out.simulated, out.analytic);
        assert_eq!(out.delivered_symbols, 12);
        unsafe { lis_topology_free(t) };
    }
    unsafe { lis_config_free(cfg) };
}

#[test]
fn failure_on_chain_is_a_topology_error() {
    let cfg = parse(SURFACE);
    let mut t = ptr::null_mut();
    assert_eq!(
        unsafe { lis_topology_build(cfg, LisTopologyKind::Chain, &mut t) },
        LisStatus::Ok
    );
    let opts = LisSimOptions {
        mode: LisMode::Centralized,
        direction: LisDirection::Downlink,
        duration_symbols: 2,
        inject_failure: true,
        fail_link: 0,
        fail_at_step: 0,
    };
    let mut out = std::mem::MaybeUninit::<LisSimSummary>::uninit();
    assert_eq!(
        unsafe { lis_simulate(cfg, t, &opts, out.as_mut_ptr()) },
        LisStatus::ErrTopology
    );
    unsafe {
        lis_topology_free(t);
        lis_config_free(cfg);
    }
}

#[test]
fn verify_reports_small_deviation() {
    let cfg = parse(SURFACE);
    for kind in [
        LisTopologyKind::Parallel,
        LisTopologyKind::Chain,
        LisTopologyKind::Mesh,
    ] {
        let mut dev = f64::NAN;
        let status = unsafe { lis_verify(cfg, kind, 5, LisWeights::Zf, 2, 4, &mut dev) };
        assert_eq!(status, LisStatus::Ok, "{}", last_error());
        assert!(dev < 1e-10, "{kind:?}: {dev}");
    }
    let mut dev = 0.0;
    assert_eq!(
        unsafe {
            lis_verify(
                cfg,
                LisTopologyKind::Mesh,
                5,
                LisWeights::Mrc,
                0,
                4,
                &mut dev,
            )
        },
        LisStatus::ErrInvalidArgument
    );
    unsafe { lis_config_free(cfg) };
}

#[test]
fn config_string_round_trip() {
    let cfg = parse(SURFACE);
    let mut text = ptr::null_mut();
    assert_eq!(
        unsafe { lis_config_to_string(cfg, &mut text) },
        LisStatus::Ok
    );
    let again = parse(unsafe { CStr::from_ptr(text) }.to_str().unwrap());
    let mut a = std::mem::MaybeUninit::<LisReport>::uninit();
    let mut b = std::mem::MaybeUninit::<LisReport>::uninit();
    unsafe {
        lis_rates_report(cfg, LisScheme::CentralizedChained, a.as_mut_ptr());
        lis_rates_report(again, LisScheme::CentralizedChained, b.as_mut_ptr());
        assert_eq!(a.assume_init(), b.assume_init());
        lis_string_free(text);
        lis_config_free(again);
        lis_config_free(cfg);
    }
}

#[test]
fn version_is_set() {
    let v = unsafe { CStr::from_ptr(lis_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

/// Compiles tests/c/smoke.c against the generated header and the static
/// library. Skipped when no C compiler or static library is available.
#[test]
fn c_program_links_and_runs() {
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let tmp = PathBuf::from(env!("CARGO_TARGET_TMPDIR"));
    let lib = tmp.parent().unwrap().join("debug").join("liblis_ffi.a");
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    if !lib.exists() || Command::new(&cc).arg("--version").output().is_err() {
        eprintln!("skipping: no {} or C compiler", lib.display());
        return;
    }
    let exe = tmp.join("lis_smoke");
    let status = Command::new(&cc)
        .arg("-std=c99")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(manifest.join("tests/c/smoke.c"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success(), "C compilation failed");
    let out = Command::new(&exe).output().unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "ok");
}
