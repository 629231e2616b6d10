use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use lis_core::rates::{self, ReportRow};
use lis_core::SurfaceConfig;

fn lis(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lis"))
        .args(args)
        .output()
        .expect("run lis")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_owned()
}

const SURFACE_1024: &str = "antennas = 1024\nmodules = 256\nterminals = 32\nbandwidth_hz = 20e6\n\
adc_bits = 10\nbeamf_bits = 15\nchains = 8\n";

const MESH_64: &str = "antennas = 64\nmodules = 16\nterminals = 8\nbandwidth_hz = 20e6\n\
adc_bits = 10\nbeamf_bits = 15\nchains = 4\ngrid_rows = 4\ngrid_cols = 4\n";

#[test]
fn rates_headline_row() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "s.conf", SURFACE_1024);
    let o = lis(&[
        "rates",
        "--config",
        &cfg,
        "--scheme",
        "centralized-parallel",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    let mut lines = out.lines();
    assert_eq!(lines.next(), Some(rates::CSV_HEADER));
    let row: ReportRow = lines.next().unwrap().parse().unwrap();
    assert_eq!(row.r_max_central.exact(), Some(409_600_000_000));
    assert!(lines.next().is_none());
    assert!(stderr(&o).contains("381.47 Gib/s"));
}

#[test]
fn rates_distributed_max() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "s.conf", SURFACE_1024);
    let o = lis(&["rates", "--config", &cfg, "--scheme", "distributed"]);
    assert_eq!(o.status.code(), Some(0));
    let row: ReportRow = stdout(&o).lines().nth(1).unwrap().parse().unwrap();
    assert_eq!(row.r_max_central.exact(), Some(19_200_000_000));
}

#[test]
fn rates_without_scheme_lists_all() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "s.conf", SURFACE_1024);
    let out_file = dir.path().join("r.csv");
    let o = lis(&[
        "rates",
        "--config",
        &cfg,
        "--out",
        out_file.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).is_empty());
    let text = fs::read_to_string(out_file).unwrap();
    let schemes: Vec<&str> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').next().unwrap())
        .collect();
    assert_eq!(
        schemes,
        ["centralized-parallel", "centralized-chained", "distributed"]
    );
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "s.conf", SURFACE_1024);
    assert_eq!(
        lis(&["rates", "--config", "/no/such/file"]).status.code(),
        Some(2)
    );
    assert_eq!(
        lis(&["rates", "--config", &cfg, "--scheme", "bogus"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        lis(&["rates", "--config", &cfg, "--bogus"]).status.code(),
        Some(2)
    );
    assert_eq!(lis(&["frobnicate"]).status.code(), Some(2));
    let bad = write(dir.path(), "bad.conf", "antennas = 1024\nmodules = 250\nterminals = 4\nbandwidth_hz = 1\nadc_bits = 1\nbeamf_bits = 1\n");
    let o = lis(&["rates", "--config", &bad]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("divide"));
    assert_eq!(lis(&["--help"]).status.code(), Some(0));
}

#[test]
fn report_rows_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = write(dir.path(), "s.conf", SURFACE_1024);
    let template = SurfaceConfig::from_path(&cfg_path).unwrap();
    let o = lis(&["rates", "--config", &cfg_path]);
    for line in stdout(&o).lines().skip(1) {
        let row: ReportRow = line.parse().unwrap();
        let cfg = row.to_config(&template);
        assert_eq!(rates::report(&cfg, row.scheme).csv_row(&cfg), line);
    }
}

#[test]
fn single_point_scan_matches_rates() {
    let dir = tempfile::tempdir().unwrap();
    let sweep = write(
        dir.path(),
        "one.sweep",
        "sweep_m = 1024\nratio_m_over_k = 32\nmodules_per = 4\nbandwidth_hz = 20e6\nadc_bits = 10\n\
         beamf_bits = 15\nchains = 8\nschemes = centralized-parallel, centralized-chained, distributed\n",
    );
    let cfg = write(dir.path(), "s.conf", SURFACE_1024);
    let scan = lis(&["scan", "--sweep", &sweep]);
    let rates = lis(&["rates", "--config", &cfg]);
    assert_eq!(scan.status.code(), Some(0));
    assert_eq!(stdout(&scan), stdout(&rates));
}

#[test]
fn scan_skips_indivisible_points() {
    let dir = tempfile::tempdir().unwrap();
    let sweep = write(
        dir.path(),
        "s.sweep",
        "sweep_m = 96:104:4\nratio_m_over_k = 4\nmodules_per = 8\nbandwidth_hz = 20e6\nadc_bits = 10\nbeamf_bits = 15\n",
    );
    let o = lis(&["scan", "--config", &sweep]);
    assert_eq!(o.status.code(), Some(0));
    let ms: Vec<String> = stdout(&o)
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().to_owned())
        .collect();
    assert_eq!(ms, ["96", "96", "104", "104"]);
    assert!(stderr(&o).contains("warning: skipping M=100"));
}

#[test]
fn scan_requires_modules_per() {
    let dir = tempfile::tempdir().unwrap();
    let sweep = write(
        dir.path(),
        "s.sweep",
        "sweep_m = 64:128:x2\nratio_m_over_k = 32\nbandwidth_hz = 20e6\nadc_bits = 10\nbeamf_bits = 15\n",
    );
    let o = lis(&["scan", "--sweep", &sweep]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("modules_per"));
}

#[test]
fn verify_passes_and_catches_corruption() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "m.conf", MESH_64);
    let o = lis(&[
        "verify",
        "--config",
        &cfg,
        "--seed",
        "1",
        "--topology",
        "mesh",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).ends_with("PASS\n"));

    let o = lis(&["verify", "--config", &cfg, "--corrupt-weights"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).ends_with("FAIL\n"));

    let single = write(
        dir.path(),
        "one.conf",
        "antennas = 8\nmodules = 1\nterminals = 2\nbandwidth_hz = 1e6\nadc_bits = 8\nbeamf_bits = 8\n",
    );
    assert_eq!(lis(&["verify", "--config", &single]).status.code(), Some(0));
}

#[test]
fn verify_golden_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "m.conf", MESH_64);
    let golden = dir.path().join("uplink.bin");
    let g = golden.to_str().unwrap();
    let args = [
        "verify",
        "--config",
        &cfg,
        "--seed",
        "4",
        "--subcarriers",
        "2",
    ];
    let o = lis(&[&args[..], &["--write-golden", g]].concat());
    assert_eq!(o.status.code(), Some(0));
    let bytes = fs::read(&golden).unwrap();
    assert_eq!(&bytes[..4], b"LIST");
    assert_eq!(bytes.len(), 16 + 2 * 8 * 8 * 16);

    assert_eq!(
        lis(&[&args[..], &["--golden", g]].concat()).status.code(),
        Some(0)
    );
    let other_seed = [
        "verify",
        "--config",
        &cfg,
        "--seed",
        "5",
        "--subcarriers",
        "2",
        "--golden",
        g,
    ];
    assert_eq!(lis(&other_seed).status.code(), Some(1));
    let wrong_shape = ["verify", "--config", &cfg, "--seed", "4", "--golden", g];
    assert_eq!(lis(&wrong_shape).status.code(), Some(2));
}

fn load_column(csv: &str, src: &str, dst: &str) -> u128 {
    csv.lines()
        .skip(1)
        .map(|l| l.split(',').collect::<Vec<_>>())
        .find(|f| f[0] == src && f[1] == dst)
        .map(|f| f[2].parse().unwrap())
        .unwrap_or_else(|| panic!("no link {src}->{dst} in\n{csv}"))
}

#[test]
fn simulate_distributed_mesh() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "m.conf", MESH_64);
    let o = lis(&[
        "simulate",
        "--config",
        &cfg,
        "--topology",
        "mesh",
        "--scheme",
        "distributed",
        "--duration",
        "50",
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stderr(&o).contains("agreement: PASS"));
    // 2 * K * n_bit per symbol into the central processor
    assert_eq!(load_column(&stdout(&o), "0", "cp"), 50 * 2 * 8 * 15);
}

#[test]
fn simulate_chain_loads_follow_depth() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.conf",
        "antennas = 8\nmodules = 4\nterminals = 1\nbandwidth_hz = 20e6\nadc_bits = 10\nbeamf_bits = 15\n\
         chains = 1\ngrid_rows = 1\ngrid_cols = 4\n",
    );
    let o = lis(&[
        "simulate",
        "--config",
        &cfg,
        "--topology",
        "chain",
        "--scheme",
        "centralized",
        "--duration",
        "10",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let csv = stdout(&o);
    let unit = load_column(&csv, "3", "2");
    assert_eq!(load_column(&csv, "2", "1"), 2 * unit);
    assert_eq!(load_column(&csv, "1", "0"), 3 * unit);
    assert_eq!(load_column(&csv, "0", "cp"), 4 * unit);
}

#[test]
fn simulate_failures() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "m.conf", MESH_64);
    let base = [
        "simulate",
        "--config",
        &cfg,
        "--topology",
        "mesh",
        "--scheme",
        "centralized",
    ];
    let o = lis(&[&base[..], &["--fail-link", "0"]].concat());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("no path"));

    let o = lis(&[&base[..], &["--fail-link", "7", "--fail-at", "20"]].concat());
    assert_eq!(o.status.code(), Some(0));
    assert!(stderr(&o).contains("delivered 100/100"));

    let o = lis(&[&base[..], &["--fail-link", "999"]].concat());
    assert_eq!(o.status.code(), Some(2));
    let chain = [
        "simulate",
        "--config",
        &cfg,
        "--topology",
        "chain",
        "--scheme",
        "centralized",
        "--fail-link",
        "1",
    ];
    assert_eq!(lis(&chain).status.code(), Some(2));
}

#[test]
fn simulate_writes_deterministic_traces() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "m.conf", MESH_64);
    let run = |sub: &str| {
        let out = dir.path().join(sub);
        let o = lis(&[
            "simulate",
            "--config",
            &cfg,
            "--topology",
            "mesh",
            "--scheme",
            "distributed",
            "--duration",
            "5",
            "--direction",
            "downlink",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(0));
        (
            fs::read_to_string(out.join("trace.csv")).unwrap(),
            fs::read_to_string(out.join("loads.csv")).unwrap(),
        )
    };
    let (trace, loads) = run("a");
    assert_eq!(run("b"), (trace.clone(), loads.clone()));
    assert!(
        trace.starts_with("step,link_src,link_dst,payload_kind,bits\n0,cp,0,terminal_stream,240\n")
    );
    assert_eq!(trace.lines().count(), 1 + 5 * 16);
    assert!(loads.starts_with("link_src,link_dst,total_bits,peak_bits_per_step\n"));
}

fn edge_lines(text: &str) -> Vec<&str> {
    text.lines().take_while(|l| !l.starts_with('#')).collect()
}

#[test]
fn export_topology_edge_lists() {
    let dir = tempfile::tempdir().unwrap();
    let mesh4 = write(
        dir.path(),
        "m4.conf",
        "antennas = 4\nmodules = 4\nterminals = 1\nbandwidth_hz = 1\nadc_bits = 1\nbeamf_bits = 1\n\
         grid_rows = 2\ngrid_cols = 2\n",
    );
    let o = lis(&["export-topology", "--config", &mesh4, "--topology", "mesh"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(edge_lines(&stdout(&o)).len(), 5);

    let single = write(
        dir.path(),
        "one.conf",
        "antennas = 4\nmodules = 1\nterminals = 1\nbandwidth_hz = 1\nadc_bits = 1\nbeamf_bits = 1\n",
    );
    for kind in ["parallel", "chain", "mesh"] {
        let o = lis(&["export-topology", "--config", &single, "--topology", kind]);
        let edges = stdout(&o);
        let edges = edge_lines(&edges);
        assert_eq!(edges.len(), 1, "{kind}");
        assert!(edges[0].starts_with("0 cp "), "{kind}");
    }

    let star_chains = write(
        dir.path(),
        "star.conf",
        "antennas = 4\nmodules = 4\nterminals = 1\nbandwidth_hz = 1\nadc_bits = 1\nbeamf_bits = 1\n\
         grid_rows = 2\ngrid_cols = 2\nchains = 4\n",
    );
    let pairs = |kind: &str| {
        let o = lis(&[
            "export-topology",
            "--config",
            &star_chains,
            "--topology",
            kind,
        ]);
        let mut p: Vec<String> = edge_lines(&stdout(&o))
            .iter()
            .map(|l| l.rsplit_once(' ').unwrap().0.to_owned())
            .collect();
        p.sort();
        p
    };
    assert_eq!(pairs("chain"), pairs("parallel"));
}
