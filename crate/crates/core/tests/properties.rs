use num_rational::Ratio;
use proptest::prelude::*;

use lis_core::beamforming::{
    centralized_uplink, compute_weights, distributed_uplink, generate_channel, random_qpsk,
    transmit, ModuleState, WeightMethod,
};
use lis_core::netsim::{compute_buffer_depths, Mode, Simulation};
use lis_core::rates::{self, BitRate, ReportRow, Scheme};
use lis_core::topology::{self, build_daisy_chains, build_mesh, Node, TopologyKind};
use lis_core::SurfaceConfig;

/// (rows, cols, antennas per module, terminals, chains) giving a valid config.
fn surface() -> impl Strategy<Value = SurfaceConfig> {
    (
        1usize..=6,
        1usize..=6,
        1usize..=4,
        1u32..=16,
        1u32..=20,
        1u64..=50,
    )
        .prop_flat_map(|(rows, cols, per, adc, beamf, mhz)| {
            let n = rows * cols;
            let divisors: Vec<usize> = (1..=n).filter(|d| n % d == 0).collect();
            (prop::sample::select(divisors), 1..=(n * per).min(6)).prop_map(move |(chains, k)| {
                let mut cfg = SurfaceConfig::new(n * per, n, k)
                    .with_grid(rows, cols)
                    .with_chains(chains);
                cfg.adc_bits = adc;
                cfg.beamf_bits = beamf;
                cfg.bandwidth_hz = mhz * 1_000_000;
                cfg
            })
        })
}

fn kind() -> impl Strategy<Value = TopologyKind> {
    prop::sample::select(TopologyKind::ALL.to_vec())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn chained_closed_form_matches_route_hops(cfg in surface()) {
        let t = build_daisy_chains(&cfg).unwrap();
        let hops = (0..cfg.modules).map(|m| t.hops(m));
        prop_assert_eq!(rates::centralized_aggregate(&cfg), rates::routed_aggregate(&cfg, hops));
    }

    #[test]
    fn max_ratio_is_parameter_only(cfg in surface()) {
        let ratio = rates::centralized_max(&cfg).ratio() / rates::distributed_max(&cfg).ratio();
        let want = Ratio::new(
            (cfg.antennas as u128) * cfg.adc_bits as u128,
            cfg.terminals as u128 * cfg.beamf_bits as u128,
        );
        prop_assert_eq!(ratio, want);
    }

    #[test]
    fn report_csv_round_trips(cfg in surface(), s in 0usize..3) {
        let scheme = [Scheme::CentralizedParallel, Scheme::CentralizedChained, Scheme::DistributedBeamforming][s];
        let line = rates::report(&cfg, scheme).csv_row(&cfg);
        let row: ReportRow = line.parse().unwrap();
        let back = row.to_config(&cfg);
        prop_assert_eq!(rates::report(&back, scheme).csv_row(&back), line);
    }

    #[test]
    fn config_text_round_trips(cfg in surface()) {
        let again = SurfaceConfig::from_config_str(&cfg.to_config_string()).unwrap();
        prop_assert_eq!(again, cfg);
    }

    #[test]
    fn routes_are_valid_trees(cfg in surface(), kind in kind()) {
        let t = topology::build(&cfg, kind).unwrap();
        prop_assert!(t.check_routes().is_ok());
        let depths = compute_buffer_depths(&t);
        for (m, depth) in depths.iter().enumerate() {
            prop_assert_eq!(depth + t.hops(m), t.max_hops());
            if let Node::Module(p) = t.parent(m) {
                prop_assert_eq!(t.hops(p) + 1, t.hops(m));
            }
        }
    }

    #[test]
    fn mesh_hops_are_manhattan(cfg in surface()) {
        let t = build_mesh(&cfg).unwrap();
        for m in 0..cfg.modules {
            let (r, c) = cfg.grid.position(m);
            prop_assert_eq!(t.hops(m), r + c + 1);
        }
    }

    #[test]
    fn relays_conserve_bits(cfg in surface(), kind in kind(), duration in 1u64..12) {
        let t = topology::build(&cfg, kind).unwrap();
        let out = Simulation::new(&cfg, &t, Mode::Centralized).unwrap().run(duration).unwrap();
        let own = (rates::per_module_rate(&cfg).ratio() * Ratio::from_integer(duration as u128)
            / Ratio::from_integer(cfg.bandwidth_hz as u128)).to_integer();
        for m in 0..cfg.modules {
            let node = Node::Module(m);
            let inbound: u128 = out.loads.iter().filter(|l| l.dst == node).map(|l| l.total_bits).sum();
            let outbound: u128 = out.loads.iter().filter(|l| l.src == node).map(|l| l.total_bits).sum();
            prop_assert_eq!(outbound, inbound + own);
        }
    }

    #[test]
    fn distributed_links_carry_one_vector(cfg in surface(), kind in kind(), duration in 1u64..12) {
        let t = topology::build(&cfg, kind).unwrap();
        let out = Simulation::new(&cfg, &t, Mode::Distributed).unwrap().run(duration).unwrap();
        let per_symbol = 2 * cfg.terminals as u64 * cfg.beamf_bits as u64;
        prop_assert_eq!(out.loads.len(), cfg.modules);
        for l in &out.loads {
            prop_assert_eq!(l.total_bits, (per_symbol * duration) as u128);
            prop_assert_eq!(l.peak_bits_per_step, per_symbol);
        }
        prop_assert_eq!(out.peak_rate(cfg.bandwidth_hz), rates::distributed_max(&cfg));
    }

    #[test]
    fn chained_peak_is_depth_times_module_rate(cfg in surface(), duration in 1u64..48) {
        let t = build_daisy_chains(&cfg).unwrap();
        let out = Simulation::new(&cfg, &t, Mode::Centralized).unwrap().run(duration).unwrap();
        // the head link only fills once every module has emitted a symbol
        let depth = ((cfg.modules / cfg.chains) as u128).min(duration as u128);
        prop_assert_eq!(out.peak_rate(cfg.bandwidth_hz), rates::per_module_rate(&cfg) * depth);
    }

    #[test]
    fn simulation_is_deterministic(cfg in surface(), kind in kind(), distributed: bool) {
        let t = topology::build(&cfg, kind).unwrap();
        let mode = if distributed { Mode::Distributed } else { Mode::Centralized };
        let run = || Simulation::new(&cfg, &t, mode).unwrap().with_trace(true).run(3).unwrap();
        prop_assert_eq!(run().events, run().events);
    }

    #[test]
    fn scaling_antennas_leaves_distributed_loads(cfg in surface(), kind in kind()) {
        let mut doubled = cfg.clone();
        doubled.antennas *= 2;
        let t = topology::build(&cfg, kind).unwrap();
        let a = Simulation::new(&cfg, &t, Mode::Distributed).unwrap().run(4).unwrap();
        let b = Simulation::new(&doubled, &t, Mode::Distributed).unwrap().run(4).unwrap();
        prop_assert_eq!(a.loads, b.loads);
    }

    #[test]
    fn distributed_uplink_equals_matrix_product(
        n in 1usize..=9, per in 1usize..=4, k in 1usize..=4, seed: u64, kind in kind(), zf: bool,
    ) {
        let m = n * per;
        prop_assume!(k <= m);
        let cfg = SurfaceConfig::new(m, n, k).validate().unwrap();
        let t = topology::build(&cfg, kind).unwrap();
        let h = generate_channel(m, k, 2, seed).unwrap();
        let method = if zf { WeightMethod::Zf } else { WeightMethod::Mrc };
        let w = compute_weights(&h, method).unwrap();
        let y = transmit(&h, &random_qpsk(k, 3, 2, seed ^ 1).unwrap()).unwrap();
        let mut modules = ModuleState::partition(&w, n).unwrap();
        let got = distributed_uplink(&mut modules, &y, &t).unwrap();
        let want = centralized_uplink(&w, &y).unwrap();
        prop_assert!(got.max_abs_diff(&want) < 1e-9);
    }
}

#[test]
fn headline_rate_in_both_units() {
    let cfg = SurfaceConfig::new(1024, 256, 32);
    let r = rates::centralized_max(&cfg);
    assert_eq!(r, BitRate::from_bits_per_sec(409_600_000_000));
    assert!((r.gibps() - 381.47).abs() < 0.005);
    assert!((r.gbps() - 409.6).abs() < 1e-9);
}
