//! Hop-level backplane simulator.
//!
//! Time advances in steps of one symbol period (1/B); a payload crosses one
//! link per step. Symbol `s` is sampled at every module at step `s`.
//!
//! * Centralized uplink: each module ships its own antenna waveforms along
//!   its route; relays forward without merging, so a link carries the
//!   payload of every module behind it.
//! * Distributed uplink: each module holds its local partial sum for
//!   `depth` steps in a delay buffer, adds the partial sums arriving from its
//!   children and forwards one K-vector. With the depths from
//!   [`compute_buffer_depths`] every child's sum arrives exactly when its
//!   parent fires.
//! * Downlinks reverse the routes: waveforms per module (centralized) or
//!   one multicast of the terminal stream per tree link (distributed).
//!
//! Bits are accounted per directed link and per step; the totals are exact
//! integers and can be compared with the closed forms in [`crate::rates`].

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use thiserror::Error;

use crate::beamforming::{
    BeamformingError, CMatrix, Direction, Domain, ModuleState, SampleBlock, TaggedPartial,
};
use crate::config::SurfaceConfig;
use crate::rates::{self, BitRate, Scheme, ThroughputReport};
use crate::topology::{reroute_on_failure, LinkId, Node, Topology, TopologyError, TopologyKind};

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Beamforming(#[from] BeamformingError),
    #[error("topology has {topology} modules but config has {config}")]
    ModuleCount { topology: usize, config: usize },
    #[error("payload of {0} bits per symbol is not a whole number")]
    NonIntegralPayload(String),
    #[error("expected {expected} buffer depths, got {got}")]
    DepthCount { expected: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    Centralized,
    Distributed,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Centralized => "centralized",
            Mode::Distributed => "distributed",
        })
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "centralized" => Ok(Mode::Centralized),
            "distributed" => Ok(Mode::Distributed),
            other => Err(format!("unknown scheme `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PayloadKind {
    AntennaWaveform,
    PartialSum,
    TerminalStream,
}

impl fmt::Display for PayloadKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PayloadKind::AntennaWaveform => "antenna_waveform",
            PayloadKind::PartialSum => "partial_sum",
            PayloadKind::TerminalStream => "terminal_stream",
        })
    }
}

/// One payload crossing one link during one step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimEvent {
    pub step: u64,
    pub symbol: u64,
    pub src: Node,
    pub dst: Node,
    pub kind: PayloadKind,
    pub bits: u64,
}

/// Traffic over one directed link.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LinkLoad {
    pub src: Node,
    pub dst: Node,
    pub total_bits: u128,
    pub peak_bits_per_step: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationKind {
    /// The child's partial sum arrived after the parent had already fired.
    MissingAddend,
    /// The child's partial sum arrived before the parent fired and had to
    /// wait outside the configured buffers.
    EarlyAddend,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AlignmentViolation {
    pub kind: ViolationKind,
    pub at: Node,
    pub child: usize,
    pub symbol: u64,
}

/// Per-module delay that aligns partial-sum arrivals: the deepest module
/// waits zero steps and a module `h` hops from the central processor waits
/// `max_hops − h`.
pub fn compute_buffer_depths(t: &Topology) -> Vec<usize> {
    let max = t.max_hops();
    (0..t.module_count()).map(|m| max - t.hops(m)).collect()
}

#[derive(Debug, Clone)]
struct Epoch {
    topology: Topology,
    depths: Vec<usize>,
    first_symbol: u64,
}

/// A configured simulation run. Build with [`Simulation::new`], adjust with
/// the `with_*` methods, then [`run`](Simulation::run).
#[derive(Debug, Clone)]
pub struct Simulation {
    cfg: SurfaceConfig,
    mode: Mode,
    direction: Direction,
    overhead: Ratio<u64>,
    record_trace: bool,
    epochs: Vec<Epoch>,
    custom_depths: bool,
}

impl Simulation {
    pub fn new(cfg: &SurfaceConfig, topology: &Topology, mode: Mode) -> Result<Self, SimError> {
        if topology.module_count() != cfg.modules {
            return Err(SimError::ModuleCount {
                topology: topology.module_count(),
                config: cfg.modules,
            });
        }
        Ok(Self {
            cfg: cfg.clone(),
            mode,
            direction: Direction::Uplink,
            overhead: Ratio::from_integer(1),
            record_trace: false,
            epochs: vec![Epoch {
                depths: compute_buffer_depths(topology),
                topology: topology.clone(),
                first_symbol: 0,
            }],
            custom_depths: false,
        })
    }

    pub fn with_direction(mut self, direction: Direction) -> Self {
        self.direction = direction;
        self
    }

    /// Multiplies every payload by a framing/protocol overhead factor.
    pub fn with_overhead(mut self, overhead: Ratio<u64>) -> Self {
        self.overhead = overhead;
        self
    }

    pub fn with_trace(mut self, record: bool) -> Self {
        self.record_trace = record;
        self
    }

    /// Overrides the buffer depths of the initial topology.
    pub fn with_buffer_depths(mut self, depths: Vec<usize>) -> Result<Self, SimError> {
        if depths.len() != self.cfg.modules {
            return Err(SimError::DepthCount {
                expected: self.cfg.modules,
                got: depths.len(),
            });
        }
        self.epochs[0].depths = depths;
        self.custom_depths = true;
        Ok(self)
    }

    /// Fails `link` of the current topology for every symbol sampled at or
    /// after `at_step`. Routes and buffer depths are recomputed; fails with
    /// `Disconnected` if some module is cut off.
    pub fn inject_failure(mut self, link: LinkId, at_step: u64) -> Result<Self, SimError> {
        let last = self.epochs.last().expect("at least one epoch");
        let rerouted = reroute_on_failure(&last.topology, link)?;
        let depths = compute_buffer_depths(&rerouted);
        if at_step == 0 && self.epochs.len() == 1 {
            self.epochs[0] = Epoch {
                topology: rerouted,
                depths,
                first_symbol: 0,
            };
        } else {
            self.epochs.push(Epoch {
                topology: rerouted,
                depths,
                first_symbol: at_step.max(last.first_symbol),
            });
        }
        Ok(self)
    }

    /// Topology in force after all injected failures.
    pub fn final_topology(&self) -> &Topology {
        &self.epochs.last().expect("at least one epoch").topology
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    /// Closed-form aggregate for a run of `duration_symbols`: each epoch's
    /// analytic aggregate weighted by the symbols it covers, scaled by the
    /// overhead factor.
    pub fn expected_aggregate(&self, duration_symbols: u64) -> BitRate {
        if duration_symbols == 0 {
            return BitRate::ZERO;
        }
        let mut total = Ratio::from_integer(0u128);
        for (i, epoch) in self.epochs.iter().enumerate() {
            let end = self
                .epochs
                .get(i + 1)
                .map_or(duration_symbols, |e| e.first_symbol.min(duration_symbols));
            let start = epoch.first_symbol.min(duration_symbols);
            if start < end {
                let r = expected_report(&self.cfg, &epoch.topology, self.mode).r_aggregate;
                total += r.ratio() * Ratio::from_integer((end - start) as u128);
            }
        }
        let overhead = Ratio::new(
            *self.overhead.numer() as u128,
            *self.overhead.denom() as u128,
        );
        BitRate::from_ratio(total / Ratio::from_integer(duration_symbols as u128) * overhead)
    }

    fn payload_bits(&self) -> Result<(PayloadKind, u64), SimError> {
        let (kind, per_symbol) = match (self.mode, self.direction) {
            (Mode::Centralized, _) => (
                PayloadKind::AntennaWaveform,
                // (M/N) antennas × 2 components × n_res × oversampling
                Ratio::new(
                    self.cfg.antennas_per_module() as u128 * 2 * self.cfg.adc_bits as u128,
                    1,
                ) * Ratio::new(
                    *self.cfg.oversampling.numer() as u128,
                    *self.cfg.oversampling.denom() as u128,
                ),
            ),
            (Mode::Distributed, dir) => (
                if dir == Direction::Uplink {
                    PayloadKind::PartialSum
                } else {
                    PayloadKind::TerminalStream
                },
                Ratio::from_integer(2 * self.cfg.terminals as u128 * self.cfg.beamf_bits as u128),
            ),
        };
        let bits = per_symbol
            * Ratio::new(
                *self.overhead.numer() as u128,
                *self.overhead.denom() as u128,
            );
        if !bits.is_integer() || bits.to_integer() == 0 {
            return Err(SimError::NonIntegralPayload(format!("{bits}")));
        }
        u64::try_from(bits.to_integer())
            .map(|b| (kind, b))
            .map_err(|_| SimError::NonIntegralPayload(format!("{bits}")))
    }

    /// Runs `duration_symbols` symbols through the backplane.
    pub fn run(&self, duration_symbols: u64) -> Result<SimOutcome, SimError> {
        let (kind, bits) = self.payload_bits()?;
        let failure_at = self.epochs.get(1).map(|e| e.first_symbol);
        let mut acc = Accounting::new(self.record_trace, failure_at);
        let mut delivered = 0;
        let mut violations = Vec::new();
        let n = self.cfg.modules;

        for (i, epoch) in self.epochs.iter().enumerate() {
            let end = self
                .epochs
                .get(i + 1)
                .map_or(duration_symbols, |e| e.first_symbol.min(duration_symbols));
            let start = epoch.first_symbol.min(duration_symbols);
            if start >= end {
                continue;
            }
            let t = &epoch.topology;
            match (self.mode, self.direction) {
                (Mode::Centralized, Direction::Uplink) => {
                    for s in start..end {
                        for m in 0..n {
                            for (h, w) in t.route(m).windows(2).enumerate() {
                                acc.emit(s + h as u64, s, w[0], w[1], kind, bits);
                            }
                        }
                    }
                    delivered += end - start;
                }
                (Mode::Centralized, Direction::Downlink) => {
                    for s in start..end {
                        for m in 0..n {
                            let route = t.route(m);
                            for (j, w) in route.windows(2).rev().enumerate() {
                                acc.emit(s + j as u64, s, w[1], w[0], kind, bits);
                            }
                        }
                    }
                    delivered += end - start;
                }
                (Mode::Distributed, Direction::Downlink) => {
                    for s in start..end {
                        for m in 0..n {
                            let depth_from_cp = t.hops(m) as u64;
                            acc.emit(
                                s + depth_from_cp - 1,
                                s,
                                t.parent(m),
                                Node::Module(m),
                                kind,
                                bits,
                            );
                        }
                    }
                    delivered += end - start;
                }
                (Mode::Distributed, Direction::Uplink) => {
                    let plan = AggregationPlan::new(t, &epoch.depths);
                    for s in start..end {
                        for m in 0..n {
                            acc.emit(
                                plan.fire[m] + s,
                                s,
                                Node::Module(m),
                                t.parent(m),
                                kind,
                                bits,
                            );
                        }
                        violations.extend(
                            plan.violations
                                .iter()
                                .map(|v| AlignmentViolation { symbol: s, ..*v }),
                        );
                    }
                    if plan.delivered_count == n {
                        delivered += end - start;
                    }
                }
            }
        }

        let (loads, pre_failure, post_failure) = acc.loads();
        Ok(SimOutcome {
            mode: self.mode,
            direction: self.direction,
            duration_symbols,
            events: acc.events,
            loads,
            pre_failure,
            post_failure,
            delivered_symbols: delivered,
            violations,
        })
    }
}

/// Static timing of one epoch's distributed uplink, relative to the symbol
/// index: module `m` fires at step `s + fire[m]`.
struct AggregationPlan {
    fire: Vec<u64>,
    violations: Vec<AlignmentViolation>,
    delivered_count: usize,
}

impl AggregationPlan {
    fn new(t: &Topology, depths: &[usize]) -> Self {
        let n = t.module_count();
        let fire: Vec<u64> = depths.iter().map(|&d| d as u64).collect();
        let mut violations = Vec::new();
        let mut count = vec![1usize; n];
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by_key(|&m| (std::cmp::Reverse(t.hops(m)), m));
        let mut central_arrivals = Vec::new();
        for m in order {
            let arrive = fire[m] + 1;
            match t.parent(m) {
                Node::Module(p) => {
                    if arrive > fire[p] {
                        violations.push(AlignmentViolation {
                            kind: ViolationKind::MissingAddend,
                            at: Node::Module(p),
                            child: m,
                            symbol: 0,
                        });
                        continue;
                    }
                    if arrive < fire[p] {
                        violations.push(AlignmentViolation {
                            kind: ViolationKind::EarlyAddend,
                            at: Node::Module(p),
                            child: m,
                            symbol: 0,
                        });
                    }
                    count[p] += count[m];
                }
                Node::Central => central_arrivals.push((m, arrive)),
            }
        }
        // the central processor fires on the latest arrival
        let fire_cp = central_arrivals.iter().map(|&(_, a)| a).max().unwrap_or(0);
        let mut delivered_count = 0;
        for (m, a) in central_arrivals {
            if a < fire_cp {
                violations.push(AlignmentViolation {
                    kind: ViolationKind::EarlyAddend,
                    at: Node::Central,
                    child: m,
                    symbol: 0,
                });
            }
            delivered_count += count[m];
        }
        Self {
            fire,
            violations,
            delivered_count,
        }
    }
}

#[derive(Default)]
struct LinkAccount {
    total: u128,
    per_step: HashMap<u64, u64>,
}

struct Accounting {
    record: bool,
    failure_at: Option<u64>,
    events: Vec<SimEvent>,
    all: BTreeMap<(Node, Node), LinkAccount>,
    pre: BTreeMap<(Node, Node), LinkAccount>,
    post: BTreeMap<(Node, Node), LinkAccount>,
}

impl Accounting {
    fn new(record: bool, failure_at: Option<u64>) -> Self {
        Self {
            record,
            failure_at,
            events: Vec::new(),
            all: BTreeMap::new(),
            pre: BTreeMap::new(),
            post: BTreeMap::new(),
        }
    }

    fn emit(&mut self, step: u64, symbol: u64, src: Node, dst: Node, kind: PayloadKind, bits: u64) {
        let add = |map: &mut BTreeMap<(Node, Node), LinkAccount>| {
            let a = map.entry((src, dst)).or_default();
            a.total += bits as u128;
            *a.per_step.entry(step).or_default() += bits;
        };
        add(&mut self.all);
        if let Some(at) = self.failure_at {
            if symbol < at {
                add(&mut self.pre);
            } else {
                add(&mut self.post);
            }
        }
        if self.record {
            self.events.push(SimEvent {
                step,
                symbol,
                src,
                dst,
                kind,
                bits,
            });
        }
    }

    fn loads(&mut self) -> (Vec<LinkLoad>, Vec<LinkLoad>, Vec<LinkLoad>) {
        fn collect(map: &BTreeMap<(Node, Node), LinkAccount>) -> Vec<LinkLoad> {
            map.iter()
                .map(|(&(src, dst), a)| LinkLoad {
                    src,
                    dst,
                    total_bits: a.total,
                    peak_bits_per_step: a.per_step.values().copied().max().unwrap_or(0),
                })
                .collect()
        }
        self.events
            .sort_by_key(|e| (e.step, e.src, e.dst, e.symbol));
        (collect(&self.all), collect(&self.pre), collect(&self.post))
    }
}

#[derive(Debug, Clone)]
pub struct SimOutcome {
    pub mode: Mode,
    pub direction: Direction,
    pub duration_symbols: u64,
    /// Every payload transfer, ordered by step. Empty unless tracing.
    pub events: Vec<SimEvent>,
    pub loads: Vec<LinkLoad>,
    /// Loads from symbols sampled before / after an injected failure; empty
    /// when no failure was injected.
    pub pre_failure: Vec<LinkLoad>,
    pub post_failure: Vec<LinkLoad>,
    /// Symbols whose full payload (all N modules) reached its destination.
    pub delivered_symbols: u64,
    pub violations: Vec<AlignmentViolation>,
}

impl SimOutcome {
    pub fn total_bits(&self) -> u128 {
        self.loads.iter().map(|l| l.total_bits).sum()
    }

    /// Total bits divided by the simulated duration (symbols / B).
    pub fn aggregate_rate(&self, bandwidth_hz: u64) -> BitRate {
        if self.duration_symbols == 0 {
            return BitRate::ZERO;
        }
        BitRate::from_ratio(Ratio::new(
            self.total_bits() * bandwidth_hz as u128,
            self.duration_symbols as u128,
        ))
    }

    /// Average rate on one directed link.
    pub fn link_rate(&self, src: Node, dst: Node, bandwidth_hz: u64) -> Option<BitRate> {
        self.load(src, dst).map(|l| {
            BitRate::from_ratio(Ratio::new(
                l.total_bits * bandwidth_hz as u128,
                self.duration_symbols.max(1) as u128,
            ))
        })
    }

    /// Highest per-step load on any link, as a rate.
    pub fn peak_rate(&self, bandwidth_hz: u64) -> BitRate {
        let peak = self
            .loads
            .iter()
            .map(|l| l.peak_bits_per_step)
            .max()
            .unwrap_or(0);
        BitRate::from_bits_per_sec(peak as u128 * bandwidth_hz as u128)
    }

    pub fn load(&self, src: Node, dst: Node) -> Option<&LinkLoad> {
        self.loads.iter().find(|l| l.src == src && l.dst == dst)
    }

    pub fn fully_delivered(&self) -> bool {
        self.delivered_symbols == self.duration_symbols
    }

    pub fn trace_csv(&self) -> String {
        let mut out = String::from("step,link_src,link_dst,payload_kind,bits\n");
        for e in &self.events {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                e.step, e.src, e.dst, e.kind, e.bits
            ));
        }
        out
    }

    pub fn loads_csv(&self) -> String {
        let mut out = String::from("link_src,link_dst,total_bits,peak_bits_per_step\n");
        for l in &self.loads {
            out.push_str(&format!(
                "{},{},{},{}\n",
                l.src, l.dst, l.total_bits, l.peak_bits_per_step
            ));
        }
        out
    }
}

/// Closed-form figures for the traffic a simulation of `topology` in `mode`
/// should produce. Chains use the chain closed form; a mesh uses the hop
/// counts of its route tree.
pub fn expected_report(cfg: &SurfaceConfig, topology: &Topology, mode: Mode) -> ThroughputReport {
    match (mode, topology.kind()) {
        (Mode::Distributed, _) => rates::report(cfg, Scheme::DistributedBeamforming),
        (Mode::Centralized, TopologyKind::FullyParallel) => {
            rates::report(cfg, Scheme::CentralizedParallel)
        }
        (Mode::Centralized, TopologyKind::DaisyChain) => {
            rates::report(cfg, Scheme::CentralizedChained)
        }
        (Mode::Centralized, TopologyKind::Mesh) => rates::report_for_hops(
            cfg,
            Scheme::CentralizedChained,
            (0..topology.module_count()).map(|m| topology.hops(m)),
        ),
    }
}

/// Result of pushing actual sample values through the delay buffers.
#[derive(Debug, Clone)]
pub struct StreamOutput {
    pub block: SampleBlock,
    pub violations: Vec<AlignmentViolation>,
}

struct Message {
    symbol: u64,
    arrive: u64,
    from: usize,
    sums: Vec<CMatrix>,
}

/// Streams the distributed uplink symbol by symbol through each module's
/// [`DelayBuffer`](crate::beamforming::DelayBuffer). Each module's buffer is
/// set to `depths[m]`; partial sums that reach a module after it has fired
/// for that symbol are dropped and reported, so misaligned depths show up as
/// a wrong output.
pub fn stream_uplink(
    modules: &mut [ModuleState],
    y: &SampleBlock,
    topology: &Topology,
    depths: &[usize],
) -> Result<StreamOutput, SimError> {
    let n = modules.len();
    if topology.module_count() != n {
        return Err(SimError::ModuleCount {
            topology: topology.module_count(),
            config: n,
        });
    }
    if depths.len() != n {
        return Err(SimError::DepthCount {
            expected: n,
            got: depths.len(),
        });
    }
    crate::beamforming::check_partition(modules, y.dim())?;
    if modules.iter().enumerate().any(|(i, m)| m.id != i) {
        return Err(BeamformingError::Topology("modules must be ordered by id".into()).into());
    }
    let n_sc = y.n_subcarriers();
    let k = modules[0].terminals();
    let symbols = y.symbols() as u64;
    for (m, &d) in modules.iter_mut().zip(depths) {
        m.set_buffer_depth(d);
    }

    let mut inbox: Vec<Vec<Message>> = (0..n).map(|_| Vec::new()).collect();
    let mut in_flight: Vec<(Node, Message)> = Vec::new();
    let mut fired: Vec<u64> = vec![0; n]; // symbols fired so far, in order
    let mut central: Vec<Vec<CMatrix>> = (0..symbols)
        .map(|_| (0..n_sc).map(|_| CMatrix::zeros(k, 1)).collect())
        .collect();
    let mut violations = Vec::new();
    let last_step =
        symbols + depths.iter().copied().max().unwrap_or(0) as u64 + topology.max_hops() as u64 + 1;

    for step in 0..=last_step {
        // deliver everything sent during the previous step
        let arriving: Vec<(Node, Message)> = std::mem::take(&mut in_flight);
        for (dst, msg) in arriving {
            match dst {
                Node::Central => {
                    for (acc, s) in central[msg.symbol as usize].iter_mut().zip(&msg.sums) {
                        *acc += s;
                    }
                }
                Node::Module(p) if msg.symbol < fired[p] => violations.push(AlignmentViolation {
                    kind: ViolationKind::MissingAddend,
                    at: dst,
                    child: msg.from,
                    symbol: msg.symbol,
                }),
                Node::Module(p) => inbox[p].push(msg),
            }
        }

        for m in 0..n {
            let sample = (step < symbols).then(|| {
                let col = step as usize;
                let partial: Vec<CMatrix> = (0..n_sc)
                    .map(|sc| {
                        let y_col = y.subcarrier(sc).columns(col, 1).into_owned();
                        modules[m].local_partial(&y_col, sc)
                    })
                    .collect();
                TaggedPartial {
                    symbol: step,
                    sums: partial,
                }
            });
            let Some(Some(TaggedPartial { symbol, mut sums })) = modules[m].buffer.push(sample)
            else {
                continue;
            };
            let mut held = Vec::new();
            for msg in inbox[m].drain(..) {
                if msg.symbol == symbol {
                    if msg.arrive < step {
                        violations.push(AlignmentViolation {
                            kind: ViolationKind::EarlyAddend,
                            at: Node::Module(m),
                            child: msg.from,
                            symbol,
                        });
                    }
                    for (acc, s) in sums.iter_mut().zip(&msg.sums) {
                        *acc += s;
                    }
                } else {
                    held.push(msg);
                }
            }
            inbox[m] = held;
            fired[m] = symbol + 1;
            in_flight.push((
                topology.parent(m),
                Message {
                    symbol,
                    arrive: step + 1,
                    from: m,
                    sums,
                },
            ));
        }
    }

    let out = (0..n_sc)
        .map(|sc| {
            let cols: Vec<CMatrix> = central.iter().map(|c| c[sc].clone()).collect();
            let mut mtx = CMatrix::zeros(k, symbols as usize);
            for (j, c) in cols.iter().enumerate() {
                mtx.set_column(j, &c.column(0));
            }
            mtx
        })
        .collect();
    Ok(StreamOutput {
        block: SampleBlock::new(Domain::Terminal, out)?,
        violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::{build_daisy_chains, build_fully_parallel, build_mesh};

    fn chain_cfg(n: usize, per: usize) -> SurfaceConfig {
        SurfaceConfig::new(n * per, n, 4)
            .with_grid(1, n)
            .with_chains(1)
    }

    #[test]
    fn star_depths_are_zero() {
        let c = SurfaceConfig::new(16, 4, 2).with_grid(2, 2);
        let t = build_fully_parallel(&c).unwrap();
        assert_eq!(compute_buffer_depths(&t), vec![0; 4]);
    }

    #[test]
    fn chain_depths() {
        let c = chain_cfg(5, 1);
        let t = build_daisy_chains(&c).unwrap();
        assert_eq!(compute_buffer_depths(&t), vec![4, 3, 2, 1, 0]);
    }

    #[test]
    fn centralized_chain_loads_grow_toward_head() {
        let c = chain_cfg(3, 1);
        let t = build_daisy_chains(&c).unwrap();
        let out = Simulation::new(&c, &t, Mode::Centralized)
            .unwrap()
            .run(10)
            .unwrap();
        let per = 2 * 10 * 10; // 20 bits per symbol per module, 10 symbols
        let head = out.load(Node::Module(0), Node::Central).unwrap();
        let tail = out.load(Node::Module(2), Node::Module(1)).unwrap();
        assert_eq!(head.total_bits, 3 * per as u128);
        assert_eq!(tail.total_bits, per as u128);
        assert_eq!(head.peak_bits_per_step, 3 * 20);
    }

    #[test]
    fn distributed_loads_are_uniform() {
        let c = chain_cfg(3, 4);
        let t = build_daisy_chains(&c).unwrap();
        let out = Simulation::new(&c, &t, Mode::Distributed)
            .unwrap()
            .run(7)
            .unwrap();
        assert!(out.loads.iter().all(|l| l.total_bits == 7 * 2 * 4 * 15));
        assert!(out.violations.is_empty());
        assert!(out.fully_delivered());
    }

    #[test]
    fn zero_depths_on_a_chain_lose_addends() {
        let c = chain_cfg(3, 1);
        let t = build_daisy_chains(&c).unwrap();
        let out = Simulation::new(&c, &t, Mode::Distributed)
            .unwrap()
            .with_buffer_depths(vec![0; 3])
            .unwrap()
            .run(2)
            .unwrap();
        assert!(out
            .violations
            .iter()
            .any(|v| v.kind == ViolationKind::MissingAddend));
        assert_eq!(out.delivered_symbols, 0);
    }

    #[test]
    fn module_count_must_match() {
        let c = chain_cfg(3, 1);
        let t = build_daisy_chains(&chain_cfg(4, 1)).unwrap();
        assert!(matches!(
            Simulation::new(&c, &t, Mode::Centralized),
            Err(SimError::ModuleCount { .. })
        ));
    }

    #[test]
    fn fractional_payload_rejected() {
        let mut c = chain_cfg(2, 1);
        c.oversampling = Ratio::new(4, 3);
        let t = build_daisy_chains(&c).unwrap();
        let sim = Simulation::new(&c, &t, Mode::Centralized).unwrap();
        assert!(matches!(sim.run(1), Err(SimError::NonIntegralPayload(_))));
    }

    #[test]
    fn attachment_failure_is_disconnected() {
        let c = SurfaceConfig::new(16, 4, 2).with_grid(2, 2);
        let t = build_mesh(&c).unwrap();
        let sim = Simulation::new(&c, &t, Mode::Distributed).unwrap();
        assert!(matches!(
            sim.inject_failure(0, 3),
            Err(SimError::Topology(TopologyError::Disconnected { .. }))
        ));
    }

    #[test]
    fn failure_splits_accounting() {
        let c = SurfaceConfig::new(36, 9, 2).with_grid(3, 3);
        let t = build_mesh(&c).unwrap();
        let link = t.find_link(Node::Module(0), Node::Module(3)).unwrap();
        let out = Simulation::new(&c, &t, Mode::Centralized)
            .unwrap()
            .inject_failure(link, 4)
            .unwrap()
            .run(10)
            .unwrap();
        assert!(out.fully_delivered());
        let pre: u128 = out.pre_failure.iter().map(|l| l.total_bits).sum();
        let post: u128 = out.post_failure.iter().map(|l| l.total_bits).sum();
        assert_eq!(pre + post, out.total_bits());
        assert!(out
            .pre_failure
            .iter()
            .any(|l| l.src == Node::Module(3) && l.dst == Node::Module(0)));
        assert!(!out
            .post_failure
            .iter()
            .any(|l| l.src == Node::Module(3) && l.dst == Node::Module(0)));
    }

    #[test]
    fn failure_at_step_zero_equals_pruned_topology() {
        let c = SurfaceConfig::new(36, 9, 2).with_grid(3, 3);
        let t = build_mesh(&c).unwrap();
        let link = t.find_link(Node::Module(4), Node::Module(5)).unwrap();
        let failed = Simulation::new(&c, &t, Mode::Distributed)
            .unwrap()
            .inject_failure(link, 0)
            .unwrap()
            .with_trace(true)
            .run(5)
            .unwrap();
        let pruned = reroute_on_failure(&t, link).unwrap();
        let direct = Simulation::new(&c, &pruned, Mode::Distributed)
            .unwrap()
            .with_trace(true)
            .run(5)
            .unwrap();
        assert_eq!(failed.events, direct.events);
        assert_eq!(failed.loads, direct.loads);
    }

    #[test]
    fn downlink_mirrors_uplink_volume() {
        let c = SurfaceConfig::new(36, 9, 2).with_grid(3, 3);
        let t = build_mesh(&c).unwrap();
        for mode in [Mode::Centralized, Mode::Distributed] {
            let up = Simulation::new(&c, &t, mode).unwrap().run(4).unwrap();
            let down = Simulation::new(&c, &t, mode)
                .unwrap()
                .with_direction(Direction::Downlink)
                .run(4)
                .unwrap();
            assert_eq!(up.total_bits(), down.total_bits());
            for l in &up.loads {
                assert_eq!(down.load(l.dst, l.src).unwrap().total_bits, l.total_bits);
            }
        }
    }

    #[test]
    fn overhead_scales_payload() {
        let c = chain_cfg(2, 1);
        let t = build_daisy_chains(&c).unwrap();
        let base = Simulation::new(&c, &t, Mode::Distributed)
            .unwrap()
            .run(3)
            .unwrap();
        let framed = Simulation::new(&c, &t, Mode::Distributed)
            .unwrap()
            .with_overhead(Ratio::new(5, 4))
            .run(3)
            .unwrap();
        assert_eq!(framed.total_bits() * 4, base.total_bits() * 5);
    }

    #[test]
    fn csv_exports() {
        let c = chain_cfg(2, 1);
        let t = build_daisy_chains(&c).unwrap();
        let out = Simulation::new(&c, &t, Mode::Distributed)
            .unwrap()
            .with_trace(true)
            .run(1)
            .unwrap();
        let trace = out.trace_csv();
        let mut lines = trace.lines();
        assert_eq!(
            lines.next(),
            Some("step,link_src,link_dst,payload_kind,bits")
        );
        assert_eq!(lines.next(), Some("0,1,0,partial_sum,120"));
        assert_eq!(lines.next(), Some("1,0,cp,partial_sum,120"));
        let loads = out.loads_csv();
        assert!(loads.starts_with("link_src,link_dst,total_bits,peak_bits_per_step\n"));
        assert_eq!(loads.lines().count(), 3);
    }

    fn stream_setup(depths: Option<Vec<usize>>) -> (StreamOutput, SampleBlock) {
        use crate::beamforming::{
            centralized_uplink, compute_weights, generate_channel, random_qpsk, transmit,
            WeightMethod,
        };
        let c = SurfaceConfig::new(36, 9, 3).with_grid(3, 3);
        let t = build_mesh(&c).unwrap();
        let h = generate_channel(36, 3, 2, 3).unwrap();
        let w = compute_weights(&h, WeightMethod::Zf).unwrap();
        let x = random_qpsk(3, 5, 2, 4).unwrap();
        let y = transmit(&h, &x).unwrap();
        let mut modules = ModuleState::partition(&w, 9).unwrap();
        let depths = depths.unwrap_or_else(|| compute_buffer_depths(&t));
        let out = stream_uplink(&mut modules, &y, &t, &depths).unwrap();
        (out, centralized_uplink(&w, &y).unwrap())
    }

    #[test]
    fn streamed_uplink_matches_centralized() {
        let (out, want) = stream_setup(None);
        assert!(out.violations.is_empty());
        assert!(out.block.max_abs_diff(&want) < 1e-9);
    }

    #[test]
    fn streamed_uplink_with_zero_depths_loses_addends() {
        let (out, want) = stream_setup(Some(vec![0; 9]));
        assert!(out
            .violations
            .iter()
            .any(|v| v.kind == ViolationKind::MissingAddend));
        assert!(out.block.max_abs_diff(&want) > 1e-3);
    }
}
