use std::collections::VecDeque;
use std::ops::Range;

use rayon::prelude::*;

use super::quantize::Quantizer;
use super::{
    BeamformingError, BeamformingWeights, CMatrix, Domain, Quantization, Result, SampleBlock,
};
use crate::topology::{Node, Topology};

/// Fixed-latency FIFO: an item pushed now comes out `depth` pushes later.
#[derive(Debug, Clone, Default)]
pub struct DelayBuffer<T> {
    depth: usize,
    queue: VecDeque<T>,
}

impl<T> DelayBuffer<T> {
    pub fn new(depth: usize) -> Self {
        Self {
            depth,
            queue: VecDeque::with_capacity(depth + 1),
        }
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    /// Pushes `item` and returns whatever was pushed `depth` steps ago.
    pub fn push(&mut self, item: T) -> Option<T> {
        self.queue.push_back(item);
        if self.queue.len() > self.depth {
            self.queue.pop_front()
        } else {
            None
        }
    }

    /// Empties the buffer in arrival order.
    pub fn drain(&mut self) -> impl Iterator<Item = T> + '_ {
        self.queue.drain(..)
    }

    pub fn len(&self) -> usize {
        self.queue.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queue.is_empty()
    }
}

/// Partial sums of one symbol across all subcarriers, as held in a module's
/// delay buffer. `None` entries are idle slots used to flush the buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct TaggedPartial {
    pub symbol: u64,
    pub sums: Vec<CMatrix>,
}

/// One common module: its contiguous antenna rows of W, a K-row partial-sum
/// accumulator per subcarrier, and a delay buffer for latency matching.
#[derive(Debug, Clone)]
pub struct ModuleState {
    pub id: usize,
    pub antennas: Range<usize>,
    weights: Vec<CMatrix>,
    accumulator: Vec<CMatrix>,
    pub buffer: DelayBuffer<Option<TaggedPartial>>,
}

impl ModuleState {
    /// `weights` holds this module's rows of W for each subcarrier.
    pub fn new(id: usize, antennas: Range<usize>, weights: Vec<CMatrix>) -> Result<Self> {
        if weights.iter().any(|w| w.nrows() != antennas.len()) {
            return Err(BeamformingError::Partition(format!(
                "module {id}: weight rows do not match {} antennas",
                antennas.len()
            )));
        }
        Ok(Self {
            id,
            antennas,
            weights,
            accumulator: Vec::new(),
            buffer: DelayBuffer::new(0),
        })
    }

    /// Splits W into `modules` equal contiguous antenna groups, module i
    /// owning antennas [i·M/N, (i+1)·M/N).
    pub fn partition(w: &BeamformingWeights, modules: usize) -> Result<Vec<ModuleState>> {
        let m = w.antennas();
        if modules == 0 || !m.is_multiple_of(modules) {
            return Err(BeamformingError::Partition(format!(
                "{modules} modules cannot split {m} antennas evenly"
            )));
        }
        let per = m / modules;
        (0..modules)
            .map(|i| {
                let rows = i * per..(i + 1) * per;
                let local = w
                    .subcarriers()
                    .iter()
                    .map(|sc| sc.rows(rows.start, per).into_owned())
                    .collect();
                ModuleState::new(i, rows, local)
            })
            .collect()
    }

    pub fn local_weights(&self, subcarrier: usize) -> &CMatrix {
        &self.weights[subcarrier]
    }

    pub fn local_weights_mut(&mut self, subcarrier: usize) -> &mut CMatrix {
        &mut self.weights[subcarrier]
    }

    pub fn n_subcarriers(&self) -> usize {
        self.weights.len()
    }

    pub fn terminals(&self) -> usize {
        self.weights.first().map_or(0, |w| w.ncols())
    }

    /// Sets the delay buffer to `depth` steps, dropping its contents.
    pub fn set_buffer_depth(&mut self, depth: usize) {
        self.buffer = DelayBuffer::new(depth);
    }

    /// K×S partial sum Σ w_m*·y_m over this module's antennas.
    pub fn local_partial(&self, y: &CMatrix, subcarrier: usize) -> CMatrix {
        let rows = y.rows(self.antennas.start, self.antennas.len());
        self.weights[subcarrier].adjoint() * rows
    }

    /// This module's antenna samples W_local·x for terminal samples `x`.
    pub fn local_downlink(&self, x: &CMatrix, subcarrier: usize) -> CMatrix {
        &self.weights[subcarrier] * x
    }

    pub fn accumulator(&self) -> &[CMatrix] {
        &self.accumulator
    }

    /// Copy restricted to one subcarrier.
    pub fn only_subcarrier(&self, subcarrier: usize) -> ModuleState {
        ModuleState {
            id: self.id,
            antennas: self.antennas.clone(),
            weights: vec![self.weights[subcarrier].clone()],
            accumulator: Vec::new(),
            buffer: DelayBuffer::new(self.buffer.depth()),
        }
    }
}

/// Antenna ranges must cover 0..`antennas` exactly once.
pub fn check_partition(modules: &[ModuleState], antennas: usize) -> Result<()> {
    let mut owner = vec![None; antennas];
    for m in modules {
        if m.antennas.end > antennas {
            return Err(BeamformingError::Partition(format!(
                "module {} claims antenna {} beyond {antennas}",
                m.id,
                m.antennas.end - 1
            )));
        }
        for a in m.antennas.clone() {
            if let Some(prev) = owner[a].replace(m.id) {
                return Err(BeamformingError::Partition(format!(
                    "antenna {a} owned by modules {prev} and {}",
                    m.id
                )));
            }
        }
    }
    if let Some(a) = owner.iter().position(Option::is_none) {
        return Err(BeamformingError::Partition(format!(
            "antenna {a} unassigned"
        )));
    }
    Ok(())
}

fn check_modules(modules: &[ModuleState], topology: &Topology, antennas: usize) -> Result<()> {
    check_partition(modules, antennas)?;
    if topology.module_count() != modules.len() {
        return Err(BeamformingError::Topology(format!(
            "topology routes {} modules, {} given",
            topology.module_count(),
            modules.len()
        )));
    }
    if let Some(m) = modules.iter().find(|m| m.id >= topology.module_count()) {
        return Err(BeamformingError::Topology(format!(
            "module {} is unrouted",
            m.id
        )));
    }
    topology.check_routes().map_err(BeamformingError::Topology)
}

/// x̂ = Wᴴ·y on every subcarrier.
pub fn centralized_uplink(w: &BeamformingWeights, y: &SampleBlock) -> Result<SampleBlock> {
    y.expect(Domain::Antenna, w.antennas(), w.n_subcarriers())?;
    let out = w
        .subcarriers()
        .iter()
        .zip(y.subcarriers())
        .map(|(w, y)| w.adjoint() * y)
        .collect();
    SampleBlock::new(Domain::Terminal, out)
}

/// s = W·x on every subcarrier.
pub fn centralized_downlink(w: &BeamformingWeights, x: &SampleBlock) -> Result<SampleBlock> {
    x.expect(Domain::Terminal, w.terminals(), w.n_subcarriers())?;
    let out = w
        .subcarriers()
        .iter()
        .zip(x.subcarriers())
        .map(|(w, x)| w * x)
        .collect();
    SampleBlock::new(Domain::Antenna, out)
}

#[derive(Debug, Clone, Copy, Default)]
pub struct UplinkOptions {
    /// Quantize each module's outgoing partial sum.
    pub quantizer: Option<Quantizer>,
}

#[derive(Debug, Clone)]
pub struct UplinkOutput {
    pub block: SampleBlock,
    /// Clipped I/Q components across all forwarded partial sums.
    pub saturations: u64,
}

pub fn distributed_uplink(
    modules: &mut [ModuleState],
    y: &SampleBlock,
    topology: &Topology,
) -> Result<SampleBlock> {
    distributed_uplink_with(modules, y, topology, UplinkOptions::default()).map(|o| o.block)
}

/// Each module forms its local partial sum; partial sums are then folded
/// into the parent's accumulator along the route tree, deepest modules
/// first, and the central processor's total is returned.
pub fn distributed_uplink_with(
    modules: &mut [ModuleState],
    y: &SampleBlock,
    topology: &Topology,
    opts: UplinkOptions,
) -> Result<UplinkOutput> {
    let n_sc = modules.first().map_or(0, ModuleState::n_subcarriers);
    let antennas = y.dim();
    check_modules(modules, topology, antennas)?;
    y.expect(Domain::Antenna, antennas, n_sc)?;
    let k = modules[0].terminals();

    let mut slot = vec![usize::MAX; modules.len()];
    for (i, m) in modules.iter().enumerate() {
        slot[m.id] = i;
    }
    for m in modules.iter_mut() {
        m.accumulator = (0..n_sc)
            .map(|sc| m.local_partial(y.subcarrier(sc), sc))
            .collect();
    }

    // children before parents; ties by module id for a fixed float order
    let mut order: Vec<usize> = (0..modules.len()).collect();
    order.sort_by_key(|&i| {
        (
            std::cmp::Reverse(topology.hops(modules[i].id)),
            modules[i].id,
        )
    });

    let mut central: Vec<CMatrix> = (0..n_sc).map(|_| CMatrix::zeros(k, y.symbols())).collect();
    let mut saturations = 0;
    for i in order {
        let outgoing: Vec<CMatrix> = match opts.quantizer {
            Some(q) => modules[i]
                .accumulator
                .iter()
                .map(|a| q.quantize_matrix(a, &mut saturations))
                .collect(),
            None => modules[i].accumulator.clone(),
        };
        let target = match topology.parent(modules[i].id) {
            Node::Central => &mut central,
            Node::Module(p) => &mut modules[slot[p]].accumulator,
        };
        for (acc, part) in target.iter_mut().zip(outgoing) {
            *acc += part;
        }
    }

    let quantization = opts
        .quantizer
        .map_or(Quantization::Exact, |q| Quantization::Quantized(q.bits()));
    Ok(UplinkOutput {
        block: SampleBlock::new(Domain::Terminal, central)?.with_quantization(quantization),
        saturations,
    })
}

/// Terminal samples are broadcast to every module along the reverse routes;
/// each module produces its own antenna rows and the rows are reassembled in
/// antenna order.
pub fn distributed_downlink(
    modules: &[ModuleState],
    x: &SampleBlock,
    topology: &Topology,
) -> Result<SampleBlock> {
    let n_sc = modules.first().map_or(0, ModuleState::n_subcarriers);
    let antennas = modules.iter().map(|m| m.antennas.end).max().unwrap_or(0);
    check_modules(modules, topology, antennas)?;
    x.expect(Domain::Terminal, modules[0].terminals(), n_sc)?;
    let out = (0..n_sc)
        .map(|sc| {
            let mut s = CMatrix::zeros(antennas, x.symbols());
            for m in modules {
                let local = m.local_downlink(x.subcarrier(sc), sc);
                s.rows_mut(m.antennas.start, m.antennas.len())
                    .copy_from(&local);
            }
            s
        })
        .collect();
    SampleBlock::new(Domain::Antenna, out)
}

/// Per module, per subcarrier local partial sums (no aggregation).
pub fn local_partials(modules: &[ModuleState], y: &SampleBlock) -> Vec<Vec<CMatrix>> {
    modules
        .iter()
        .map(|m| {
            (0..m.n_subcarriers())
                .map(|sc| m.local_partial(y.subcarrier(sc), sc))
                .collect()
        })
        .collect()
}

/// Sums one subcarrier's module partials in the given module order.
pub fn aggregate_in_order(
    partials: &[Vec<CMatrix>],
    subcarrier: usize,
    order: &[usize],
) -> CMatrix {
    let first = &partials[order[0]][subcarrier];
    let mut acc = CMatrix::zeros(first.nrows(), first.ncols());
    for &i in order {
        acc += &partials[i][subcarrier];
    }
    acc
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Uplink,
    Downlink,
}

#[derive(Debug, Clone, Copy)]
pub enum Processing<'a> {
    Centralized,
    Distributed {
        modules: &'a [ModuleState],
        topology: &'a Topology,
    },
}

/// Runs the uplink or downlink independently on each subcarrier, in
/// parallel, and restacks the results in subcarrier order.
pub fn per_subcarrier_process(
    w: &BeamformingWeights,
    input: &SampleBlock,
    direction: Direction,
    processing: Processing<'_>,
) -> Result<SampleBlock> {
    if input.n_subcarriers() != w.n_subcarriers() {
        return Err(BeamformingError::Dimension(format!(
            "{} weight subcarriers, {} input subcarriers",
            w.n_subcarriers(),
            input.n_subcarriers()
        )));
    }
    if let Processing::Distributed { modules, .. } = processing {
        if modules
            .iter()
            .any(|m| m.n_subcarriers() != w.n_subcarriers())
        {
            return Err(BeamformingError::Dimension(
                "module weights and input differ in subcarrier count".into(),
            ));
        }
    }
    let outputs = (0..w.n_subcarriers())
        .into_par_iter()
        .map(|sc| {
            let x = input.only_subcarrier(sc);
            match processing {
                Processing::Centralized => {
                    let w = w.only_subcarrier(sc);
                    match direction {
                        Direction::Uplink => centralized_uplink(&w, &x),
                        Direction::Downlink => centralized_downlink(&w, &x),
                    }
                }
                Processing::Distributed { modules, topology } => {
                    let mut local: Vec<ModuleState> =
                        modules.iter().map(|m| m.only_subcarrier(sc)).collect();
                    match direction {
                        Direction::Uplink => distributed_uplink(&mut local, &x, topology),
                        Direction::Downlink => distributed_downlink(&local, &x, topology),
                    }
                }
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let domain = outputs[0].domain();
    SampleBlock::new(
        domain,
        outputs
            .into_iter()
            .map(|b| b.subcarrier(0).clone())
            .collect(),
    )
}
