//! Backplane interconnect graphs.
//!
//! Three layouts are supported: a star with one dedicated link per module
//! ([`build_fully_parallel`]), parallel daisy-chains ([`build_daisy_chains`])
//! and a 4-connected nearest-neighbour mesh ([`build_mesh`]). Each module has
//! exactly one route to the central processor; the routes of a topology
//! always form a tree rooted at the central processor, which is what the
//! partial-sum aggregation and the hop-level simulator walk along.
//!
//! Modules are numbered row-major over the configured grid. Positions are in
//! grid units and scaled by the module pitch to get lengths in meters.

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::config::{ConfigError, Grid, SurfaceConfig};

#[derive(Debug, Error)]
pub enum TopologyError {
    #[error("module {module} has no path to the central processor")]
    Disconnected { module: usize },
    #[error("{0} topology has no redundant paths to reroute over")]
    UnsupportedTopology(TopologyKind),
    #[error("no link with id {0}")]
    UnknownLink(usize),
    #[error(transparent)]
    Config(#[from] ConfigError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Node {
    Module(usize),
    Central,
}

impl fmt::Display for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Node::Module(i) => write!(f, "{i}"),
            Node::Central => f.write_str("cp"),
        }
    }
}

impl FromStr for Node {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "cp" => Ok(Node::Central),
            v => v
                .parse()
                .map(Node::Module)
                .map_err(|_| format!("bad node `{v}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TopologyKind {
    FullyParallel,
    DaisyChain,
    Mesh,
}

impl TopologyKind {
    pub const ALL: [TopologyKind; 3] = [
        TopologyKind::FullyParallel,
        TopologyKind::DaisyChain,
        TopologyKind::Mesh,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            TopologyKind::FullyParallel => "parallel",
            TopologyKind::DaisyChain => "chain",
            TopologyKind::Mesh => "mesh",
        }
    }
}

impl fmt::Display for TopologyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TopologyKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "parallel" => Ok(TopologyKind::FullyParallel),
            "chain" => Ok(TopologyKind::DaisyChain),
            "mesh" => Ok(TopologyKind::Mesh),
            other => Err(format!("unknown topology `{other}`")),
        }
    }
}

pub type LinkId = usize;

/// Bidirectional link. `a` is the end farther from the central processor
/// for star and chain links; mesh links are stored lower id first.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Link {
    pub a: Node,
    pub b: Node,
    pub length_m: f64,
}

impl Link {
    pub fn connects(&self, x: Node, y: Node) -> bool {
        (self.a == x && self.b == y) || (self.a == y && self.b == x)
    }

    /// Endpoints in canonical order, usable as a key across topologies.
    pub fn key(&self) -> (Node, Node) {
        if self.a <= self.b {
            (self.a, self.b)
        } else {
            (self.b, self.a)
        }
    }
}

#[derive(Debug, Clone)]
pub struct Topology {
    kind: TopologyKind,
    grid: Grid,
    pitch: f64,
    links: Vec<Link>,
    /// Per module: node path from the module to `Node::Central`.
    routes: Vec<Vec<Node>>,
}

impl Topology {
    pub fn kind(&self) -> TopologyKind {
        self.kind
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn module_count(&self) -> usize {
        self.routes.len()
    }

    /// Module nodes followed by the central processor.
    pub fn nodes(&self) -> impl Iterator<Item = Node> + '_ {
        (0..self.module_count())
            .map(Node::Module)
            .chain(std::iter::once(Node::Central))
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn link(&self, id: LinkId) -> Option<&Link> {
        self.links.get(id)
    }

    pub fn find_link(&self, x: Node, y: Node) -> Option<LinkId> {
        self.links.iter().position(|l| l.connects(x, y))
    }

    pub fn routes(&self) -> &[Vec<Node>] {
        &self.routes
    }

    pub fn route(&self, module: usize) -> &[Node] {
        &self.routes[module]
    }

    /// Links between `module` and the central processor.
    pub fn hops(&self, module: usize) -> usize {
        self.routes[module].len() - 1
    }

    pub fn max_hops(&self) -> usize {
        (0..self.module_count())
            .map(|m| self.hops(m))
            .max()
            .unwrap_or(0)
    }

    /// Next node on the module's route.
    pub fn parent(&self, module: usize) -> Node {
        self.routes[module][1]
    }

    /// Modules whose route passes directly through `node`.
    pub fn children(&self, node: Node) -> Vec<usize> {
        (0..self.module_count())
            .filter(|&m| self.parent(m) == node)
            .collect()
    }

    /// Links that appear on some route. These are the tree edges that carry
    /// traffic; unused mesh links are excluded.
    pub fn route_links(&self) -> BTreeSet<(Node, Node)> {
        (0..self.module_count())
            .map(|m| {
                let l = Link {
                    a: Node::Module(m),
                    b: self.parent(m),
                    length_m: 0.0,
                };
                l.key()
            })
            .collect()
    }

    /// Unordered endpoint pairs of every link.
    pub fn edge_set(&self) -> BTreeSet<(Node, Node)> {
        self.links.iter().map(Link::key).collect()
    }

    /// Every route starts at its module, ends at the central processor,
    /// visits no node twice, and only steps across existing links.
    pub fn check_routes(&self) -> Result<(), String> {
        let edges = self.edge_set();
        for (m, route) in self.routes.iter().enumerate() {
            if route.first() != Some(&Node::Module(m)) {
                return Err(format!("route {m} does not start at its module"));
            }
            if route.last() != Some(&Node::Central) {
                return Err(format!("route {m} does not end at the central processor"));
            }
            let distinct: BTreeSet<_> = route.iter().collect();
            if distinct.len() != route.len() {
                return Err(format!("route {m} revisits a node"));
            }
            for w in route.windows(2) {
                let key = if w[0] <= w[1] {
                    (w[0], w[1])
                } else {
                    (w[1], w[0])
                };
                if !edges.contains(&key) {
                    return Err(format!("route {m} uses missing link {}-{}", w[0], w[1]));
                }
            }
        }
        Ok(())
    }

    /// Plain-text edge list: `src dst length_m` per link, then a `# routes`
    /// section with one space-separated path per module.
    pub fn to_edge_list(&self) -> String {
        let mut out = String::new();
        for l in &self.links {
            out.push_str(&format!("{} {} {}\n", l.a, l.b, l.length_m));
        }
        out.push_str("# routes\n");
        for route in &self.routes {
            let path: Vec<String> = route.iter().map(Node::to_string).collect();
            out.push_str(&path.join(" "));
            out.push('\n');
        }
        out
    }
}

fn distance(a: (f64, f64), b: (f64, f64)) -> f64 {
    ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt()
}

fn cell(grid: Grid, id: usize) -> (f64, f64) {
    let (r, c) = grid.position(id);
    (r as f64, c as f64)
}

pub fn build(cfg: &SurfaceConfig, kind: TopologyKind) -> Result<Topology, TopologyError> {
    match kind {
        TopologyKind::FullyParallel => build_fully_parallel(cfg),
        TopologyKind::DaisyChain => build_daisy_chains(cfg),
        TopologyKind::Mesh => build_mesh(cfg),
    }
}

/// Star: every module has its own link to the central processor, which by
/// default sits at the center of the module grid.
pub fn build_fully_parallel(cfg: &SurfaceConfig) -> Result<Topology, TopologyError> {
    let cfg = cfg.clone().validate()?;
    let grid = cfg.grid;
    let cp = cfg
        .cp_position
        .unwrap_or(((grid.rows - 1) as f64 / 2.0, (grid.cols - 1) as f64 / 2.0));
    let links = (0..cfg.modules)
        .map(|m| Link {
            a: Node::Module(m),
            b: Node::Central,
            length_m: cfg.module_pitch * distance(cell(grid, m), cp),
        })
        .collect();
    let routes = (0..cfg.modules)
        .map(|m| vec![Node::Module(m), Node::Central])
        .collect();
    Ok(Topology {
        kind: TopologyKind::FullyParallel,
        grid,
        pitch: cfg.module_pitch,
        links,
        routes,
    })
}

/// Row-major grid walk that reverses direction on every other row.
fn serpentine(grid: Grid) -> Vec<usize> {
    (0..grid.rows)
        .flat_map(|r| {
            let row: Vec<usize> = if r % 2 == 0 {
                (0..grid.cols).map(|c| grid.id(r, c)).collect()
            } else {
                (0..grid.cols).rev().map(|c| grid.id(r, c)).collect()
            };
            row
        })
        .collect()
}

/// `chains` parallel chains of N/N_ch modules. Modules are taken in
/// serpentine order and cut into contiguous segments; the first module of
/// each segment is the chain head and links to the central processor, which
/// by default runs along the left edge of the grid.
pub fn build_daisy_chains(cfg: &SurfaceConfig) -> Result<Topology, TopologyError> {
    let cfg = cfg.clone().validate()?;
    let grid = cfg.grid;
    let depth = cfg.modules / cfg.chains;
    let order = serpentine(grid);
    let mut links = Vec::with_capacity(cfg.modules);
    let mut routes = vec![Vec::new(); cfg.modules];
    for segment in order.chunks(depth) {
        let head = segment[0];
        let head_cell = cell(grid, head);
        let cp = cfg.cp_position.unwrap_or((head_cell.0, -1.0));
        links.push(Link {
            a: Node::Module(head),
            b: Node::Central,
            length_m: cfg.module_pitch * distance(head_cell, cp),
        });
        for pair in segment.windows(2) {
            links.push(Link {
                a: Node::Module(pair[1]),
                b: Node::Module(pair[0]),
                length_m: cfg.module_pitch * distance(cell(grid, pair[0]), cell(grid, pair[1])),
            });
        }
        for (i, &m) in segment.iter().enumerate() {
            let mut route: Vec<Node> = segment[..=i]
                .iter()
                .rev()
                .map(|&x| Node::Module(x))
                .collect();
            route.push(Node::Central);
            routes[m] = route;
        }
    }
    Ok(Topology {
        kind: TopologyKind::DaisyChain,
        grid,
        pitch: cfg.module_pitch,
        links,
        routes,
    })
}

/// Nearest-neighbour grid. Link 0 attaches module 0 (grid cell (0,0)) to the
/// central processor; the remaining links join horizontal then vertical
/// neighbours and are all one pitch long.
pub fn build_mesh(cfg: &SurfaceConfig) -> Result<Topology, TopologyError> {
    let cfg = cfg.clone().validate()?;
    let grid = cfg.grid;
    let cp = cfg.cp_position.unwrap_or((0.0, -1.0));
    let mut links = vec![Link {
        a: Node::Module(0),
        b: Node::Central,
        length_m: cfg.module_pitch * distance((0.0, 0.0), cp),
    }];
    let neighbour = |a: usize, b: usize| Link {
        a: Node::Module(a),
        b: Node::Module(b),
        length_m: cfg.module_pitch,
    };
    for r in 0..grid.rows {
        for c in 0..grid.cols.saturating_sub(1) {
            links.push(neighbour(grid.id(r, c), grid.id(r, c + 1)));
        }
    }
    for r in 0..grid.rows.saturating_sub(1) {
        for c in 0..grid.cols {
            links.push(neighbour(grid.id(r, c), grid.id(r + 1, c)));
        }
    }
    let routes = mesh_routes(grid, &links)?;
    Ok(Topology {
        kind: TopologyKind::Mesh,
        grid,
        pitch: cfg.module_pitch,
        links,
        routes,
    })
}

/// Shortest-hop routes toward the attachment module. Among equally short
/// next hops a row step is taken before a column step, so the routes are a
/// deterministic tree.
fn mesh_routes(grid: Grid, links: &[Link]) -> Result<Vec<Vec<Node>>, TopologyError> {
    let n = grid.len();
    let mut adjacent: HashMap<usize, Vec<usize>> = HashMap::new();
    let mut attachments = Vec::new();
    for l in links {
        match (l.a, l.b) {
            (Node::Module(x), Node::Module(y)) => {
                adjacent.entry(x).or_default().push(y);
                adjacent.entry(y).or_default().push(x);
            }
            (Node::Module(x), Node::Central) | (Node::Central, Node::Module(x)) => {
                attachments.push(x)
            }
            (Node::Central, Node::Central) => {}
        }
    }
    let mut dist = vec![usize::MAX; n];
    let mut queue = VecDeque::new();
    for &a in &attachments {
        dist[a] = 1;
        queue.push_back(a);
    }
    while let Some(m) = queue.pop_front() {
        for &next in adjacent.get(&m).into_iter().flatten() {
            if dist[next] == usize::MAX {
                dist[next] = dist[m] + 1;
                queue.push_back(next);
            }
        }
    }
    if let Some(module) = dist.iter().position(|&d| d == usize::MAX) {
        return Err(TopologyError::Disconnected { module });
    }

    let linked = |x: usize, y: usize| adjacent.get(&x).is_some_and(|v| v.contains(&y));
    let next_hop = |m: usize| -> Option<usize> {
        let (r, c) = grid.position(m);
        let mut candidates = Vec::with_capacity(4);
        if r > 0 {
            candidates.push(grid.id(r - 1, c));
        }
        if r + 1 < grid.rows {
            candidates.push(grid.id(r + 1, c));
        }
        if c > 0 {
            candidates.push(grid.id(r, c - 1));
        }
        if c + 1 < grid.cols {
            candidates.push(grid.id(r, c + 1));
        }
        candidates
            .into_iter()
            .find(|&x| linked(m, x) && dist[x] + 1 == dist[m])
    };

    (0..n)
        .map(|start| {
            let mut route = vec![Node::Module(start)];
            let mut at = start;
            while dist[at] > 1 {
                at = next_hop(at).ok_or(TopologyError::Disconnected { module: start })?;
                route.push(Node::Module(at));
            }
            route.push(Node::Central);
            Ok(route)
        })
        .collect()
}

/// Drops `failed` from a mesh and recomputes every route around it.
pub fn reroute_on_failure(t: &Topology, failed: LinkId) -> Result<Topology, TopologyError> {
    if t.kind != TopologyKind::Mesh {
        return Err(TopologyError::UnsupportedTopology(t.kind));
    }
    if failed >= t.links.len() {
        return Err(TopologyError::UnknownLink(failed));
    }
    let links: Vec<Link> = t
        .links
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != failed)
        .map(|(_, l)| *l)
        .collect();
    if !links
        .iter()
        .any(|l| l.b == Node::Central || l.a == Node::Central)
    {
        return Err(TopologyError::Disconnected { module: 0 });
    }
    let routes = mesh_routes(t.grid, &links)?;
    Ok(Topology {
        kind: t.kind,
        grid: t.grid,
        pitch: t.pitch,
        links,
        routes,
    })
}
