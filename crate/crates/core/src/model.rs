//! Static domain entities: base stations, services, users and execution paths.
//!
//! Indices are zero-based throughout. Block counts (`k`) are one-based, so a
//! path of length `k` executes blocks `1..=k` and `Ω(0) = 0` means "nothing
//! executed yet".

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ModelError {
    #[error("step {step} outside path of length {len}")]
    StepOutOfRange { step: usize, len: usize },
    #[error("block count {blocks} outside 0..={max}")]
    BlocksOutOfRange { blocks: usize, max: usize },
    #[error("node {0} does not exist")]
    UnknownNode(usize),
    #[error("path count {node_count}^{length} overflows; pass a cap")]
    PathCountOverflow { node_count: usize, length: u32 },
    #[error("invalid topology: {0}")]
    Topology(String),
    #[error("invalid quality curve: {0}")]
    Curve(String),
    #[error("invalid service: {0}")]
    Service(String),
    #[error("invalid path: {0}")]
    Path(String),
}

/// Index of a base station.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// An edge-computing base station.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    /// Maximum denoising blocks executed per frame.
    pub capacity: u32,
    /// Cost of a single block inference.
    pub exec_cost: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub rows: usize,
    pub cols: usize,
    /// Side length of one square service area, in meters.
    pub cell_size: f64,
}

impl GridSpec {
    pub fn area_count(&self) -> usize {
        self.rows * self.cols
    }

    pub fn width(&self) -> f64 {
        self.cols as f64 * self.cell_size
    }

    pub fn height(&self) -> f64 {
        self.rows as f64 * self.cell_size
    }

    /// Area index (row-major) containing the point, clamped to the grid.
    pub fn area_at(&self, x: f64, y: f64) -> usize {
        let clamp = |v: f64, n: usize| ((v / self.cell_size).floor().max(0.0) as usize).min(n - 1);
        clamp(y, self.rows) * self.cols + clamp(x, self.cols)
    }

    fn cell(&self, area: usize) -> (usize, usize) {
        (area / self.cols, area % self.cols)
    }

    /// Manhattan distance between two cells, in hops.
    pub fn hops(&self, a: usize, b: usize) -> usize {
        let (ra, ca) = self.cell(a);
        let (rb, cb) = self.cell(b);
        ra.abs_diff(rb) + ca.abs_diff(cb)
    }
}

/// Base stations, the inter-node transfer cost matrix and area coverage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Topology {
    nodes: Vec<Node>,
    transfer_cost: Vec<Vec<f64>>,
    areas: Vec<NodeId>,
    grid: GridSpec,
}

impl Topology {
    pub fn new(
        nodes: Vec<Node>,
        transfer_cost: Vec<Vec<f64>>,
        areas: Vec<NodeId>,
        grid: GridSpec,
    ) -> Result<Self, ModelError> {
        let n = nodes.len();
        if n == 0 {
            return Err(ModelError::Topology("no nodes".into()));
        }
        if let Some(node) = nodes.iter().find(|n| !(n.exec_cost >= 0.0) || !n.exec_cost.is_finite()) {
            return Err(ModelError::Topology(format!(
                "execution cost {} is not a non-negative real",
                node.exec_cost
            )));
        }
        if transfer_cost.len() != n || transfer_cost.iter().any(|row| row.len() != n) {
            return Err(ModelError::Topology(format!("transfer cost matrix must be {n}×{n}")));
        }
        for (i, row) in transfer_cost.iter().enumerate() {
            if row[i] != 0.0 {
                return Err(ModelError::Topology(format!("transfer cost [{i}][{i}] must be 0")));
            }
            if row.iter().any(|c| !(*c >= 0.0) || !c.is_finite()) {
                return Err(ModelError::Topology(format!("negative transfer cost in row {i}")));
            }
        }
        if areas.len() != grid.area_count() {
            return Err(ModelError::Topology(format!(
                "{} areas but the grid has {}",
                areas.len(),
                grid.area_count()
            )));
        }
        if let Some(bad) = areas.iter().find(|a| a.0 >= n) {
            return Err(ModelError::UnknownNode(bad.0));
        }
        Ok(Self {
            nodes,
            transfer_cost,
            areas,
            grid,
        })
    }

    /// Nodes sit on evenly spaced home cells of the grid; each area is covered
    /// by the node with the nearest home cell (ties to the lower index) and the
    /// transfer cost is the hop distance between home cells times
    /// `cost_per_hop`.
    pub fn on_grid(grid: GridSpec, nodes: Vec<Node>, cost_per_hop: f64) -> Result<Self, ModelError> {
        let areas_total = grid.area_count();
        if nodes.is_empty() || nodes.len() > areas_total {
            return Err(ModelError::Topology(format!(
                "{} nodes cannot be placed on {areas_total} cells",
                nodes.len()
            )));
        }
        let homes: Vec<usize> = (0..nodes.len())
            .map(|j| j * areas_total / nodes.len())
            .collect();
        let areas = (0..areas_total)
            .map(|area| {
                let best = (0..homes.len())
                    .min_by_key(|&j| (grid.hops(area, homes[j]), j))
                    .expect("non-empty");
                NodeId(best)
            })
            .collect();
        let transfer_cost = homes
            .iter()
            .map(|&a| {
                homes
                    .iter()
                    .map(|&b| grid.hops(a, b) as f64 * cost_per_hop)
                    .collect()
            })
            .collect();
        Self::new(nodes, transfer_cost, areas, grid)
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> Result<&Node, ModelError> {
        self.nodes.get(id.0).ok_or(ModelError::UnknownNode(id.0))
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn areas(&self) -> &[NodeId] {
        &self.areas
    }

    /// Transfer cost `Ŷ[from][to]`.
    pub fn transfer(&self, from: NodeId, to: NodeId) -> f64 {
        self.transfer_cost[from.0][to.0]
    }

    pub fn transfer_matrix(&self) -> &[Vec<f64>] {
        &self.transfer_cost
    }

    pub fn covering_node(&self, area: usize) -> NodeId {
        self.areas[area]
    }

    /// Point of attachment for a position in meters.
    pub fn attach(&self, x: f64, y: f64) -> NodeId {
        self.areas[self.grid.area_at(x, y)]
    }

    pub fn contains(&self, id: NodeId) -> bool {
        id.0 < self.nodes.len()
    }
}

/// Output quality as a function of the number of executed blocks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "mode")]
pub enum QualityCurve {
    /// `Ω(k) = (1 − e^{−κk}) / (1 − e^{−κB})`, so `Ω(0) = 0` and `Ω(B) = 1`.
    Saturating { rate: f64 },
    /// Explicit values for `k = 0..=B`.
    Tabulated { values: Vec<f64> },
}

impl QualityCurve {
    fn validate(&self, max_blocks: usize) -> Result<(), ModelError> {
        match self {
            QualityCurve::Saturating { rate } => {
                if !(*rate > 0.0) || !rate.is_finite() {
                    return Err(ModelError::Curve(format!("saturation rate {rate} must be positive")));
                }
            }
            QualityCurve::Tabulated { values } => {
                if values.len() != max_blocks + 1 {
                    return Err(ModelError::Curve(format!(
                        "table has {} entries, expected {}",
                        values.len(),
                        max_blocks + 1
                    )));
                }
                if values[0] != 0.0 {
                    return Err(ModelError::Curve("table must start at 0".into()));
                }
                if values.iter().any(|v| !(0.0..=1.0).contains(v)) {
                    return Err(ModelError::Curve("table values must lie in [0, 1]".into()));
                }
                if values.windows(2).any(|w| w[1] < w[0]) {
                    return Err(ModelError::Curve("table must be non-decreasing".into()));
                }
            }
        }
        Ok(())
    }

    fn eval(&self, blocks: usize, max_blocks: usize) -> f64 {
        match self {
            QualityCurve::Saturating { rate } => {
                if blocks == 0 {
                    return 0.0;
                }
                if blocks == max_blocks {
                    return 1.0;
                }
                (1.0 - (-rate * blocks as f64).exp()) / (1.0 - (-rate * max_blocks as f64).exp())
            }
            QualityCurve::Tabulated { values } => values[blocks],
        }
    }
}

/// A trained diffusion service split into `max_blocks` denoising blocks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Service {
    max_blocks: usize,
    curve: QualityCurve,
}

impl Service {
    pub fn new(max_blocks: usize, curve: QualityCurve) -> Result<Self, ModelError> {
        if max_blocks == 0 {
            return Err(ModelError::Service("a service needs at least one block".into()));
        }
        curve.validate(max_blocks)?;
        Ok(Self { max_blocks, curve })
    }

    pub fn max_blocks(&self) -> usize {
        self.max_blocks
    }

    pub fn curve(&self) -> &QualityCurve {
        &self.curve
    }

    /// `Ω_s(k)`.
    pub fn quality(&self, blocks_done: usize) -> Result<f64, ModelError> {
        if blocks_done > self.max_blocks {
            return Err(ModelError::BlocksOutOfRange {
                blocks: blocks_done,
                max: self.max_blocks,
            });
        }
        Ok(self.curve.eval(blocks_done, self.max_blocks))
    }

    /// Smallest block count whose quality reaches `threshold`, if any.
    pub fn blocks_to_reach(&self, threshold: f64) -> Option<usize> {
        (1..=self.max_blocks).find(|&k| self.curve.eval(k, self.max_blocks) >= threshold)
    }
}

/// A user's service subscription and minimum acceptable quality.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UeProfile {
    pub service: usize,
    pub threshold: f64,
}

/// Ordered nodes executing blocks `1..=len` of one request.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ExecutionPath(Vec<NodeId>);

impl ExecutionPath {
    pub fn new(nodes: Vec<NodeId>) -> Result<Self, ModelError> {
        if nodes.is_empty() {
            return Err(ModelError::Path("a path executes at least one block".into()));
        }
        Ok(Self(nodes))
    }

    /// Validates length against a service and node indices against a topology.
    pub fn validated(nodes: Vec<NodeId>, max_blocks: usize, topo: &Topology) -> Result<Self, ModelError> {
        if nodes.len() > max_blocks {
            return Err(ModelError::Path(format!(
                "length {} exceeds {max_blocks} blocks",
                nodes.len()
            )));
        }
        if let Some(bad) = nodes.iter().find(|n| !topo.contains(**n)) {
            return Err(ModelError::UnknownNode(bad.0));
        }
        Self::new(nodes)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn nodes(&self) -> &[NodeId] {
        &self.0
    }

    pub fn first(&self) -> NodeId {
        self.0[0]
    }

    pub fn last(&self) -> NodeId {
        self.0[self.0.len() - 1]
    }

    /// Node executing block `step` (one-based).
    pub fn node_at(&self, step: usize) -> Result<NodeId, ModelError> {
        if step == 0 || step > self.0.len() {
            return Err(ModelError::StepOutOfRange {
                step,
                len: self.0.len(),
            });
        }
        Ok(self.0[step - 1])
    }

    /// `𝒥^k_{p,n}`: whether block `step` runs on `node`.
    pub fn indicator(&self, step: usize, node: NodeId) -> Result<bool, ModelError> {
        Ok(self.node_at(step)? == node)
    }

    pub(crate) fn push(&mut self, node: NodeId) {
        self.0.push(node);
    }
}

impl fmt::Display for ExecutionPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|n| n.0.to_string()).collect();
        write!(f, "({})", parts.join(","))
    }
}

/// All `node_count^length` paths of one length in lexicographic order,
/// truncated to the first `cap` when given.
pub fn enumerate_paths(
    node_count: usize,
    length: usize,
    cap: Option<usize>,
) -> Result<Vec<ExecutionPath>, ModelError> {
    if node_count == 0 || length == 0 {
        return Ok(Vec::new());
    }
    let exp = u32::try_from(length).map_err(|_| ModelError::PathCountOverflow {
        node_count,
        length: u32::MAX,
    })?;
    let total = node_count.checked_pow(exp);
    let count = match (total, cap) {
        (Some(t), Some(c)) => t.min(c),
        (Some(t), None) => t,
        (None, Some(c)) => c,
        (None, None) => {
            return Err(ModelError::PathCountOverflow {
                node_count,
                length: exp,
            })
        }
    };
    let mut out = Vec::with_capacity(count);
    let mut digits = vec![0usize; length];
    for _ in 0..count {
        out.push(ExecutionPath(digits.iter().map(|&d| NodeId(d)).collect()));
        for pos in (0..length).rev() {
            digits[pos] += 1;
            if digits[pos] < node_count {
                break;
            }
            digits[pos] = 0;
        }
    }
    Ok(out)
}

/// Latent hops along the path plus the head term from the request PoA and the
/// tail term to the delivery PoA. A delivery outside the horizon has no tail.
pub fn path_transmission_cost(
    path: &ExecutionPath,
    poa_at_request: NodeId,
    poa_at_delivery: Option<NodeId>,
    topo: &Topology,
) -> Result<f64, ModelError> {
    for n in path.nodes().iter().chain([poa_at_request].iter()).chain(poa_at_delivery.iter()) {
        if !topo.contains(*n) {
            return Err(ModelError::UnknownNode(n.0));
        }
    }
    let hops: f64 = path
        .nodes()
        .windows(2)
        .map(|w| topo.transfer(w[0], w[1]))
        .sum();
    let head = topo.transfer(poa_at_request, path.first());
    let tail = poa_at_delivery.map_or(0.0, |poa| topo.transfer(path.last(), poa));
    Ok(hops + head + tail)
}

/// Parses tabulated quality curves: one line per service, `B+1`
/// whitespace-separated reals. Blank lines and `#` comments are skipped.
pub fn parse_quality_tables(text: &str) -> Result<Vec<QualityCurve>, ModelError> {
    let mut curves = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let values = line
            .split_whitespace()
            .map(|tok| {
                tok.parse::<f64>()
                    .map_err(|e| ModelError::Curve(format!("line {}: {tok:?}: {e}", lineno + 1)))
            })
            .collect::<Result<Vec<_>, _>>()?;
        if values.len() < 2 {
            return Err(ModelError::Curve(format!(
                "line {}: need at least Ω(0) and Ω(1)",
                lineno + 1
            )));
        }
        let curve = QualityCurve::Tabulated { values };
        curve.validate(line.split_whitespace().count() - 1)?;
        curves.push(curve);
    }
    Ok(curves)
}
