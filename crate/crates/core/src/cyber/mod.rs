//! Basic cyber components and a deterministic per-step scheduler for networks
//! of node programs.
//!
//! A node owns named buffers and an ordered program of components. Each step
//! runs in dataflow rounds: every live node, in ascending id order, executes
//! its program until a [`Component::Collector`] is missing a message; then all
//! messages emitted in the round are delivered. Delay buffers shift once, after
//! the last round, from a snapshot of their inputs.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

mod network;

pub use network::{Message, Network, StepStats};

pub type NodeId = usize;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BufferKind {
    /// Stored scalars; counted as memory.
    Register,
    /// Transient value passed between components within a step; not stored.
    Wire,
    /// Output tap of a delay buffer; its storage is counted on the delay buffer.
    DelayTap,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Buffer {
    pub name: String,
    pub dim: usize,
    pub kind: BufferKind,
}

/// A buffer, or a subset of its entries in the given order.
#[derive(Clone, Debug, PartialEq)]
pub struct Port {
    pub buf: usize,
    pub select: Option<Vec<usize>>,
}

impl Port {
    pub fn all(buf: usize) -> Self {
        Self { buf, select: None }
    }

    pub fn pick(buf: usize, indices: Vec<usize>) -> Self {
        Self {
            buf,
            select: Some(indices),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Route {
    pub target: NodeId,
    pub label: String,
    /// Entries of the disseminated buffer sent to `target`.
    pub indices: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Source {
    /// Payload of the message `label` from node `from`.
    Remote {
        from: NodeId,
        label: String,
        positions: Vec<usize>,
    },
    /// A local value placed without communication.
    Local { port: Port, positions: Vec<usize> },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Role {
    Sensor(usize),
    Actuator(usize),
    GlobalStateKeeper,
    Controller,
    Other(String),
}

#[derive(Clone, Debug, PartialEq)]
pub enum Component {
    /// Reads the listed entries of the plant measurement.
    Sense { channels: Vec<usize>, output: usize },
    /// Writes the listed entries of the control signal.
    Actuate { input: Port, channels: Vec<usize> },
    Multiplier {
        matrix: DMatrix<f64>,
        input: Port,
        output: usize,
    },
    /// Signed sum of equally sized inputs.
    Adder { inputs: Vec<(f64, Port)>, output: usize },
    /// `taps[k]` holds the input from `k + 1` steps ago.
    DelayBuffer {
        input: Port,
        taps: Vec<usize>,
        state: Vec<DVector<f64>>,
    },
    Disseminator { input: usize, routes: Vec<Route> },
    /// Assembles local values and received messages. Messages from failed
    /// nodes read as zeros; if every remote source is silent and
    /// `starve_when_silent` is set, the node skips the rest of the step.
    Collector {
        output: usize,
        sources: Vec<Source>,
        starve_when_silent: bool,
    },
}

impl Component {
    pub fn kind(&self) -> &'static str {
        match self {
            Component::Sense { .. } => "sense",
            Component::Actuate { .. } => "actuate",
            Component::Multiplier { .. } => "multiplier",
            Component::Adder { .. } => "adder",
            Component::DelayBuffer { .. } => "delay",
            Component::Disseminator { .. } => "disseminator",
            Component::Collector { .. } => "collector",
        }
    }
}

/// Static storage of a node, in scalars.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct MemoryInventory {
    /// Registers plus delay-buffer contents.
    pub buffers: usize,
    /// Multiplier matrix entries.
    pub multipliers: usize,
}

impl MemoryInventory {
    pub fn total(&self) -> usize {
        self.buffers + self.multipliers
    }
}

impl core::ops::Add for MemoryInventory {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self {
            buffers: self.buffers + o.buffers,
            multipliers: self.multipliers + o.multipliers,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Node {
    pub id: NodeId,
    pub role: Role,
    /// Position along the physical plant, if any (used for hop distances).
    pub location: Option<usize>,
    pub buffers: Vec<Buffer>,
    pub components: Vec<Component>,
    pub(crate) values: Vec<DVector<f64>>,
    pub(crate) failed: bool,
    pub(crate) flops: u64,
}

impl Node {
    pub fn new(id: NodeId, role: Role, location: Option<usize>) -> Self {
        Self {
            id,
            role,
            location,
            buffers: Vec::new(),
            components: Vec::new(),
            values: Vec::new(),
            failed: false,
            flops: 0,
        }
    }

    fn buffer(&mut self, name: &str, dim: usize, kind: BufferKind) -> usize {
        self.buffers.push(Buffer {
            name: name.into(),
            dim,
            kind,
        });
        self.values.push(DVector::zeros(dim));
        self.buffers.len() - 1
    }

    pub fn register(&mut self, name: &str, dim: usize) -> usize {
        self.buffer(name, dim, BufferKind::Register)
    }

    pub fn wire(&mut self, name: &str, dim: usize) -> usize {
        self.buffer(name, dim, BufferKind::Wire)
    }

    pub fn push(&mut self, c: Component) -> &mut Self {
        self.components.push(c);
        self
    }

    /// Adds a delay buffer of `n` steps on `input` and returns its taps
    /// (`taps[k]` is the input `k + 1` steps ago). Place it before the
    /// components that read its taps.
    pub fn delay(&mut self, name: &str, input: Port, dim: usize, n: usize) -> Vec<usize> {
        let taps: Vec<usize> = (1..=n)
            .map(|k| self.buffer(&format!("{name}[t-{k}]"), dim, BufferKind::DelayTap))
            .collect();
        self.components.push(Component::DelayBuffer {
            input,
            taps: taps.clone(),
            state: (0..n).map(|_| DVector::zeros(dim)).collect(),
        });
        taps
    }

    pub fn buffer_index(&self, name: &str) -> Option<usize> {
        self.buffers.iter().position(|b| b.name == name)
    }

    /// Current value of a buffer by name.
    pub fn value(&self, name: &str) -> Option<&DVector<f64>> {
        self.buffer_index(name).map(|i| &self.values[i])
    }

    pub fn is_failed(&self) -> bool {
        self.failed
    }

    pub fn flops(&self) -> u64 {
        self.flops
    }

    pub fn memory(&self) -> MemoryInventory {
        let registers: usize = self
            .buffers
            .iter()
            .filter(|b| b.kind == BufferKind::Register)
            .map(|b| b.dim)
            .sum();
        let mut inv = MemoryInventory {
            buffers: registers,
            multipliers: 0,
        };
        for c in &self.components {
            match c {
                Component::Multiplier { matrix, .. } => inv.multipliers += matrix.len(),
                Component::DelayBuffer { state, .. } => inv.buffers += state.iter().map(|s| s.len()).sum::<usize>(),
                _ => {}
            }
        }
        inv
    }

    /// Flops of one full execution of the program.
    pub fn flops_per_step(&self) -> u64 {
        self.components.iter().map(|c| self.component_flops(c)).sum()
    }

    pub(crate) fn component_flops(&self, c: &Component) -> u64 {
        match c {
            Component::Multiplier { matrix, .. } => {
                let (m, n) = matrix.shape();
                if n == 0 {
                    0
                } else {
                    (m * (2 * n - 1)) as u64
                }
            }
            Component::Adder { inputs, output } => {
                (inputs.len().saturating_sub(1) * self.buffers[*output].dim) as u64
            }
            _ => 0,
        }
    }

    pub(crate) fn port_dim(&self, p: &Port) -> usize {
        p.select.as_ref().map_or(self.buffers[p.buf].dim, |s| s.len())
    }

    pub(crate) fn read(&self, p: &Port) -> DVector<f64> {
        let v = &self.values[p.buf];
        match &p.select {
            None => v.clone(),
            Some(idx) => DVector::from_iterator(idx.len(), idx.iter().map(|&i| v[i])),
        }
    }

    /// Messages this node's program sends: `(target, label, payload dim)`.
    pub fn outgoing(&self) -> Vec<(NodeId, &str, usize)> {
        let mut out = Vec::new();
        for c in &self.components {
            if let Component::Disseminator { routes, .. } = c {
                for r in routes {
                    out.push((r.target, r.label.as_str(), r.indices.len()));
                }
            }
        }
        out
    }

    /// Messages this node's program expects: `(source, label, payload dim)`.
    pub fn incoming(&self) -> Vec<(NodeId, &str, usize)> {
        let mut out = Vec::new();
        for c in &self.components {
            if let Component::Collector { sources, .. } = c {
                for s in sources {
                    if let Source::Remote { from, label, positions } = s {
                        out.push((*from, label.as_str(), positions.len()));
                    }
                }
            }
        }
        out
    }

    fn check(&self, ny: usize, nu: usize, problems: &mut Vec<String>) {
        let id = self.id;
        let mut bad = |msg: String| problems.push(format!("node {id}: {msg}"));
        let nb = self.buffers.len();
        let port_ok = |p: &Port| p.buf < nb && p.select.as_ref().is_none_or(|s| s.iter().all(|&i| i < self.buffers[p.buf].dim));
        for (ci, c) in self.components.iter().enumerate() {
            let ports: Vec<&Port> = match c {
                Component::Actuate { input, .. } => vec![input],
                Component::Multiplier { input, .. } => vec![input],
                Component::Adder { inputs, .. } => inputs.iter().map(|(_, p)| p).collect(),
                Component::DelayBuffer { input, .. } => vec![input],
                Component::Collector { sources, .. } => sources
                    .iter()
                    .filter_map(|s| match s {
                        Source::Local { port, .. } => Some(port),
                        _ => None,
                    })
                    .collect(),
                _ => Vec::new(),
            };
            if let Some(p) = ports.iter().find(|p| !port_ok(p)) {
                bad(format!("component {ci} reads out-of-range port {p:?}"));
                continue;
            }
            match c {
                Component::Sense { channels, output } => {
                    if channels.iter().any(|&ch| ch >= ny) {
                        bad(format!("sense channel out of range (ny = {ny})"));
                    }
                    if *output >= nb || self.buffers[*output].dim != channels.len() {
                        bad(format!("sense output size mismatch at component {ci}"));
                    }
                }
                Component::Actuate { input, channels } => {
                    if channels.iter().any(|&ch| ch >= nu) {
                        bad(format!("actuate channel out of range (nu = {nu})"));
                    }
                    if self.port_dim(input) != channels.len() {
                        bad(format!("actuate input size mismatch at component {ci}"));
                    }
                }
                Component::Multiplier { matrix, input, output } => {
                    if *output >= nb || matrix.ncols() != self.port_dim(input) || matrix.nrows() != self.buffers[*output].dim {
                        bad(format!("multiplier {}x{} does not fit its ports at component {ci}", matrix.nrows(), matrix.ncols()));
                    }
                }
                Component::Adder { inputs, output } => {
                    if *output >= nb || inputs.iter().any(|(_, p)| self.port_dim(p) != self.buffers[*output].dim) {
                        bad(format!("adder operand sizes differ at component {ci}"));
                    }
                }
                Component::DelayBuffer { input, taps, state } => {
                    let d = self.port_dim(input);
                    if taps.len() != state.len() || taps.iter().any(|&t| t >= nb || self.buffers[t].dim != d) {
                        bad(format!("delay taps do not match input at component {ci}"));
                    }
                }
                Component::Disseminator { input, routes } => {
                    if *input >= nb {
                        bad(format!("disseminator input missing at component {ci}"));
                    } else if routes.iter().any(|r| r.indices.iter().any(|&i| i >= self.buffers[*input].dim)) {
                        bad(format!("disseminator route index out of range at component {ci}"));
                    }
                }
                Component::Collector { output, sources, .. } => {
                    if *output >= nb {
                        bad(format!("collector output missing at component {ci}"));
                        continue;
                    }
                    let dim = self.buffers[*output].dim;
                    let mut hits = alloc::vec![0usize; dim];
                    for s in sources {
                        let positions = match s {
                            Source::Remote { positions, .. } => positions,
                            Source::Local { port, positions } => {
                                if self.port_dim(port) != positions.len() {
                                    bad(format!("local source size mismatch at component {ci}"));
                                }
                                positions
                            }
                        };
                        for &p in positions {
                            if p < dim {
                                hits[p] += 1;
                            } else {
                                bad(format!("collector position {p} out of range at component {ci}"));
                            }
                        }
                    }
                    if hits.iter().any(|&h| h != 1) {
                        bad(format!("collector at component {ci} does not cover every entry exactly once"));
                    }
                }
            }
        }
    }
}

/// Checks ports, component shapes, collector coverage, and that every
/// disseminated message has exactly one matching collector entry (and vice
/// versa). Returns every violation found.
pub fn validate_wiring(nodes: &[Node], ny: usize, nu: usize) -> Result<()> {
    let mut problems = Vec::new();
    let ids: BTreeMap<NodeId, usize> = nodes.iter().enumerate().map(|(i, n)| (n.id, i)).collect();
    if ids.len() != nodes.len() {
        problems.push("duplicate node ids".into());
    }
    let mut sent: BTreeMap<(NodeId, NodeId, String), usize> = BTreeMap::new();
    let mut expected: BTreeMap<(NodeId, NodeId, String), usize> = BTreeMap::new();
    let mut actuated = alloc::vec![0usize; nu];
    for n in nodes {
        n.check(ny, nu, &mut problems);
        for (target, label, dim) in n.outgoing() {
            if !ids.contains_key(&target) {
                problems.push(format!("node {} sends '{label}' to absent node {target}", n.id));
            }
            if sent.insert((n.id, target, label.into()), dim).is_some() {
                problems.push(format!("node {} sends '{label}' to node {target} twice", n.id));
            }
        }
        for (from, label, dim) in n.incoming() {
            if !ids.contains_key(&from) {
                problems.push(format!("node {} expects '{label}' from absent node {from}", n.id));
            }
            if expected.insert((from, n.id, label.into()), dim).is_some() {
                problems.push(format!("node {} expects '{label}' from node {from} twice", n.id));
            }
        }
        for c in &n.components {
            if let Component::Actuate { channels, .. } = c {
                for &ch in channels.iter().filter(|&&ch| ch < nu) {
                    actuated[ch] += 1;
                }
            }
        }
    }
    for (key, dim) in &sent {
        match expected.get(key) {
            None => problems.push(format!("message '{}' from {} to {} is never collected", key.2, key.0, key.1)),
            Some(d) if d != dim => problems.push(format!(
                "message '{}' from {} to {} has {dim} entries but the collector expects {d}",
                key.2, key.0, key.1
            )),
            _ => {}
        }
    }
    for key in expected.keys() {
        if !sent.contains_key(key) {
            problems.push(format!("node {} expects '{}' from {} but it is never sent", key.1, key.2, key.0));
        }
    }
    for (ch, &count) in actuated.iter().enumerate() {
        if count > 1 {
            problems.push(format!("control channel {ch} is driven by {count} nodes"));
        }
    }
    if problems.is_empty() {
        Ok(())
    } else {
        Err(Error::Wiring(problems))
    }
}

#[cfg(test)]
mod tests;
