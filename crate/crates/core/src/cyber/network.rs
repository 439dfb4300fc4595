use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::DVector;

use super::{validate_wiring, Component, MemoryInventory, Node, NodeId, Source};
use crate::error::{check_shape, Error, Result};
use crate::realizations::Controller;

/// One delivered (or dropped) message.
#[derive(Clone, Debug, PartialEq)]
pub struct Message {
    pub t: usize,
    pub round: usize,
    pub source: NodeId,
    pub target: NodeId,
    pub label: String,
    pub payload: DVector<f64>,
    /// False when the target had failed.
    pub delivered: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct StepStats {
    pub rounds: usize,
    pub messages: usize,
    pub payload_scalars: usize,
    pub flops: u64,
    /// Nodes that skipped the step because every remote input was missing.
    pub starved: Vec<NodeId>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Status {
    Running,
    Done,
    Starved,
    Failed,
}

/// A validated set of nodes executed as one controller: `Sense` components
/// read the controller input, `Actuate` components write its output.
#[derive(Clone, Debug)]
pub struct Network {
    nodes: Vec<Node>,
    ny: usize,
    nu: usize,
    t: usize,
    ledger: Vec<Message>,
    stats: Vec<StepStats>,
    record_ledger: bool,
}

impl Network {
    pub fn new(nodes: Vec<Node>, ny: usize, nu: usize) -> Result<Self> {
        validate_wiring(&nodes, ny, nu)?;
        let mut nodes = nodes;
        nodes.sort_by_key(|n| n.id);
        Ok(Self {
            nodes,
            ny,
            nu,
            t: 0,
            ledger: Vec::new(),
            stats: Vec::new(),
            record_ledger: true,
        })
    }

    /// Disables message logging (statistics are still kept).
    pub fn without_ledger(mut self) -> Self {
        self.record_ledger = false;
        self
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> Option<&Node> {
        self.nodes.iter().find(|n| n.id == id)
    }

    pub fn ledger(&self) -> &[Message] {
        &self.ledger
    }

    pub fn stats(&self) -> &[StepStats] {
        &self.stats
    }

    pub fn time(&self) -> usize {
        self.t
    }

    pub fn memory(&self) -> MemoryInventory {
        self.nodes.iter().map(Node::memory).fold(MemoryInventory::default(), |a, b| a + b)
    }

    /// Marks a node as failed from the next step on: it runs nothing, sends
    /// nothing, and drops what it receives. Collectors read its messages as
    /// zeros.
    pub fn fail_node(&mut self, id: NodeId) -> Result<()> {
        let n = self.nodes.iter_mut().find(|n| n.id == id).ok_or(Error::UnknownNode(id))?;
        n.failed = true;
        Ok(())
    }

    pub fn restore_node(&mut self, id: NodeId) -> Result<()> {
        let n = self.nodes.iter_mut().find(|n| n.id == id).ok_or(Error::UnknownNode(id))?;
        n.failed = false;
        Ok(())
    }

    /// Executes one step and returns the control signal.
    pub fn run_step(&mut self, y: &DVector<f64>) -> Result<DVector<f64>> {
        check_shape("network input", (y.len(), 1), (self.ny, 1))?;
        let n = self.nodes.len();
        let index: BTreeMap<NodeId, usize> = self.nodes.iter().enumerate().map(|(i, nd)| (nd.id, i)).collect();
        let mut status: Vec<Status> = self
            .nodes
            .iter()
            .map(|nd| if nd.failed { Status::Failed } else { Status::Running })
            .collect();
        let mut pc = alloc::vec![0usize; n];
        let mut inbox: Vec<BTreeMap<(NodeId, String), DVector<f64>>> = (0..n).map(|_| BTreeMap::new()).collect();
        let mut u = DVector::zeros(self.nu);
        let mut stats = StepStats::default();
        let mut round = 0;

        while status.contains(&Status::Running) {
            round += 1;
            let mut progress = false;
            let mut outbox: Vec<(usize, Message)> = Vec::new();
            let mut blocked: Option<(usize, usize)> = None;
            for i in 0..n {
                if status[i] != Status::Running {
                    continue;
                }
                loop {
                    if pc[i] == self.nodes[i].components.len() {
                        status[i] = Status::Done;
                        progress = true;
                        break;
                    }
                    let ci = pc[i];
                    let node = &self.nodes[i];
                    match &node.components[ci] {
                        Component::Collector { output, sources, starve_when_silent } => {
                            let mut ready = true;
                            let mut remote = 0;
                            let mut silent = 0;
                            for s in sources {
                                if let Source::Remote { from, label, .. } = s {
                                    remote += 1;
                                    let j = index[from];
                                    if inbox[i].contains_key(&(*from, label.clone())) {
                                        continue;
                                    }
                                    match status[j] {
                                        Status::Failed | Status::Starved => silent += 1,
                                        Status::Running | Status::Done => ready = false,
                                    }
                                }
                            }
                            if !ready {
                                blocked.get_or_insert((node.id, ci));
                                break;
                            }
                            if *starve_when_silent && remote > 0 && silent == remote {
                                status[i] = Status::Starved;
                                stats.starved.push(node.id);
                                progress = true;
                                break;
                            }
                            let mut v = DVector::zeros(node.buffers[*output].dim);
                            for s in sources {
                                let (payload, positions) = match s {
                                    Source::Remote { from, label, positions } => {
                                        (inbox[i].get(&(*from, label.clone())).cloned(), positions)
                                    }
                                    Source::Local { port, positions } => (Some(node.read(port)), positions),
                                };
                                if let Some(p) = payload {
                                    for (k, &pos) in positions.iter().enumerate() {
                                        v[pos] = p[k];
                                    }
                                }
                            }
                            let out = *output;
                            self.nodes[i].values[out] = v;
                        }
                        Component::Disseminator { input, routes } => {
                            let src = &node.values[*input];
                            for r in routes {
                                let payload = DVector::from_iterator(r.indices.len(), r.indices.iter().map(|&k| src[k]));
                                outbox.push((
                                    index[&r.target],
                                    Message {
                                        t: self.t,
                                        round,
                                        source: node.id,
                                        target: r.target,
                                        label: r.label.clone(),
                                        payload,
                                        delivered: true,
                                    },
                                ));
                            }
                        }
                        Component::Sense { channels, output } => {
                            let v = DVector::from_iterator(channels.len(), channels.iter().map(|&c| y[c]));
                            let out = *output;
                            self.nodes[i].values[out] = v;
                        }
                        Component::Actuate { input, channels } => {
                            let v = node.read(input);
                            for (k, &c) in channels.iter().enumerate() {
                                u[c] = v[k];
                            }
                        }
                        Component::Multiplier { matrix, input, output } => {
                            let v = matrix * node.read(input);
                            let out = *output;
                            self.nodes[i].values[out] = v;
                        }
                        Component::Adder { inputs, output } => {
                            let mut v = DVector::zeros(node.buffers[*output].dim);
                            for (sign, p) in inputs {
                                v.axpy(*sign, &node.read(p), 1.0);
                            }
                            let out = *output;
                            self.nodes[i].values[out] = v;
                        }
                        Component::DelayBuffer { taps, state, .. } => {
                            let writes: Vec<(usize, DVector<f64>)> =
                                taps.iter().copied().zip(state.iter().cloned()).collect();
                            for (b, v) in writes {
                                self.nodes[i].values[b] = v;
                            }
                        }
                    }
                    let node = &mut self.nodes[i];
                    let f = node.component_flops(&node.components[ci]);
                    node.flops += f;
                    stats.flops += f;
                    pc[i] += 1;
                    progress = true;
                }
            }
            for (j, mut m) in outbox {
                stats.messages += 1;
                stats.payload_scalars += m.payload.len();
                if status[j] == Status::Failed {
                    m.delivered = false;
                } else {
                    inbox[j].insert((m.source, m.label.clone()), m.payload.clone());
                }
                if self.record_ledger {
                    self.ledger.push(m);
                }
            }
            if !progress {
                let (node, component) = blocked.unwrap_or((0, 0));
                return Err(Error::AlgebraicLoop { node, component });
            }
        }

        for (i, node) in self.nodes.iter_mut().enumerate() {
            if status[i] != Status::Done {
                continue;
            }
            let inputs: Vec<Option<DVector<f64>>> = node
                .components
                .iter()
                .map(|c| match c {
                    Component::DelayBuffer { input, .. } => Some(node.read(input)),
                    _ => None,
                })
                .collect();
            for (c, v) in node.components.iter_mut().zip(inputs) {
                if let (Component::DelayBuffer { state, .. }, Some(v)) = (c, v) {
                    if !state.is_empty() {
                        state.pop();
                        state.insert(0, v);
                    }
                }
            }
        }
        stats.rounds = round;
        self.stats.push(stats);
        self.t += 1;
        Ok(u)
    }

    /// Clears all buffers, delay contents, counters, and logs; failed nodes
    /// stay failed.
    pub fn reset_state(&mut self) {
        for node in &mut self.nodes {
            for v in &mut node.values {
                v.fill(0.0);
            }
            for c in &mut node.components {
                if let Component::DelayBuffer { state, .. } = c {
                    for s in state.iter_mut() {
                        s.fill(0.0);
                    }
                }
            }
            node.flops = 0;
        }
        self.t = 0;
        self.ledger.clear();
        self.stats.clear();
    }
}

impl Controller for Network {
    fn input_dim(&self) -> usize {
        self.ny
    }

    fn output_dim(&self) -> usize {
        self.nu
    }

    fn step(&mut self, y: &DVector<f64>) -> Result<DVector<f64>> {
        self.run_step(y)
    }

    fn reset(&mut self) {
        self.reset_state();
    }

    fn clone_box(&self) -> Box<dyn Controller> {
        Box::new(self.clone())
    }
}
