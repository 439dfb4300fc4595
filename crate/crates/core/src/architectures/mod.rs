//! Builders that compile a synthesized controller into a [`Network`] of
//! sensor, actuator, and (where the architecture has one) central nodes.
//!
//! Node ids: sensors `0..n_sensors`, actuators next, then the controller or
//! global state keeper. Messages are pruned on exact structural zeros of the
//! plant and response matrices.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::cyber::{Component, Network, Node, NodeId, Port, Role, Route, Source};
use crate::error::{Error, Result};
use crate::lti::{is_schur_stable, LtiSystem};
use crate::spectral::SpectralSeries;

mod of;
mod sf;

pub use of::{build_actuator_side_of, build_centralized_of, build_global_state_of, build_sensor_side_of};
pub use sf::{
    build_centralized_sf, build_global_state_sf, build_memconserv_distributed_sf, build_naive_distributed_sf,
    build_original_sf,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Architecture {
    SfCentralized,
    SfOriginal,
    SfGlobalState,
    SfNaive,
    SfMemoryConservative,
    OfCentralized,
    OfSensorSide,
    OfActuatorSide,
    OfGlobalState,
}

impl Architecture {
    pub const ALL: [Architecture; 9] = [
        Architecture::SfCentralized,
        Architecture::SfOriginal,
        Architecture::SfGlobalState,
        Architecture::SfNaive,
        Architecture::SfMemoryConservative,
        Architecture::OfCentralized,
        Architecture::OfSensorSide,
        Architecture::OfActuatorSide,
        Architecture::OfGlobalState,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Architecture::SfCentralized => "sf-centralized",
            Architecture::SfOriginal => "sf-original",
            Architecture::SfGlobalState => "sf-global-state",
            Architecture::SfNaive => "sf-naive",
            Architecture::SfMemoryConservative => "sf-memory-conservative",
            Architecture::OfCentralized => "of-centralized",
            Architecture::OfSensorSide => "of-sensor-side",
            Architecture::OfActuatorSide => "of-actuator-side",
            Architecture::OfGlobalState => "of-global-state",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.iter().copied().find(|a| a.name() == s)
    }

    pub fn is_state_feedback(self) -> bool {
        matches!(
            self,
            Architecture::SfCentralized
                | Architecture::SfOriginal
                | Architecture::SfGlobalState
                | Architecture::SfNaive
                | Architecture::SfMemoryConservative
        )
    }

    pub fn is_distributed(self) -> bool {
        matches!(
            self,
            Architecture::SfNaive
                | Architecture::SfMemoryConservative
                | Architecture::OfSensorSide
                | Architecture::OfActuatorSide
        )
    }
}

/// Ids of a built network's nodes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Layout {
    pub sensors: Vec<NodeId>,
    pub actuators: Vec<NodeId>,
    pub center: Option<NodeId>,
}

impl Layout {
    pub(crate) fn new(n_sensors: usize, n_actuators: usize, center: bool) -> Self {
        Self {
            sensors: (0..n_sensors).collect(),
            actuators: (n_sensors..n_sensors + n_actuators).collect(),
            center: center.then_some(n_sensors + n_actuators),
        }
    }

    /// The layout implied by node roles.
    pub fn of(net: &Network) -> Self {
        let mut l = Self {
            sensors: Vec::new(),
            actuators: Vec::new(),
            center: None,
        };
        for n in net.nodes() {
            match n.role {
                Role::Sensor(_) => l.sensors.push(n.id),
                Role::Actuator(_) => l.actuators.push(n.id),
                Role::GlobalStateKeeper | Role::Controller => l.center = Some(n.id),
                Role::Other(_) => {}
            }
        }
        l
    }
}

pub(crate) fn require_stable(sys: &LtiSystem) -> Result<()> {
    let r = is_schur_stable(sys.a(), 0.0)?;
    if r.stable {
        Ok(())
    } else {
        Err(Error::Unstable {
            spectral_radius: r.spectral_radius,
        })
    }
}

pub(crate) fn require_no_feedthrough(sys: &LtiSystem, arch: &str) -> Result<()> {
    if sys.has_feedthrough() {
        return Err(Error::InvalidArgument(format!(
            "{arch} requires D = 0: with feedthrough the control loop closes across nodes within one step"
        )));
    }
    Ok(())
}

/// Actuator location: first state it enters.
pub(crate) fn actuator_location(b: &DMatrix<f64>, k: usize) -> Option<usize> {
    (0..b.nrows()).find(|&i| b[(i, k)] != 0.0)
}

/// Sensor location: first state it reads.
pub(crate) fn sensor_location(c: &DMatrix<f64>, i: usize) -> Option<usize> {
    (0..c.ncols()).find(|&j| c[(i, j)] != 0.0)
}

/// `{(r, c) : Φ[τ][r, c] ≠ 0 for some τ}` as row-wise column lists.
pub(crate) fn support(series: &SpectralSeries) -> DMatrix<bool> {
    let (r, c) = series.shape();
    DMatrix::from_fn(r, c, |i, j| series.elements().iter().any(|e| e[(i, j)] != 0.0))
}

pub(crate) fn nonzero_rows(m: &DMatrix<f64>, col: usize) -> Vec<usize> {
    (0..m.nrows()).filter(|&i| m[(i, col)] != 0.0).collect()
}

pub(crate) fn nonzero_cols(m: &DMatrix<f64>, row: usize) -> Vec<usize> {
    (0..m.ncols()).filter(|&j| m[(row, j)] != 0.0).collect()
}

pub(crate) fn sub_matrix(m: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i], cols[j])])
}

/// Output buffer helper: a register if `keep`, else a wire.
pub(crate) fn out(node: &mut Node, name: &str, dim: usize, keep: bool) -> usize {
    if keep {
        node.register(name, dim)
    } else {
        node.wire(name, dim)
    }
}

pub(crate) fn multiply(node: &mut Node, name: &str, matrix: DMatrix<f64>, input: Port, keep: bool) -> usize {
    let o = out(node, name, matrix.nrows(), keep);
    node.push(Component::Multiplier { matrix, input, output: o });
    o
}

pub(crate) fn add(node: &mut Node, name: &str, dim: usize, inputs: Vec<(f64, Port)>, keep: bool) -> usize {
    let o = out(node, name, dim, keep);
    node.push(Component::Adder { inputs, output: o });
    o
}

/// `Σ_k M_k · input_k` with each product on a wire.
pub(crate) fn convolve(node: &mut Node, name: &str, terms: Vec<(DMatrix<f64>, Port)>, dim: usize, keep: bool) -> usize {
    let o = out(node, name, dim, keep);
    convolve_into(node, name, terms, o);
    o
}

pub(crate) fn convolve_into(node: &mut Node, name: &str, terms: Vec<(DMatrix<f64>, Port)>, output: usize) {
    let mut inputs = Vec::with_capacity(terms.len());
    for (k, (m, p)) in terms.into_iter().enumerate() {
        let w = multiply(node, &format!("{name}.term{k}"), m, p, false);
        inputs.push((1.0, Port::all(w)));
    }
    node.push(Component::Adder { inputs, output });
}

/// Collects one scalar message per `(from, label)` and sums them, together
/// with optional local scalar ports, into `output`.
pub(crate) fn collect_sum(
    node: &mut Node,
    name: &str,
    local: Vec<Port>,
    remote: Vec<(NodeId, String)>,
    starve: bool,
    output: usize,
) {
    let n = local.len() + remote.len();
    let parts = node.wire(&format!("{name}.parts"), n);
    let mut sources = Vec::with_capacity(n);
    for (k, p) in local.into_iter().enumerate() {
        sources.push(Source::Local { port: p, positions: vec![k] });
    }
    let off = sources.len();
    for (k, (from, label)) in remote.into_iter().enumerate() {
        sources.push(Source::Remote { from, label, positions: vec![off + k] });
    }
    node.push(Component::Collector {
        output: parts,
        sources,
        starve_when_silent: starve,
    });
    node.push(Component::Adder {
        inputs: (0..n).map(|k| (1.0, Port::pick(parts, vec![k]))).collect(),
        output,
    });
}

/// Collects whole-vector messages placed consecutively.
pub(crate) fn collect_stack(
    node: &mut Node,
    name: &str,
    remote: Vec<(NodeId, String, usize)>,
    keep: bool,
    starve: bool,
) -> usize {
    let dim: usize = remote.iter().map(|r| r.2).sum();
    let o = out(node, name, dim, keep);
    let mut off = 0;
    let sources = remote
        .into_iter()
        .map(|(from, label, d)| {
            let s = Source::Remote { from, label, positions: (off..off + d).collect() };
            off += d;
            s
        })
        .collect();
    node.push(Component::Collector {
        output: o,
        sources,
        starve_when_silent: starve,
    });
    o
}

pub(crate) fn send(node: &mut Node, input: usize, routes: Vec<(NodeId, String, Vec<usize>)>) {
    if routes.is_empty() {
        return;
    }
    node.push(Component::Disseminator {
        input,
        routes: routes
            .into_iter()
            .map(|(target, label, indices)| Route { target, label, indices })
            .collect(),
    });
}

/// Sum of a named buffer over the given nodes (e.g. per-actuator estimates).
pub fn sum_buffer(net: &Network, nodes: &[NodeId], name: &str) -> Option<DVector<f64>> {
    let mut acc: Option<DVector<f64>> = None;
    for &id in nodes {
        let v = net.node(id)?.value(name)?;
        acc = Some(match acc {
            None => v.clone(),
            Some(a) => a + v,
        });
    }
    acc
}

/// Maximum hop distance `|loc(source) − loc(target)|` over ledger messages
/// between located nodes, and the number of messages exceeding `max_hops`.
pub fn hop_violations(net: &Network, max_hops: usize) -> (usize, usize) {
    let mut worst = 0;
    let mut violations = 0;
    for m in net.ledger() {
        let (Some(a), Some(b)) = (
            net.node(m.source).and_then(|n| n.location),
            net.node(m.target).and_then(|n| n.location),
        ) else {
            continue;
        };
        let h = a.abs_diff(b);
        worst = worst.max(h);
        if h > max_hops {
            violations += 1;
        }
    }
    (worst, violations)
}
