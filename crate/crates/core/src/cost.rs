//! Closed-form cost predictions for the controller architectures, measured
//! costs of built networks, and a per-quantity reconciliation of the two.
//!
//! Predictions evaluate the closed-form cost formulas literally. Measurement uses
//! the scalar convention of the cyber layer: every scalar multiply, add, or
//! subtract is one flop and a vector addition of length `m` with `k` inputs
//! costs `(k − 1)m`. Where the two disagree, [`reconcile`] says why instead
//! of correcting either side.

use alloc::string::String;
use alloc::vec::Vec;

use crate::architectures::Architecture;
use crate::cyber::{MemoryInventory, Network, NodeId, Role};

/// Problem dimensions; `ny = nx` for state feedback.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Dims {
    pub nx: usize,
    pub nu: usize,
    pub ny: usize,
    pub t: usize,
}

impl Dims {
    pub fn sf(nx: usize, nu: usize, t: usize) -> Self {
        Self { nx, nu, ny: nx, t }
    }

    pub fn of(nx: usize, nu: usize, ny: usize, t: usize) -> Self {
        Self { nx, nu, ny, t }
    }

    fn ints(self) -> (i64, i64, i64, i64) {
        (self.nx as i64, self.nu as i64, self.ny as i64, self.t as i64)
    }
}

/// Closed-form costs, as pure integer functions.
pub mod formula {
    use super::Dims;

    /// Centralized state feedback, flops per step.
    pub fn sf_centralized_flops(d: Dims) -> i64 {
        let (nx, nu, _, t) = d.ints();
        (nx + nu) * (2 * nx - 1) + t * nu * (2 * nx - 1) + t + 1
    }

    /// Centralized state feedback, stored scalars.
    pub fn sf_centralized_memory(d: Dims) -> i64 {
        sf_centralized_multipliers(d) + sf_centralized_buffers(d)
    }

    pub fn sf_centralized_multipliers(d: Dims) -> i64 {
        let (nx, nu, _, t) = d.ints();
        nx * nx + nx * nu + t * nx * nu
    }

    pub fn sf_centralized_buffers(d: Dims) -> i64 {
        let (nx, nu, _, t) = d.ints();
        2 * nx + (t + 1) * nx + nu
    }

    /// Standard (`x̂`-based) realization, flops per step.
    pub fn sf_original_flops(d: Dims) -> i64 {
        let (nx, nu, _, t) = d.ints();
        (t - 1) * nx * (2 * nx - 1) + t * nu * (2 * nx - 1) + (t - 1)
    }

    pub fn sf_original_memory(d: Dims) -> i64 {
        sf_original_multipliers(d) + sf_original_buffers(d)
    }

    pub fn sf_original_multipliers(d: Dims) -> i64 {
        let (nx, nu, _, t) = d.ints();
        (t - 1) * nx * nx + t * nx * nu
    }

    pub fn sf_original_buffers(d: Dims) -> i64 {
        let (nx, nu, _, t) = d.ints();
        (t + 2) * nx + nu
    }

    /// Multiplier storage shared by the distributed state-feedback designs.
    pub fn sf_distributed_multipliers(d: Dims) -> i64 {
        let (nx, nu, _, t) = d.ints();
        nx * nx + nx * nu + t * nx * nu
    }

    pub fn sf_naive_buffers(d: Dims) -> i64 {
        let (nx, nu, _, t) = d.ints();
        (t + 1) * nx * nu + nx * nx + 4 * nx + nu
    }

    pub fn sf_memconserv_buffers(d: Dims) -> i64 {
        let (nx, nu, _, t) = d.ints();
        2 * nx * nu + nx * nx + (t + 3) * nx + nu
    }

    /// The stated closed form of naive minus memory-conservative buffers.
    pub fn sf_buffer_difference_claim(d: Dims) -> i64 {
        let (nx, nu, _, t) = d.ints();
        (t - 1) * nx * (nu - 1)
    }

    pub fn sf_naive_sensor_buffers(d: Dims) -> i64 {
        d.nx as i64 + 4
    }

    pub fn sf_naive_actuator_buffers(d: Dims) -> i64 {
        (d.t as i64 + 1) * d.nx as i64 + 1
    }

    pub fn sf_memconserv_sensor_buffers(d: Dims) -> i64 {
        let (nx, nu, _, t) = d.ints();
        nx + nu + t + 3
    }

    pub fn sf_memconserv_actuator_buffers(d: Dims) -> i64 {
        d.nx as i64 + 1
    }

    /// Standard output-feedback realization, flops per step.
    pub fn of_original_flops(d: Dims) -> i64 {
        let (nx, nu, ny, t) = d.ints();
        (nu + ny) * (2 * nu - 1) + (t * nu + (t - 1) * nx) * (2 * nx - 1) + (nu + t * nx) * (2 * ny - 1) + 4 * t - 1
    }

    pub fn of_original_memory(d: Dims) -> i64 {
        let (nx, nu, ny, t) = d.ints();
        nu * (nu + 2 * ny) + (t - 1) * (nu + nx) * (nx + ny) + (t + 1) * ny + t * nx + 2 * nu
    }

    /// Centralized output feedback, flops per step.
    pub fn of_centralized_flops(d: Dims) -> i64 {
        let (nx, nu, ny, t) = d.ints();
        2 * (nx + ny) * (nx + nu - 1) + t * nu * (2 * nx - 1) + t + 2
    }

    pub fn of_centralized_memory(d: Dims) -> i64 {
        let (nx, nu, ny, t) = d.ints();
        t * nu * ny + (nu + nx) * (nx + ny) + (t + 1) * ny + 2 * nx + nu
    }
}

/// Output-feedback designs with a closed-form cost.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OfDesign {
    /// The standard four-response realization (not built as a network).
    Original,
    Centralized,
}

/// Predicted costs; `None` where no formula exists.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Predicted {
    pub flops: Option<i64>,
    pub memory: Option<i64>,
    pub multiplier_memory: Option<i64>,
    pub buffer_memory: Option<i64>,
    /// Buffers of each sensor node.
    pub sensor_buffers: Option<i64>,
    /// Buffers of each actuator node.
    pub actuator_buffers: Option<i64>,
}

fn split(mult: i64, buf: i64) -> Predicted {
    Predicted {
        memory: Some(mult + buf),
        multiplier_memory: Some(mult),
        buffer_memory: Some(buf),
        ..Predicted::default()
    }
}

/// Closed-form state-feedback costs of `arch`; `None` for output-feedback
/// architectures.
pub fn predict_sf_costs(arch: Architecture, d: Dims) -> Option<Predicted> {
    use formula::*;
    let p = match arch {
        Architecture::SfCentralized => Predicted {
            flops: Some(sf_centralized_flops(d)),
            ..split(sf_centralized_multipliers(d), sf_centralized_buffers(d))
        },
        Architecture::SfOriginal => Predicted {
            flops: Some(sf_original_flops(d)),
            ..split(sf_original_multipliers(d), sf_original_buffers(d))
        },
        Architecture::SfNaive => Predicted {
            sensor_buffers: Some(sf_naive_sensor_buffers(d)),
            actuator_buffers: Some(sf_naive_actuator_buffers(d)),
            ..split(sf_distributed_multipliers(d), sf_naive_buffers(d))
        },
        Architecture::SfMemoryConservative => Predicted {
            sensor_buffers: Some(sf_memconserv_sensor_buffers(d)),
            actuator_buffers: Some(sf_memconserv_actuator_buffers(d)),
            ..split(sf_distributed_multipliers(d), sf_memconserv_buffers(d))
        },
        // the keeper relays δ[t] on top of the naive design
        Architecture::SfGlobalState => Predicted {
            sensor_buffers: Some(sf_naive_sensor_buffers(d)),
            actuator_buffers: Some(sf_naive_actuator_buffers(d)),
            ..split(sf_distributed_multipliers(d), sf_naive_buffers(d) + d.nx as i64)
        },
        _ => return None,
    };
    Some(p)
}

pub fn predict_of_costs(design: OfDesign, d: Dims) -> Predicted {
    let (flops, memory) = match design {
        OfDesign::Original => (formula::of_original_flops(d), formula::of_original_memory(d)),
        OfDesign::Centralized => (formula::of_centralized_flops(d), formula::of_centralized_memory(d)),
    };
    Predicted {
        flops: Some(flops),
        memory: Some(memory),
        ..Predicted::default()
    }
}

/// Closed-form costs of any architecture, where a formula exists.
pub fn predict(arch: Architecture, d: Dims) -> Option<Predicted> {
    match arch {
        Architecture::OfCentralized => Some(predict_of_costs(OfDesign::Centralized, d)),
        a => predict_sf_costs(a, d),
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NodeCost {
    pub id: NodeId,
    pub role: Role,
    pub memory: MemoryInventory,
    pub flops_per_step: u64,
    /// Messages the node's program sends per step.
    pub sends: usize,
    pub receives: usize,
}

/// Costs read off a built network and its counters.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Measured {
    pub memory: MemoryInventory,
    /// Flops of one full step of every node's program.
    pub flops_per_step: u64,
    pub messages_per_step: usize,
    pub payload_per_step: usize,
    /// Steps executed so far and the flops and messages counted over them.
    pub steps: usize,
    pub flops_counted: u64,
    pub messages_counted: usize,
    pub nodes: Vec<NodeCost>,
}

impl Measured {
    pub fn max_node_memory(&self) -> usize {
        self.nodes.iter().map(|n| n.memory.total()).max().unwrap_or(0)
    }

    pub fn max_node_flops(&self) -> u64 {
        self.nodes.iter().map(|n| n.flops_per_step).max().unwrap_or(0)
    }

    /// Largest number of messages a node sends plus receives per step.
    pub fn max_node_traffic(&self) -> usize {
        self.nodes.iter().map(|n| n.sends + n.receives).max().unwrap_or(0)
    }

    fn role_buffers(&self, sensor: bool) -> Vec<usize> {
        self.nodes
            .iter()
            .filter(|n| match n.role {
                Role::Sensor(_) => sensor,
                Role::Actuator(_) => !sensor,
                _ => false,
            })
            .map(|n| n.memory.buffers)
            .collect()
    }
}

pub fn measure_costs(net: &Network) -> Measured {
    let nodes: Vec<NodeCost> = net
        .nodes()
        .iter()
        .map(|n| NodeCost {
            id: n.id,
            role: n.role.clone(),
            memory: n.memory(),
            flops_per_step: n.flops_per_step(),
            sends: n.outgoing().len(),
            receives: n.incoming().len(),
        })
        .collect();
    let payload_per_step = net.nodes().iter().flat_map(|n| n.outgoing()).map(|o| o.2).sum();
    Measured {
        memory: net.memory(),
        flops_per_step: nodes.iter().map(|n| n.flops_per_step).sum(),
        messages_per_step: nodes.iter().map(|n| n.sends).sum(),
        payload_per_step,
        steps: net.stats().len(),
        flops_counted: net.stats().iter().map(|s| s.flops).sum(),
        messages_counted: net.stats().iter().map(|s| s.messages).sum(),
        nodes,
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Verdict {
    Match,
    /// Differs, and the difference is fully explained by a counting
    /// convention; `explained` is the prediction after the adjustment.
    Convention { explained: i64, note: String },
    Mismatch { note: String },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Line {
    pub quantity: &'static str,
    pub predicted: i64,
    pub measured: i64,
    pub verdict: Verdict,
}

/// Scalar-exact flop count of the centralized designs as built, or `None`
/// when the architecture has no closed-form flop count.
fn scalar_flops(arch: Architecture, d: Dims) -> Option<(i64, &'static str)> {
    let (nx, nu, ny, t) = d.ints();
    match arch {
        Architecture::SfCentralized => Some((
            nx * (2 * nx - 1) + nx * (2 * nu - 1) + t * nu * (2 * nx - 1) + 2 * nx + (t - 1) * nu,
            "the -Bu product is N_x(2N_u-1), not N_u(2N_x-1); \
             additions count per scalar: 2N_x for delta and (T-1)N_u for the convolution, not T+1",
        )),
        Architecture::SfOriginal => Some((
            t * nu * (2 * nx - 1) + (t - 1) * nx * (2 * nx - 1) + nx + (t - 1) * nu + (t - 2).max(0) * nx,
            "additions count per scalar: N_x for delta, (T-1)N_u for u, (T-2)N_x for xhat, not T-1",
        )),
        Architecture::OfCentralized => Some((
            ny * (2 * nx - 1) + nx * (2 * nx - 1) + nx * (2 * nu - 1) + (t + 1) * nu * (2 * ny - 1)
                + ny + t * nu + nx,
            "products are C, A, B separately and T+1 taps of the N_u x N_y response; \
             additions count per scalar: N_y + TN_u + N_x",
        )),
        _ => None,
    }
}

fn line(quantity: &'static str, predicted: Option<i64>, measured: i64, explain: impl FnOnce(i64) -> Verdict) -> Option<Line> {
    let predicted = predicted?;
    let verdict = if predicted == measured { Verdict::Match } else { explain(measured) };
    Some(Line { quantity, predicted, measured, verdict })
}

fn all_equal(v: &[usize]) -> Option<i64> {
    let first = *v.first()?;
    v.iter().all(|&x| x == first).then_some(first as i64)
}

/// Compares every predicted quantity with its measurement. `dense` states
/// whether the network was built from dense plant and response matrices;
/// with structural zeros, pruning makes any difference expected.
pub fn reconcile(arch: Architecture, d: Dims, pred: &Predicted, meas: &Measured, dense: bool) -> Vec<Line> {
    let pruned = |what: &str| Verdict::Mismatch {
        note: if dense {
            format!("{what} differs on a dense build")
        } else {
            format!("{what} differs; structural zeros were pruned")
        },
    };
    let mut out = Vec::new();
    out.extend(line("flops per step", pred.flops, meas.flops_per_step as i64, |m| {
        match scalar_flops(arch, d) {
            Some((s, note)) if s == m => Verdict::Convention { explained: s, note: note.into() },
            _ => pruned("flop count"),
        }
    }));
    let extra_of = if arch == Architecture::OfCentralized {
        let (_, nu, ny, _) = d.ints();
        Some(ny * nu + nu * nu)
    } else {
        None
    };
    out.extend(line("memory", pred.memory, meas.memory.total() as i64, |m| match (extra_of, pred.memory) {
        (Some(e), Some(p)) if p + e == m => Verdict::Convention {
            explained: p + e,
            note: "feedthrough: the -D multiplier and (I + Phi_uy[0] D)^-1 are stored in addition".into(),
        },
        _ => pruned("memory"),
    }));
    out.extend(line("multiplier memory", pred.multiplier_memory, meas.memory.multipliers as i64, |_| {
        pruned("multiplier memory")
    }));
    out.extend(line("buffer memory", pred.buffer_memory, meas.memory.buffers as i64, |_| pruned("buffer memory")));
    for (sensor, quantity, p) in [
        (true, "buffers per sensor", pred.sensor_buffers),
        (false, "buffers per actuator", pred.actuator_buffers),
    ] {
        let v = meas.role_buffers(sensor);
        match all_equal(&v) {
            Some(m) => out.extend(line(quantity, p, m, |_| pruned(quantity))),
            None => {
                if let Some(p) = p {
                    out.push(Line {
                        quantity,
                        predicted: p,
                        measured: v.iter().copied().max().unwrap_or(0) as i64,
                        verdict: pruned(quantity),
                    });
                }
            }
        }
    }
    out
}

/// Whether every line matched or was explained by a convention.
pub fn is_reconciled(lines: &[Line]) -> bool {
    lines.iter().all(|l| !matches!(l.verdict, Verdict::Mismatch { .. }))
}

/// Predicted, measured, and reconciled costs of one built architecture.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CostReport {
    pub architecture: Architecture,
    pub dims: Dims,
    pub predicted: Option<Predicted>,
    pub measured: Measured,
    pub lines: Vec<Line>,
}

pub fn cost_report(arch: Architecture, d: Dims, net: &Network, dense: bool) -> CostReport {
    let predicted = predict(arch, d);
    let measured = measure_costs(net);
    let lines = predicted
        .as_ref()
        .map(|p| reconcile(arch, d, p, &measured, dense))
        .unwrap_or_default();
    CostReport {
        architecture: arch,
        dims: d,
        predicted,
        measured,
        lines,
    }
}
