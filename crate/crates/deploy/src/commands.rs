//! The five pipelines behind the command-line verbs. Each writes its
//! artifacts into an output directory and returns a summary.

use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use sls_core::architectures::{
    build_actuator_side_of, build_centralized_of, build_centralized_sf, build_global_state_of, build_global_state_sf,
    build_memconserv_distributed_sf, build_naive_distributed_sf, build_original_sf, build_sensor_side_of, Architecture,
};
use sls_core::cost::{cost_report, predict_of_costs, CostReport, Dims, OfDesign, Verdict};
use sls_core::cyber::Network;
use sls_core::realizations::{Controller, OfSimplified, OfStandard, SfSimplified, SfStandard};
use sls_core::simulate::{closed_loop_with, reference_closed_loop, trace_deviation, Channel, Disturbances};
use sls_core::stability::{default_probe_horizon, internal_stability_probe, ProbeGrid, Signal, DEFAULT_DECAY_TOL};
use sls_core::synthesis::{
    synth_of_h2_quadruple, synth_of_youla, synth_sf_h2, validate_sf_achievability, OfSynthesis, SfSynthesis,
    SynthesisSpec, SystemResponseOf, YoulaObjective, YoulaSynthesis,
};
use sls_core::{LtiSystem, SpectralSeries, Trace};

use crate::error::DeployError;
use crate::formats::{float, ledger_table, network_json, series_json, trace_table, write_json, Stamp, Table};
use crate::scenario::{LoadedScenario, RealizationKind, Scenario, SynthesisRoute};

/// Default tolerance of `compare` on the relative trace deviation.
pub const DEFAULT_COMPARE_TOL: f64 = 1e-9;

/// A loaded scenario with its plant and synthesis spec resolved.
pub struct Context {
    pub scenario: Scenario,
    pub sys: LtiSystem,
    pub spec: SynthesisSpec,
    pub stamp: Stamp,
}

impl Context {
    /// `seed` overrides the scenario's seed.
    pub fn new(loaded: LoadedScenario, seed: Option<u64>) -> Result<Self, DeployError> {
        let LoadedScenario { scenario, sha256 } = loaded;
        let sys = scenario.plant.build()?;
        let spec = scenario.synthesis.spec(&sys)?;
        let stamp = Stamp {
            scenario_sha256: sha256,
            seed: seed.unwrap_or(scenario.seed),
        };
        Ok(Self {
            scenario,
            sys,
            spec,
            stamp,
        })
    }

    pub fn from_path(path: &Path, seed: Option<u64>) -> Result<Self, DeployError> {
        Self::new(LoadedScenario::from_path(path)?, seed)
    }

    pub fn disturbances(&self) -> Disturbances {
        self.scenario.disturbances(&self.sys, self.stamp.seed)
    }

    pub fn horizon(&self) -> usize {
        self.scenario.synthesis.horizon
    }

    pub fn dims(&self) -> Dims {
        let (nx, nu, ny, t) = (self.sys.nx(), self.sys.nu(), self.sys.ny(), self.horizon());
        match self.scenario.synthesis.route {
            SynthesisRoute::SfH2 => Dims::sf(nx, nu, t),
            _ => Dims::of(nx, nu, ny, t),
        }
    }

    pub fn synthesize(&self) -> Result<Synthesized, DeployError> {
        Ok(match self.scenario.synthesis.route {
            SynthesisRoute::SfH2 => Synthesized::Sf(synth_sf_h2(&self.sys, &self.spec)?),
            SynthesisRoute::OfQuadruple => Synthesized::OfQuadruple(synth_of_h2_quadruple(&self.sys, &self.spec)?),
            SynthesisRoute::OfYoula => {
                let objective =
                    YoulaObjective::quadruple_h2(&self.sys, &self.spec, self.scenario.synthesis.eval_horizon());
                Synthesized::Youla(synth_of_youla(&self.sys, &self.spec, &objective)?)
            }
        })
    }
}

pub enum Synthesized {
    Sf(SfSynthesis),
    OfQuadruple(OfSynthesis),
    Youla(YoulaSynthesis),
}

impl Synthesized {
    pub fn objective(&self) -> f64 {
        match self {
            Synthesized::Sf(s) => s.objective,
            Synthesized::OfQuadruple(s) => s.objective,
            Synthesized::Youla(s) => s.objective,
        }
    }

    fn quadruple(&self) -> Option<&SystemResponseOf> {
        match self {
            Synthesized::Sf(_) => None,
            Synthesized::OfQuadruple(s) => Some(&s.response),
            Synthesized::Youla(s) => Some(&s.response),
        }
    }

    fn phi_uy(&self) -> Option<&SpectralSeries> {
        self.quadruple().map(|q| &q.phi_uy)
    }

    /// The realization named by the scenario.
    pub fn controller(&self, sys: &LtiSystem, kind: RealizationKind) -> Result<Box<dyn Controller>, DeployError> {
        Ok(match (self, kind) {
            (Synthesized::Sf(s), RealizationKind::Simplified) => Box::new(SfSimplified::new(sys, &s.response.phi_u)?),
            (Synthesized::Sf(s), RealizationKind::Standard) => Box::new(SfStandard::new(&s.response)?),
            (_, RealizationKind::Simplified) => Box::new(OfSimplified::new(sys, self.phi_uy().expect("output feedback"))?),
            (_, RealizationKind::Standard) => Box::new(OfStandard::new(sys, self.quadruple().expect("output feedback"))?),
        })
    }

    /// No exact zeros in the plant matrices or in the support of the deployed
    /// response, so builders have nothing to prune.
    pub fn is_dense(&self, sys: &LtiSystem) -> bool {
        let full = |m: &nalgebra::DMatrix<f64>| m.iter().all(|v| *v != 0.0);
        let series = match self {
            Synthesized::Sf(s) => &s.response.phi_u,
            _ => self.phi_uy().expect("output feedback"),
        };
        let (r, c) = series.shape();
        let support = (0..r).all(|i| (0..c).all(|j| series.elements().iter().any(|e| e[(i, j)] != 0.0)));
        let plant = match self {
            Synthesized::Sf(_) => full(sys.a()) && full(sys.b()),
            _ => full(sys.a()) && full(sys.b()) && full(sys.c()),
        };
        support && plant
    }

    pub fn build(&self, sys: &LtiSystem, arch: Architecture) -> Result<Network, DeployError> {
        let wrong = || DeployError::Usage(format!("{} does not match the synthesis route", arch.name()));
        let net = match (self, arch) {
            (Synthesized::Sf(s), Architecture::SfCentralized) => build_centralized_sf(sys, &s.response),
            (Synthesized::Sf(s), Architecture::SfOriginal) => build_original_sf(sys, &s.response),
            (Synthesized::Sf(s), Architecture::SfGlobalState) => build_global_state_sf(sys, &s.response),
            (Synthesized::Sf(s), Architecture::SfNaive) => build_naive_distributed_sf(sys, &s.response),
            (Synthesized::Sf(s), Architecture::SfMemoryConservative) => {
                build_memconserv_distributed_sf(sys, &s.response)
            }
            (Synthesized::Sf(_), _) => return Err(wrong()),
            (_, a) if a.is_state_feedback() => return Err(wrong()),
            (_, a) => {
                let phi = self.phi_uy().expect("output feedback");
                match a {
                    Architecture::OfCentralized => build_centralized_of(sys, phi),
                    Architecture::OfSensorSide => build_sensor_side_of(sys, phi),
                    Architecture::OfActuatorSide => build_actuator_side_of(sys, phi),
                    _ => build_global_state_of(sys, phi),
                }
            }
        };
        Ok(net?)
    }
}

fn out_dir(out: &Path) -> Result<PathBuf, DeployError> {
    fs::create_dir_all(out)?;
    Ok(out.to_path_buf())
}

fn series_residuals_json(s: &Synthesized, sys: &LtiSystem) -> Result<Value, DeployError> {
    Ok(match s {
        Synthesized::Sf(s) => {
            let r = validate_sf_achievability(&s.response, sys)?;
            json!({
                "identity": r.identity,
                "recursion": r.recursion,
                "terminal": r.terminal,
                "max": r.max(),
                "stationarity": s.stationarity,
                "terminal_residual": s.terminal_residual,
            })
        }
        Synthesized::OfQuadruple(s) => json!({
            "row_xx": s.residuals.row_xx,
            "row_xy": s.residuals.row_xy,
            "col_xx": s.residuals.col_xx,
            "col_ux": s.residuals.col_ux,
            "terminal": s.residuals.terminal,
            "properness": s.residuals.properness,
            "max": s.residuals.max(),
            "stationarity": s.stationarity,
        }),
        Synthesized::Youla(y) => {
            let r = sls_core::synthesis::quadruple_residuals(&y.response, sys)?;
            json!({
                "row_xx": r.row_xx,
                "row_xy": r.row_xy,
                "col_xx": r.col_xx,
                "col_ux": r.col_ux,
                "interior_max": r.interior_max(),
                "truncated_tail": r.terminal,
                "eval_horizon": y.response.truncation.as_ref().map(|t| t.eval_horizon),
                "tail_bound": y.response.truncation.as_ref().map(|t| t.tail_bound),
            })
        }
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthesizeSummary {
    pub objective: f64,
    pub files: Vec<PathBuf>,
}

/// `response.json` (spectral elements) and `achievability.json` (constraint residuals).
pub fn cmd_synthesize(ctx: &Context, out: &Path) -> Result<SynthesizeSummary, DeployError> {
    let dir = out_dir(out)?;
    let syn = ctx.synthesize()?;
    let response = match &syn {
        Synthesized::Sf(s) => json!({
            "kind": "state-feedback",
            "phi_x": series_json(&s.response.phi_x),
            "phi_u": series_json(&s.response.phi_u),
        }),
        Synthesized::OfQuadruple(OfSynthesis { response: r, .. })
        | Synthesized::Youla(YoulaSynthesis { response: r, .. }) => json!({
            "kind": "output-feedback",
            "phi_xx": series_json(&r.phi_xx),
            "phi_xy": series_json(&r.phi_xy),
            "phi_ux": series_json(&r.phi_ux),
            "phi_uy": series_json(&r.phi_uy),
        }),
    };
    let files = vec![dir.join("response.json"), dir.join("achievability.json")];
    write_json(
        &files[0],
        &ctx.stamp,
        json!({ "route": ctx.scenario.synthesis.route, "objective": syn.objective(), "response": response }),
    )?;
    write_json(&files[1], &ctx.stamp, json!({ "residuals": series_residuals_json(&syn, &ctx.sys)? }))?;
    Ok(SynthesizeSummary {
        objective: syn.objective(),
        files,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimulateSummary {
    pub steps: usize,
    pub messages: usize,
    pub files: Vec<PathBuf>,
}

/// Runs the scenario's architecture (or the bare realization) and returns the
/// trace and, for a network, the network after the run.
pub fn simulate(ctx: &Context, syn: &Synthesized) -> Result<(Trace, Option<Network>), DeployError> {
    let dist = ctx.disturbances();
    let t_sim = ctx.scenario.t_sim;
    match ctx.scenario.architecture.as_deref().and_then(Architecture::from_name) {
        None => {
            let mut k = syn.controller(&ctx.sys, ctx.scenario.realization)?;
            Ok((reference_closed_loop(&ctx.sys, k.as_mut(), &dist, t_sim)?, None))
        }
        Some(arch) => {
            let mut net = syn.build(&ctx.sys, arch)?;
            let failures = &ctx.scenario.failures;
            let trace = closed_loop_with(&ctx.sys, &mut net, &dist, t_sim, |t, n| {
                for f in failures {
                    if f.at == t {
                        n.fail_node(f.node)?;
                    }
                    if f.restore == Some(t) {
                        n.restore_node(f.node)?;
                    }
                }
                Ok(())
            })?;
            Ok((trace, Some(net)))
        }
    }
}

/// `trace.csv`, `ledger.csv`, and for a network `network.json`.
pub fn cmd_simulate(ctx: &Context, out: &Path) -> Result<SimulateSummary, DeployError> {
    let dir = out_dir(out)?;
    let syn = ctx.synthesize()?;
    let (trace, net) = simulate(ctx, &syn)?;
    let mut files = vec![dir.join("trace.csv"), dir.join("ledger.csv")];
    trace_table(&trace).write(&files[0], &ctx.stamp)?;
    let ledger = net.as_ref().map(|n| n.ledger()).unwrap_or_default();
    ledger_table(ledger).write(&files[1], &ctx.stamp)?;
    if let Some(n) = &net {
        files.push(dir.join("network.json"));
        write_json(&files[2], &ctx.stamp, network_json(n))?;
    }
    Ok(SimulateSummary {
        steps: trace.len(),
        messages: ledger.len(),
        files,
    })
}

/// Pairwise relative trace deviations; the first controller is the reference.
#[derive(Clone, Debug, PartialEq)]
pub struct Comparison {
    pub names: Vec<String>,
    pub deviation: Vec<Vec<f64>>,
    pub tol: f64,
}

impl Comparison {
    /// Largest deviation of any controller from the reference.
    pub fn max_vs_reference(&self) -> f64 {
        self.deviation.first().map_or(0.0, |r| r.iter().copied().fold(0.0, f64::max))
    }

    pub fn passed(&self) -> bool {
        self.max_vs_reference() <= self.tol
    }

    pub fn table(&self) -> Table {
        let mut t = Table::new(std::iter::once("controller".to_string()).chain(self.names.iter().cloned()));
        for (n, row) in self.names.iter().zip(&self.deviation) {
            t.push(std::iter::once(n.clone()).chain(row.iter().map(|v| float(*v))).collect());
        }
        t
    }
}

pub fn compare_controllers(
    sys: &LtiSystem,
    dist: &Disturbances,
    t_sim: usize,
    controllers: Vec<(String, Box<dyn Controller>)>,
    tol: f64,
) -> Result<Comparison, DeployError> {
    let mut names = Vec::new();
    let mut traces = Vec::new();
    for (name, mut k) in controllers {
        traces.push(reference_closed_loop(sys, k.as_mut(), dist, t_sim)?);
        names.push(name);
    }
    let deviation = traces
        .iter()
        .map(|a| traces.iter().map(|b| trace_deviation(a, b)).collect())
        .collect();
    Ok(Comparison { names, deviation, tol })
}

/// `compare.csv`. The reference is the scenario's realization.
pub fn cmd_compare(ctx: &Context, archs: &[Architecture], tol: f64, out: &Path) -> Result<Comparison, DeployError> {
    let dir = out_dir(out)?;
    let syn = ctx.synthesize()?;
    let reference = match ctx.scenario.realization {
        RealizationKind::Simplified => "reference-simplified",
        RealizationKind::Standard => "reference-standard",
    };
    let mut ks: Vec<(String, Box<dyn Controller>)> =
        vec![(reference.into(), syn.controller(&ctx.sys, ctx.scenario.realization)?)];
    for &a in archs {
        ks.push((a.name().into(), Box::new(syn.build(&ctx.sys, a)?.without_ledger())));
    }
    let cmp = compare_controllers(&ctx.sys, &ctx.disturbances(), ctx.scenario.t_sim, ks, tol)?;
    cmp.table().write(&dir.join("compare.csv"), &ctx.stamp)?;
    Ok(cmp)
}

fn verdict_json(v: &Verdict) -> Value {
    match v {
        Verdict::Match => json!({ "verdict": "match" }),
        Verdict::Convention { explained, note } => {
            json!({ "verdict": "convention", "explained": explained, "note": note })
        }
        Verdict::Mismatch { note } => json!({ "verdict": "mismatch", "note": note }),
    }
}

fn verdict_name(v: &Verdict) -> &'static str {
    match v {
        Verdict::Match => "match",
        Verdict::Convention { .. } => "convention",
        Verdict::Mismatch { .. } => "mismatch",
    }
}

fn single_point_of_failure(a: Architecture) -> bool {
    !a.is_distributed()
}

fn report_json(r: &CostReport) -> Value {
    let m = &r.measured;
    json!({
        "architecture": r.architecture.name(),
        "measured": {
            "memory": m.memory.total(),
            "multiplier_memory": m.memory.multipliers,
            "buffer_memory": m.memory.buffers,
            "flops_per_step": m.flops_per_step,
            "messages_per_step": m.messages_per_step,
            "payload_per_step": m.payload_per_step,
            "max_node_memory": m.max_node_memory(),
            "max_node_flops": m.max_node_flops(),
            "max_node_traffic": m.max_node_traffic(),
            "nodes": m.nodes.iter().map(|n| json!({
                "id": n.id,
                "memory": n.memory.total(),
                "flops_per_step": n.flops_per_step,
                "sends": n.sends,
                "receives": n.receives,
            })).collect::<Vec<_>>(),
        },
        "reconciliation": r.lines.iter().map(|l| {
            let mut v = json!({ "quantity": l.quantity, "predicted": l.predicted, "measured": l.measured });
            if let (Some(o), Value::Object(b)) = (v.as_object_mut(), verdict_json(&l.verdict)) {
                o.extend(b);
            }
            v
        }).collect::<Vec<_>>(),
    })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CostsSummary {
    pub reports: Vec<CostReport>,
}

/// `costs.json` (everything), `costs.csv` (one line per reconciled quantity),
/// and `table.csv` (per-architecture comparison rows).
pub fn cmd_costs(ctx: &Context, archs: &[Architecture], out: &Path) -> Result<CostsSummary, DeployError> {
    let dir = out_dir(out)?;
    let syn = ctx.synthesize()?;
    let d = ctx.dims();
    let dense = syn.is_dense(&ctx.sys);
    let mut reports = Vec::new();
    for &a in archs {
        let net = syn.build(&ctx.sys, a)?;
        reports.push(cost_report(a, d, &net, dense));
    }

    let mut lines = Table::new(["architecture", "quantity", "predicted", "measured", "verdict"]);
    let mut table = Table::new([
        "architecture",
        "single_point_of_failure",
        "overall_memory",
        "max_node_memory",
        "max_node_flops",
        "max_node_traffic",
        "flops_per_step",
        "source",
    ]);
    for r in &reports {
        for l in &r.lines {
            lines.push(vec![
                r.architecture.name().into(),
                l.quantity.into(),
                l.predicted.to_string(),
                l.measured.to_string(),
                verdict_name(&l.verdict).into(),
            ]);
        }
        let m = &r.measured;
        table.push(vec![
            r.architecture.name().into(),
            if single_point_of_failure(r.architecture) { "yes" } else { "no" }.into(),
            m.memory.total().to_string(),
            m.max_node_memory().to_string(),
            m.max_node_flops().to_string(),
            m.max_node_traffic().to_string(),
            m.flops_per_step.to_string(),
            "measured".into(),
        ]);
    }
    let mut extra = json!(null);
    if ctx.scenario.synthesis.route != SynthesisRoute::SfH2 {
        let p = predict_of_costs(OfDesign::Original, d);
        let (flops, memory) = (p.flops.unwrap_or_default(), p.memory.unwrap_or_default());
        table.push(vec![
            "of-original".into(),
            "yes".into(),
            memory.to_string(),
            memory.to_string(),
            flops.to_string(),
            String::new(),
            flops.to_string(),
            "predicted".into(),
        ]);
        extra = json!({ "of_original_predicted": { "flops": flops, "memory": memory } });
    }
    lines.write(&dir.join("costs.csv"), &ctx.stamp)?;
    table.write(&dir.join("table.csv"), &ctx.stamp)?;
    write_json(
        &dir.join("costs.json"),
        &ctx.stamp,
        json!({
            "dims": { "nx": d.nx, "nu": d.nu, "ny": d.ny, "t": d.t },
            "dense": dense,
            "reports": reports.iter().map(report_json).collect::<Vec<_>>(),
            "extra": extra,
        }),
    )?;
    Ok(CostsSummary { reports })
}

/// Probes the scenario's architecture if one is set, else its realization.
pub fn probe(ctx: &Context, syn: &Synthesized) -> Result<ProbeGrid, DeployError> {
    let horizon = ctx.scenario.probe.horizon.unwrap_or(default_probe_horizon(ctx.horizon()));
    let tol = ctx.scenario.probe.tol.unwrap_or(DEFAULT_DECAY_TOL);
    let k: Box<dyn Controller> = match ctx.scenario.architecture.as_deref().and_then(Architecture::from_name) {
        Some(a) => Box::new(syn.build(&ctx.sys, a)?.without_ledger()),
        None => syn.controller(&ctx.sys, ctx.scenario.realization)?,
    };
    Ok(internal_stability_probe(&ctx.sys, k.as_ref(), horizon, tol)?)
}

/// `probe.csv`: tail norms, channels by row and signals by column, `n/a` where
/// the controller exposes no such injection or signal. `probe.json` adds peaks.
pub fn cmd_probe(ctx: &Context, out: &Path) -> Result<ProbeGrid, DeployError> {
    let dir = out_dir(out)?;
    let syn = ctx.synthesize()?;
    let grid = probe(ctx, &syn)?;
    let mut t = Table::new(std::iter::once("channel").chain(Signal::ALL.iter().map(|s| s.name())));
    for c in Channel::ALL {
        let mut row = vec![c.name().to_string()];
        for s in Signal::ALL {
            row.push(match grid.entry(c, s) {
                Some(e) if e.response.is_some() => float(e.tail),
                _ => "n/a".into(),
            });
        }
        t.push(row);
    }
    t.write(&dir.join("probe.csv"), &ctx.stamp)?;
    write_json(
        &dir.join("probe.json"),
        &ctx.stamp,
        json!({
            "horizon": grid.horizon,
            "tol": grid.tol,
            "all_decayed": grid.all_decayed(),
            "max_tail": grid.max_tail(),
            "entries": grid.entries.iter().map(|e| json!({
                "channel": e.channel.name(),
                "signal": e.signal.name(),
                "observed": e.response.is_some(),
                "peak": e.peak,
                "tail": e.tail,
                "decayed": e.decayed,
            })).collect::<Vec<_>>(),
        }),
    )?;
    Ok(grid)
}
