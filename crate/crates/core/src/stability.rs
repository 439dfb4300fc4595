//! Empirical internal-stability checks: impulse probes of every
//! perturbation channel against every loop signal, closed-loop map
//! identities, and certification of controllers on perturbed plants.

use alloc::boxed::Box;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::lti::LtiSystem;
use crate::realizations::{robust_margin, Controller, SfStandard};
use crate::simulate::{reference_closed_loop, Channel, Disturbances};
use crate::spectral::{truncated_resolvent, SpectralSeries};
use crate::synthesis::SystemResponseSf;
use crate::trace::Trace;

/// Loop signals observed by the probe.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Signal {
    X,
    U,
    Y,
    Xhat,
}

impl Signal {
    pub const ALL: [Signal; 4] = [Signal::X, Signal::U, Signal::Y, Signal::Xhat];

    /// Trace name of the signal.
    pub fn name(self) -> &'static str {
        match self {
            Signal::X => "x",
            Signal::U => "u",
            Signal::Y => "y",
            Signal::Xhat => "xhat",
        }
    }

    pub fn dim(self, sys: &LtiSystem) -> usize {
        match self {
            Signal::X | Signal::Xhat => sys.nx(),
            Signal::U => sys.nu(),
            Signal::Y => sys.ny(),
        }
    }
}

/// Default probe horizon for a controller of FIR horizon `t`.
pub fn default_probe_horizon(t: usize) -> usize {
    (4 * t).max(50)
}

pub const DEFAULT_DECAY_TOL: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct ProbeEntry {
    pub channel: Channel,
    pub signal: Signal,
    /// Impulse response: column `j` of element `t` is the signal at time `t`
    /// after a unit impulse on coordinate `j` at `t = 0`. `None` when the
    /// controller does not expose the signal or accept the injection.
    pub response: Option<SpectralSeries>,
    /// Largest absolute entry over the whole run.
    pub peak: f64,
    /// Largest absolute entry after the horizon.
    pub tail: f64,
    pub decayed: bool,
}

/// The 4×4 grid of probe results, in channel-major order.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbeGrid {
    pub horizon: usize,
    pub tol: f64,
    pub entries: Vec<ProbeEntry>,
}

impl ProbeGrid {
    pub fn entry(&self, channel: Channel, signal: Signal) -> Option<&ProbeEntry> {
        self.entries.iter().find(|e| e.channel == channel && e.signal == signal)
    }

    pub fn observed(&self) -> impl Iterator<Item = &ProbeEntry> {
        self.entries.iter().filter(|e| e.response.is_some())
    }

    /// Every observed entry decayed.
    pub fn all_decayed(&self) -> bool {
        self.observed().all(|e| e.decayed)
    }

    pub fn max_tail(&self) -> f64 {
        self.observed().map(|e| e.tail).fold(0.0, f64::max)
    }

    /// Largest entry-wise deviation from `predicted` over the observed
    /// entries and the first `horizon + 1` elements.
    pub fn max_deviation(&self, predicted: &[(Channel, Signal, SpectralSeries)]) -> f64 {
        let mut worst: f64 = 0.0;
        for (c, s, p) in predicted {
            if let Some(r) = self.entry(*c, *s).and_then(|e| e.response.as_ref()) {
                worst = worst.max(r.reshaped(0, self.horizon).max_abs_diff(&p.reshaped(0, self.horizon)));
            }
        }
        worst
    }
}

fn run_impulse(
    sys: &LtiSystem,
    k: &dyn Controller,
    channel: Channel,
    j: usize,
    amplitude: f64,
    steps: usize,
) -> Result<Option<Trace>> {
    let mut v = DVector::zeros(channel.dim(sys));
    v[j] = amplitude;
    let mut kk: Box<dyn Controller> = k.clone_box();
    kk.reset();
    match reference_closed_loop(sys, kk.as_mut(), &Disturbances::impulse(channel, 0, v), steps) {
        Ok(tr) => Ok(Some(tr)),
        Err(Error::InvalidArgument(_)) if channel == Channel::Dxhat => Ok(None),
        Err(e) => Err(e),
    }
}

/// Injects unit impulses on every coordinate of every channel and records
/// all four loop signals for `2 · horizon + 1` steps. An entry decays when
/// its largest absolute value after `horizon` is at most `tol`.
pub fn internal_stability_probe(sys: &LtiSystem, k: &dyn Controller, horizon: usize, tol: f64) -> Result<ProbeGrid> {
    probe_with_amplitude(sys, k, horizon, tol, 1.0)
}

pub fn probe_with_amplitude(
    sys: &LtiSystem,
    k: &dyn Controller,
    horizon: usize,
    tol: f64,
    amplitude: f64,
) -> Result<ProbeGrid> {
    let steps = 2 * horizon + 1;
    let mut entries = Vec::with_capacity(16);
    for channel in Channel::ALL {
        let n = channel.dim(sys);
        let mut traces = Vec::with_capacity(n);
        for j in 0..n {
            traces.push(run_impulse(sys, k, channel, j, amplitude, steps)?);
        }
        for signal in Signal::ALL {
            let response = collect_response(sys, &traces, signal, steps);
            let (peak, tail) = response.as_ref().map_or((0.0, 0.0), |r| {
                let mut peak: f64 = 0.0;
                let mut tail: f64 = 0.0;
                for (t, e) in r.elements().iter().enumerate() {
                    let m = if e.is_empty() { 0.0 } else { e.amax() };
                    peak = peak.max(m);
                    if t > horizon {
                        tail = tail.max(m);
                    }
                }
                (peak, tail)
            });
            entries.push(ProbeEntry {
                channel,
                signal,
                decayed: tail <= tol,
                response,
                peak,
                tail,
            });
        }
    }
    Ok(ProbeGrid { horizon, tol, entries })
}

fn collect_response(sys: &LtiSystem, traces: &[Option<Trace>], signal: Signal, steps: usize) -> Option<SpectralSeries> {
    let rows = signal.dim(sys);
    let mut elements: Vec<DMatrix<f64>> = (0..steps).map(|_| DMatrix::zeros(rows, traces.len())).collect();
    for (j, tr) in traces.iter().enumerate() {
        let s = tr.as_ref()?.signal(signal.name())?;
        for (t, v) in s.iter().enumerate() {
            elements[t].set_column(j, v);
        }
    }
    SpectralSeries::new(0, elements).ok()
}

/// The sixteen closed-loop maps of the simplified output-feedback
/// realization, truncated at `horizon`. With `Δ = (zI − A)⁻¹`,
/// `G = CΔB + D`, `Γ = Φ_uy G + I`, `Λ = G Φ_uy + I`:
///
/// ```text
///        d_x        d_u       d_y     d_xhat
/// x      Φ_xx       ΔBΓ       Φ_xy    Δ − Φ_xx
/// u      Φ_ux       Γ         Φ_uy    −Φ_ux
/// y      ΛCΔ        ΛG        Λ       −GΦ_ux
/// xhat   Φ_xx − Δ   Φ_xy G    Φ_xy    2Δ − Φ_xx
/// ```
pub fn predicted_of_grid(sys: &LtiSystem, phi_uy: &SpectralSeries, horizon: usize) -> Result<Vec<(Channel, Signal, SpectralSeries)>> {
    let h = horizon.max(1);
    let (nu, ny) = (sys.nu(), sys.ny());
    let id = |n| SpectralSeries::new(0, vec![DMatrix::identity(n, n)]);
    let delta = truncated_resolvent(sys.a(), h)?.series;
    let c_delta = delta.left_mul(sys.c())?;
    let g = c_delta.right_mul(sys.b())?.add(&SpectralSeries::new(0, vec![sys.d().clone()])?)?;
    let gamma = phi_uy.mul(&g)?.add(&id(nu)?)?;
    let lambda = g.mul(phi_uy)?.add(&id(ny)?)?;
    let phi_xy = delta.right_mul(sys.b())?.mul(phi_uy)?;
    let phi_ux = phi_uy.mul(&c_delta)?;
    let phi_xx = delta.add(&phi_xy.mul(&c_delta)?)?;
    let neg = |s: &SpectralSeries| s.map(|e| -e);
    let maps = [
        (Channel::Dx, Signal::X, phi_xx.clone()),
        (Channel::Du, Signal::X, delta.right_mul(sys.b())?.mul(&gamma)?),
        (Channel::Dy, Signal::X, phi_xy.clone()),
        (Channel::Dxhat, Signal::X, delta.sub(&phi_xx)?),
        (Channel::Dx, Signal::U, phi_ux.clone()),
        (Channel::Du, Signal::U, gamma),
        (Channel::Dy, Signal::U, phi_uy.clone()),
        (Channel::Dxhat, Signal::U, neg(&phi_ux)),
        (Channel::Dx, Signal::Y, lambda.mul(&c_delta)?),
        (Channel::Du, Signal::Y, lambda.mul(&g)?),
        (Channel::Dy, Signal::Y, lambda),
        (Channel::Dxhat, Signal::Y, neg(&g.mul(&phi_ux)?)),
        (Channel::Dx, Signal::Xhat, phi_xx.sub(&delta)?),
        (Channel::Du, Signal::Xhat, phi_xy.mul(&g)?),
        (Channel::Dy, Signal::Xhat, phi_xy),
        (Channel::Dxhat, Signal::Xhat, delta.map(|e| 2.0 * e).sub(&phi_xx)?),
    ];
    debug_assert!(maps.iter().all(|(c, s, m)| m.shape() == (s.dim(sys), c.dim(sys))));
    Ok(maps.into_iter().map(|(c, s, m)| (c, s, m.reshaped(0, h))).collect())
}

/// Comparison of a simulated state-feedback closed loop with `{Φ_x, Φ_u}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MapCheck {
    /// Largest deviation of the `x` impulse responses from `Φ_x`, `τ ≤ T`.
    pub x_deviation: f64,
    pub u_deviation: f64,
    /// Largest `|x|` or `|u|` after `τ = T`.
    pub tail: f64,
    pub passed: bool,
}

/// Impulses `d_x = e_j` at `t = 0` through the plant and the standard
/// realization: `x[t]` should equal `Φ_x[t] e_j` and `u[t]` equal `Φ_u[t] e_j`.
pub fn closed_loop_map_check(sys: &LtiSystem, resp: &SystemResponseSf, tol: f64) -> Result<MapCheck> {
    closed_loop_map_check_with(sys, resp, &SfStandard::new(resp)?, tol)
}

pub fn closed_loop_map_check_with(sys: &LtiSystem, resp: &SystemResponseSf, k: &dyn Controller, tol: f64) -> Result<MapCheck> {
    let t_fir = resp.horizon();
    let steps = 2 * t_fir + 10;
    let mut out = MapCheck {
        x_deviation: 0.0,
        u_deviation: 0.0,
        tail: 0.0,
        passed: false,
    };
    for j in 0..sys.nx() {
        let tr = run_impulse(sys, k, Channel::Dx, j, 1.0, steps)?
            .ok_or(Error::InvalidArgument("state impulse could not be simulated".into()))?;
        for (name, series, dev) in [
            ("x", &resp.phi_x, &mut out.x_deviation),
            ("u", &resp.phi_u, &mut out.u_deviation),
        ] {
            let sig = tr.signal(name).unwrap_or_default();
            for (t, v) in sig.iter().enumerate() {
                let expect = series.element(t).column(j).into_owned();
                let d = if v.is_empty() { 0.0 } else { (v - expect).amax() };
                if t <= t_fir {
                    *dev = dev.max(d);
                } else {
                    out.tail = out.tail.max(d);
                }
            }
        }
    }
    out.passed = out.x_deviation <= tol && out.u_deviation <= tol && out.tail <= tol;
    Ok(out)
}

/// Result of running a controller designed for `A_s` on `A_s + A_u`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Certification {
    pub margin: f64,
    /// `margin < 1`.
    pub certified: bool,
    /// Largest `|x|` or `|u|` over the run.
    pub peak: f64,
    /// Largest `|x|` or `|u|` over the last quarter of the run.
    pub final_level: f64,
    pub decayed: bool,
}

/// Computes the robustness margin of `resp` against `a_u` and simulates the
/// plant `(A_s + A_u, B)` under the standard realization of `resp` after a
/// unit state impulse on every coordinate. The simulation runs whether or
/// not the margin certifies stability.
pub fn certify_unstable_extension(
    nominal: &LtiSystem,
    a_u: &DMatrix<f64>,
    resp: &SystemResponseSf,
    steps: usize,
    tol: f64,
) -> Result<Certification> {
    let m = robust_margin(nominal.a(), a_u, &resp.phi_x)?;
    let full = LtiSystem::new(nominal.a() + a_u, nominal.b().clone(), nominal.c().clone(), nominal.d().clone())?;
    let k = SfStandard::new(resp)?;
    let mut peak: f64 = 0.0;
    let mut last: f64 = 0.0;
    let from = steps - steps / 4;
    for j in 0..full.nx() {
        let tr = run_impulse(&full, &k, Channel::Dx, j, 1.0, steps)?
            .ok_or(Error::InvalidArgument("state impulse could not be simulated".into()))?;
        for name in ["x", "u"] {
            for (t, v) in tr.signal(name).unwrap_or_default().iter().enumerate() {
                let a = if v.is_empty() { 0.0 } else { v.amax() };
                let a = if a.is_finite() { a } else { f64::INFINITY };
                peak = peak.max(a);
                if t >= from {
                    last = last.max(a);
                }
            }
        }
    }
    Ok(Certification {
        margin: m.margin,
        certified: m.certified,
        peak,
        final_level: last,
        decayed: last <= tol,
    })
}

#[cfg(test)]
mod tests;
