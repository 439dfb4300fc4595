use alloc::boxed::Box;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use super::{Controller, History};
use crate::error::{check_shape, Error, Result};
use crate::lti::{is_schur_stable, LtiSystem};
use crate::spectral::SpectralSeries;
use crate::synthesis::SystemResponseSf;

/// Standard realization:
///
/// ```text
/// δ[t] = x[t] - x̂[t]
/// u[t] = Σ_{τ=1}^{T} Φ_u[τ] δ[t+1-τ]
/// x̂[t+1] = Σ_{τ=2}^{T} Φ_x[τ] δ[t+2-τ]
/// ```
#[derive(Clone, Debug)]
pub struct SfStandard {
    phi_x: SpectralSeries,
    phi_u: SpectralSeries,
    delta: History,
    xhat: DVector<f64>,
    last_delta: DVector<f64>,
    last_xhat: DVector<f64>,
}

impl SfStandard {
    pub fn new(resp: &SystemResponseSf) -> Result<Self> {
        let (nx, c) = resp.phi_x.shape();
        check_shape("phi_x element", (nx, c), (nx, nx))?;
        check_shape("phi_u columns", (1, resp.phi_u.shape().1), (1, nx))?;
        Ok(Self {
            phi_x: resp.phi_x.clone(),
            phi_u: resp.phi_u.clone(),
            delta: History::new(nx, resp.horizon().max(1)),
            xhat: DVector::zeros(nx),
            last_delta: DVector::zeros(nx),
            last_xhat: DVector::zeros(nx),
        })
    }
}

impl Controller for SfStandard {
    fn input_dim(&self) -> usize {
        self.xhat.len()
    }

    fn output_dim(&self) -> usize {
        self.phi_u.shape().0
    }

    fn step(&mut self, x: &DVector<f64>) -> Result<DVector<f64>> {
        check_shape("state measurement", (x.len(), 1), (self.xhat.len(), 1))?;
        let delta = x - &self.xhat;
        self.delta.push(delta.clone());
        let u = self.delta.convolve(&self.phi_u, 1);
        self.last_xhat = core::mem::replace(&mut self.xhat, self.delta.convolve(&self.phi_x, 2));
        self.last_delta = delta;
        Ok(u)
    }

    fn reset(&mut self) {
        self.delta.clear();
        self.xhat.fill(0.0);
        self.last_delta.fill(0.0);
        self.last_xhat.fill(0.0);
    }

    fn internal_signals(&self) -> Vec<(&'static str, DVector<f64>)> {
        vec![("delta", self.last_delta.clone()), ("xhat", self.last_xhat.clone())]
    }

    fn inject_xhat(&mut self, d: &DVector<f64>) -> Result<()> {
        check_shape("xhat perturbation", (d.len(), 1), (self.xhat.len(), 1))?;
        self.xhat += d;
        Ok(())
    }

    fn clone_box(&self) -> Box<dyn Controller> {
        Box::new(self.clone())
    }
}

/// Simplified realization for Schur-stable `A`:
///
/// ```text
/// δ[t] = x[t] - A x[t-1] - B u[t-1]
/// u[t] = Σ_{τ>=1} Φ_u[τ] δ[t+1-τ]
/// ```
///
/// Only `Φ_u` is stored, so it may be any truncation of an IIR response.
#[derive(Clone, Debug)]
pub struct SfSimplified {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    phi_u: SpectralSeries,
    delta: History,
    prev_x: DVector<f64>,
    prev_u: DVector<f64>,
    pending: DVector<f64>,
    last_delta: DVector<f64>,
}

impl SfSimplified {
    pub fn new(sys: &LtiSystem, phi_u: &SpectralSeries) -> Result<Self> {
        check_shape("phi_u element", phi_u.shape(), (sys.nu(), sys.nx()))?;
        let report = is_schur_stable(sys.a(), 0.0)?;
        if !report.stable {
            return Err(Error::Unstable {
                spectral_radius: report.spectral_radius,
            });
        }
        let nx = sys.nx();
        Ok(Self {
            a: sys.a().clone(),
            b: sys.b().clone(),
            phi_u: phi_u.clone(),
            delta: History::new(nx, phi_u.horizon().max(1)),
            prev_x: DVector::zeros(nx),
            prev_u: DVector::zeros(sys.nu()),
            pending: DVector::zeros(nx),
            last_delta: DVector::zeros(nx),
        })
    }
}

impl Controller for SfSimplified {
    fn input_dim(&self) -> usize {
        self.a.nrows()
    }

    fn output_dim(&self) -> usize {
        self.b.ncols()
    }

    fn step(&mut self, x: &DVector<f64>) -> Result<DVector<f64>> {
        check_shape("state measurement", (x.len(), 1), (self.a.nrows(), 1))?;
        let predicted = &self.a * &self.prev_x + &self.b * &self.prev_u + &self.pending;
        let delta = x - predicted;
        self.pending.fill(0.0);
        self.delta.push(delta.clone());
        let u = self.delta.convolve(&self.phi_u, 1);
        self.prev_x.copy_from(x);
        self.prev_u.copy_from(&u);
        self.last_delta = delta;
        Ok(u)
    }

    fn reset(&mut self) {
        self.delta.clear();
        self.prev_x.fill(0.0);
        self.prev_u.fill(0.0);
        self.pending.fill(0.0);
        self.last_delta.fill(0.0);
    }

    fn internal_signals(&self) -> Vec<(&'static str, DVector<f64>)> {
        vec![("delta", self.last_delta.clone()), ("xhat", &self.prev_x - &self.last_delta)]
    }

    /// Perturbs the one-step prediction `A x[t] + B u[t]` used at the next step.
    fn inject_xhat(&mut self, d: &DVector<f64>) -> Result<()> {
        check_shape("xhat perturbation", (d.len(), 1), (self.pending.len(), 1))?;
        self.pending += d;
        Ok(())
    }

    fn clone_box(&self) -> Box<dyn Controller> {
        Box::new(self.clone())
    }
}
