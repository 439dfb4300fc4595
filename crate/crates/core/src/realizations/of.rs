use alloc::boxed::Box;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use super::{Controller, History};
use crate::error::{check_shape, Error, Result};
use crate::lti::{is_schur_stable, LtiSystem};
use crate::spectral::SpectralSeries;
use crate::synthesis::SystemResponseOf;

/// `(I + Φ_uy[0] D)⁻¹`.
fn loop_inverse(phi_uy0: &DMatrix<f64>, d: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let nu = phi_uy0.nrows();
    let m = DMatrix::identity(nu, nu) + phi_uy0 * d;
    let lu = m.lu();
    let scale = lu.u().amax().max(1.0);
    let min_pivot = lu.u().diagonal().iter().map(|v| v.abs()).fold(f64::INFINITY, f64::min);
    if !(min_pivot > 1e-13 * scale) {
        return Err(Error::Singular { context: "I + Phi_uy[0] D" });
    }
    lu.try_inverse().ok_or(Error::Singular { context: "I + Phi_uy[0] D" })
}

/// Standard output-feedback realization:
///
/// ```text
/// β[t+1] = -Σ_{τ>=2} Φ_xx[τ] β[t+2-τ] - Σ_{τ>=1} Φ_xy[τ] ȳ[t+1-τ]
/// u'[t]  =  Σ_{τ>=1} Φ_ux[τ] β[t+1-τ] + Σ_{τ>=1} Φ_uy[τ] ȳ[t-τ]
/// (I + Φ_uy[0] D) u[t] = Φ_uy[0] y[t] + u'[t]
/// ȳ[t] = y[t] - D u[t]
/// ```
#[derive(Clone, Debug)]
pub struct OfStandard {
    resp: SystemResponseOf,
    d: DMatrix<f64>,
    loop_inv: DMatrix<f64>,
    beta: History,
    ybar: History,
    last_beta: DVector<f64>,
    last_ybar: DVector<f64>,
}

impl OfStandard {
    pub fn new(sys: &LtiSystem, resp: &SystemResponseOf) -> Result<Self> {
        let (nx, nu, ny) = (sys.nx(), sys.nu(), sys.ny());
        check_shape("phi_xx element", resp.phi_xx.shape(), (nx, nx))?;
        check_shape("phi_xy element", resp.phi_xy.shape(), (nx, ny))?;
        check_shape("phi_ux element", resp.phi_ux.shape(), (nu, nx))?;
        check_shape("phi_uy element", resp.phi_uy.shape(), (nu, ny))?;
        let loop_inv = loop_inverse(&resp.phi_uy.element(0), sys.d())?;
        let h = resp
            .phi_xx
            .horizon()
            .max(resp.phi_xy.horizon())
            .max(resp.phi_ux.horizon())
            .max(resp.phi_uy.horizon())
            .max(1);
        Ok(Self {
            resp: resp.clone(),
            d: sys.d().clone(),
            loop_inv,
            beta: History::new(nx, h),
            ybar: History::new(ny, h),
            last_beta: DVector::zeros(nx),
            last_ybar: DVector::zeros(ny),
        })
    }
}

impl Controller for OfStandard {
    fn input_dim(&self) -> usize {
        self.d.nrows()
    }

    fn output_dim(&self) -> usize {
        self.d.ncols()
    }

    fn step(&mut self, y: &DVector<f64>) -> Result<DVector<f64>> {
        check_shape("measurement", (y.len(), 1), (self.d.nrows(), 1))?;
        let r = &self.resp;
        // β history holds β[t] newest; ȳ history holds ȳ[t-1] newest
        let u_prime = self.beta.convolve(&r.phi_ux, 1) + self.ybar.convolve(&r.phi_uy, 1);
        let u = &self.loop_inv * (r.phi_uy.element(0) * y + u_prime);
        let ybar = y - &self.d * &u;
        self.ybar.push(ybar.clone());
        let beta_next = -(self.beta.convolve(&r.phi_xx, 2) + self.ybar.convolve(&r.phi_xy, 1));
        self.last_beta = self.beta.lag(0).cloned().unwrap_or_else(|| DVector::zeros(self.beta.dim()));
        self.beta.push(beta_next);
        self.last_ybar = ybar;
        Ok(u)
    }

    fn reset(&mut self) {
        self.beta.clear();
        self.ybar.clear();
        self.last_beta.fill(0.0);
        self.last_ybar.fill(0.0);
    }

    fn internal_signals(&self) -> Vec<(&'static str, DVector<f64>)> {
        vec![("beta", self.last_beta.clone()), ("ybar", self.last_ybar.clone())]
    }

    fn clone_box(&self) -> Box<dyn Controller> {
        Box::new(self.clone())
    }
}

/// Simplified output-feedback realization for Schur-stable `A`:
///
/// ```text
/// x̂[t+1] = A x̂[t] + B u[t]
/// δ[t]   = y[t] - C x̂[t] - D u[t]
/// u[t]   = Σ_{τ>=0} Φ_uy[τ] δ[t-τ]
/// ```
///
/// With `D ≠ 0` the loop through `Φ_uy[0] D` is closed each step by solving
/// `(I + Φ_uy[0] D) u[t] = Φ_uy[0](y[t] - C x̂[t]) + Σ_{τ>=1} Φ_uy[τ] δ[t-τ]`.
#[derive(Clone, Debug)]
pub struct OfSimplified {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    c: DMatrix<f64>,
    d: DMatrix<f64>,
    phi_uy: SpectralSeries,
    loop_inv: DMatrix<f64>,
    delta: History,
    xhat: DVector<f64>,
    last_delta: DVector<f64>,
    last_xhat: DVector<f64>,
}

impl OfSimplified {
    pub fn new(sys: &LtiSystem, phi_uy: &SpectralSeries) -> Result<Self> {
        check_shape("phi_uy element", phi_uy.shape(), (sys.nu(), sys.ny()))?;
        let report = is_schur_stable(sys.a(), 0.0)?;
        if !report.stable {
            return Err(Error::Unstable {
                spectral_radius: report.spectral_radius,
            });
        }
        Ok(Self {
            a: sys.a().clone(),
            b: sys.b().clone(),
            c: sys.c().clone(),
            d: sys.d().clone(),
            phi_uy: phi_uy.clone(),
            loop_inv: loop_inverse(&phi_uy.element(0), sys.d())?,
            delta: History::new(sys.ny(), phi_uy.horizon().max(1)),
            xhat: DVector::zeros(sys.nx()),
            last_delta: DVector::zeros(sys.ny()),
            last_xhat: DVector::zeros(sys.nx()),
        })
    }

    /// `x̂` for the upcoming step.
    pub fn xhat(&self) -> &DVector<f64> {
        &self.xhat
    }
}

impl Controller for OfSimplified {
    fn input_dim(&self) -> usize {
        self.c.nrows()
    }

    fn output_dim(&self) -> usize {
        self.b.ncols()
    }

    fn step(&mut self, y: &DVector<f64>) -> Result<DVector<f64>> {
        check_shape("measurement", (y.len(), 1), (self.c.nrows(), 1))?;
        let innovation = y - &self.c * &self.xhat;
        let past = self.delta.convolve(&self.phi_uy, 1);
        let u = &self.loop_inv * (self.phi_uy.element(0) * &innovation + past);
        let delta = innovation - &self.d * &u;
        self.delta.push(delta.clone());
        let next = &self.a * &self.xhat + &self.b * &u;
        self.last_xhat = core::mem::replace(&mut self.xhat, next);
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

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{dmatrix, dvector};

    fn scalar(d: f64) -> LtiSystem {
        LtiSystem::new(dmatrix![0.5], dmatrix![1.0], dmatrix![1.0], dmatrix![d]).unwrap()
    }

    #[test]
    fn zero_phi_uy_is_open_loop() {
        let sys = scalar(0.0);
        let mut k = OfSimplified::new(&sys, &SpectralSeries::zeros(0, 3, 1, 1)).unwrap();
        for y in [1.0, -2.0, 0.5] {
            assert_eq!(k.step(&dvector![y]).unwrap(), dvector![0.0]);
            assert_eq!(k.xhat()[0], 0.0);
        }
    }

    #[test]
    fn zero_response_standard_gives_zero() {
        let sys = scalar(0.0);
        let resp = SystemResponseOf {
            phi_xx: SpectralSeries::zeros(1, 2, 1, 1),
            phi_xy: SpectralSeries::zeros(1, 2, 1, 1),
            phi_ux: SpectralSeries::zeros(1, 2, 1, 1),
            phi_uy: SpectralSeries::zeros(0, 3, 1, 1),
            truncation: None,
        };
        let mut k = OfStandard::new(&sys, &resp).unwrap();
        for y in [1.0, -2.0, 0.5] {
            assert_eq!(k.step(&dvector![y]).unwrap(), dvector![0.0]);
        }
    }

    #[test]
    fn feedthrough_loop_is_solved() {
        // static Φ_uy = q: u = q (y - d u)  ⇒  u = q y / (1 + q d)
        let (q, d) = (0.8, 0.5);
        let sys = scalar(d);
        let phi = SpectralSeries::new(0, vec![dmatrix![q]]).unwrap();
        let mut k = OfSimplified::new(&sys, &phi).unwrap();
        let u = k.step(&dvector![1.0]).unwrap()[0];
        assert!((u - q / (1.0 + q * d)).abs() < 1e-15);
        let (_, delta) = &k.internal_signals()[0];
        assert!((delta[0] - (1.0 - d * u)).abs() < 1e-15);
    }

    #[test]
    fn singular_loop_rejected() {
        let sys = scalar(-1.0);
        let phi = SpectralSeries::new(0, vec![dmatrix![1.0]]).unwrap();
        assert!(matches!(OfSimplified::new(&sys, &phi), Err(Error::Singular { .. })));
    }
}
