//! Step-wise executable controller realizations.
//!
//! Signals are zero before `t = 0`; every realization starts from all-zero
//! internal state.

use alloc::boxed::Box;
use alloc::collections::VecDeque;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::error::{check_shape, Error, Result};
use crate::spectral::{induced_linf_norm, SpectralSeries};

mod of;
mod sf;

pub use of::{OfSimplified, OfStandard};
pub use sf::{SfSimplified, SfStandard};

/// A causal controller `u[t] = K(y[0..=t])`.
pub trait Controller {
    fn input_dim(&self) -> usize;
    fn output_dim(&self) -> usize;

    /// Consumes `y[t]` and returns `u[t]`.
    fn step(&mut self, y: &DVector<f64>) -> Result<DVector<f64>>;

    /// Back to the zero initial condition.
    fn reset(&mut self);

    /// Named internal signals at the most recent step (e.g. `delta`, `xhat`).
    fn internal_signals(&self) -> Vec<(&'static str, DVector<f64>)> {
        Vec::new()
    }

    /// Adds `d` to the controller's state estimate for the next step.
    fn inject_xhat(&mut self, _d: &DVector<f64>) -> Result<()> {
        Err(Error::InvalidArgument("controller has no state estimate to perturb".into()))
    }

    fn clone_box(&self) -> Box<dyn Controller>;
}

impl Clone for Box<dyn Controller> {
    fn clone(&self) -> Self {
        self.clone_box()
    }
}

/// Fixed-length history of one signal, newest first.
#[derive(Clone, Debug, PartialEq)]
pub struct History {
    buf: VecDeque<DVector<f64>>,
    cap: usize,
    dim: usize,
}

impl History {
    pub fn new(dim: usize, cap: usize) -> Self {
        Self {
            buf: VecDeque::with_capacity(cap + 1),
            cap,
            dim,
        }
    }

    pub fn push(&mut self, v: DVector<f64>) {
        self.buf.push_front(v);
        self.buf.truncate(self.cap);
    }

    /// Sample `lag` steps before the newest; `None` if never recorded.
    pub fn lag(&self, lag: usize) -> Option<&DVector<f64>> {
        self.buf.get(lag)
    }

    pub fn clear(&mut self) {
        self.buf.clear();
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `Σ_{τ >= shift} Φ[τ] · lag(τ - shift)`.
    pub fn convolve(&self, series: &SpectralSeries, shift: usize) -> DVector<f64> {
        let mut out = DVector::zeros(series.shape().0);
        for (tau, e) in series.taus().zip(series.elements()) {
            if tau < shift {
                continue;
            }
            if let Some(v) = self.lag(tau - shift) {
                out += e * v;
            }
        }
        out
    }
}

/// Value of the robustness test `‖A_u Φ_x‖ < 1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RobustMargin {
    pub margin: f64,
    /// `margin < 1`.
    pub certified: bool,
}

/// Induced ℓ∞ norm of `{A_u Φ_x[τ]}`; below one, a controller designed for
/// `A_s` also stabilizes `A_s + A_u`.
pub fn robust_margin(a_s: &DMatrix<f64>, a_u: &DMatrix<f64>, phi_x: &SpectralSeries) -> Result<RobustMargin> {
    check_shape("unmodelled dynamics", a_u.shape(), a_s.shape())?;
    check_shape("phi_x element", phi_x.shape(), a_s.shape())?;
    let margin = induced_linf_norm(&phi_x.left_mul(a_u)?);
    Ok(RobustMargin {
        margin,
        certified: margin < 1.0,
    })
}
