//! Youla-style output-feedback synthesis for open-loop stable plants.
//!
//! With `Δ = (zI - A)^{-1}` and `Φ_uy` free, the remaining members are
//!
//! ```text
//! Φ_xy = Δ B Φ_uy      Φ_ux = Φ_uy C Δ      Φ_xx = Δ + Δ B Φ_uy C Δ
//! ```
//!
//! all affine in `Φ_uy`, so any weighted H2 objective over them is a plain
//! least-squares problem in the taps of `Φ_uy`.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use super::{SynthesisSpec, SystemResponseOf, Truncation};
use crate::error::{check_shape, Error, Result};
use crate::lti::{is_schur_stable, LtiSystem};
use crate::spectral::{truncated_resolvent, SpectralSeries};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ClosedLoopMap {
    Xx,
    Xy,
    Ux,
    Uy,
}

/// `‖L · map · R‖²` summed over spectral elements.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightedMap {
    pub map: ClosedLoopMap,
    pub left: DMatrix<f64>,
    pub right: DMatrix<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct YoulaObjective {
    pub maps: Vec<WeightedMap>,
    /// Spectral elements `τ <= eval_horizon` of the IIR maps enter the cost.
    pub eval_horizon: usize,
}

impl YoulaObjective {
    /// The quadruple H2 cost used by the quadruple program, with the weights of `spec`.
    pub fn quadruple_h2(sys: &LtiSystem, spec: &SynthesisSpec, eval_horizon: usize) -> Self {
        let w = spec.dy_weight_or_identity(sys.ny());
        let ix = DMatrix::identity(sys.nx(), sys.nx());
        let map = |map, left: &DMatrix<f64>, right: &DMatrix<f64>| WeightedMap {
            map,
            left: left.clone(),
            right: right.clone(),
        };
        Self {
            maps: alloc::vec![
                map(ClosedLoopMap::Xx, &spec.q_sqrt, &ix),
                map(ClosedLoopMap::Xy, &spec.q_sqrt, &w),
                map(ClosedLoopMap::Ux, &spec.r_sqrt, &ix),
                map(ClosedLoopMap::Uy, &spec.r_sqrt, &w),
            ],
            eval_horizon,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct YoulaSynthesis {
    pub phi_uy: SpectralSeries,
    pub objective: f64,
    /// Truncated quadruple induced by `phi_uy`.
    pub response: SystemResponseOf,
}

fn require_stable(sys: &LtiSystem) -> Result<()> {
    let report = is_schur_stable(sys.a(), 0.0)?;
    if !report.stable {
        return Err(Error::Unstable {
            spectral_radius: report.spectral_radius,
        });
    }
    Ok(())
}

/// Truncated quadruple `{Φ_xx, Φ_xy, Φ_ux}` on `τ = 1..=H` induced by `Φ_uy`.
pub fn quadruple_from_phiuy(sys: &LtiSystem, phi_uy: &SpectralSeries, eval_horizon: usize) -> Result<SystemResponseOf> {
    require_stable(sys)?;
    quadruple_unchecked(sys, phi_uy, eval_horizon)
}

fn quadruple_unchecked(sys: &LtiSystem, phi_uy: &SpectralSeries, eval_horizon: usize) -> Result<SystemResponseOf> {
    check_shape("phi_uy element", phi_uy.shape(), (sys.nu(), sys.ny()))?;
    let h = eval_horizon.max(1);
    let res = truncated_resolvent(sys.a(), h)?;
    let delta = &res.series;
    let xy_full = delta.right_mul(sys.b())?.mul(phi_uy)?;
    let c_delta = delta.left_mul(sys.c())?;
    let ux_full = phi_uy.mul(&c_delta)?;
    let xx_full = delta.add(&xy_full.mul(&c_delta)?)?;
    Ok(SystemResponseOf {
        phi_xx: xx_full.reshaped(1, h),
        phi_xy: xy_full.reshaped(1, h),
        phi_ux: ux_full.reshaped(1, h),
        phi_uy: phi_uy.clone(),
        truncation: Some(Truncation {
            eval_horizon: h,
            tail_bound: res.tail_bound,
        }),
    })
}

/// Stacks the weighted spectral elements `τ <= H` of every selected map.
fn weighted_vector(resp: &SystemResponseOf, obj: &YoulaObjective) -> Vec<f64> {
    let h = obj.eval_horizon;
    let mut out = Vec::new();
    for wm in &obj.maps {
        let series = match wm.map {
            ClosedLoopMap::Xx => &resp.phi_xx,
            ClosedLoopMap::Xy => &resp.phi_xy,
            ClosedLoopMap::Ux => &resp.phi_ux,
            ClosedLoopMap::Uy => &resp.phi_uy,
        };
        for tau in 0..=h {
            let e = &wm.left * series.element(tau) * &wm.right;
            out.extend(e.iter().copied());
        }
    }
    out
}

/// Chooses the FIR taps `Φ_uy[0..=T]` (subject to `spec.pattern.phi_uy`)
/// minimizing `objective`.
pub fn synth_of_youla(sys: &LtiSystem, spec: &SynthesisSpec, objective: &YoulaObjective) -> Result<YoulaSynthesis> {
    spec.validate(sys)?;
    require_stable(sys)?;
    let (nu, ny, t) = (sys.nu(), sys.ny(), spec.horizon);
    for wm in &objective.maps {
        let (rows, cols) = match wm.map {
            ClosedLoopMap::Xx => (sys.nx(), sys.nx()),
            ClosedLoopMap::Xy => (sys.nx(), ny),
            ClosedLoopMap::Ux => (nu, sys.nx()),
            ClosedLoopMap::Uy => (nu, ny),
        };
        check_shape("objective left weight", (1, wm.left.ncols()), (1, rows))?;
        check_shape("objective right weight", (wm.right.nrows(), 1), (cols, 1))?;
    }
    let h = objective.eval_horizon.max(t);

    let zero = SpectralSeries::zeros(0, t + 1, nu, ny);
    let base = weighted_vector(&quadruple_unchecked(sys, &zero, h)?, objective);

    let mut taps = Vec::new();
    for tau in 0..=t {
        for c in 0..ny {
            for r in 0..nu {
                if spec.pattern.phi_uy.allows(tau, r, c) {
                    taps.push((tau, r, c));
                }
            }
        }
    }
    let mut m = DMatrix::zeros(base.len(), taps.len());
    for (k, &(tau, r, c)) in taps.iter().enumerate() {
        let mut unit = zero.clone();
        unit.get_mut(tau).expect("tap within horizon")[(r, c)] = 1.0;
        let v = weighted_vector(&quadruple_unchecked(sys, &unit, h)?, objective);
        for (i, (vi, bi)) in v.iter().zip(&base).enumerate() {
            m[(i, k)] = vi - bi;
        }
    }
    let rhs = -DVector::from_vec(base.clone());
    let theta = if taps.is_empty() {
        DVector::zeros(0)
    } else {
        let svd = m.clone().svd(true, true);
        let eps = svd.singular_values.max() * 1e-12 * (taps.len() as f64);
        svd.solve(&rhs, eps)
            .map_err(|_| Error::Singular { context: "Youla least squares" })?
    };

    let mut phi_uy = zero;
    for (k, &(tau, r, c)) in taps.iter().enumerate() {
        phi_uy.get_mut(tau).expect("tap within horizon")[(r, c)] = theta[k];
    }
    let objective_value = (&m * &theta - &rhs).norm_squared();
    let response = quadruple_unchecked(sys, &phi_uy, h)?;
    Ok(YoulaSynthesis {
        phi_uy,
        objective: objective_value,
        response,
    })
}
