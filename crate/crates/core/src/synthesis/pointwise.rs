//! Controller transfer function evaluated at a single point `z`, `|z| > 1`.

use alloc::format;

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::{SystemResponseOf, SystemResponseSf};
use crate::error::{check_shape, Error, Result};
use crate::lti::LtiSystem;
use crate::spectral::SpectralSeries;

pub enum ResponseRef<'a> {
    Sf(&'a SystemResponseSf),
    Of(&'a SystemResponseOf),
}

type CMatrix = DMatrix<Complex64>;

fn complexify(m: &DMatrix<f64>) -> CMatrix {
    m.map(|v| Complex64::new(v, 0.0))
}

fn inverse(m: CMatrix, context: &'static str) -> Result<CMatrix> {
    let scale = m.iter().map(|v| v.norm()).fold(0.0, f64::max).max(1.0);
    let lu = m.lu();
    let min_pivot = lu.u().diagonal().iter().map(|v| v.norm()).fold(f64::INFINITY, f64::min);
    if !(min_pivot > 1e-13 * scale) {
        return Err(Error::Singular { context });
    }
    lu.try_inverse().ok_or(Error::Singular { context })
}

fn check_point(z: Complex64) -> Result<()> {
    if !(z.norm() > 1.0) {
        return Err(Error::InvalidArgument(format!("evaluation point must satisfy |z| > 1, got |z| = {}", z.norm())));
    }
    Ok(())
}

/// `K(z)`. State feedback: `Φ_u Φ_x⁻¹`. Output feedback:
/// `L (I + D L)⁻¹` with `L = Φ_uy - Φ_ux Φ_xx⁻¹ Φ_xy`, which equals
/// `(L⁻¹ + D)⁻¹` whenever `L` is invertible and does not require it.
pub fn eval_controller_pointwise(resp: ResponseRef<'_>, sys: &LtiSystem, z: Complex64) -> Result<CMatrix> {
    check_point(z)?;
    match resp {
        ResponseRef::Sf(r) => {
            check_shape("phi_x element", r.phi_x.shape(), (sys.nx(), sys.nx()))?;
            check_shape("phi_u element", r.phi_u.shape(), (sys.nu(), sys.nx()))?;
            let px = inverse(r.phi_x.eval_at(z), "Phi_x(z)")?;
            Ok(r.phi_u.eval_at(z) * px)
        }
        ResponseRef::Of(r) => {
            check_shape("phi_uy element", r.phi_uy.shape(), (sys.nu(), sys.ny()))?;
            let xx_inv = inverse(r.phi_xx.eval_at(z), "Phi_xx(z)")?;
            let l = r.phi_uy.eval_at(z) - r.phi_ux.eval_at(z) * xx_inv * r.phi_xy.eval_at(z);
            let d = complexify(sys.d());
            let loop_m = CMatrix::identity(sys.ny(), sys.ny()) + &d * &l;
            Ok(l * inverse(loop_m, "I + D L(z)")?)
        }
    }
}

/// `(I + Φ_uy G)⁻¹ Φ_uy` with the exact plant `G(z) = D + C (zI - A)⁻¹ B`.
pub fn eval_youla_pointwise(sys: &LtiSystem, phi_uy: &SpectralSeries, z: Complex64) -> Result<CMatrix> {
    check_point(z)?;
    check_shape("phi_uy element", phi_uy.shape(), (sys.nu(), sys.ny()))?;
    let n = sys.nx();
    let zi_a = CMatrix::identity(n, n) * z - complexify(sys.a());
    let g = complexify(sys.d()) + complexify(sys.c()) * inverse(zi_a, "zI - A")? * complexify(sys.b());
    let q = phi_uy.eval_at(z);
    let m = CMatrix::identity(sys.nu(), sys.nu()) + &q * g;
    Ok(inverse(m, "I + Phi_uy G(z)")? * q)
}
