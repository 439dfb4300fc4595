//! Output-feedback FIR H2 synthesis over the full quadruple.
//!
//! Unknowns are ordered τ-major, then member (`Φ_xx`, `Φ_xy`, `Φ_ux`, `Φ_uy`),
//! then column, then row. The constraint families, one per block of the
//! achievability conditions, are matched coefficient-wise for `τ = 0..=T` with
//! `Φ[T+1] = 0`:
//!
//! ```text
//! row-xx:  Φ_xx[τ+1] - AΦ_xx[τ] - BΦ_ux[τ] = I·[τ=0]
//! row-xy:  Φ_xy[τ+1] - AΦ_xy[τ] - BΦ_uy[τ] = 0
//! col-xx:  Φ_xx[τ+1] - Φ_xx[τ]A - Φ_xy[τ]C = I·[τ=0]
//! col-ux:  Φ_ux[τ+1] - Φ_ux[τ]A - Φ_uy[τ]C = 0
//! ```

use nalgebra::DMatrix;

use super::program::{Program, Term};
use super::{SynthesisSpec, SystemResponseOf, TerminalMode};
use crate::error::{check_shape, Result};
use crate::lti::LtiSystem;
use crate::spectral::SpectralSeries;

const FEAS_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct OfSynthesis {
    pub response: SystemResponseOf,
    pub objective: f64,
    pub stationarity: f64,
    pub residuals: OfResiduals,
}

/// Name, three terms, shape, and right-hand side of one achievability family.
type Family<'a> = (&'static str, [Term<'a>; 3], (usize, usize), Option<&'a DMatrix<f64>>);

/// Minimizes
/// `Σ_τ ‖Q½Φ_xx‖² + ‖Q½Φ_xy W‖² + ‖R½Φ_ux‖² + ‖R½Φ_uy W‖²`
/// (`W` the measurement weight) subject to both constraint families.
pub fn synth_of_h2_quadruple(sys: &LtiSystem, spec: &SynthesisSpec) -> Result<OfSynthesis> {
    spec.validate(sys)?;
    let (nx, nu, ny, t) = (sys.nx(), sys.nu(), sys.ny(), spec.horizon);
    let (a, b, c) = (sys.a(), sys.b(), sys.c());
    let w = spec.dy_weight_or_identity(ny);
    let pat = &spec.pattern;

    let mut p = Program::new();
    let xx = p.add_block(nx, nx, 1, t, |tau, r, c| pat.phi_xx.allows(tau, r, c));
    let xy = p.add_block(nx, ny, 1, t, |tau, r, c| pat.phi_xy.allows(tau, r, c));
    let ux = p.add_block(nu, nx, 1, t, |tau, r, c| pat.phi_ux.allows(tau, r, c));
    let uy = p.add_block(nu, ny, 0, t, |tau, r, c| pat.phi_uy.allows(tau, r, c));

    let eye = DMatrix::identity(nx, nx);
    let soft = match spec.terminal {
        TerminalMode::Hard => None,
        TerminalMode::Soft(l) => Some(libm::sqrt(l)),
    };
    for tau in 0..=t {
        let rhs = (tau == 0).then_some(&eye);
        let families: [Family<'_>; 4] = [
            (
                "row-xx",
                [
                    Term::new(xx, tau + 1),
                    Term::new(xx, tau).left(a).scaled(-1.0),
                    Term::new(ux, tau).left(b).scaled(-1.0),
                ],
                (nx, nx),
                rhs,
            ),
            (
                "row-xy",
                [
                    Term::new(xy, tau + 1),
                    Term::new(xy, tau).left(a).scaled(-1.0),
                    Term::new(uy, tau).left(b).scaled(-1.0),
                ],
                (nx, ny),
                None,
            ),
            (
                "col-xx",
                [
                    Term::new(xx, tau + 1),
                    Term::new(xx, tau).right(a).scaled(-1.0),
                    Term::new(xy, tau).right(c).scaled(-1.0),
                ],
                (nx, nx),
                rhs,
            ),
            (
                "col-ux",
                [
                    Term::new(ux, tau + 1),
                    Term::new(ux, tau).right(a).scaled(-1.0),
                    Term::new(uy, tau).right(c).scaled(-1.0),
                ],
                (nu, nx),
                None,
            ),
        ];
        for (family, terms, shape, rhs) in families {
            match soft {
                Some(s) if tau == t => {
                    let scaled: [Term<'_>; 3] = terms.map(|term| term.scaled(s));
                    p.add_objective(&scaled, shape, None);
                }
                _ => p.add_constraint(family, tau, &terms, shape, rhs, 0)?,
            }
        }
    }

    let (q, r) = (&spec.q_sqrt, &spec.r_sqrt);
    for tau in 0..=t {
        p.add_objective(&[Term::new(xx, tau).left(q)], (q.nrows(), nx), None);
        p.add_objective(&[Term::new(xy, tau).left(q).right(&w)], (q.nrows(), w.ncols()), None);
        p.add_objective(&[Term::new(ux, tau).left(r)], (r.nrows(), nx), None);
        p.add_objective(&[Term::new(uy, tau).left(r).right(&w)], (r.nrows(), w.ncols()), None);
    }

    let sol = p.solve(FEAS_TOL)?;
    let response = SystemResponseOf {
        phi_xx: SpectralSeries::new(1, p.extract(xx, &sol.z))?,
        phi_xy: SpectralSeries::new(1, p.extract(xy, &sol.z))?,
        phi_ux: SpectralSeries::new(1, p.extract(ux, &sol.z))?,
        phi_uy: SpectralSeries::new(0, p.extract(uy, &sol.z))?,
        truncation: None,
    };
    let objective = quadruple_h2(&response, q, r, &w);
    let residuals = quadruple_residuals(&response, sys)?;
    Ok(OfSynthesis {
        response,
        objective,
        stationarity: sol.stationarity,
        residuals,
    })
}

pub(crate) fn quadruple_h2(resp: &SystemResponseOf, q: &DMatrix<f64>, r: &DMatrix<f64>, w: &DMatrix<f64>) -> f64 {
    let sum = |s: &SpectralSeries, left: &DMatrix<f64>, right: Option<&DMatrix<f64>>| -> f64 {
        s.elements()
            .iter()
            .map(|e| match right {
                Some(m) => (left * e * m).norm_squared(),
                None => (left * e).norm_squared(),
            })
            .sum()
    };
    sum(&resp.phi_xx, q, None) + sum(&resp.phi_xy, q, Some(w)) + sum(&resp.phi_ux, r, None) + sum(&resp.phi_uy, r, Some(w))
}

/// Max-abs residual of each constraint family, split into coefficients
/// strictly inside the stored horizon and the terminal coefficient.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct OfResiduals {
    pub row_xx: f64,
    pub row_xy: f64,
    pub col_xx: f64,
    pub col_ux: f64,
    /// Largest residual of any family at `τ = H` (`H` the largest stored τ),
    /// where `Φ[H+1] = 0` is assumed. For truncated responses this is the
    /// discarded tail, not an error.
    pub terminal: f64,
    /// Largest stored element that strict properness forbids (`τ = 0` of
    /// `Φ_xx`, `Φ_xy`, `Φ_ux`).
    pub properness: f64,
}

impl OfResiduals {
    pub fn interior_max(&self) -> f64 {
        self.row_xx.max(self.row_xy).max(self.col_xx).max(self.col_ux).max(self.properness)
    }

    pub fn max(&self) -> f64 {
        self.interior_max().max(self.terminal)
    }
}

pub fn quadruple_residuals(resp: &SystemResponseOf, sys: &LtiSystem) -> Result<OfResiduals> {
    let (nx, nu, ny) = (sys.nx(), sys.nu(), sys.ny());
    check_shape("phi_xx element", resp.phi_xx.shape(), (nx, nx))?;
    check_shape("phi_xy element", resp.phi_xy.shape(), (nx, ny))?;
    check_shape("phi_ux element", resp.phi_ux.shape(), (nu, nx))?;
    check_shape("phi_uy element", resp.phi_uy.shape(), (nu, ny))?;
    let (a, b, c) = (sys.a(), sys.b(), sys.c());
    let (xx, xy, ux, uy) = (&resp.phi_xx, &resp.phi_xy, &resp.phi_ux, &resp.phi_uy);
    let h = xx.horizon().max(xy.horizon()).max(ux.horizon()).max(uy.horizon());
    let eye = DMatrix::<f64>::identity(nx, nx);
    let mut out = OfResiduals::default();
    for tau in 0..=h {
        let id = if tau == 0 { eye.clone() } else { DMatrix::zeros(nx, nx) };
        let r1 = (xx.element(tau + 1) - a * xx.element(tau) - b * ux.element(tau) - &id).amax();
        let r2 = (xy.element(tau + 1) - a * xy.element(tau) - b * uy.element(tau)).amax();
        let r3 = (xx.element(tau + 1) - xx.element(tau) * a - xy.element(tau) * c - &id).amax();
        let r4 = (ux.element(tau + 1) - ux.element(tau) * a - uy.element(tau) * c).amax();
        if tau == h {
            out.terminal = r1.max(r2).max(r3).max(r4);
        } else {
            out.row_xx = out.row_xx.max(r1);
            out.row_xy = out.row_xy.max(r2);
            out.col_xx = out.col_xx.max(r3);
            out.col_ux = out.col_ux.max(r4);
        }
    }
    out.properness = xx.element(0).amax().max(xy.element(0).amax()).max(ux.element(0).amax());
    Ok(out)
}
