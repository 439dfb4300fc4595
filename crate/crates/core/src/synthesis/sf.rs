//! State-feedback FIR H2 synthesis.

use alloc::vec::Vec;

use nalgebra::DMatrix;

use super::program::{Program, Term};
use super::{SynthesisSpec, SystemResponseSf, TerminalMode};
use crate::error::{check_shape, Error, Result};
use crate::lti::LtiSystem;
use crate::spectral::SpectralSeries;

const FEAS_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct SfSynthesis {
    pub response: SystemResponseSf,
    pub objective: f64,
    /// Largest Lagrangian-gradient residual over the solved programs.
    pub stationarity: f64,
    /// `max |A Φ_x[T] + B Φ_u[T]|`; nonzero only in soft mode.
    pub terminal_residual: f64,
}

/// Minimizes `Σ_τ ‖Q^{1/2}Φ_x[τ]‖² + ‖R^{1/2}Φ_u[τ]‖²` subject to the
/// state-feedback achievability constraints, one column of `{Φ_x, Φ_u}` at a
/// time.
pub fn synth_sf_h2(sys: &LtiSystem, spec: &SynthesisSpec) -> Result<SfSynthesis> {
    prepare(sys, spec)?;
    let (nx, nu, t) = (sys.nx(), sys.nu(), spec.horizon);
    let mut phi_x = alloc::vec![DMatrix::zeros(nx, nx); t];
    let mut phi_u = alloc::vec![DMatrix::zeros(nu, nx); t];
    let mut objective = 0.0;
    let mut stationarity: f64 = 0.0;
    for j in 0..nx {
        let part = solve_columns(sys, spec, j, 1)?;
        for tau in 0..t {
            phi_x[tau].set_column(j, &part.x[tau].column(0));
            phi_u[tau].set_column(j, &part.u[tau].column(0));
        }
        objective += part.objective;
        stationarity = stationarity.max(part.stationarity);
    }
    finish(sys, phi_x, phi_u, objective, stationarity)
}

/// Same program with every column in one KKT system.
pub fn synth_sf_h2_stacked(sys: &LtiSystem, spec: &SynthesisSpec) -> Result<SfSynthesis> {
    prepare(sys, spec)?;
    let part = solve_columns(sys, spec, 0, sys.nx())?;
    finish(sys, part.x, part.u, part.objective, part.stationarity)
}

fn prepare(sys: &LtiSystem, spec: &SynthesisSpec) -> Result<()> {
    if !sys.is_state_feedback() {
        return Err(Error::InvalidArgument(
            "state-feedback synthesis needs C = I and D = 0".into(),
        ));
    }
    spec.validate(sys)
}

fn finish(
    sys: &LtiSystem,
    phi_x: Vec<DMatrix<f64>>,
    phi_u: Vec<DMatrix<f64>>,
    objective: f64,
    stationarity: f64,
) -> Result<SfSynthesis> {
    let response = SystemResponseSf {
        phi_x: SpectralSeries::new(1, phi_x)?,
        phi_u: SpectralSeries::new(1, phi_u)?,
    };
    let terminal_residual = validate_sf_achievability(&response, sys)?.terminal;
    Ok(SfSynthesis {
        response,
        objective,
        stationarity,
        terminal_residual,
    })
}

struct ColumnSolution {
    x: Vec<DMatrix<f64>>,
    u: Vec<DMatrix<f64>>,
    objective: f64,
    stationarity: f64,
}

/// Columns `c0..c0+w` of the SF program.
fn solve_columns(sys: &LtiSystem, spec: &SynthesisSpec, c0: usize, w: usize) -> Result<ColumnSolution> {
    let (nx, nu, t) = (sys.nx(), sys.nu(), spec.horizon);
    let (a, b) = (sys.a(), sys.b());
    let pat = &spec.pattern;
    let mut p = Program::new();
    let xb = p.add_block(nx, w, 1, t, |tau, r, c| pat.phi_x.allows(tau, r, c0 + c));
    let ub = p.add_block(nu, w, 1, t, |tau, r, c| pat.phi_u.allows(tau, r, c0 + c));

    let eye = DMatrix::from_fn(nx, w, |r, c| if r == c0 + c { 1.0 } else { 0.0 });
    p.add_constraint("phi_x[1] = I", 1, &[Term::new(xb, 1)], (nx, w), Some(&eye), c0)?;
    for tau in 1..t {
        p.add_constraint(
            "phi_x[tau+1] = A phi_x[tau] + B phi_u[tau]",
            tau,
            &[
                Term::new(xb, tau + 1),
                Term::new(xb, tau).left(a).scaled(-1.0),
                Term::new(ub, tau).left(b).scaled(-1.0),
            ],
            (nx, w),
            None,
            c0,
        )?;
    }
    let terminal = [Term::new(xb, t).left(a), Term::new(ub, t).left(b)];
    match spec.terminal {
        TerminalMode::Hard => p.add_constraint("A phi_x[T] + B phi_u[T] = 0", t, &terminal, (nx, w), None, c0)?,
        TerminalMode::Soft(lambda) => {
            let s = libm::sqrt(lambda);
            p.add_objective(&[Term::new(xb, t).left(a).scaled(s), Term::new(ub, t).left(b).scaled(s)], (nx, w), None)
        }
    }
    for tau in 1..=t {
        p.add_objective(&[Term::new(xb, tau).left(&spec.q_sqrt)], (spec.q_sqrt.nrows(), w), None);
        p.add_objective(&[Term::new(ub, tau).left(&spec.r_sqrt)], (spec.r_sqrt.nrows(), w), None);
    }

    let sol = p.solve(FEAS_TOL)?;
    // report the H2 cost alone; the soft terminal penalty is surfaced separately
    let x = p.extract(xb, &sol.z);
    let u = p.extract(ub, &sol.z);
    let objective = x
        .iter()
        .zip(&u)
        .map(|(xe, ue)| (&spec.q_sqrt * xe).norm_squared() + (&spec.r_sqrt * ue).norm_squared())
        .sum();
    Ok(ColumnSolution {
        x,
        u,
        objective,
        stationarity: sol.stationarity,
    })
}

/// Max-abs residuals of the state-feedback achievability constraints.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SfResiduals {
    /// `Φ_x[1] - I`.
    pub identity: f64,
    /// `Φ_x[τ+1] - AΦ_x[τ] - BΦ_u[τ]` for `τ = 1..T-1`.
    pub recursion: f64,
    /// `AΦ_x[T] + BΦ_u[T]`.
    pub terminal: f64,
}

impl SfResiduals {
    pub fn max(&self) -> f64 {
        self.identity.max(self.recursion).max(self.terminal)
    }

    pub fn within(&self, tol: f64) -> bool {
        self.max() <= tol
    }
}

pub fn validate_sf_achievability(resp: &SystemResponseSf, sys: &LtiSystem) -> Result<SfResiduals> {
    let (nx, nu) = (sys.nx(), sys.nu());
    check_shape("phi_x element", resp.phi_x.shape(), (nx, nx))?;
    check_shape("phi_u element", resp.phi_u.shape(), (nu, nx))?;
    let t = resp.horizon();
    let (px, pu) = (&resp.phi_x, &resp.phi_u);
    let identity = (px.element(1) - DMatrix::<f64>::identity(nx, nx)).amax();
    let mut recursion: f64 = 0.0;
    for tau in 1..t {
        let r = px.element(tau + 1) - sys.a() * px.element(tau) - sys.b() * pu.element(tau);
        recursion = recursion.max(r.amax());
    }
    // anything stored before τ = 1 violates strict properness
    for tau in 0..1 {
        recursion = recursion.max(px.element(tau).amax()).max(pu.element(tau).amax());
    }
    let terminal = (sys.a() * px.element(t) + sys.b() * pu.element(t)).amax();
    Ok(SfResiduals {
        identity,
        recursion,
        terminal,
    })
}
