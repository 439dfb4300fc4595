//! FIR SLS programs: state-feedback H2, output-feedback quadruple H2, and the
//! Youla route for open-loop stable plants.
//!
//! Every program is a linearly constrained quadratic and is solved as an
//! equality-constrained least-squares problem ([`program`]).

use alloc::collections::BTreeMap;
use alloc::format;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::lti::LtiSystem;
use crate::spectral::SpectralSeries;

pub mod of;
pub mod pointwise;
pub mod program;
pub mod sf;
pub mod youla;

pub use of::{quadruple_residuals, synth_of_h2_quadruple, OfResiduals, OfSynthesis};
pub use pointwise::{eval_controller_pointwise, eval_youla_pointwise, ResponseRef};
pub use sf::{synth_sf_h2, synth_sf_h2_stacked, validate_sf_achievability, SfResiduals, SfSynthesis};
pub use youla::{quadruple_from_phiuy, synth_of_youla, ClosedLoopMap, WeightedMap, YoulaObjective, YoulaSynthesis};

/// Allowed support of one decision transfer matrix.
#[derive(Clone, Debug, Default, PartialEq)]
pub enum SupportMask {
    #[default]
    Full,
    /// Same mask for every spectral element.
    Uniform(DMatrix<bool>),
    /// Mask per τ; elements without an entry are unrestricted.
    PerTau(BTreeMap<usize, DMatrix<bool>>),
}

impl SupportMask {
    /// Entries with `|i - j| <= d`.
    pub fn banded(rows: usize, cols: usize, d: usize) -> Self {
        SupportMask::Uniform(DMatrix::from_fn(rows, cols, |i, j| i.abs_diff(j) <= d))
    }

    pub fn allows(&self, tau: usize, r: usize, c: usize) -> bool {
        match self {
            SupportMask::Full => true,
            SupportMask::Uniform(m) => m[(r, c)],
            SupportMask::PerTau(map) => map.get(&tau).is_none_or(|m| m[(r, c)]),
        }
    }

    fn check(&self, name: &str, shape: (usize, usize)) -> Result<()> {
        let bad = |m: &DMatrix<bool>| m.shape() != shape;
        let mismatch = match self {
            SupportMask::Full => false,
            SupportMask::Uniform(m) => bad(m),
            SupportMask::PerTau(map) => map.values().any(bad),
        };
        if mismatch {
            return Err(Error::InvalidArgument(format!(
                "mask for {name} must be {}x{}",
                shape.0, shape.1
            )));
        }
        Ok(())
    }
}

/// Support constraints on the decision variables. Unused members are ignored.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SparsityPattern {
    pub phi_x: SupportMask,
    pub phi_u: SupportMask,
    pub phi_xx: SupportMask,
    pub phi_xy: SupportMask,
    pub phi_ux: SupportMask,
    pub phi_uy: SupportMask,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TerminalMode {
    /// The FIR terminal condition is an equality constraint.
    Hard,
    /// The terminal residual is penalized with weight `λ` in the objective.
    Soft(f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthesisSpec {
    pub horizon: usize,
    /// `Q^{1/2}`, any number of rows, `N_x` columns.
    pub q_sqrt: DMatrix<f64>,
    /// `R^{1/2}`, any number of rows, `N_u` columns.
    pub r_sqrt: DMatrix<f64>,
    pub terminal: TerminalMode,
    pub pattern: SparsityPattern,
    /// Right weight on the measurement-noise channel (`N_y` rows) for output
    /// feedback. `None` means identity.
    pub dy_weight: Option<DMatrix<f64>>,
}

impl SynthesisSpec {
    /// Identity weights, hard terminal constraint, no pattern.
    pub fn identity(sys: &LtiSystem, horizon: usize) -> Self {
        Self {
            horizon,
            q_sqrt: DMatrix::identity(sys.nx(), sys.nx()),
            r_sqrt: DMatrix::identity(sys.nu(), sys.nu()),
            terminal: TerminalMode::Hard,
            pattern: SparsityPattern::default(),
            dy_weight: None,
        }
    }

    pub fn validate(&self, sys: &LtiSystem) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::InvalidArgument("horizon must be >= 1".into()));
        }
        if self.q_sqrt.ncols() != sys.nx() {
            return Err(Error::DimensionMismatch {
                context: "state weight",
                expected: (self.q_sqrt.nrows(), sys.nx()),
                found: self.q_sqrt.shape(),
            });
        }
        if self.r_sqrt.ncols() != sys.nu() {
            return Err(Error::DimensionMismatch {
                context: "input weight",
                expected: (self.r_sqrt.nrows(), sys.nu()),
                found: self.r_sqrt.shape(),
            });
        }
        if let TerminalMode::Soft(l) = self.terminal {
            if !(l > 0.0 && l.is_finite()) {
                return Err(Error::InvalidArgument(format!("soft terminal penalty must be > 0, got {l}")));
            }
        }
        if let Some(w) = &self.dy_weight {
            if w.nrows() != sys.ny() {
                return Err(Error::DimensionMismatch {
                    context: "measurement weight",
                    expected: (sys.ny(), w.ncols()),
                    found: w.shape(),
                });
            }
        }
        let (nx, nu, ny) = (sys.nx(), sys.nu(), sys.ny());
        let p = &self.pattern;
        p.phi_x.check("phi_x", (nx, nx))?;
        p.phi_u.check("phi_u", (nu, nx))?;
        p.phi_xx.check("phi_xx", (nx, nx))?;
        p.phi_xy.check("phi_xy", (nx, ny))?;
        p.phi_ux.check("phi_ux", (nu, nx))?;
        p.phi_uy.check("phi_uy", (nu, ny))?;
        Ok(())
    }

    pub(crate) fn dy_weight_or_identity(&self, ny: usize) -> DMatrix<f64> {
        self.dy_weight.clone().unwrap_or_else(|| DMatrix::identity(ny, ny))
    }
}

/// State-feedback system response `{Φ_x, Φ_u}`, both over `τ = 1..=T`.
#[derive(Clone, Debug, PartialEq)]
pub struct SystemResponseSf {
    pub phi_x: SpectralSeries,
    pub phi_u: SpectralSeries,
}

impl SystemResponseSf {
    pub fn horizon(&self) -> usize {
        self.phi_x.horizon().max(self.phi_u.horizon())
    }
}

/// Set when an output-feedback response is a truncation of an IIR expression.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Truncation {
    pub eval_horizon: usize,
    /// `‖A^{eval_horizon}‖∞`.
    pub tail_bound: f64,
}

/// Output-feedback system response. `Φ_uy` starts at `τ = 0`, the other three
/// members at `τ = 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct SystemResponseOf {
    pub phi_xx: SpectralSeries,
    pub phi_xy: SpectralSeries,
    pub phi_ux: SpectralSeries,
    pub phi_uy: SpectralSeries,
    pub truncation: Option<Truncation>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    #[test]
    fn banded_mask() {
        let m = SupportMask::banded(4, 4, 1);
        assert!(m.allows(3, 1, 2));
        assert!(!m.allows(3, 0, 2));
    }

    #[test]
    fn per_tau_mask_falls_back_to_full() {
        let mut map = BTreeMap::new();
        map.insert(2, DMatrix::from_element(1, 1, false));
        let m = SupportMask::PerTau(map);
        assert!(!m.allows(2, 0, 0));
        assert!(m.allows(1, 0, 0));
    }

    #[test]
    fn spec_validation() {
        let sys = LtiSystem::state_feedback(dmatrix![0.5], dmatrix![1.0]).unwrap();
        let mut spec = SynthesisSpec::identity(&sys, 2);
        assert!(spec.validate(&sys).is_ok());
        spec.terminal = TerminalMode::Soft(0.0);
        assert!(spec.validate(&sys).is_err());
        spec.terminal = TerminalMode::Hard;
        spec.horizon = 0;
        assert!(spec.validate(&sys).is_err());
        spec.horizon = 2;
        spec.pattern.phi_u = SupportMask::Uniform(DMatrix::from_element(2, 2, true));
        assert!(spec.validate(&sys).is_err());
    }
}
