//! Discrete-time LTI plant model.
//!
//! ```text
//! x[t+1] = A x[t] + B u[t] + d_x[t]
//!   y[t] = C x[t] + D u[t] + d_y[t]
//! ```

use nalgebra::{DMatrix, DVector};

use crate::error::{check_shape, Error, Result};
use crate::spectral::SpectralSeries;

/// Plant matrices with consistent dimensions `(n_x, n_u, n_y)`.
#[derive(Clone, Debug, PartialEq)]
pub struct LtiSystem {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    c: DMatrix<f64>,
    d: DMatrix<f64>,
}

impl LtiSystem {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, c: DMatrix<f64>, d: DMatrix<f64>) -> Result<Self> {
        let nx = a.nrows();
        if a.ncols() != nx {
            return Err(Error::NotSquare {
                rows: a.nrows(),
                cols: a.ncols(),
            });
        }
        if nx == 0 || b.ncols() == 0 || c.nrows() == 0 {
            return Err(Error::InvalidArgument("plant dimensions must be positive".into()));
        }
        let nu = b.ncols();
        let ny = c.nrows();
        check_shape("B", b.shape(), (nx, nu))?;
        check_shape("C", c.shape(), (ny, nx))?;
        check_shape("D", d.shape(), (ny, nu))?;
        Ok(Self { a, b, c, d })
    }

    /// State-feedback plant: `C = I`, `D = 0`.
    pub fn state_feedback(a: DMatrix<f64>, b: DMatrix<f64>) -> Result<Self> {
        let nx = a.nrows();
        let nu = b.ncols();
        Self::new(a, b, DMatrix::identity(nx, nx), DMatrix::zeros(nx, nu))
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }
    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }
    pub fn c(&self) -> &DMatrix<f64> {
        &self.c
    }
    pub fn d(&self) -> &DMatrix<f64> {
        &self.d
    }
    pub fn nx(&self) -> usize {
        self.a.nrows()
    }
    pub fn nu(&self) -> usize {
        self.b.ncols()
    }
    pub fn ny(&self) -> usize {
        self.c.nrows()
    }

    /// True iff `C = I` and `D = 0` exactly.
    pub fn is_state_feedback(&self) -> bool {
        self.ny() == self.nx()
            && self.c == DMatrix::identity(self.nx(), self.nx())
            && self.d.iter().all(|&v| v == 0.0)
    }

    pub fn has_feedthrough(&self) -> bool {
        self.d.iter().any(|&v| v != 0.0)
    }

    /// `A x + B u + d_x`.
    pub fn step(&self, x: &DVector<f64>, u: &DVector<f64>, dx: &DVector<f64>) -> Result<DVector<f64>> {
        check_shape("plant_step x", (x.len(), 1), (self.nx(), 1))?;
        check_shape("plant_step u", (u.len(), 1), (self.nu(), 1))?;
        check_shape("plant_step d_x", (dx.len(), 1), (self.nx(), 1))?;
        Ok(&self.a * x + &self.b * u + dx)
    }

    /// `C x + D u + d_y`.
    pub fn output(&self, x: &DVector<f64>, u: &DVector<f64>, dy: &DVector<f64>) -> Result<DVector<f64>> {
        check_shape("plant_output x", (x.len(), 1), (self.nx(), 1))?;
        check_shape("plant_output u", (u.len(), 1), (self.nu(), 1))?;
        check_shape("plant_output d_y", (dy.len(), 1), (self.ny(), 1))?;
        Ok(&self.c * x + &self.d * u + dy)
    }

    /// Truncated impulse response `G[0] = D`, `G[τ] = C A^{τ-1} B` for `τ = 1..=horizon`.
    pub fn impulse_response(&self, horizon: usize) -> SpectralSeries {
        let mut elements = alloc::vec::Vec::with_capacity(horizon + 1);
        elements.push(self.d.clone());
        let mut ab = self.b.clone();
        for _ in 0..horizon {
            elements.push(&self.c * &ab);
            ab = &self.a * ab;
        }
        SpectralSeries::new(0, elements).expect("uniform shapes")
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StabilityReport {
    pub stable: bool,
    pub spectral_radius: f64,
}

/// Above this size the spectral radius is estimated iteratively.
pub const DIRECT_EIGEN_LIMIT: usize = 64;
const POWER_ITERATION_TOL: f64 = 1e-12;

/// Schur stability test: stable iff `ρ(A) < 1 - tol`.
pub fn is_schur_stable(a: &DMatrix<f64>, tol: f64) -> Result<StabilityReport> {
    let rho = spectral_radius(a)?;
    Ok(StabilityReport {
        stable: rho < 1.0 - tol,
        spectral_radius: rho,
    })
}

pub fn spectral_radius(a: &DMatrix<f64>) -> Result<f64> {
    if a.nrows() != a.ncols() {
        return Err(Error::NotSquare {
            rows: a.nrows(),
            cols: a.ncols(),
        });
    }
    if a.nrows() == 0 {
        return Ok(0.0);
    }
    if a.nrows() <= DIRECT_EIGEN_LIMIT {
        let eig = a.clone().complex_eigenvalues();
        return Ok(eig.iter().map(|e| e.norm()).fold(0.0, f64::max));
    }
    Ok(power_spectral_radius(a))
}

/// Gelfand-formula power iteration: `ρ = lim ‖A^{2^k}‖^{1/2^k}`, evaluated in
/// log scale on normalized repeated squares so nothing overflows.
fn power_spectral_radius(a: &DMatrix<f64>) -> f64 {
    let mut m = a.clone();
    let mut log_scale = 0.0_f64; // log of the factor stripped from A^{2^k}
    let mut power = 1.0_f64; // 2^k
    let mut prev = f64::INFINITY;
    for _ in 0..200 {
        let norm = m.norm();
        if norm == 0.0 {
            return 0.0;
        }
        let estimate = libm::exp((log_scale + libm::log(norm)) / power);
        if (estimate - prev).abs() <= POWER_ITERATION_TOL * estimate.max(1.0) {
            return estimate;
        }
        prev = estimate;
        m /= norm;
        log_scale += libm::log(norm);
        m = &m * &m;
        log_scale *= 2.0;
        power *= 2.0;
    }
    prev
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{dmatrix, dvector};

    fn scalar(a: f64, b: f64, c: f64, d: f64) -> LtiSystem {
        LtiSystem::new(dmatrix![a], dmatrix![b], dmatrix![c], dmatrix![d]).unwrap()
    }

    #[test]
    fn plant_step_examples() {
        let zero = LtiSystem::state_feedback(DMatrix::zeros(2, 2), DMatrix::zeros(2, 1)).unwrap();
        let x = zero.step(&dvector![3.0, -1.0], &dvector![2.0], &dvector![0.0, 0.0]).unwrap();
        assert_eq!(x, dvector![0.0, 0.0]);

        let ident = LtiSystem::state_feedback(DMatrix::identity(2, 2), DMatrix::zeros(2, 1)).unwrap();
        let x = ident.step(&dvector![1.0, 0.0], &dvector![5.0], &dvector![0.0, 0.0]).unwrap();
        assert_eq!(x, dvector![1.0, 0.0]);

        let s = scalar(0.5, 1.0, 1.0, 0.0);
        let x = s.step(&dvector![1.0], &dvector![1.0], &dvector![0.25]).unwrap();
        assert_eq!(x, dvector![1.75]);
    }

    #[test]
    fn plant_output_examples() {
        let sf = LtiSystem::state_feedback(dmatrix![0.1, 0.2; 0.0, 0.3], dmatrix![1.0; 0.0]).unwrap();
        let x = dvector![0.7, -0.2];
        assert_eq!(sf.output(&x, &dvector![4.0], &dvector![0.0, 0.0]).unwrap(), x);

        let passthrough = LtiSystem::new(
            DMatrix::zeros(2, 2),
            DMatrix::identity(2, 2),
            DMatrix::zeros(2, 2),
            DMatrix::identity(2, 2),
        )
        .unwrap();
        let y = passthrough
            .output(&dvector![9.0, 9.0], &dvector![1.0, 2.0], &dvector![0.5, 0.25])
            .unwrap();
        assert_eq!(y, dvector![1.5, 2.25]);

        let sys = LtiSystem::new(DMatrix::zeros(2, 2), dmatrix![1.0; 1.0], dmatrix![1.0, 0.0], dmatrix![0.0])
            .unwrap();
        let y = sys.output(&dvector![2.0, 3.0], &dvector![0.0], &dvector![0.1]).unwrap();
        assert!((y[0] - 2.1).abs() < 1e-15);
    }

    #[test]
    fn dimension_errors() {
        let s = scalar(0.5, 1.0, 1.0, 0.0);
        assert!(matches!(
            s.step(&dvector![1.0, 2.0], &dvector![0.0], &dvector![0.0]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(LtiSystem::new(dmatrix![1.0, 2.0], dmatrix![1.0], dmatrix![1.0], dmatrix![0.0]).is_err());
        assert!(LtiSystem::new(dmatrix![1.0], dmatrix![1.0], dmatrix![1.0, 1.0], dmatrix![0.0]).is_err());
    }

    #[test]
    fn state_feedback_flag() {
        assert!(LtiSystem::state_feedback(dmatrix![0.5], dmatrix![1.0]).unwrap().is_state_feedback());
        assert!(!scalar(0.5, 1.0, 2.0, 0.0).is_state_feedback());
        assert!(!scalar(0.5, 1.0, 1.0, 0.1).is_state_feedback());
    }

    #[test]
    fn schur_examples() {
        let r = is_schur_stable(&dmatrix![0.5], 0.0).unwrap();
        assert!(r.stable);
        assert!((r.spectral_radius - 0.5).abs() < 1e-15);
        assert!(!is_schur_stable(&dmatrix![1.0], 0.0).unwrap().stable);

        let tri = dmatrix![0.4, 0.2, 0.0; 0.2, 0.4, 0.2; 0.0, 0.2, 0.4];
        let r = is_schur_stable(&tri, 1e-9).unwrap();
        let expected = 0.4 + 0.2 * 2.0 * libm::cos(core::f64::consts::PI / 4.0);
        assert!((r.spectral_radius - expected).abs() < 1e-12);
        assert!(r.stable);

        assert!(matches!(
            is_schur_stable(&dmatrix![1.0, 2.0], 0.0),
            Err(Error::NotSquare { .. })
        ));
    }

    #[test]
    fn power_iteration_agrees_with_eigensolve() {
        // tridiagonal Toeplitz, closed-form spectral radius
        let n = 80;
        let a = DMatrix::from_fn(n, n, |i, j| match i.abs_diff(j) {
            0 => 0.4,
            1 => 0.2,
            _ => 0.0,
        });
        let expected = 0.4 + 0.4 * libm::cos(core::f64::consts::PI / (n as f64 + 1.0));
        let rho = spectral_radius(&a).unwrap();
        assert!((rho - expected).abs() < 1e-6, "{rho} vs {expected}");
        // rotation block: complex pair of modulus 0.9
        let mut r = DMatrix::zeros(70, 70);
        for k in 0..35 {
            let s = 0.9 * (1.0 - k as f64 / 100.0);
            r[(2 * k, 2 * k)] = 0.0;
            r[(2 * k, 2 * k + 1)] = s;
            r[(2 * k + 1, 2 * k)] = -s;
        }
        assert!((spectral_radius(&r).unwrap() - 0.9).abs() < 1e-6);
    }

    #[test]
    fn impulse_response_taps() {
        let s = scalar(0.5, 2.0, 3.0, 0.25);
        let g = s.impulse_response(3);
        assert_eq!(g.start_tau(), 0);
        assert_eq!(g.get(0).unwrap()[(0, 0)], 0.25);
        assert_eq!(g.get(1).unwrap()[(0, 0)], 6.0);
        assert_eq!(g.get(3).unwrap()[(0, 0)], 1.5);
    }
}
