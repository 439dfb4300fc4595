//! Finite spectral series `Φ = Σ_{τ=s}^{T} z^{-τ} Φ[τ]` and the FIR
//! arithmetic used throughout synthesis and realization.

use alloc::vec::Vec;
use core::ops::RangeInclusive;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{check_shape, Error, Result};

/// FIR transfer matrix stored by its spectral elements.
///
/// Elements outside `start_tau..=horizon` are zero.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralSeries {
    start_tau: usize,
    rows: usize,
    cols: usize,
    elements: Vec<DMatrix<f64>>,
}

impl SpectralSeries {
    /// Builds a series from a non-empty list of equally shaped elements.
    pub fn new(start_tau: usize, elements: Vec<DMatrix<f64>>) -> Result<Self> {
        let first = elements
            .first()
            .ok_or_else(|| Error::InvalidArgument("spectral series needs at least one element".into()))?;
        let shape = first.shape();
        for e in &elements {
            check_shape("spectral element", e.shape(), shape)?;
        }
        Ok(Self {
            start_tau,
            rows: shape.0,
            cols: shape.1,
            elements,
        })
    }

    /// All-zero series with `len` elements starting at `start_tau`.
    pub fn zeros(start_tau: usize, len: usize, rows: usize, cols: usize) -> Self {
        Self {
            start_tau,
            rows,
            cols,
            elements: (0..len.max(1)).map(|_| DMatrix::zeros(rows, cols)).collect(),
        }
    }

    pub fn start_tau(&self) -> usize {
        self.start_tau
    }

    /// Largest stored τ.
    pub fn horizon(&self) -> usize {
        self.start_tau + self.elements.len() - 1
    }

    pub fn taus(&self) -> RangeInclusive<usize> {
        self.start_tau..=self.horizon()
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn elements(&self) -> &[DMatrix<f64>] {
        &self.elements
    }

    pub fn get(&self, tau: usize) -> Option<&DMatrix<f64>> {
        tau.checked_sub(self.start_tau).and_then(|k| self.elements.get(k))
    }

    pub fn get_mut(&mut self, tau: usize) -> Option<&mut DMatrix<f64>> {
        tau.checked_sub(self.start_tau).and_then(|k| self.elements.get_mut(k))
    }

    /// Element at `tau`, or the zero matrix outside the stored range.
    pub fn element(&self, tau: usize) -> DMatrix<f64> {
        self.get(tau)
            .cloned()
            .unwrap_or_else(|| DMatrix::zeros(self.rows, self.cols))
    }

    /// Re-indexes onto `start..=end`, zero-filling and dropping as needed.
    pub fn reshaped(&self, start: usize, end: usize) -> Self {
        let end = end.max(start);
        Self {
            start_tau: start,
            rows: self.rows,
            cols: self.cols,
            elements: (start..=end).map(|t| self.element(t)).collect(),
        }
    }

    pub fn map(&self, f: impl Fn(&DMatrix<f64>) -> DMatrix<f64>) -> Self {
        let elements: Vec<_> = self.elements.iter().map(f).collect();
        Self::new(self.start_tau, elements).expect("map preserves shape uniformity")
    }

    /// `M Φ[τ]` for every τ.
    pub fn left_mul(&self, m: &DMatrix<f64>) -> Result<Self> {
        check_shape("left_mul", (m.ncols(), 1), (self.rows, 1))?;
        Ok(self.map(|e| m * e))
    }

    /// `Φ[τ] M` for every τ.
    pub fn right_mul(&self, m: &DMatrix<f64>) -> Result<Self> {
        check_shape("right_mul", (m.nrows(), 1), (self.cols, 1))?;
        Ok(self.map(|e| e * m))
    }

    /// Sum of two series over the union of their supports.
    pub fn add(&self, other: &Self) -> Result<Self> {
        check_shape("series add", other.shape(), self.shape())?;
        let start = self.start_tau.min(other.start_tau);
        let end = self.horizon().max(other.horizon());
        let elements = (start..=end).map(|t| self.element(t) + other.element(t)).collect();
        Self::new(start, elements)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.map(|e| -e))
    }

    /// Product of transfer matrices (convolution of spectral elements).
    pub fn mul(&self, other: &Self) -> Result<Self> {
        check_shape("series product", (self.cols, 1), (other.rows, 1))?;
        let start = self.start_tau + other.start_tau;
        let end = self.horizon() + other.horizon();
        let mut elements: Vec<DMatrix<f64>> =
            (start..=end).map(|_| DMatrix::zeros(self.rows, other.cols)).collect();
        for (i, l) in self.elements.iter().enumerate() {
            for (j, r) in other.elements.iter().enumerate() {
                elements[i + j] += l * r;
            }
        }
        Self::new(start, elements)
    }

    /// Largest absolute entry difference over the union of both supports.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let start = self.start_tau.min(other.start_tau);
        let end = self.horizon().max(other.horizon());
        (start..=end)
            .map(|t| (self.element(t) - other.element(t)).amax())
            .fold(0.0, f64::max)
    }

    /// `Σ_τ Φ[τ] z^{-τ}` at a complex point.
    pub fn eval_at(&self, z: Complex64) -> DMatrix<Complex64> {
        let zinv = Complex64::new(1.0, 0.0) / z;
        let mut acc = DMatrix::<Complex64>::zeros(self.rows, self.cols);
        let mut power = zinv.powu(self.start_tau as u32);
        for e in &self.elements {
            acc += e.map(|v| Complex64::new(v, 0.0) * power);
            power *= zinv;
        }
        acc
    }

    /// Every element's entries satisfy `pred(tau, row, col, value)`.
    pub fn all_entries(&self, mut pred: impl FnMut(usize, usize, usize, f64) -> bool) -> bool {
        self.taus().zip(&self.elements).all(|(tau, e)| {
            (0..e.nrows()).all(|i| (0..e.ncols()).all(|j| pred(tau, i, j, e[(i, j)])))
        })
    }
}

/// `Σ_τ Φ[τ] w[t + offset - τ]`, reading zero outside the recorded history.
///
/// `offset = 1` gives the strictly-proper convention `u[t] = Σ_{τ≥1} Φ[τ] δ[t+1-τ]`;
/// `offset = 0` gives `u[t] = Σ_{τ≥0} Φ[τ] δ[t-τ]`.
pub fn convolve_at(series: &SpectralSeries, history: &[DVector<f64>], t: usize, offset: usize) -> Result<DVector<f64>> {
    let mut out = DVector::zeros(series.rows);
    for (tau, e) in series.taus().zip(series.elements()) {
        let idx = (t + offset) as i64 - tau as i64;
        if idx < 0 {
            continue;
        }
        if let Some(w) = history.get(idx as usize) {
            check_shape("convolve_at history", (w.len(), 1), (series.cols, 1))?;
            out += e * w;
        }
    }
    Ok(out)
}

/// Output of [`truncated_resolvent`].
#[derive(Clone, Debug, PartialEq)]
pub struct Resolvent {
    /// `Φ[τ] = A^{τ-1}`, `τ = 1..=T`.
    pub series: SpectralSeries,
    /// `‖A^T‖` in the induced ∞-norm; bounds the discarded tail.
    pub tail_bound: f64,
    pub decaying: bool,
}

/// First `horizon` spectral elements of `(zI - A)^{-1}`.
pub fn truncated_resolvent(a: &DMatrix<f64>, horizon: usize) -> Result<Resolvent> {
    if a.nrows() != a.ncols() {
        return Err(Error::NotSquare {
            rows: a.nrows(),
            cols: a.ncols(),
        });
    }
    if horizon == 0 {
        return Err(Error::InvalidArgument("resolvent horizon must be >= 1".into()));
    }
    let n = a.nrows();
    let mut elements = Vec::with_capacity(horizon);
    let mut power = DMatrix::identity(n, n);
    for _ in 0..horizon {
        let next = a * &power;
        elements.push(power);
        power = next;
    }
    let tail_bound = matrix_linf_norm(&power);
    Ok(Resolvent {
        series: SpectralSeries::new(1, elements)?,
        tail_bound,
        decaying: tail_bound < 1.0,
    })
}

/// Induced ∞→∞ norm of a matrix (max absolute row sum).
pub fn matrix_linf_norm(m: &DMatrix<f64>) -> f64 {
    m.row_iter()
        .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Induced ℓ∞→ℓ∞ norm of the FIR operator: `max_i Σ_τ Σ_j |Φ[τ]_{ij}|`.
pub fn induced_linf_norm(series: &SpectralSeries) -> f64 {
    (0..series.rows)
        .map(|i| {
            series
                .elements()
                .iter()
                .map(|e| e.row(i).iter().map(|v| v.abs()).sum::<f64>())
                .sum::<f64>()
        })
        .fold(0.0, f64::max)
}
