//! Equality-constrained least squares over stacked spectral unknowns.
//!
//! Unknowns are entries of matrix-valued spectral series ("blocks"). They are
//! numbered τ-major, then block (declaration order), then column, then row,
//! skipping entries a mask pins to zero. Affine matrix expressions over those
//! entries are lowered to dense rows of the objective `‖M z - c‖²` or of the
//! constraint system `E z = f`, and the whole program is solved through its
//! KKT system.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConstraintTag {
    pub family: &'static str,
    pub tau: usize,
    pub row: usize,
    pub col: usize,
}

impl ConstraintTag {
    pub fn describe(&self) -> String {
        format!("{}[tau={}] entry ({}, {})", self.family, self.tau, self.row, self.col)
    }
}

#[derive(Clone, Debug)]
struct Block {
    rows: usize,
    cols: usize,
    start: usize,
    end: usize,
    allowed: Vec<bool>,
    index: Vec<Option<usize>>,
}

impl Block {
    fn slot(&self, tau: usize, r: usize, c: usize) -> usize {
        ((tau - self.start) * self.cols + c) * self.rows + r
    }
}

/// Term `scale · left · Φ_block[tau] · right` of an affine matrix expression.
pub struct Term<'a> {
    pub block: usize,
    pub tau: usize,
    pub left: Option<&'a DMatrix<f64>>,
    pub right: Option<&'a DMatrix<f64>>,
    pub scale: f64,
}

impl<'a> Term<'a> {
    pub fn new(block: usize, tau: usize) -> Self {
        Self {
            block,
            tau,
            left: None,
            right: None,
            scale: 1.0,
        }
    }
    pub fn left(mut self, m: &'a DMatrix<f64>) -> Self {
        self.left = Some(m);
        self
    }
    pub fn right(mut self, m: &'a DMatrix<f64>) -> Self {
        self.right = Some(m);
        self
    }
    pub fn scaled(mut self, s: f64) -> Self {
        self.scale *= s;
        self
    }
}

#[derive(Default)]
pub struct Program {
    blocks: Vec<Block>,
    n: usize,
    finalized: bool,
    objective: Vec<(Vec<f64>, f64)>,
    objective_constant: f64,
    constraints: Vec<(Vec<f64>, f64, ConstraintTag)>,
}

/// Solution of [`Program::solve`].
#[derive(Clone, Debug)]
pub struct KktSolution {
    pub z: DVector<f64>,
    pub multipliers: DVector<f64>,
    pub objective: f64,
    /// `‖Hz - g + Eᵀν‖∞` at the returned point.
    pub stationarity: f64,
    /// `‖Ez - f‖∞`.
    pub feasibility: f64,
    /// Numerical rank of the KKT matrix.
    pub rank: usize,
    pub dim: usize,
}

impl Program {
    pub fn new() -> Self {
        Self::default()
    }

    /// Declares a block of unknowns `Φ[start..=end]`, each `rows × cols`,
    /// keeping only entries for which `allow(tau, r, c)` holds.
    pub fn add_block(
        &mut self,
        rows: usize,
        cols: usize,
        start: usize,
        end: usize,
        allow: impl Fn(usize, usize, usize) -> bool,
    ) -> usize {
        assert!(!self.finalized, "blocks must be declared before rows are added");
        let mut allowed = Vec::with_capacity((end + 1 - start) * rows * cols);
        for tau in start..=end {
            for c in 0..cols {
                for r in 0..rows {
                    allowed.push(allow(tau, r, c));
                }
            }
        }
        let len = allowed.len();
        self.blocks.push(Block {
            rows,
            cols,
            start,
            end,
            allowed,
            index: alloc::vec![None; len],
        });
        self.blocks.len() - 1
    }

    fn finalize(&mut self) {
        if self.finalized {
            return;
        }
        let lo = self.blocks.iter().map(|b| b.start).min().unwrap_or(0);
        let hi = self.blocks.iter().map(|b| b.end).max().unwrap_or(0);
        let mut n = 0;
        for tau in lo..=hi {
            for b in self.blocks.iter_mut() {
                if tau < b.start || tau > b.end {
                    continue;
                }
                for c in 0..b.cols {
                    for r in 0..b.rows {
                        let s = b.slot(tau, r, c);
                        if b.allowed[s] {
                            b.index[s] = Some(n);
                            n += 1;
                        }
                    }
                }
            }
        }
        self.n = n;
        self.finalized = true;
    }

    pub fn num_unknowns(&mut self) -> usize {
        self.finalize();
        self.n
    }

    /// Index of the unknown for `Φ_block[tau](r, c)`, if it is free.
    pub fn index_of(&mut self, block: usize, tau: usize, r: usize, c: usize) -> Option<usize> {
        self.finalize();
        let b = &self.blocks[block];
        if tau < b.start || tau > b.end {
            return None;
        }
        b.index[b.slot(tau, r, c)]
    }

    /// Lowers `Σ terms + constant` to one dense row per output entry.
    fn lower(&mut self, terms: &[Term<'_>], shape: (usize, usize), constant: Option<&DMatrix<f64>>) -> Vec<(Vec<f64>, f64)> {
        self.finalize();
        let (out_rows, out_cols) = shape;
        let mut rows = Vec::with_capacity(out_rows * out_cols);
        for c in 0..out_cols {
            for r in 0..out_rows {
                let mut coeffs = alloc::vec![0.0; self.n];
                for term in terms {
                    let b = &self.blocks[term.block];
                    if term.tau < b.start || term.tau > b.end {
                        continue;
                    }
                    // coefficient of Φ(k, l) in (L Φ R)(r, c) is L(r, k) R(l, c)
                    let ks: Vec<(usize, f64)> = match term.left {
                        Some(l) => (0..b.rows).map(|k| (k, l[(r, k)])).filter(|(_, v)| *v != 0.0).collect(),
                        None => alloc::vec![(r, 1.0)],
                    };
                    let ls: Vec<(usize, f64)> = match term.right {
                        Some(m) => (0..b.cols).map(|l| (l, m[(l, c)])).filter(|(_, v)| *v != 0.0).collect(),
                        None => alloc::vec![(c, 1.0)],
                    };
                    for &(k, lv) in &ks {
                        for &(l, rv) in &ls {
                            if let Some(idx) = b.index[b.slot(term.tau, k, l)] {
                                coeffs[idx] += term.scale * lv * rv;
                            }
                        }
                    }
                }
                let k = constant.map_or(0.0, |m| m[(r, c)]);
                rows.push((coeffs, k));
            }
        }
        rows
    }

    /// Adds `‖Σ terms + constant‖²_F` to the objective.
    pub fn add_objective(&mut self, terms: &[Term<'_>], shape: (usize, usize), constant: Option<&DMatrix<f64>>) {
        for (coeffs, k) in self.lower(terms, shape, constant) {
            if coeffs.iter().all(|&v| v == 0.0) {
                self.objective_constant += k * k;
            } else {
                self.objective.push((coeffs, -k));
            }
        }
    }

    /// Adds the constraint `Σ terms = rhs` entrywise. Entries whose left side
    /// is structurally zero are dropped when `rhs` is zero there and reported
    /// as infeasible otherwise.
    pub fn add_constraint(
        &mut self,
        family: &'static str,
        tau: usize,
        terms: &[Term<'_>],
        shape: (usize, usize),
        rhs: Option<&DMatrix<f64>>,
        col_offset: usize,
    ) -> Result<()> {
        let (out_rows, _) = shape;
        for (i, (coeffs, k)) in self.lower(terms, shape, rhs).into_iter().enumerate() {
            let tag = ConstraintTag {
                family,
                tau,
                row: i % out_rows,
                col: i / out_rows + col_offset,
            };
            if coeffs.iter().all(|&v| v == 0.0) {
                if k != 0.0 {
                    return Err(Error::Infeasible {
                        constraint: tag.describe(),
                        residual: k.abs(),
                    });
                }
                continue;
            }
            self.constraints.push((coeffs, k, tag));
        }
        Ok(())
    }

    /// Solves the KKT system
    ///
    /// ```text
    /// [ MᵀM  Eᵀ ] [z]   [Mᵀc]
    /// [  E   0  ] [ν] = [ f ]
    /// ```
    ///
    /// by SVD, selecting the minimum-norm solution when it is rank deficient.
    /// A constraint residual above `feas_tol` is reported as infeasibility of
    /// the worst row.
    pub fn solve(&mut self, feas_tol: f64) -> Result<KktSolution> {
        self.finalize();
        let n = self.n;
        let m = self.constraints.len();
        let p = self.objective.len();
        let mut mm = DMatrix::zeros(p, n);
        let mut c = DVector::zeros(p);
        for (i, (row, rhs)) in self.objective.iter().enumerate() {
            mm.row_mut(i).copy_from_slice(row);
            c[i] = *rhs;
        }
        let mut e = DMatrix::zeros(m, n);
        let mut f = DVector::zeros(m);
        for (i, (row, rhs, _)) in self.constraints.iter().enumerate() {
            e.row_mut(i).copy_from_slice(row);
            f[i] = *rhs;
        }
        let h = mm.transpose() * &mm;
        let g = mm.transpose() * &c;

        let dim = n + m;
        let mut kkt = DMatrix::zeros(dim, dim);
        kkt.view_mut((0, 0), (n, n)).copy_from(&h);
        kkt.view_mut((0, n), (n, m)).copy_from(&e.transpose());
        kkt.view_mut((n, 0), (m, n)).copy_from(&e);
        let mut rhs = DVector::zeros(dim);
        rhs.rows_mut(0, n).copy_from(&g);
        rhs.rows_mut(n, m).copy_from(&f);

        let (sol, rank) = if dim == 0 {
            (DVector::zeros(0), 0)
        } else {
            let svd = kkt.svd(true, true);
            let smax = svd.singular_values.max();
            let eps = smax * 1e-12 * (dim as f64).max(1.0);
            let rank = svd.singular_values.iter().filter(|&&s| s > eps).count();
            let sol = svd
                .solve(&rhs, eps)
                .map_err(|_| Error::Singular { context: "KKT system" })?;
            (sol, rank)
        };
        let z = sol.rows(0, n).into_owned();
        let nu = sol.rows(n, m).into_owned();

        let cres = &e * &z - &f;
        let feasibility = cres.amax();
        let scale = f.amax().max(1.0);
        if feasibility > feas_tol * scale {
            let (worst, _) = cres
                .iter()
                .enumerate()
                .fold((0, 0.0), |acc, (i, v)| if v.abs() > acc.1 { (i, v.abs()) } else { acc });
            return Err(Error::Infeasible {
                constraint: self.constraints[worst].2.describe(),
                residual: cres[worst].abs(),
            });
        }
        let stationarity = (&h * &z - &g + e.transpose() * &nu).amax();
        let r = &mm * &z - &c;
        Ok(KktSolution {
            objective: r.norm_squared() + self.objective_constant,
            z,
            multipliers: nu,
            stationarity,
            feasibility,
            rank,
            dim,
        })
    }

    /// Reads block `block` out of a solution vector as a list of matrices.
    pub fn extract(&mut self, block: usize, z: &DVector<f64>) -> Vec<DMatrix<f64>> {
        self.finalize();
        let b = &self.blocks[block];
        (b.start..=b.end)
            .map(|tau| {
                DMatrix::from_fn(b.rows, b.cols, |r, c| b.index[b.slot(tau, r, c)].map_or(0.0, |i| z[i]))
            })
            .collect()
    }
}
