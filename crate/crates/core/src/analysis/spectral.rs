//! Extreme eigenvalues of Gram matrices.
//!
//! Two routes: a dense Hermitian eigensolve of `G`, and singular values of a
//! quadrature-weighted sample matrix `B` with `B*B = G`. The second resolves
//! `λ_min` far below `ε·‖G‖`, since squaring `σ_min` happens after the
//! decomposition rather than before.

use std::ops::Range;

use nalgebra::SymmetricEigen;
use serde::{Deserialize, Serialize};

use crate::gram::{sample_matrix, FunctionSystem, GramMatrix, IntervalSpec};
use crate::quadrature::QuadratureRule;
use crate::{CMatrix, Error, Result, C64};

/// Allowed `max|G − G*|` relative to `max|G_ij|`.
pub const HERMITIAN_RTOL: f64 = 1e-10;

/// Residual contract `‖Gv − λv‖ ≤ RESIDUAL_RTOL·‖G‖`.
pub const RESIDUAL_RTOL: f64 = 1e-8;

const JACOBI_MAX_SWEEPS: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtremeEigen {
    pub min: f64,
    pub max: f64,
    /// `‖Gv − λv‖` for the minimal pair.
    pub residual_min: f64,
    pub residual_max: f64,
}

impl ExtremeEigen {
    pub fn norm(&self) -> f64 {
        self.min.abs().max(self.max.abs())
    }

    pub fn condition_number(&self) -> f64 {
        self.max / self.min
    }
}

pub fn extreme_eigenvalues(g: &GramMatrix) -> Result<ExtremeEigen> {
    hermitian_extremes(g.entries())
}

pub fn hermitian_asymmetry(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Dense eigensolve (Householder tridiagonalization + implicit QR) with the
/// residual of both extreme pairs checked.
pub fn hermitian_extremes(m: &CMatrix) -> Result<ExtremeEigen> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch { expected: m.nrows(), got: m.ncols() });
    }
    if m.is_empty() {
        return Err(Error::invalid("empty matrix"));
    }
    let scale = m.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let asymmetry = hermitian_asymmetry(m);
    if asymmetry > HERMITIAN_RTOL * scale {
        return Err(Error::NotHermitian { asymmetry });
    }
    // exact Hermitian part, so the solver sees a real diagonal
    let h = CMatrix::from_fn(m.nrows(), m.ncols(), |i, j| 0.5 * (m[(i, j)] + m[(j, i)].conj()));
    let eig = SymmetricEigen::new(h.clone());
    let (imin, imax) = arg_extremes(eig.eigenvalues.as_slice());
    let lmin = eig.eigenvalues[imin];
    let lmax = eig.eigenvalues[imax];
    let residual = |idx: usize, lambda: f64| {
        let v = eig.eigenvectors.column(idx);
        (&h * v - v * C64::new(lambda, 0.0)).norm() / v.norm()
    };
    let out = ExtremeEigen {
        min: lmin,
        max: lmax,
        residual_min: residual(imin, lmin),
        residual_max: residual(imax, lmax),
    };
    check_residuals(&out)?;
    Ok(out)
}

fn arg_extremes(values: &[f64]) -> (usize, usize) {
    let mut imin = 0;
    let mut imax = 0;
    for (i, v) in values.iter().enumerate() {
        if *v < values[imin] {
            imin = i;
        }
        if *v > values[imax] {
            imax = i;
        }
    }
    (imin, imax)
}

fn check_residuals(e: &ExtremeEigen) -> Result<()> {
    let bound = RESIDUAL_RTOL * e.norm();
    if !(e.residual_min <= bound && e.residual_max <= bound) {
        return Err(Error::Numerical(format!(
            "eigenpair residuals {:e}, {:e} exceed {:e}",
            e.residual_min, e.residual_max, bound
        )));
    }
    Ok(())
}

/// Square root of a Gram matrix in sampled form: column `i` is function `i`
/// at the nodes of a global Gauss–Legendre rule, scaled by `√w`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledFactor {
    matrix: CMatrix,
}

impl SampledFactor {
    /// The rule integrates every product of two functions to full precision,
    /// so `B*B` reproduces the Gram matrix entrywise.
    pub fn new(system: &dyn FunctionSystem, interval: &IntervalSpec) -> Result<Self> {
        let (lo, hi) = system.frequency_range();
        let rule = QuadratureRule::global(interval.a(), interval.b(), hi - lo, 2 * system.poly_degree())?;
        let matrix = sample_matrix(system, &rule);
        Ok(Self { matrix })
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn columns(&self) -> usize {
        self.matrix.ncols()
    }

    /// `B*B`, i.e. `G[k][n] = (e_n, e_k)` up to quadrature error.
    pub fn gram(&self) -> CMatrix {
        self.matrix.adjoint() * &self.matrix
    }

    /// Extreme eigenvalues of the principal block on `cols`, as squared
    /// extreme singular values of the corresponding columns. Residuals are
    /// measured against `reference` (the same principal block of an
    /// independently assembled Gram) when given, else against `B*B`.
    pub fn extremes(&self, cols: Range<usize>, reference: Option<&CMatrix>) -> Result<ExtremeEigen> {
        let n = cols.len();
        if n == 0 || cols.end > self.columns() {
            return Err(Error::invalid(format!("column range {cols:?} outside 0..{}", self.columns())));
        }
        if self.matrix.nrows() < n {
            return Err(Error::Numerical("sample matrix has fewer rows than columns".into()));
        }
        let sub = self.matrix.columns_range(cols.clone()).into_owned();
        let (sigma, v) = jacobi_svd(&sub)?;
        let (imin, imax) = arg_extremes(&sigma);
        let lmin = sigma[imin].powi(2);
        let lmax = sigma[imax].powi(2);
        let residual = |idx: usize, lambda: f64| {
            let v = v.column(idx).into_owned();
            let gv = match reference {
                Some(g) => g * &v,
                None => sub.adjoint() * (&sub * &v),
            };
            (gv - &v * C64::new(lambda, 0.0)).norm() / v.norm()
        };
        if let Some(g) = reference {
            if g.nrows() != n || g.ncols() != n {
                return Err(Error::DimensionMismatch { expected: n, got: g.nrows() });
            }
        }
        let out = ExtremeEigen {
            min: lmin,
            max: lmax,
            residual_min: residual(imin, lmin),
            residual_max: residual(imax, lmax),
        };
        check_residuals(&out)?;
        Ok(out)
    }
}

/// Singular values and right singular vectors of a tall matrix: Householder
/// QR, then one-sided Jacobi rotations on the triangular factor.
///
/// nalgebra's bidiagonal SVD leaves singular vectors with residuals up to
/// ~1e-7·‖G‖ on some sample matrices; Jacobi gets them to a few ε and keeps
/// small singular values to high relative accuracy.
fn jacobi_svd(m: &CMatrix) -> Result<(Vec<f64>, CMatrix)> {
    let n = m.ncols();
    let mut b = if m.nrows() > n { m.clone().qr().r() } else { m.clone() };
    let mut v = CMatrix::identity(n, n);
    let tol = f64::EPSILON * n as f64;
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = b.column(p).norm_squared();
                let beta = b.column(q).norm_squared();
                let gamma = b.column(p).dotc(&b.column(q));
                let g = gamma.norm();
                if g == 0.0 || g <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * g);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let phase = gamma / g;
                let sp = phase * (c * t);
                rotate(&mut b, p, q, c, sp);
                rotate(&mut v, p, q, c, sp);
            }
        }
        if !rotated {
            let sigma = (0..n).map(|k| b.column(k).norm()).collect();
            return Ok((sigma, v));
        }
    }
    Err(Error::Numerical("Jacobi SVD did not converge".into()))
}

/// `x_p ← c·x_p − conj(sp)·x_q`, `x_q ← sp·x_p + c·x_q` on columns.
fn rotate(m: &mut CMatrix, p: usize, q: usize, c: f64, sp: C64) {
    for r in 0..m.nrows() {
        let (xp, xq) = (m[(r, p)], m[(r, q)]);
        m[(r, p)] = xp * c - sp.conj() * xq;
        m[(r, q)] = sp * xp + xq * c;
    }
}
