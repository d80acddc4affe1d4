//! Norms, dense Hermitian eigensolves and matrix-free extremal eigenvalue
//! estimation.

use nalgebra::{ComplexField, DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::matrix::{ComplexMatrix, C64};
use super::random::Rng;
use crate::caps::Caps;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormKind {
    /// Largest singular value.
    Operator,
    Frobenius,
    /// Sum of singular values (trace norm).
    Schatten1,
}

/// Relative tolerance of the power-iteration fallback.
pub const POWER_TOL: f64 = 1e-8;
/// Iteration budget of the power-iteration fallback.
pub const POWER_MAX_ITER: usize = 100_000;

pub fn matrix_norm(a: &ComplexMatrix, kind: NormKind) -> Result<f64> {
    matrix_norm_with(a, kind, &Caps::default())
}

/// Dense SVD up to `caps.dense_dim`, power iteration on `A^† A` beyond it
/// (operator norm only).
pub fn matrix_norm_with(a: &ComplexMatrix, kind: NormKind, caps: &Caps) -> Result<f64> {
    let large = a.rows().max(a.cols()) > caps.dense_dim;
    match kind {
        NormKind::Frobenius => Ok(a.frobenius_norm()),
        NormKind::Operator if large => {
            let adj = a.adjoint();
            power_opnorm(
                a.cols(),
                |x| a.matvec(x),
                |y| adj.matvec(y),
                POWER_TOL,
                POWER_MAX_ITER,
            )
        }
        NormKind::Operator => Ok(singular_values(a).into_iter().fold(0.0, f64::max)),
        NormKind::Schatten1 => {
            if large {
                return Err(Error::DimensionLimit {
                    entries: (a.rows() * a.cols()) as u128,
                    cap: (caps.dense_dim * caps.dense_dim) as u128,
                });
            }
            Ok(singular_values(a).into_iter().sum())
        }
    }
}

pub fn singular_values(a: &ComplexMatrix) -> Vec<f64> {
    a.to_nalgebra().singular_values().iter().copied().collect()
}

/// Eigen-decomposition of a Hermitian matrix; eigenvalues ascending, the
/// matching eigenvectors are the columns of the returned matrix.
pub fn eigh(a: &ComplexMatrix) -> Result<(Vec<f64>, ComplexMatrix)> {
    if !a.is_square() {
        return Err(Error::Shape("eigh needs a square matrix".into()));
    }
    let eig = SymmetricEigen::new(a.hermitian_part().to_nalgebra());
    let mut order: Vec<usize> = (0..a.rows()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = ComplexMatrix::from_fn(a.rows(), a.rows(), |r, c| eig.eigenvectors[(r, order[c])]);
    Ok((values, vectors))
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn eigvalsh(a: &ComplexMatrix) -> Result<Vec<f64>> {
    if !a.is_square() {
        return Err(Error::Shape("eigvalsh needs a square matrix".into()));
    }
    let mut values: Vec<f64> =
        a.hermitian_part().to_nalgebra().symmetric_eigenvalues().iter().copied().collect();
    values.sort_by(f64::total_cmp);
    Ok(values)
}

/// Operator norm of a Hermitian matrix: dense eigensolve up to
/// `caps.dense_dim`, Lanczos beyond.
pub fn hermitian_norm(a: &ComplexMatrix, caps: &Caps) -> Result<f64> {
    if a.rows() <= caps.dense_dim {
        let v = eigvalsh(a)?;
        return Ok(v.first().unwrap().abs().max(v.last().unwrap().abs()));
    }
    let ext = lanczos_extremes(a.rows(), |x: &[C64]| a.matvec(x), &[], &LanczosOptions::default())?;
    Ok(ext.abs_max())
}

/// Largest singular value of the operator given by `apply` (and its adjoint)
/// by power iteration on `A^† A`.
pub fn power_opnorm(
    dim: usize,
    apply: impl Fn(&[C64]) -> Vec<C64>,
    apply_adj: impl Fn(&[C64]) -> Vec<C64>,
    tol: f64,
    max_iter: usize,
) -> Result<f64> {
    let mut rng = Rng::new(0x5eed_0001);
    let mut x: Vec<C64> = (0..dim).map(|_| rng.complex_normal()).collect();
    normalize(&mut x);
    let mut last = 0.0;
    for it in 0..max_iter {
        let mut y = apply_adj(&apply(&x));
        let lambda = norm(&y);
        if lambda == 0.0 {
            return Ok(0.0);
        }
        let sigma = lambda.sqrt();
        for z in y.iter_mut() {
            *z /= lambda;
        }
        x = y;
        if it > 0 && (sigma - last).abs() <= tol * sigma {
            return Ok(sigma);
        }
        last = sigma;
    }
    Err(Error::Convergence { iterations: max_iter, last })
}

#[derive(Clone, Copy, Debug)]
pub struct LanczosOptions {
    pub max_steps: usize,
    /// Absolute residual tolerance on the extremal Ritz pairs.
    pub tol: f64,
    pub seed: u64,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        LanczosOptions { max_steps: 400, tol: 1e-10, seed: 0x1a2c_2051 }
    }
}

/// Extremal eigenvalues of a Hermitian operator restricted to the orthogonal
/// complement of `deflate`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Extremes {
    pub min: f64,
    pub max: f64,
}

impl Extremes {
    pub fn abs_max(&self) -> f64 {
        self.min.abs().max(self.max.abs())
    }
}

/// Lanczos with full reorthogonalization.
///
/// `deflate` must be orthonormal and invariant under the operator; the
/// iteration is kept in its orthogonal complement. Exact (up to rounding)
/// once the Krylov space becomes invariant.
pub fn lanczos_extremes<T>(
    dim: usize,
    mut apply: impl FnMut(&[T]) -> Vec<T>,
    deflate: &[Vec<T>],
    opts: &LanczosOptions,
) -> Result<Extremes>
where
    T: ComplexField<RealField = f64> + Copy,
{
    let mut rng = Rng::new(opts.seed);
    let mut v: Vec<T> = (0..dim).map(|_| T::from_real(rng.normal())).collect();
    orthogonalize(&mut v, deflate);
    let n0 = norm_t(&v);
    if n0 == 0.0 {
        // The deflated space is everything.
        return Ok(Extremes { min: 0.0, max: 0.0 });
    }
    scale_t(&mut v, 1.0 / n0);

    let budget = opts.max_steps.min(dim.saturating_sub(deflate.len())).max(1);
    let mut basis: Vec<Vec<T>> = vec![v];
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut last = Extremes { min: f64::NAN, max: f64::NAN };

    for step in 0..budget {
        let mut w = apply(&basis[step]);
        let alpha = dot_t(&basis[step], &w).real();
        alphas.push(alpha);
        // Two passes of classical Gram-Schmidt against everything seen so far.
        for _ in 0..2 {
            orthogonalize(&mut w, deflate);
            orthogonalize(&mut w, &basis);
        }
        let beta = norm_t(&w);
        let scale = alphas.iter().chain(&betas).fold(0.0f64, |m, x| m.max(x.abs()));
        let exhausted = beta <= 1e-12 * (1.0 + scale);
        // The tridiagonal eigensolve is the dominant cost for long runs, so
        // convergence is only tested every few steps.
        if exhausted || step + 1 == budget || step < 8 || step % 8 == 7 {
            let (ritz, residual) = tridiagonal_extremes(&alphas, &betas, beta);
            let converged = residual.0 <= opts.tol && residual.1 <= opts.tol && step >= 2;
            if exhausted || converged || step + 1 == budget {
                if exhausted || converged || budget == dim.saturating_sub(deflate.len()) {
                    return Ok(ritz);
                }
                return Err(Error::Convergence { iterations: budget, last: ritz.abs_max() });
            }
            last = ritz;
        }
        betas.push(beta);
        scale_t(&mut w, 1.0 / beta);
        basis.push(w);
    }
    Err(Error::Convergence { iterations: budget, last: last.abs_max() })
}

/// Extremal eigenvalues of the Lanczos tridiagonal and their residual bounds
/// `|beta * y_last|`.
fn tridiagonal_extremes(alphas: &[f64], betas: &[f64], next_beta: f64) -> (Extremes, (f64, f64)) {
    let k = alphas.len();
    let t = DMatrix::<f64>::from_fn(k, k, |r, c| {
        if r == c {
            alphas[r]
        } else if r + 1 == c {
            betas[r]
        } else if c + 1 == r {
            betas[c]
        } else {
            0.0
        }
    });
    let eig = SymmetricEigen::new(t);
    let (mut imin, mut imax) = (0, 0);
    for i in 0..k {
        if eig.eigenvalues[i] < eig.eigenvalues[imin] {
            imin = i;
        }
        if eig.eigenvalues[i] > eig.eigenvalues[imax] {
            imax = i;
        }
    }
    let res = |i: usize| (next_beta * eig.eigenvectors[(k - 1, i)]).abs();
    (
        Extremes { min: eig.eigenvalues[imin], max: eig.eigenvalues[imax] },
        (res(imin), res(imax)),
    )
}

fn dot_t<T: ComplexField<RealField = f64> + Copy>(u: &[T], v: &[T]) -> T {
    let mut acc = T::zero();
    for (a, b) in u.iter().zip(v) {
        acc += a.conjugate() * *b;
    }
    acc
}

fn norm_t<T: ComplexField<RealField = f64> + Copy>(v: &[T]) -> f64 {
    v.iter().map(|z| z.modulus_squared()).sum::<f64>().sqrt()
}

fn scale_t<T: ComplexField<RealField = f64> + Copy>(v: &mut [T], s: f64) {
    let s = T::from_real(s);
    for z in v.iter_mut() {
        *z *= s;
    }
}

fn orthogonalize<T: ComplexField<RealField = f64> + Copy>(w: &mut [T], against: &[Vec<T>]) {
    for q in against {
        let c = dot_t(q, w);
        for (x, y) in w.iter_mut().zip(q) {
            *x -= c * *y;
        }
    }
}

pub(crate) fn norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub(crate) fn normalize(v: &mut [C64]) {
    let n = norm(v);
    if n > 0.0 {
        for z in v.iter_mut() {
            *z /= n;
        }
    }
}
