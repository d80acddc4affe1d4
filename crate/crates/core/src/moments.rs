//! Moment operators `E[rho^{k,k}(g)]` for finite multisets, exact Haar and
//! Monte-Carlo Haar, and their distance to the Haar projector.
//!
//! Dense moments are accumulated through the reshuffling identity
//! `(G (x) conj(G))[(a,b),(c,d)] = vec(G) vec(G)^dagger [(a,c),(b,d)]`, which
//! turns the average into a Gram matrix computed by real matrix products.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::caps::Caps;
use crate::error::{Error, Result};
use crate::linalg::{
    eigvalsh, haar_sample, lanczos_extremes, matrix_norm, tensor, tensor_power, ComplexMatrix, GroupTag,
    LanczosOptions, NormKind, Rng, C64, MC_CHUNK,
};
use crate::schur_weyl::HaarProjector;

/// Where the group elements of a moment come from.
#[derive(Clone, Debug)]
pub enum MomentSource {
    /// Uniform average over a multiset; `lazy` mixes in the identity with
    /// weight one half.
    Multiset { elements: Vec<ComplexMatrix>, lazy: bool },
    HaarExact,
    HaarMc { samples: usize, seed: u64 },
}

#[derive(Clone, Debug)]
pub struct MomentSpec {
    pub group: GroupTag,
    /// Local dimension of `g`.
    pub d: usize,
    pub k: usize,
    pub source: MomentSource,
    /// Fail with a symmetry error if the multiset moment is not Hermitian.
    pub require_hermitian: bool,
}

fn moment_dim(d: usize, k: usize, caps: &Caps) -> Result<usize> {
    let dim = (d as u128).checked_pow(2 * k as u32).unwrap_or(u128::MAX);
    if dim > caps.dense_dim as u128 {
        return Err(Error::Size(format!(
            "rho^{{{k},{k}}} on C^{d} has dimension {dim}, above the dense cap {}; use the matrix-free path",
            caps.dense_dim
        )));
    }
    Ok(dim as usize)
}

/// `g^{(x)k} (x) conj(g)^{(x)k}` as a dense matrix.
pub fn rho_kk(g: &ComplexMatrix, k: usize, caps: &Caps) -> Result<ComplexMatrix> {
    if !g.is_square() {
        return Err(Error::Shape(format!("rho^{{k,k}} needs a square matrix, got {}x{}", g.rows(), g.cols())));
    }
    moment_dim(g.rows(), k, caps)?;
    let big = tensor_power(g, k, caps)?;
    tensor(&big, &big.conj())
}

/// Applies `m` (`d x d`) to tensor factor `axis` of `x` in `(C^d)^{(x) axes}`.
pub fn apply_on_axis(m: &ComplexMatrix, axis: usize, axes: usize, x: &[C64]) -> Vec<C64> {
    let d = m.rows();
    let right = d.pow((axes - 1 - axis) as u32);
    let block = d * right;
    let mut out = vec![C64::new(0.0, 0.0); x.len()];
    for (xb, ob) in x.chunks(block).zip(out.chunks_mut(block)) {
        for i in 0..d {
            let dst = &mut ob[i * right..(i + 1) * right];
            for j in 0..d {
                let c = m[(i, j)];
                if c == C64::new(0.0, 0.0) {
                    continue;
                }
                for (o, s) in dst.iter_mut().zip(&xb[j * right..(j + 1) * right]) {
                    *o += c * s;
                }
            }
        }
    }
    out
}

/// `rho^{k,k}(g) x` without materializing the representation.
pub fn apply_rho_kk(g: &ComplexMatrix, k: usize, x: &[C64]) -> Result<Vec<C64>> {
    let d = g.rows();
    if !g.is_square() || d.checked_pow(2 * k as u32) != Some(x.len()) {
        return Err(Error::Shape(format!("vector of length {} does not fit rho^{{{k},{k}}} on C^{d}", x.len())));
    }
    let gc = g.conj();
    let mut y = x.to_vec();
    for axis in 0..2 * k {
        y = apply_on_axis(if axis < k { g } else { &gc }, axis, 2 * k, &y);
    }
    Ok(y)
}

/// Sum of `vec(G) vec(G)^dagger` split into real and imaginary parts.
struct GramSum {
    re: DMatrix<f64>,
    im: DMatrix<f64>,
    count: usize,
}

impl GramSum {
    fn zeros(n: usize) -> GramSum {
        GramSum { re: DMatrix::zeros(n, n), im: DMatrix::zeros(n, n), count: 0 }
    }

    fn add_batch(&mut self, batch: &[ComplexMatrix], k: usize, real: bool, caps: &Caps) -> Result<()> {
        if batch.is_empty() {
            return Ok(());
        }
        let vecs = batch
            .iter()
            .map(|g| Ok(if k == 1 { g.clone() } else { tensor_power(g, k, caps)? }.into_data()))
            .collect::<Result<Vec<_>>>()?;
        let n = self.re.nrows();
        if vecs.iter().any(|v| v.len() != n) {
            return Err(Error::Shape("moment batch has matrices of the wrong dimension".into()));
        }
        let x = DMatrix::from_fn(vecs.len(), n, |r, c| vecs[r][c].re);
        self.re.gemm_tr(1.0, &x, &x, 1.0);
        if !real {
            let y = DMatrix::from_fn(vecs.len(), n, |r, c| vecs[r][c].im);
            self.re.gemm_tr(1.0, &y, &y, 1.0);
            let mut cross = DMatrix::zeros(n, n);
            cross.gemm_tr(1.0, &y, &x, 0.0);
            self.im += &cross - cross.transpose();
        }
        self.count += batch.len();
        Ok(())
    }

    fn merge(&mut self, other: GramSum) {
        self.re += other.re;
        self.im += other.im;
        self.count += other.count;
    }

    /// The averaged moment, undoing the reshuffle.
    fn into_moment(self, s: usize) -> ComplexMatrix {
        let w = 1.0 / self.count as f64;
        let dim = s * s;
        ComplexMatrix::from_fn(dim, dim, |row, col| {
            let (a, b) = (row / s, row % s);
            let (c, d) = (col / s, col % s);
            let (p, q) = (a * s + c, b * s + d);
            C64::new(self.re[(p, q)], self.im[(p, q)]) * w
        })
    }
}

/// Uniform average of `rho^{k,k}` over `total` matrices delivered in batches.
///
/// `fill(b)` returns batch `b`; batches are summed in index order, so the
/// result does not depend on the thread count.
pub fn moment_by_batches<F>(batches: usize, d: usize, k: usize, real: bool, fill: F, caps: &Caps) -> Result<ComplexMatrix>
where
    F: Fn(usize) -> Result<Vec<ComplexMatrix>> + Sync,
{
    let dim = moment_dim(d, k, caps)?;
    let s = d.pow(k as u32);
    let run = |b: usize| -> Result<GramSum> {
        let mut acc = GramSum::zeros(dim);
        acc.add_batch(&fill(b)?, k, real, caps)?;
        Ok(acc)
    };
    // Partial sums of large moments are too big to keep one per batch.
    let total = if dim <= 1024 {
        let parts: Vec<GramSum> = (0..batches).into_par_iter().map(run).collect::<Result<_>>()?;
        parts.into_iter().fold(GramSum::zeros(dim), |mut acc, p| {
            acc.merge(p);
            acc
        })
    } else {
        let mut acc = GramSum::zeros(dim);
        for b in 0..batches {
            acc.merge(run(b)?);
        }
        acc
    };
    if total.count == 0 {
        return Err(Error::Domain("moment of an empty multiset".into()));
    }
    Ok(total.into_moment(s))
}

/// Uniform average of `rho^{k,k}(g)` over a multiset.
pub fn multiset_moment(elements: &[ComplexMatrix], k: usize, caps: &Caps) -> Result<ComplexMatrix> {
    let first = elements.first().ok_or_else(|| Error::Domain("moment of an empty multiset".into()))?;
    let real = elements.iter().all(|g| g.is_real(0.0));
    let batches = elements.len().div_ceil(MC_CHUNK);
    moment_by_batches(
        batches,
        first.rows(),
        k,
        real,
        |b| Ok(elements[b * MC_CHUNK..((b + 1) * MC_CHUNK).min(elements.len())].to_vec()),
        caps,
    )
}

/// Monte-Carlo estimate of the Haar moment; chunk `b` draws from
/// `Rng::stream(seed, b)`.
pub fn haar_mc_moment(group: GroupTag, d: usize, k: usize, samples: usize, seed: u64, caps: &Caps) -> Result<ComplexMatrix> {
    moment_by_batches(
        samples.div_ceil(MC_CHUNK),
        d,
        k,
        group.is_real(),
        |b| {
            let mut rng = Rng::stream(seed, b as u64);
            let count = MC_CHUNK.min(samples - b * MC_CHUNK);
            (0..count).map(|_| haar_sample(group, d, &mut rng)).collect()
        },
        caps,
    )
}

/// `Id/2 + m/2`.
pub fn lazy_mixture(m: &ComplexMatrix) -> ComplexMatrix {
    let mut out = m.scale_real(0.5);
    for i in 0..out.rows().min(out.cols()) {
        out[(i, i)] += C64::new(0.5, 0.0);
    }
    out
}

pub fn moment_operator(spec: &MomentSpec, caps: &Caps) -> Result<ComplexMatrix> {
    match &spec.source {
        MomentSource::Multiset { elements, lazy } => {
            let m = multiset_moment(elements, spec.k, caps)?;
            if spec.require_hermitian && !m.is_hermitian(1e-10) {
                return Err(Error::Symmetry("multiset moment is not Hermitian; is the multiset inverse-closed?".into()));
            }
            Ok(if *lazy { lazy_mixture(&m) } else { m })
        }
        MomentSource::HaarExact => {
            let p = crate::schur_weyl::haar_projector(spec.group, spec.d, spec.k, caps)?;
            p.dense(caps)
        }
        MomentSource::HaarMc { samples, seed } => haar_mc_moment(spec.group, spec.d, spec.k, *samples, *seed, caps),
    }
}

/// `||moment - Pi||_op`, through a Hermitian eigensolve when possible.
pub fn spectral_gap(moment: &ComplexMatrix, haar: &HaarProjector, caps: &Caps) -> Result<f64> {
    design_error(moment, haar, NormKind::Operator, caps)
}

/// Distance of a moment to the Haar projector in the chosen norm.
pub fn design_error(moment: &ComplexMatrix, haar: &HaarProjector, norm: NormKind, caps: &Caps) -> Result<f64> {
    if moment.rows() != haar.dim() || !moment.is_square() {
        return Err(Error::Shape(format!(
            "moment is {}x{}, projector has dimension {}",
            moment.rows(),
            moment.cols(),
            haar.dim()
        )));
    }
    let diff = moment.try_sub(&haar.dense(caps)?)?;
    if diff.is_hermitian(1e-10) {
        let ev = eigvalsh(&diff)?;
        return Ok(match norm {
            NormKind::Operator => ev.iter().fold(0.0f64, |m, x| m.max(x.abs())),
            NormKind::Schatten1 => ev.iter().map(|x| x.abs()).sum(),
            NormKind::Frobenius => ev.iter().map(|x| x * x).sum::<f64>().sqrt(),
        });
    }
    matrix_norm(&diff, norm)
}

/// `||moment - Pi||_op` for an inverse-closed multiset without materializing
/// anything of size `dim^2`.
///
/// Every element fixes the Haar-invariant subspace, so the difference is the
/// moment restricted to the orthogonal complement; Lanczos runs there with the
/// invariant subspace deflated.
pub fn matrix_free_gap(
    elements: &[ComplexMatrix],
    lazy: bool,
    k: usize,
    haar: &HaarProjector,
    opts: &LanczosOptions,
) -> Result<f64> {
    if elements.is_empty() {
        return Err(Error::Domain("moment of an empty multiset".into()));
    }
    let dim = haar.dim();
    let basis: Vec<Vec<C64>> = haar
        .orthonormal_basis()
        .into_iter()
        .map(|v| v.into_iter().map(|x| C64::new(x, 0.0)).collect())
        .collect();
    let w = 1.0 / elements.len() as f64;
    let apply = |x: &[C64]| -> Vec<C64> {
        let parts: Vec<Vec<C64>> =
            elements.par_iter().map(|g| apply_rho_kk(g, k, x).expect("dimensions checked")).collect();
        let mut y = vec![C64::new(0.0, 0.0); dim];
        for p in parts {
            for (o, v) in y.iter_mut().zip(p) {
                *o += v * w;
            }
        }
        if lazy {
            for (o, v) in y.iter_mut().zip(x) {
                *o = *o * 0.5 + v * 0.5;
            }
        }
        y
    };
    if elements.iter().any(|g| g.rows().checked_pow(2 * k as u32) != Some(dim)) {
        return Err(Error::Shape("elements do not match the projector dimension".into()));
    }
    Ok(lanczos_extremes(dim, apply, &basis, opts)?.abs_max())
}
