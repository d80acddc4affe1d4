//! Desk-scale checks of the quantitative statements behind the construction.
//!
//! Every check returns a [`CheckReport`]. Reports are deterministic given
//! their parameters and seed; wall-clock time is only recorded on request.

use std::time::Instant;

use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_rational::{BigRational, Rational64};
use num_traits::{One, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::caps::Caps;
use crate::error::{Error, Result};
use crate::expanders::RegularGraph;
use crate::linalg::{
    eigvalsh, haar_sample, lanczos_extremes, matrix_norm, partial_trace, ComplexMatrix, GroupTag, LanczosOptions,
    NormKind, Rng, ScalarStats, C64, MC_CHUNK,
};
use crate::schur_weyl::{
    enumerate_matchings, haar_projector, matching_gram, simple_3bit_perms, wk_moment, HaarProjector, Matching,
    PermSource,
};
use crate::walks::{f_cascade, f_mu, Cascade, StagePlan};

/// A two-stage cascade small enough to materialize, used by the contraction
/// and explicitness checks.
pub const SMALL_PLAN: [StagePlan; 2] = [
    StagePlan::Expander { degree: 4, mu_target: 0.95 },
    StagePlan::Expander { degree: 4, mu_target: 0.95 },
];

/// Outcome of one check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub schema: u32,
    pub name: String,
    pub parameters: Value,
    pub paper_bound: f64,
    pub measured: f64,
    pub tolerance: f64,
    pub pass: bool,
    /// Standard error of `measured` for Monte-Carlo checks.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub stderr: Option<f64>,
    #[serde(skip_serializing_if = "Value::is_null", default)]
    pub details: Value,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub runtime_ms: Option<u64>,
}

impl CheckReport {
    fn new(name: &str, parameters: Value, paper_bound: f64, measured: f64, tolerance: f64, pass: bool) -> CheckReport {
        CheckReport {
            schema: 1,
            name: name.to_string(),
            parameters,
            paper_bound,
            measured,
            tolerance,
            pass,
            stderr: None,
            details: Value::Null,
            runtime_ms: None,
        }
    }

    fn with_details(mut self, details: Value) -> CheckReport {
        self.details = details;
        self
    }

    /// Stamps the elapsed time since `start`.
    pub fn timed(mut self, start: Instant) -> CheckReport {
        self.runtime_ms = Some(start.elapsed().as_millis() as u64);
        self
    }
}

fn rat(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// Exact `sum_M <Phi_M | Phi_{M_0}>` over all matchings of `[2k]`.
pub fn kappa_gram_sum(d: usize, k: usize, caps: &Caps) -> Result<BigRational> {
    let all = enumerate_matchings(k, false, caps)?;
    let m0 = Matching::identity(k);
    Ok(all.iter().fold(BigRational::zero(), |acc, m| acc + matching_gram(m, &m0, d)))
}

/// `prod_{i=1}^{k-1} (1 + 2i/D)`.
pub fn kappa_product(d: usize, k: usize) -> BigRational {
    (1..k).fold(BigRational::one(), |acc, i| {
        acc * BigRational::new(BigInt::from(d + 2 * i), BigInt::from(d))
    })
}

/// Exact matching-sum identity, plus the `1 + (10/9) k^2 / D` bound when
/// `9 k^2 <= D`. Zero tolerance.
pub fn check_kappa_gram(d: usize, k: usize, caps: &Caps) -> Result<CheckReport> {
    if k == 0 || k > 6 {
        return Err(Error::Precondition(format!("kappa check needs 1 <= k <= 6, got {k}")));
    }
    if d < 2 {
        return Err(Error::Domain(format!("local dimension must be at least 2, got {d}")));
    }
    let sum = kappa_gram_sum(d, k, caps)?;
    let product = kappa_product(d, k);
    let identity_holds = sum == product;
    let regime = 9 * k * k <= d;
    let bound = BigRational::one() + BigRational::new(BigInt::from(10 * k * k), BigInt::from(9 * d));
    let bound_holds = !regime || sum <= bound;
    let report = CheckReport::new(
        "kappa",
        json!({ "D": d, "k": k }),
        rat(&product),
        rat(&sum),
        0.0,
        identity_holds && bound_holds,
    );
    Ok(report.with_details(json!({
        "sum": sum.to_string(),
        "product": product.to_string(),
        "exact_equality": identity_holds,
        "kappa_regime": regime,
        "kappa_bound": bound.to_string(),
        "kappa_bound_holds": bound_holds,
    })))
}

/// Coefficients `(c2, c3, c4)` of the averaged conjugated swap on
/// `C^D (x) C^D`, `D = 2^{m-1}`.
pub fn reptheory_coefficients(group: GroupTag, d: usize) -> Result<[Rational64; 3]> {
    if d < 4 || d % 2 != 0 {
        return Err(Error::Domain(format!("coefficient formulas need an even D >= 4, got {d}")));
    }
    let d = d as i64;
    let r = |a: i64, b: i64| Rational64::new(a, b);
    match group {
        GroupTag::SO => {
            let den = (d - 1) * (d + 2);
            Ok([r(d / 2 - 1, den), r(3 * d / 2 + 1, den), r((d / 2 - 1) * (d + 3), den)])
        }
        GroupTag::SU => {
            let den = (d - 1) * (d + 1);
            Ok([r(0, 1), r(3 * d / 2, den), r(d * d / 2 - 2, den)])
        }
        other => Err(Error::Domain(format!("coefficients are only defined for SO and SU, not {other}"))),
    }
}

/// `SWAP` on all but the last qubit of two copies of `C^D`.
pub fn partial_swap(d: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(d * d, d * d, |row, col| {
        let (x, y) = (row / d, row % d);
        let (u, v) = (col / d, col % d);
        // |u, v> -> |(v_K, u_m), (u_K, v_m)>
        let hit = x == ((v & !1) | (u & 1)) && y == ((u & !1) | (v & 1));
        if hit {
            C64::new(1.0, 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    })
}

/// `c2 Q2 + c3 Q3 + c4 Q4` with `Q2 = D |Phi><Phi|`, `Q3 = Id`, `Q4 = SWAP`.
pub fn reptheory_target(coeffs: &[f64; 3], d: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(d * d, d * d, |row, col| {
        let (a, b) = (row / d, row % d);
        let (c, e) = (col / d, col % d);
        let mut x = 0.0;
        if a == b && c == e {
            x += coeffs[0];
        }
        if row == col {
            x += coeffs[1];
        }
        if a == e && b == c {
            x += coeffs[2];
        }
        C64::new(x, 0.0)
    })
}

/// `(g (x) g) S (g (x) g)^dagger` as `sum_{i,j} A_ij (x) A_ji`.
pub fn conjugated_swap(g: &ComplexMatrix) -> ComplexMatrix {
    let d = g.rows();
    let a = pair_blocks(g);
    let half = d / 2;
    ComplexMatrix::from_fn(d * d, d * d, |row, col| {
        let (x, y) = (row / d, row % d);
        let (u, v) = (col / d, col % d);
        let mut s = C64::new(0.0, 0.0);
        for i in 0..half {
            for j in 0..half {
                s += a[i * half + j][x * d + u] * a[j * half + i][y * d + v];
            }
        }
        s
    })
}

/// `A_ij = sum_b g[:, (i,b)] g[:, (j,b)]^dagger`, flattened row-major, in
/// order `i * D/2 + j`.
fn pair_blocks(g: &ComplexMatrix) -> Vec<Vec<C64>> {
    let d = g.rows();
    let half = d / 2;
    let mut out = Vec::with_capacity(half * half);
    for i in 0..half {
        for j in 0..half {
            let mut blk = vec![C64::new(0.0, 0.0); d * d];
            for b in 0..2 {
                let (ci, cj) = (2 * i + b, 2 * j + b);
                for r in 0..d {
                    let left = g[(r, ci)];
                    for c in 0..d {
                        blk[r * d + c] += left * g[(c, cj)].conj();
                    }
                }
            }
            out.push(blk);
        }
    }
    out
}

/// Monte-Carlo mean of the conjugated partial swap. The reshuffled sum
/// `sum vec(A_ij) vec(A_ji)^T` is accumulated with real matrix products.
pub fn conjugated_swap_mc(group: GroupTag, d: usize, trials: usize, seed: u64) -> Result<ComplexMatrix> {
    if trials == 0 {
        return Err(Error::Domain("Monte-Carlo estimate needs at least one trial".into()));
    }
    let real = group.is_real();
    let dd = d * d;
    let pairs = (d / 2) * (d / 2);
    let chunk = |c: usize| -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        let mut rng = Rng::stream(seed, c as u64);
        let count = MC_CHUNK.min(trials - c * MC_CHUNK);
        let mut xr = DMatrix::zeros(count * pairs, dd);
        let mut yr = DMatrix::zeros(count * pairs, dd);
        let mut xi = DMatrix::zeros(if real { 0 } else { count * pairs }, dd);
        let mut yi = DMatrix::zeros(if real { 0 } else { count * pairs }, dd);
        for s in 0..count {
            let g = haar_sample(group, d, &mut rng)?;
            let a = pair_blocks(&g);
            let half = d / 2;
            for i in 0..half {
                for j in 0..half {
                    let row = s * pairs + i * half + j;
                    let (aij, aji) = (&a[i * half + j], &a[j * half + i]);
                    for e in 0..dd {
                        xr[(row, e)] = aij[e].re;
                        yr[(row, e)] = aji[e].re;
                        if !real {
                            xi[(row, e)] = aij[e].im;
                            yi[(row, e)] = aji[e].im;
                        }
                    }
                }
            }
        }
        let mut re = DMatrix::zeros(dd, dd);
        let mut im = DMatrix::zeros(dd, dd);
        re.gemm_tr(1.0, &xr, &yr, 0.0);
        if !real {
            re.gemm_tr(-1.0, &xi, &yi, 1.0);
            im.gemm_tr(1.0, &xr, &yi, 0.0);
            im.gemm_tr(1.0, &xi, &yr, 1.0);
        }
        Ok((re, im))
    };
    let parts: Vec<(DMatrix<f64>, DMatrix<f64>)> =
        (0..trials.div_ceil(MC_CHUNK)).into_par_iter().map(chunk).collect::<Result<_>>()?;
    let mut re = DMatrix::zeros(dd, dd);
    let mut im = DMatrix::zeros(dd, dd);
    for (r, i) in parts {
        re += r;
        im += i;
    }
    let w = 1.0 / trials as f64;
    Ok(ComplexMatrix::from_fn(dd, dd, |row, col| {
        let (a, b) = (row / d, row % d);
        let (c, e) = (col / d, col % d);
        let (p, q) = (a * d + c, b * d + e);
        C64::new(re[(p, q)], im[(p, q)]) * w
    }))
}

fn relative_frobenius(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<f64> {
    Ok(a.try_sub(b)?.frobenius_norm() / b.frobenius_norm())
}

/// Averaged conjugated partial swap against its closed form, by Monte Carlo
/// and exactly through the degree-2 Haar projector.
pub fn check_reptheory_coeffs(group: GroupTag, m: usize, trials: usize, seed: u64, caps: &Caps) -> Result<CheckReport> {
    if !(4..=5).contains(&m) {
        return Err(Error::Precondition(format!("coefficient check runs at m = 4 or 5, got {m}")));
    }
    let d = 1usize << (m - 1);
    let coeffs = reptheory_coefficients(group, d)?;
    let cf = coeffs.map(|c| *c.numer() as f64 / *c.denom() as f64);
    let target = reptheory_target(&cf, d);

    let mc = conjugated_swap_mc(group, d, trials, seed)?;
    let mc_err = relative_frobenius(&mc, &target)?;

    let proj = haar_projector(group, d, 2, caps)?;
    let exact = ComplexMatrix::from_vec(d * d, d * d, proj.apply(partial_swap(d).data()))?;
    let exact_err = relative_frobenius(&exact, &target)?;

    let tolerance = 0.02f64.max(5.0 / (trials as f64).sqrt());
    let pass = mc_err <= tolerance && exact_err <= 1e-9;
    let report = CheckReport::new(
        "reptheory",
        json!({ "group": group.name(), "m": m, "D": d, "trials": trials, "seed": seed }),
        tolerance,
        mc_err,
        tolerance,
        pass,
    );
    Ok(report.with_details(json!({
        "c2": coeffs[0].to_string(),
        "c3": coeffs[1].to_string(),
        "c4": coeffs[2].to_string(),
        "exact_relative_error": exact_err,
    })))
}

/// Random element of the Lie algebra of `group` on `C^dim` with unit
/// Frobenius norm.
pub fn random_lie_element(group: GroupTag, dim: usize, rng: &mut Rng) -> Result<ComplexMatrix> {
    let real = match group {
        GroupTag::SO => true,
        GroupTag::SU => false,
        other => return Err(Error::Domain(format!("Lie algebra sampling is for SO and SU, not {other}"))),
    };
    let x = crate::linalg::ginibre(dim, real, rng);
    let mut a = x.try_sub(&x.adjoint())?;
    let shift = a.trace() / dim as f64;
    for i in 0..dim {
        a[(i, i)] -= shift;
    }
    let n = a.frobenius_norm();
    Ok(a.scale_real(1.0 / n))
}

/// `(1 - delta) / (2 - delta)` with `delta = 2^{2-m}`.
pub fn trace_lemma_bound(m: usize) -> f64 {
    let delta = 4.0 / (1u64 << m) as f64;
    (1.0 - delta) / (2.0 - delta)
}

/// `|| tr_last((Id (x) g) A (Id (x) g^dagger)) ||_F^2` with `g` on every qubit
/// but the first.
pub fn trace_statistic(a: &ComplexMatrix, g: &ComplexMatrix, m: usize) -> Result<f64> {
    let big = crate::linalg::tensor(&ComplexMatrix::identity(2), g)?;
    let b = &(&big * a) * &big.adjoint();
    let t = partial_trace(&b, m, m - 1)?;
    Ok(t.frobenius_norm().powi(2))
}

/// Monte-Carlo mean of [`trace_statistic`] for a fixed random `A`, passing
/// when it is at least the bound minus three standard errors.
pub fn check_trace_lemma(group: GroupTag, m: usize, trials: usize, seed: u64) -> Result<CheckReport> {
    if m < 4 {
        return Err(Error::Precondition(format!("trace check needs m >= 4, got {m}")));
    }
    if m > 8 {
        return Err(Error::Size(format!("trace check is dense; m = {m} is too large")));
    }
    if trials < 2 {
        return Err(Error::Domain("trace check needs at least two trials".into()));
    }
    let dim = 1usize << m;
    let a = random_lie_element(group, dim, &mut Rng::stream(seed, u64::MAX))?;
    let stats = trace_stats(&a, group, m, trials, seed)?;
    let bound = trace_lemma_bound(m);
    let (mean, se) = (stats.mean(), stats.stderr());
    let mut report = CheckReport::new(
        "trace",
        json!({ "group": group.name(), "m": m, "trials": trials, "seed": seed }),
        bound,
        mean,
        3.0 * se,
        mean >= bound - 3.0 * se,
    );
    report.stderr = Some(se);
    Ok(report)
}

/// Sample statistics of [`trace_statistic`] over Haar `g`.
pub fn trace_stats(a: &ComplexMatrix, group: GroupTag, m: usize, trials: usize, seed: u64) -> Result<ScalarStats> {
    let sub = 1usize << (m - 1);
    let parts: Vec<ScalarStats> = (0..trials.div_ceil(MC_CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut rng = Rng::stream(seed, c as u64);
            let mut s = ScalarStats::default();
            for _ in 0..MC_CHUNK.min(trials - c * MC_CHUNK) {
                let g = haar_sample(group, sub, &mut rng)?;
                s.push(trace_statistic(a, &g, m)?);
            }
            Ok(s)
        })
        .collect::<Result<_>>()?;
    Ok(parts.into_iter().fold(ScalarStats::default(), |mut acc, p| {
        acc.merge(p);
        acc
    }))
}

/// One random instance of the near-orthogonal projector inequality.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProjectorInstance {
    pub m: usize,
    pub dim: usize,
    pub rank: usize,
    /// Rank of the common sub-projector (0 for the plain lemma).
    pub common: usize,
    /// `max_{i != j} ||P~_i P~_j||`.
    pub eps: f64,
    /// `||avg P_i - P||`.
    pub norm: f64,
    pub bound: f64,
}

/// `1/m + min(sqrt(eps), m eps)`.
pub fn projector_bound(m: usize, eps: f64) -> f64 {
    1.0 / m as f64 + eps.sqrt().min(m as f64 * eps)
}

fn orthonormalize(v: DMatrix<f64>) -> DMatrix<f64> {
    let cols = v.ncols();
    let q = v.qr().q();
    q.columns(0, cols).into_owned()
}

fn max_pair_overlap(blocks: &[DMatrix<f64>]) -> f64 {
    let mut eps = 0.0f64;
    for i in 0..blocks.len() {
        for j in 0..blocks.len() {
            if i != j {
                let overlap = blocks[i].transpose() * &blocks[j];
                eps = eps.max(overlap.singular_values().max());
            }
        }
    }
    eps
}

/// Instance `t` of the projector family drawn from `seed`.
///
/// The subspaces are disjoint column blocks of a random orthogonal matrix,
/// each perturbed by a Gaussian of random strength, so `eps` ranges from
/// nearly 0 to order 1. With `with_common`, a shared subspace is added to
/// every projector and the shifted operator `avg P_i - P` is measured.
pub fn projector_instance(seed: u64, t: u64, with_common: bool) -> ProjectorInstance {
    let mut rng = Rng::stream(seed, t);
    let m = 2 + rng.below(5);
    let common = if with_common { 1 + rng.below(4) } else { 0 };
    let dim = (m + common + rng.below(64 - m - common + 1)).min(64);
    let rank = 1 + rng.below((dim - common) / m);
    let q = orthonormalize(DMatrix::from_fn(dim, dim, |_, _| rng.normal()));
    let u = q.columns(0, common).into_owned();
    let strength = 0.6 * rng.uniform();
    let blocks: Vec<DMatrix<f64>> = (0..m)
        .map(|i| {
            let base = q.columns(common + i * rank, rank).into_owned();
            let noise = DMatrix::from_fn(dim, rank, |_, _| rng.normal() * strength / (dim as f64).sqrt());
            let mut v = orthonormalize(base + noise);
            if common > 0 {
                // Keep the block orthogonal to the shared subspace.
                v = orthonormalize(&v - &u * (u.transpose() * &v));
            }
            v
        })
        .collect();
    let eps = max_pair_overlap(&blocks);
    // With a common part, avg P_i - P equals the average over the blocks.
    let full: Vec<DMatrix<f64>> = if common > 0 {
        blocks.iter().map(|b| {
            let mut joined = DMatrix::zeros(dim, common + rank);
            joined.columns_mut(0, common).copy_from(&u);
            joined.columns_mut(common, rank).copy_from(b);
            joined
        }).collect()
    } else {
        blocks.clone()
    };
    let norm = shifted_norm(&full, if common > 0 { Some(&u) } else { None });
    ProjectorInstance { m, dim, rank, common, eps, norm, bound: projector_bound(m, eps) }
}

/// `|| avg_i V_i V_i^T - U U^T ||`.
fn shifted_norm(blocks: &[DMatrix<f64>], common: Option<&DMatrix<f64>>) -> f64 {
    let dim = blocks[0].nrows();
    let mut avg = DMatrix::<f64>::zeros(dim, dim);
    for b in blocks {
        avg += b * b.transpose();
    }
    avg /= blocks.len() as f64;
    if let Some(u) = common {
        avg -= u * u.transpose();
    }
    avg.symmetric_eigen().eigenvalues.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Random instances of the averaged-projector inequality, half of them with a
/// common sub-projector. `measured` is the worst `norm - bound`.
pub fn check_projector_lemma(instances: usize, seed: u64) -> Result<CheckReport> {
    if instances == 0 {
        return Err(Error::Domain("projector check needs at least one instance".into()));
    }
    let all: Vec<ProjectorInstance> =
        (0..instances as u64).map(|t| projector_instance(seed, t, t % 2 == 1)).collect();
    let worst = all.iter().map(|p| p.norm - p.bound).fold(f64::NEG_INFINITY, f64::max);
    let failures = all.iter().filter(|p| p.norm > p.bound + 1e-9).count();
    let report = CheckReport::new(
        "projs",
        json!({ "instances": instances, "seed": seed }),
        0.0,
        worst,
        1e-9,
        failures == 0,
    );
    let max_eps = all.iter().map(|p| p.eps).fold(0.0, f64::max);
    Ok(report.with_details(json!({ "failures": failures, "max_eps": max_eps })))
}

/// `P_i`: the level-`(m-1)` projector on every qubit but `i` of each copy,
/// identity on qubit `i`.
pub struct LocalProjector<'a> {
    inner: &'a HaarProjector,
    /// `gather[b][r]` is the full index with reduced index `r` and qubit-`i`
    /// bits `b`.
    gather: Vec<Vec<usize>>,
}

impl<'a> LocalProjector<'a> {
    pub fn new(inner: &'a HaarProjector, m: usize, i: usize) -> LocalProjector<'a> {
        let copies = 2 * inner.k;
        let full = 1usize << (m * copies);
        let reduced = 1usize << ((m - 1) * copies);
        let mut gather = vec![vec![0usize; reduced]; 1 << copies];
        let shift = m - 1 - i;
        for idx in 0..full {
            let (mut r, mut b) = (0usize, 0usize);
            for c in 0..copies {
                let x = (idx >> (m * (copies - 1 - c))) & ((1 << m) - 1);
                let bit = (x >> shift) & 1;
                let low = x & ((1 << shift) - 1);
                let rest = ((x >> (shift + 1)) << shift) | low;
                r = (r << (m - 1)) | rest;
                b = (b << 1) | bit;
            }
            gather[b][r] = idx;
        }
        LocalProjector { inner, gather }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        for g in &self.gather {
            let col: Vec<f64> = g.iter().map(|&p| x[p]).collect();
            for (&p, v) in g.iter().zip(self.inner.apply_real(&col)) {
                out[p] = v;
            }
        }
        out
    }
}

/// Closed-form small-`m` bound `(1 - (1 - 1/m)(1 - 2^{2-m})/(4 - 2^{3-m}))^{1/4}`.
pub fn small_m_closed_form(m: usize) -> f64 {
    let m_f = m as f64;
    let p = (1u64 << m) as f64;
    (1.0 - (1.0 - 1.0 / m_f) * (1.0 - 4.0 / p) / (4.0 - 8.0 / p)).powf(0.25)
}

/// `1/m + sqrt(10) k m / 2^{m/2}`.
pub fn large_m_envelope(m: usize, k: usize) -> f64 {
    1.0 / m as f64 + 10f64.sqrt() * (k * m) as f64 / 2f64.powf(m as f64 / 2.0)
}

/// Whether `k <= 2^{m/2} / (sqrt(10) m^2)`.
pub fn large_m_applies(m: usize, k: usize) -> bool {
    (k as f64) <= 2f64.powf(m as f64 / 2.0) / (10f64.sqrt() * (m * m) as f64)
}

/// The small-`m` constant.
pub const SMALL_M_BOUND: f64 = 0.96;

/// `|| avg_i P_i - Pi^{(m)} ||` by matrix-free Lanczos, together with the
/// pairwise overlap `eps` and the image-containment residual.
pub fn check_tau_bounds(group: GroupTag, m: usize, k: usize, caps: &Caps) -> Result<CheckReport> {
    if m < 4 {
        return Err(Error::Precondition(format!("tau check needs m >= 4, got {m}")));
    }
    if !matches!(group, GroupTag::SO | GroupTag::SU) {
        return Err(Error::Domain(format!("tau check is for SO and SU, not {group}")));
    }
    let bits = 2 * m * k;
    if bits >= usize::BITS as usize || (1usize << bits) > caps.vector_dim {
        return Err(Error::Size(format!("2^{bits} amplitudes exceed the vector cap {}", caps.vector_dim)));
    }
    let dim = 1usize << bits;
    let top = haar_projector(group, 1 << m, k, caps)?;
    let sub = haar_projector(group, 1 << (m - 1), k, caps)?;
    let locals: Vec<LocalProjector> = (0..m).map(|i| LocalProjector::new(&sub, m, i)).collect();
    let basis = top.orthonormal_basis();

    let containment = basis
        .iter()
        .flat_map(|v| {
            locals.iter().map(move |p| {
                p.apply(v).iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
            })
        })
        .fold(0.0f64, f64::max);

    let opts = LanczosOptions { max_steps: 300, tol: 1e-10, seed: 0x7a0 };
    let avg = |x: &[f64]| -> Vec<f64> {
        let mut y = vec![0.0; dim];
        for p in &locals {
            for (o, v) in y.iter_mut().zip(p.apply(x)) {
                *o += v;
            }
        }
        let pi = top.apply_real(x);
        for (o, v) in y.iter_mut().zip(pi) {
            *o = *o / m as f64 - v;
        }
        y
    };
    let measured = lanczos_extremes(dim, avg, &basis, &opts)?.abs_max();

    // eps^2 = || P_last (P_first - Pi) P_last ||.
    let (first, last) = (&locals[0], &locals[m - 1]);
    let sandwich = |x: &[f64]| -> Vec<f64> {
        let y = last.apply(x);
        let mut z = first.apply(&y);
        for (o, v) in z.iter_mut().zip(top.apply_real(&y)) {
            *o -= v;
        }
        last.apply(&z)
    };
    let eps = lanczos_extremes(dim, sandwich, &basis, &opts)?.max.max(0.0).sqrt();

    let envelope = large_m_envelope(m, k);
    let applies = large_m_applies(m, k);
    let bound = if applies { SMALL_M_BOUND.min(envelope) } else { SMALL_M_BOUND };
    let overlap_bound = projector_bound(m, eps);
    let pass = measured <= bound + 1e-9 && measured <= overlap_bound + 1e-9 && containment <= 1e-9;
    let report = CheckReport::new(
        "tau",
        json!({ "group": group.name(), "m": m, "k": k }),
        bound,
        measured,
        1e-9,
        pass,
    );
    Ok(report.with_details(json!({
        "small_m_closed_form": small_m_closed_form(m),
        "large_m_envelope": envelope,
        "large_m_precondition": applies,
        "eps": eps,
        "overlap_bound": overlap_bound,
        "containment_residual": containment,
    })))
}

/// Gap of the simple 3-bit permutations on `2^n` points under `W^k`.
pub fn perm_gap(n: usize, k: usize, caps: &Caps) -> Result<f64> {
    let perms = simple_3bit_perms(n, caps)?;
    let size = 1usize << n;
    let moment = wk_moment(&PermSource::Multiset(&perms), size, k, caps)?;
    let uniform = wk_moment(&PermSource::UniformSymmetric, size, k, caps)?;
    let diff = moment.try_sub(&uniform)?;
    if diff.is_hermitian(1e-12) {
        Ok(eigvalsh(&diff)?.iter().fold(0.0f64, |m, x| m.max(x.abs())))
    } else {
        matrix_norm(&diff, NormKind::Operator)
    }
}

/// The permutation moment gap must be strictly below one.
pub fn check_perm_gap(n: usize, k: usize, caps: &Caps) -> Result<CheckReport> {
    let gap = perm_gap(n, k, caps)?;
    Ok(CheckReport::new("perm", json!({ "n": n, "N": 1usize << n, "k": k }), 1.0, gap, 0.0, gap < 1.0))
}

/// A family of `count` contractions on `C^dim` sharing a random common
/// component of random weight, so that their average has a nontrivial norm.
pub fn contraction_family(count: usize, dim: usize, rng: &mut Rng) -> Result<Vec<ComplexMatrix>> {
    let shared = haar_sample(GroupTag::U, dim, rng)?;
    let t = rng.uniform();
    (0..count)
        .map(|_| {
            let own = haar_sample(GroupTag::U, dim, rng)?;
            let mut x = shared.scale_real(t);
            x.add_scaled(&own, C64::new(1.0 - t, 0.0));
            let n = matrix_norm(&x, NormKind::Operator)?;
            Ok(x.scale_real(rng.uniform().max(0.5) / n.max(1.0)))
        })
        .collect()
}

fn average(u: &[ComplexMatrix]) -> ComplexMatrix {
    let mut acc = ComplexMatrix::zeros(u[0].rows(), u[0].cols());
    let w = C64::new(1.0 / u.len() as f64, 0.0);
    for x in u {
        acc.add_scaled(x, w);
    }
    acc
}

/// `avg_{(i,j) in E} U_j^dagger U_i`.
pub fn graph_square_average(g: &RegularGraph, u: &[ComplexMatrix]) -> Result<ComplexMatrix> {
    if u.len() != g.n {
        return Err(Error::Shape(format!("{} matrices for a graph on {} vertices", u.len(), g.n)));
    }
    let adj: Vec<ComplexMatrix> = u.iter().map(ComplexMatrix::adjoint).collect();
    let dim = u[0].rows();
    // Group by source vertex: sum_j U_j^dagger over its ports, then one product.
    let mut acc = ComplexMatrix::zeros(dim, dim);
    for v in 0..g.n {
        let mut left = ComplexMatrix::zeros(dim, dim);
        for port in 0..g.d {
            left.add_scaled(&adj[g.rotate(v, port).0], C64::new(1.0, 0.0));
        }
        acc.add_scaled(&(&left * &u[v]), C64::new(1.0, 0.0));
    }
    Ok(acc.scale_real(1.0 / g.edge_count() as f64))
}

/// One derandomized-squaring step on random families: `measured` is the worst
/// `||avg q_G(U)|| - f_mu(||avg U||)`.
pub fn check_contraction(g: &RegularGraph, families: usize, dim: usize, seed: u64) -> Result<CheckReport> {
    let mu = g.mu().ok_or_else(|| Error::Domain("contraction check needs a certified graph".into()))?;
    let worst = (0..families as u64)
        .map(|f| {
            let mut rng = Rng::stream(seed, f);
            let u = contraction_family(g.n, dim, &mut rng)?;
            let lambda = matrix_norm(&average(&u), NormKind::Operator)?;
            let sq = matrix_norm(&graph_square_average(g, &u)?, NormKind::Operator)?;
            Ok(sq - f_mu(mu, lambda))
        })
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(CheckReport::new(
        "contraction",
        json!({ "n": g.n, "d": g.d, "mu": mu, "families": families, "dim": dim, "seed": seed }),
        0.0,
        worst,
        1e-9,
        worst <= 1e-9,
    ))
}

/// The full cascade on random families: `measured` is the worst
/// `||avg Q(U)|| - F_mu(||avg U||)` over families.
pub fn check_cascade_contraction(cascade: &Cascade, families: usize, dim: usize, seed: u64) -> Result<CheckReport> {
    let mus = cascade.mus()?;
    let monomials = cascade.materialize()?;
    let worst = (0..families as u64)
        .map(|f| {
            let mut rng = Rng::stream(seed, f);
            let u = contraction_family(cascade.c, dim, &mut rng)?;
            let lambda = matrix_norm(&average(&u), NormKind::Operator)?;
            let q = matrix_norm(&crate::walks::eval_average(&monomials, &u)?, NormKind::Operator)?;
            Ok(q - f_cascade(&mus, lambda))
        })
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(CheckReport::new(
        "cascade",
        json!({ "c": cascade.c, "depth": cascade.depth(), "mus": mus, "families": families, "dim": dim, "seed": seed }),
        0.0,
        worst,
        1e-9,
        worst <= 1e-9,
    ))
}

/// `walk_symbol(i, j)` against the materialized monomials for every `(i, j)`;
/// `measured` counts mismatches.
pub fn check_explicitness(cascade: &Cascade) -> Result<CheckReport> {
    let all = cascade.materialize()?;
    let mut mismatches = 0usize;
    for (i, m) in all.iter().enumerate() {
        for (j, s) in m.symbols.iter().enumerate() {
            if cascade.walk_symbol(i, j)? != *s {
                mismatches += 1;
            }
        }
    }
    Ok(CheckReport::new(
        "explicit",
        json!({ "c": cascade.c, "depth": cascade.depth(), "monomials": all.len(), "length": cascade.length() }),
        0.0,
        mismatches as f64,
        0.0,
        mismatches == 0,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kappa_small_cases() {
        let caps = Caps::default();
        for d in [4, 8, 64] {
            let s = kappa_gram_sum(d, 2, &caps).unwrap();
            assert_eq!(s, BigRational::one() + BigRational::new(BigInt::from(2), BigInt::from(d)));
            assert_eq!(kappa_gram_sum(d, 1, &caps).unwrap(), BigRational::one());
        }
        let r = check_kappa_gram(64, 2, &caps).unwrap();
        assert!(r.pass);
        assert!(check_kappa_gram(64, 7, &caps).is_err());
    }

    #[test]
    fn coefficients_at_eight() {
        let [c2, c3, c4] = reptheory_coefficients(GroupTag::SO, 8).unwrap();
        assert_eq!((c2, c3, c4), (Rational64::new(3, 70), Rational64::new(13, 70), Rational64::new(33, 70)));
        let su = reptheory_coefficients(GroupTag::SU, 8).unwrap();
        assert!(su[2] >= c4);
        assert_eq!(su[0], Rational64::new(0, 1));
    }

    #[test]
    fn swap_target_trace() {
        // tr(c2 Q2 + c3 Q3 + c4 Q4) = tr(S) = 2D for every D.
        for d in [4usize, 8, 16] {
            for group in [GroupTag::SO, GroupTag::SU] {
                let c = reptheory_coefficients(group, d).unwrap().map(|c| *c.numer() as f64 / *c.denom() as f64);
                let t = reptheory_target(&c, d).trace().re;
                assert!((t - 2.0 * d as f64).abs() < 1e-12);
            }
            assert!((partial_swap(d).trace().re - 2.0 * d as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn conjugated_swap_matches_direct_product() {
        let mut rng = Rng::new(3);
        let d = 8;
        let g = haar_sample(GroupTag::SU, d, &mut rng).unwrap();
        let gg = crate::linalg::tensor(&g, &g).unwrap();
        let direct = &(&gg * &partial_swap(d)) * &gg.adjoint();
        assert!(conjugated_swap(&g).max_abs_diff(&direct) < 1e-12);
    }

    #[test]
    fn mc_conjugated_swap_matches_samplewise_average() {
        let d = 4;
        let trials = 50;
        for group in [GroupTag::SO, GroupTag::SU] {
            let mc = conjugated_swap_mc(group, d, trials, 9).unwrap();
            let mut rng = Rng::stream(9, 0);
            let mut acc = ComplexMatrix::zeros(d * d, d * d);
            for _ in 0..trials {
                acc.add_scaled(&conjugated_swap(&haar_sample(group, d, &mut rng).unwrap()), C64::new(1.0 / trials as f64, 0.0));
            }
            assert!(mc.max_abs_diff(&acc) < 1e-12);
        }
    }

    #[test]
    fn lie_elements_are_in_the_algebra() {
        let mut rng = Rng::new(1);
        let a = random_lie_element(GroupTag::SU, 8, &mut rng).unwrap();
        assert!(a.try_add(&a.adjoint()).unwrap().frobenius_norm() < 1e-12);
        assert!(a.trace().norm() < 1e-12);
        assert!((a.frobenius_norm() - 1.0).abs() < 1e-12);
        let b = random_lie_element(GroupTag::SO, 8, &mut rng).unwrap();
        assert!(b.is_real(0.0));
    }

    #[test]
    fn trace_bound_values() {
        assert!((trace_lemma_bound(4) - 3.0 / 7.0).abs() < 1e-15);
        assert!(small_m_closed_form(4) <= SMALL_M_BOUND);
    }

    #[test]
    fn orthogonal_projectors_average_to_one_over_m() {
        let q = orthonormalize(DMatrix::from_fn(6, 6, |r, c| ((r * 7 + c * 3) % 5) as f64 + if r == c { 4.0 } else { 0.0 }));
        let blocks: Vec<DMatrix<f64>> = (0..3).map(|i| q.columns(2 * i, 2).into_owned()).collect();
        assert!(max_pair_overlap(&blocks) < 1e-12);
        assert!((shifted_norm(&blocks, None) - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn square_average_matches_composed_monomials() {
        use crate::walks::{eval_average, q_compose, MonomialWalk};
        let g = crate::expanders::permutation_graph(6, 3, 2).unwrap();
        let mut rng = Rng::new(8);
        let u = contraction_family(6, 3, &mut rng).unwrap();
        let singles: Vec<MonomialWalk> = (0..6).map(MonomialWalk::single).collect();
        let oracle = eval_average(&q_compose(&g, &singles).unwrap(), &u).unwrap();
        assert!(graph_square_average(&g, &u).unwrap().max_abs_diff(&oracle) < 1e-14);
    }

    #[test]
    fn contraction_families_are_contractive() {
        let mut rng = Rng::new(4);
        for x in contraction_family(10, 4, &mut rng).unwrap() {
            assert!(matrix_norm(&x, NormKind::Operator).unwrap() <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn local_projector_is_a_projector() {
        let caps = Caps::default();
        let sub = haar_projector(GroupTag::SU, 4, 1, &caps).unwrap();
        let p = LocalProjector::new(&sub, 3, 1);
        let mut rng = Rng::new(5);
        let x: Vec<f64> = (0..64).map(|_| rng.normal()).collect();
        let once = p.apply(&x);
        let twice = p.apply(&once);
        assert!(once.iter().zip(&twice).all(|(a, b)| (a - b).abs() < 1e-12));
    }

    #[test]
    fn local_projector_on_first_qubit_is_a_tensor_product() {
        // With i = 0 the kept qubit is the most significant one in each copy.
        let caps = Caps::default();
        let sub = haar_projector(GroupTag::SU, 2, 1, &caps).unwrap();
        let p = LocalProjector::new(&sub, 2, 0);
        // Copy layout (q0 q1)(q0' q1'); start from |q1 q1'> = |11>, q0 = q0' = 0.
        let mut x = vec![0.0; 16];
        x[0b0101] = 1.0;
        let y = p.apply(&x);
        // The pair (q1, q1') is projected onto |Phi>.
        assert!((y[0b0000] - 0.5).abs() < 1e-12);
        assert!((y[0b0101] - 0.5).abs() < 1e-12);
        assert!(y[0b0100].abs() < 1e-12);
    }
}
