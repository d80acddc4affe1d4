//! Perfect matchings of `[2k]`, the matching states they index, exact Haar
//! moment projectors, and the permutation representation on distinct tuples.
//!
//! Tensor positions `0..k` carry copies of `g` and positions `k..2k` copies of
//! its conjugate, so the identity matching `{(i, k+i)}` gives the state
//! proportional to `vec(Id)`.

use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::caps::Caps;
use crate::error::{Error, Result};
use crate::linalg::{ComplexMatrix, GroupTag, C64};

/// Gram matrices up to this many matchings are inverted exactly.
pub const EXACT_GRAM_LIMIT: usize = 15;
/// Largest condition number accepted by the floating-point Gram inverse.
pub const GRAM_CONDITION_LIMIT: f64 = 1e10;

/// A perfect matching of `[2k]` in canonical form: pairs `(lo, hi)` with
/// `lo < hi`, sorted by `lo`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Matching {
    pub k: usize,
    pub pairs: Vec<(usize, usize)>,
}

impl Matching {
    /// Canonicalizes and validates an arbitrary pair list.
    pub fn new(k: usize, pairs: Vec<(usize, usize)>) -> Result<Matching> {
        if pairs.len() != k {
            return Err(Error::Shape(format!("a matching of [2*{k}] has {k} pairs, got {}", pairs.len())));
        }
        let mut seen = vec![false; 2 * k];
        let mut canon: Vec<(usize, usize)> = Vec::with_capacity(k);
        for (a, b) in pairs {
            let (lo, hi) = (a.min(b), a.max(b));
            if hi >= 2 * k || lo == hi || seen[lo] || seen[hi] {
                return Err(Error::Shape(format!("({a}, {b}) does not extend a perfect matching")));
            }
            seen[lo] = true;
            seen[hi] = true;
            canon.push((lo, hi));
        }
        canon.sort_unstable();
        Ok(Matching { k, pairs: canon })
    }

    /// `{(i, k+i)}`, the matching whose state is proportional to `vec(Id)`.
    pub fn identity(k: usize) -> Matching {
        Matching { k, pairs: (0..k).map(|i| (i, k + i)).collect() }
    }

    /// Every pair joins a `g` position to a conjugate position.
    pub fn is_bipartite(&self) -> bool {
        self.pairs.iter().all(|&(lo, hi)| lo < self.k && hi >= self.k)
    }

    /// `partner[p]` is the position matched to `p`.
    pub fn partners(&self) -> Vec<usize> {
        let mut partner = vec![0; 2 * self.k];
        for &(lo, hi) in &self.pairs {
            partner[lo] = hi;
            partner[hi] = lo;
        }
        partner
    }
}

/// All perfect matchings of `[2k]` (or only the bipartite ones) in
/// lexicographic order of their pair lists.
pub fn enumerate_matchings(k: usize, bipartite: bool, caps: &Caps) -> Result<Vec<Matching>> {
    if k == 0 {
        return Err(Error::Domain("matchings need k >= 1".into()));
    }
    if k > caps.matching_k {
        return Err(Error::Size(format!("k = {k} exceeds the matching cap {}", caps.matching_k)));
    }
    fn extend(k: usize, used: &mut [bool], current: &mut Vec<(usize, usize)>, bip: bool, out: &mut Vec<Matching>) {
        let Some(lo) = used.iter().position(|u| !u) else {
            out.push(Matching { k, pairs: current.clone() });
            return;
        };
        used[lo] = true;
        for hi in lo + 1..2 * k {
            if used[hi] || (bip && !(lo < k && hi >= k)) {
                continue;
            }
            used[hi] = true;
            current.push((lo, hi));
            extend(k, used, current, bip, out);
            current.pop();
            used[hi] = false;
        }
        used[lo] = false;
    }
    let mut out = Vec::new();
    extend(k, &mut vec![false; 2 * k], &mut Vec::with_capacity(k), bipartite, &mut out);
    Ok(out)
}

/// Number of connected components (cycles) of the union of two matchings.
pub fn cycle_count(a: &Matching, b: &Matching) -> usize {
    assert_eq!(a.k, b.k, "matchings on different ground sets");
    let n = 2 * a.k;
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    let mut components = n;
    for &(u, v) in a.pairs.iter().chain(&b.pairs) {
        let (ru, rv) = (find(&mut parent, u), find(&mut parent, v));
        if ru != rv {
            parent[ru] = rv;
            components -= 1;
        }
    }
    components
}

/// `<Phi_a | Phi_b> = D^{cc(a u b) - k}`, exactly.
pub fn matching_gram(a: &Matching, b: &Matching, d: usize) -> BigRational {
    let deficit = a.k - cycle_count(a, b);
    BigRational::new(BigInt::one(), BigInt::from(d).pow(deficit as u32))
}

fn state_dim(d: usize, k: usize, caps: &Caps) -> Result<usize> {
    let dim = (d as u128).checked_pow(2 * k as u32).unwrap_or(u128::MAX);
    if dim > caps.vector_dim as u128 {
        return Err(Error::Size(format!("state dimension {d}^{} exceeds the vector cap {}", 2 * k, caps.vector_dim)));
    }
    Ok(dim as usize)
}

/// Basis indices on which `Phi_M` is supported (monochromatic colorings), in
/// lexicographic order of the pair colors.
pub fn phi_support(m: &Matching, d: usize, caps: &Caps) -> Result<Vec<usize>> {
    if d < 2 {
        return Err(Error::Domain("matching states need D >= 2".into()));
    }
    state_dim(d, m.k, caps)?;
    let positions = 2 * m.k;
    let weights: Vec<usize> = (0..positions).map(|p| d.pow((positions - 1 - p) as u32)).collect();
    let pair_weight: Vec<usize> = m.pairs.iter().map(|&(lo, hi)| weights[lo] + weights[hi]).collect();
    let count = d.pow(m.k as u32);
    let mut out = Vec::with_capacity(count);
    let mut colors = vec![0usize; m.k];
    for _ in 0..count {
        out.push(colors.iter().zip(&pair_weight).map(|(c, w)| c * w).sum());
        for slot in (0..m.k).rev() {
            colors[slot] += 1;
            if colors[slot] < d {
                break;
            }
            colors[slot] = 0;
        }
    }
    Ok(out)
}

/// The unit vector `D^{-k/2} sum_chi |chi>` over colorings of `[2k]` that are
/// constant on every pair of `m`.
pub fn phi_state(m: &Matching, d: usize, caps: &Caps) -> Result<Vec<C64>> {
    let dim = state_dim(d, m.k, caps)?;
    let amp = C64::new((d as f64).powf(-(m.k as f64) / 2.0), 0.0);
    let mut v = vec![C64::new(0.0, 0.0); dim];
    for i in phi_support(m, d, caps)? {
        v[i] = amp;
    }
    Ok(v)
}

/// Exact Gram matrix `<Phi_i|Phi_j>` of a matching list.
pub fn gram_matrix(ms: &[Matching], d: usize) -> Vec<Vec<BigRational>> {
    ms.iter().map(|a| ms.iter().map(|b| matching_gram(a, b, d)).collect()).collect()
}

/// Exact inverse by Gauss-Jordan elimination; `None` if singular.
pub fn rational_inverse(a: &[Vec<BigRational>]) -> Option<Vec<Vec<BigRational>>> {
    let n = a.len();
    let mut m: Vec<Vec<BigRational>> = a
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| if i == j { BigRational::one() } else { BigRational::zero() }));
            r
        })
        .collect();
    for col in 0..n {
        let pivot = (col..n).find(|&r| !m[r][col].is_zero())?;
        m.swap(col, pivot);
        let inv = m[col][col].recip();
        for x in m[col].iter_mut() {
            *x = &*x * &inv;
        }
        for r in 0..n {
            if r != col && !m[r][col].is_zero() {
                let f = m[r][col].clone();
                let pivot_row = m[col].clone();
                for (x, p) in m[r].iter_mut().zip(&pivot_row) {
                    *x = &*x - &f * p;
                }
            }
        }
    }
    Some(m.into_iter().map(|r| r[n..].to_vec()).collect())
}

/// Orthogonal projector onto the span of the matching states that are fixed
/// by every `rho^{k,k}(g)`, `g` in the group.
///
/// Stored in factored form `W G^{-1} W^T`, with `W` the (real, sparse)
/// matching states, so it can be applied without materialization.
#[derive(Clone, Debug)]
pub struct HaarProjector {
    pub group: GroupTag,
    pub d: usize,
    pub k: usize,
    pub matchings: Vec<Matching>,
    supports: Vec<Vec<usize>>,
    amp: f64,
    gram_inv: DMatrix<f64>,
}

/// Projector onto the `rho^{k,k}` invariants of `group` acting on `C^d`.
///
/// U and SU use the bipartite matchings. SO uses all matchings and requires
/// `k < d/2`; outside that range further invariants exist. O has no
/// projector here.
pub fn haar_projector(group: GroupTag, d: usize, k: usize, caps: &Caps) -> Result<HaarProjector> {
    let bipartite = match group {
        GroupTag::U | GroupTag::SU => true,
        GroupTag::SO => {
            if 2 * k >= d {
                return Err(Error::Precondition(format!(
                    "the SO({d}) projector needs k < 2^(m-1) = {}, got k = {k}",
                    d / 2
                )));
            }
            false
        }
        other => {
            return Err(Error::Domain(format!("no Haar moment projector for group {other}")));
        }
    };
    projector_from_matchings(group, enumerate_matchings(k, bipartite, caps)?, d, caps)
}

/// Projector onto the span of the given matching states.
pub fn projector_from_matchings(
    group: GroupTag,
    matchings: Vec<Matching>,
    d: usize,
    caps: &Caps,
) -> Result<HaarProjector> {
    let k = matchings.first().map(|m| m.k).ok_or_else(|| Error::Domain("empty matching list".into()))?;
    let supports = matchings.iter().map(|m| phi_support(m, d, caps)).collect::<Result<Vec<_>>>()?;
    let r = matchings.len();
    let gram = gram_matrix(&matchings, d);
    let gram_inv = if r <= EXACT_GRAM_LIMIT {
        let inv = rational_inverse(&gram)
            .ok_or_else(|| Error::NumericalRank("matching Gram matrix is singular".into()))?;
        DMatrix::from_fn(r, r, |i, j| inv[i][j].to_f64().expect("finite rational"))
    } else {
        let g = DMatrix::from_fn(r, r, |i, j| gram[i][j].to_f64().expect("finite rational"));
        let eig = g.clone().symmetric_eigen();
        let (lo, hi) = eig.eigenvalues.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &x| (lo.min(x), hi.max(x)));
        if lo <= 0.0 || hi / lo > GRAM_CONDITION_LIMIT {
            return Err(Error::NumericalRank(format!("matching Gram condition number {} too large", hi / lo)));
        }
        g.cholesky()
            .ok_or_else(|| Error::NumericalRank("matching Gram matrix is not positive definite".into()))?
            .inverse()
    };
    Ok(HaarProjector {
        group,
        d,
        k,
        matchings,
        supports,
        amp: (d as f64).powf(-(k as f64) / 2.0),
        gram_inv,
    })
}

impl HaarProjector {
    pub fn dim(&self) -> usize {
        self.d.pow(2 * self.k as u32)
    }

    pub fn rank(&self) -> usize {
        self.matchings.len()
    }

    /// `W^T x` for a real vector.
    fn coefficients<T: Copy + Into<C64>>(&self, x: &[T]) -> Vec<C64> {
        self.supports
            .iter()
            .map(|s| s.iter().map(|&i| x[i].into()).sum::<C64>() * self.amp)
            .collect()
    }

    pub fn apply(&self, x: &[C64]) -> Vec<C64> {
        assert_eq!(x.len(), self.dim(), "projector applied to a vector of the wrong length");
        let c = self.coefficients(x);
        let mut out = vec![C64::new(0.0, 0.0); x.len()];
        for (i, s) in self.supports.iter().enumerate() {
            let w: C64 = (0..c.len()).map(|j| c[j] * self.gram_inv[(i, j)]).sum::<C64>() * self.amp;
            for &p in s {
                out[p] += w;
            }
        }
        out
    }

    pub fn apply_real(&self, x: &[f64]) -> Vec<f64> {
        let z: Vec<C64> = x.iter().map(|&v| C64::new(v, 0.0)).collect();
        self.apply(&z).into_iter().map(|z| z.re).collect()
    }

    /// The matching states as dense vectors.
    pub fn states(&self) -> Vec<Vec<f64>> {
        self.supports
            .iter()
            .map(|s| {
                let mut v = vec![0.0; self.dim()];
                for &p in s {
                    v[p] = self.amp;
                }
                v
            })
            .collect()
    }

    /// An orthonormal basis of the image, `W V Lambda^{-1/2}` from the
    /// eigendecomposition of the Gram inverse.
    pub fn orthonormal_basis(&self) -> Vec<Vec<f64>> {
        let eig = self.gram_inv.clone().symmetric_eigen();
        let states = self.states();
        (0..self.rank())
            .map(|col| {
                // Eigenvalues of G^{-1} are 1/lambda(G), so scale by sqrt of them.
                let s = eig.eigenvalues[col].max(0.0).sqrt();
                let mut v = vec![0.0; self.dim()];
                for (row, state) in states.iter().enumerate() {
                    let w = eig.eigenvectors[(row, col)] * s;
                    for (o, x) in v.iter_mut().zip(state) {
                        *o += w * x;
                    }
                }
                v
            })
            .collect()
    }

    /// The projector as a dense matrix.
    pub fn dense(&self, caps: &Caps) -> Result<ComplexMatrix> {
        let dim = self.dim();
        if dim > caps.dense_dim {
            return Err(Error::Size(format!("projector dimension {dim} exceeds the dense cap {}", caps.dense_dim)));
        }
        let mut m = ComplexMatrix::zeros(dim, dim);
        for (i, si) in self.supports.iter().enumerate() {
            for (j, sj) in self.supports.iter().enumerate() {
                let w = self.gram_inv[(i, j)] * self.amp * self.amp;
                for &p in si {
                    for &q in sj {
                        m[(p, q)] += C64::new(w, 0.0);
                    }
                }
            }
        }
        Ok(m)
    }
}

/// A permutation of `[N]` as an index array: `mapping[x]` is the image of `x`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PermSpec {
    pub mapping: Vec<usize>,
}

impl PermSpec {
    pub fn identity(n: usize) -> PermSpec {
        PermSpec { mapping: (0..n).collect() }
    }

    pub fn size(&self) -> usize {
        self.mapping.len()
    }

    pub fn is_bijection(&self) -> bool {
        let mut sorted = self.mapping.clone();
        sorted.sort_unstable();
        sorted.iter().enumerate().all(|(i, &x)| i == x)
    }

    /// `self` after `other`.
    pub fn compose(&self, other: &PermSpec) -> PermSpec {
        PermSpec { mapping: other.mapping.iter().map(|&x| self.mapping[x]).collect() }
    }

    pub fn inverse(&self) -> PermSpec {
        let mut inv = vec![0; self.size()];
        for (x, &y) in self.mapping.iter().enumerate() {
            inv[y] = x;
        }
        PermSpec { mapping: inv }
    }
}

/// All maps `x -> x XOR (h(x_{j1}, x_{j2}) at bit i)` over ordered distinct
/// `(i, j1, j2)` and the 16 Boolean functions `h`.
///
/// Bit 0 is the most significant bit of `x`; `h` is encoded by its truth
/// table, `h(a, b)` being bit `2a + b` of the code. Order: `i`, `j1`, `j2`,
/// then `h` code, all increasing.
pub fn simple_3bit_perms(n: usize, caps: &Caps) -> Result<Vec<PermSpec>> {
    if n < 3 {
        return Err(Error::Domain(format!("simple 3-bit permutations need n >= 3, got {n}")));
    }
    if n >= usize::BITS as usize || (1usize << n) > caps.vector_dim {
        return Err(Error::Size(format!("domain 2^{n} exceeds the vector cap")));
    }
    let size = 1usize << n;
    let bit = |x: usize, b: usize| (x >> (n - 1 - b)) & 1;
    let mut out = Vec::with_capacity(n * (n - 1) * (n - 2) * 16);
    for i in 0..n {
        for j1 in (0..n).filter(|&j| j != i) {
            for j2 in (0..n).filter(|&j| j != i && j != j1) {
                for h in 0..16usize {
                    let mapping = (0..size)
                        .map(|x| {
                            let flip = (h >> (2 * bit(x, j1) + bit(x, j2))) & 1;
                            x ^ (flip << (n - 1 - i))
                        })
                        .collect();
                    out.push(PermSpec { mapping });
                }
            }
        }
    }
    Ok(out)
}

/// Ordered `k`-tuples of distinct elements of `[n]` in lexicographic order.
pub fn distinct_tuples(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for x in 0..n {
            if !cur.contains(&x) {
                cur.push(x);
                rec(n, k, cur, out);
                cur.pop();
            }
        }
    }
    let mut out = Vec::new();
    rec(n, k, &mut Vec::with_capacity(k), &mut out);
    out
}

/// Source of a permutation moment.
#[derive(Clone, Debug)]
pub enum PermSource<'a> {
    Multiset(&'a [PermSpec]),
    /// The uniform distribution on the full symmetric group.
    UniformSymmetric,
}

/// Average of `W^k(pi)` on the space spanned by distinct `k`-tuples of `[n]`.
pub fn wk_moment(source: &PermSource<'_>, n: usize, k: usize, caps: &Caps) -> Result<ComplexMatrix> {
    if k == 0 || k > n {
        return Err(Error::Domain(format!("W^k needs 1 <= k <= N, got k = {k}, N = {n}")));
    }
    let count: u128 = (0..k as u128).map(|i| n as u128 - i).product();
    if count > caps.dense_dim as u128 {
        return Err(Error::Size(format!("|[{n}]_({k})| = {count} exceeds the dense cap {}", caps.dense_dim)));
    }
    let count = count as usize;
    match source {
        PermSource::UniformSymmetric => {
            let v = C64::new(1.0 / count as f64, 0.0);
            Ok(ComplexMatrix::from_fn(count, count, |_, _| v))
        }
        PermSource::Multiset(perms) => {
            if perms.is_empty() {
                return Err(Error::Domain("empty permutation multiset".into()));
            }
            let tuples = distinct_tuples(n, k);
            let code = |t: &[usize]| t.iter().fold(0usize, |acc, &x| acc * n + x);
            let mut index = vec![usize::MAX; n.pow(k as u32)];
            for (i, t) in tuples.iter().enumerate() {
                index[code(t)] = i;
            }
            let w = 1.0 / perms.len() as f64;
            let mut m = ComplexMatrix::zeros(count, count);
            for p in perms.iter() {
                if p.size() != n {
                    return Err(Error::Shape(format!("permutation of [{}] used on [{n}]", p.size())));
                }
                for (col, t) in tuples.iter().enumerate() {
                    let image: Vec<usize> = t.iter().map(|&x| p.mapping[x]).collect();
                    m[(index[code(&image)], col)].re += w;
                }
            }
            Ok(m)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{inner_product, matrix_norm, NormKind};

    fn caps() -> Caps {
        Caps::default()
    }

    #[test]
    fn matching_counts() {
        for (k, full, bip) in [(1, 1, 1), (2, 3, 2), (3, 15, 6), (4, 105, 24)] {
            assert_eq!(enumerate_matchings(k, false, &caps()).unwrap().len(), full);
            assert_eq!(enumerate_matchings(k, true, &caps()).unwrap().len(), bip);
        }
        assert!(matches!(enumerate_matchings(7, false, &caps()), Err(Error::Size(_))));
    }

    #[test]
    fn enumeration_is_sorted_and_canonical() {
        let ms = enumerate_matchings(4, false, &caps()).unwrap();
        assert!(ms.windows(2).all(|w| w[0].pairs < w[1].pairs));
        for m in &ms {
            assert_eq!(Matching::new(m.k, m.pairs.clone()).unwrap(), *m);
        }
        let bip = enumerate_matchings(3, true, &caps()).unwrap();
        assert!(bip.iter().all(Matching::is_bipartite));
    }

    #[test]
    fn identity_matching_state_is_vec_identity() {
        let d = 3;
        for k in 1..=2 {
            let v = phi_state(&Matching::identity(k), d, &caps()).unwrap();
            let id = ComplexMatrix::identity(d.pow(k as u32));
            let scale = (d as f64).powf(-(k as f64) / 2.0);
            for (a, b) in v.iter().zip(id.data()) {
                assert!((a - b * scale).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn colored_state_example() {
        // {{0,1},{2,5},{3,4}} is supported on |aabccb>.
        let m = Matching::new(3, vec![(0, 1), (2, 5), (3, 4)]).unwrap();
        let d = 2;
        let support = phi_support(&m, d, &caps()).unwrap();
        let mut expect = Vec::new();
        for a in 0..d {
            for b in 0..d {
                for c in 0..d {
                    let digits = [a, a, b, c, c, b];
                    expect.push(digits.iter().fold(0, |acc, &x| acc * d + x));
                }
            }
        }
        expect.sort_unstable();
        let mut got = support.clone();
        got.sort_unstable();
        assert_eq!(got, expect);
    }

    #[test]
    fn gram_matches_dense_inner_products() {
        let d = 4;
        let ms = enumerate_matchings(3, false, &caps()).unwrap();
        let states: Vec<Vec<C64>> = ms.iter().map(|m| phi_state(m, d, &caps()).unwrap()).collect();
        for (i, a) in ms.iter().enumerate() {
            for (j, b) in ms.iter().enumerate() {
                let exact = matching_gram(a, b, d).to_f64().unwrap();
                assert!((inner_product(&states[i], &states[j]).re - exact).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rational_inverse_roundtrip() {
        let ms = enumerate_matchings(2, false, &caps()).unwrap();
        let g = gram_matrix(&ms, 5);
        let inv = rational_inverse(&g).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let s: BigRational = (0..3).map(|l| &g[i][l] * &inv[l][j]).sum();
                assert_eq!(s, if i == j { BigRational::one() } else { BigRational::zero() });
            }
        }
        let singular = vec![vec![BigRational::one(); 2]; 2];
        assert!(rational_inverse(&singular).is_none());
    }

    #[test]
    fn dependent_states_report_rank_error() {
        // Six permutation states of (C^2)^{x3} span only a 5-dimensional space.
        assert!(matches!(haar_projector(GroupTag::SU, 2, 3, &caps()), Err(Error::NumericalRank(_))));
    }

    #[test]
    fn projector_is_idempotent_hermitian() {
        for (group, d, k) in [(GroupTag::U, 3, 2), (GroupTag::SO, 5, 2), (GroupTag::SU, 3, 3)] {
            let p = haar_projector(group, d, k, &caps()).unwrap().dense(&caps()).unwrap();
            assert!(p.is_hermitian(1e-12));
            assert!((&p * &p).max_abs_diff(&p) < 1e-9, "{group} {d} {k}");
        }
    }

    #[test]
    fn unitary_k1_is_rank_one() {
        let p = haar_projector(GroupTag::U, 4, 1, &caps()).unwrap();
        assert_eq!(p.rank(), 1);
        let dense = p.dense(&caps()).unwrap();
        let v = vectorize_identity(4);
        let oracle = ComplexMatrix::outer(&v, &v);
        assert!(dense.max_abs_diff(&oracle) < 1e-14);
    }

    fn vectorize_identity(d: usize) -> Vec<C64> {
        crate::linalg::vectorize(&ComplexMatrix::identity(d))
            .into_iter()
            .map(|z| z / (d as f64).sqrt())
            .collect()
    }

    #[test]
    fn so2_rejected() {
        assert!(matches!(haar_projector(GroupTag::SO, 2, 1, &caps()), Err(Error::Precondition(_))));
        assert!(matches!(haar_projector(GroupTag::O, 4, 1, &caps()), Err(Error::Domain(_))));
    }

    #[test]
    fn applier_matches_dense_and_basis_is_orthonormal() {
        let p = haar_projector(GroupTag::SO, 6, 2, &caps()).unwrap();
        let dense = p.dense(&caps()).unwrap();
        let mut rng = crate::linalg::Rng::new(2);
        let x: Vec<C64> = (0..p.dim()).map(|_| rng.complex_normal()).collect();
        let a = p.apply(&x);
        let b = dense.matvec(&x);
        assert!(a.iter().zip(&b).all(|(u, v)| (u - v).norm() < 1e-12));
        let basis = p.orthonormal_basis();
        for (i, u) in basis.iter().enumerate() {
            for (j, v) in basis.iter().enumerate() {
                let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
                assert!((dot - if i == j { 1.0 } else { 0.0 }).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn simple_perms_count_and_involution() {
        let perms = simple_3bit_perms(3, &caps()).unwrap();
        assert_eq!(perms.len(), 96);
        for p in &perms {
            assert!(p.is_bijection());
            assert_eq!(p.compose(p), PermSpec::identity(8));
        }
        assert!(simple_3bit_perms(2, &caps()).is_err());
    }

    #[test]
    fn wk_moment_examples() {
        let id = [PermSpec::identity(5)];
        let m = wk_moment(&PermSource::Multiset(&id), 5, 2, &caps()).unwrap();
        assert_eq!(m, ComplexMatrix::identity(20));
        let u = wk_moment(&PermSource::UniformSymmetric, 4, 2, &caps()).unwrap();
        assert_eq!(u.rows(), 12);
        assert!(u.data().iter().all(|&z| z == C64::new(1.0 / 12.0, 0.0)));
    }

    #[test]
    fn wk_moment_of_simple_perms_is_doubly_stochastic() {
        let perms = simple_3bit_perms(3, &caps()).unwrap();
        let m = wk_moment(&PermSource::Multiset(&perms), 8, 2, &caps()).unwrap();
        assert!(m.is_hermitian(1e-14));
        for r in 0..m.rows() {
            let s: f64 = m.row(r).iter().map(|z| z.re).sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
        assert!(matrix_norm(&m, NormKind::Operator).unwrap() <= 1.0 + 1e-12);
    }
}
