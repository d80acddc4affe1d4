//! Monomial calculus of derandomized squaring.
//!
//! A monomial is a word over symbols `u_i` and `u_i^dagger`, written in
//! operator order: `symbols[0]` is the leftmost factor, so the last symbol
//! acts first. Composing a sequence `S` along a graph `G` yields one monomial
//! `s_j^dagger s_i` per directed edge `(i, j)`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::caps::Caps;
use crate::error::{Error, Result};
use crate::expanders::{build_expander, complete_graph, from_manifest, GraphManifest, RegularGraph};
use crate::linalg::{ComplexMatrix, C64};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Symbol {
    pub base: usize,
    pub dagger: bool,
}

impl Symbol {
    pub fn new(base: usize) -> Symbol {
        Symbol { base, dagger: false }
    }

    pub fn flipped(self) -> Symbol {
        Symbol { base: self.base, dagger: !self.dagger }
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", if self.dagger { '-' } else { '+' }, self.base)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct MonomialWalk {
    pub symbols: Vec<Symbol>,
}

impl MonomialWalk {
    pub fn single(base: usize) -> MonomialWalk {
        MonomialWalk { symbols: vec![Symbol::new(base)] }
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    /// Reversed with every flag flipped.
    pub fn dagger(&self) -> MonomialWalk {
        MonomialWalk { symbols: self.symbols.iter().rev().map(|s| s.flipped()).collect() }
    }

    /// `self` followed by `other` in operator order.
    pub fn concat(&self, other: &MonomialWalk) -> MonomialWalk {
        let mut symbols = self.symbols.clone();
        symbols.extend_from_slice(&other.symbols);
        MonomialWalk { symbols }
    }

    /// One line of space separated `+i` / `-i` tokens.
    pub fn dump(&self) -> String {
        self.symbols.iter().map(Symbol::to_string).collect::<Vec<_>>().join(" ")
    }
}

/// `(s_j^dagger s_i)` over the edges `(i, j)` of `g` in canonical order.
pub fn q_compose(g: &RegularGraph, s: &[MonomialWalk]) -> Result<Vec<MonomialWalk>> {
    if s.len() != g.n {
        return Err(Error::Shape(format!("sequence of length {} composed along a graph on {} vertices", s.len(), g.n)));
    }
    Ok(g.edges().map(|(i, j)| s[j].dagger().concat(&s[i])).collect())
}

/// `f_mu(lambda) = (1 - mu) lambda^2 + mu`.
pub fn f_mu(mu: f64, lambda: f64) -> f64 {
    (1.0 - mu) * lambda * lambda + mu
}

/// `f_{mu_t} o ... o f_{mu_1}`, applying `mus[0]` first.
pub fn f_cascade(mus: &[f64], lambda: f64) -> f64 {
    mus.iter().fold(lambda, |l, &mu| f_mu(mu, l))
}

/// Product of the symbols' matrices in monomial order.
pub fn eval_monomial(m: &MonomialWalk, u: &[ComplexMatrix]) -> Result<ComplexMatrix> {
    let dim = u.first().map(ComplexMatrix::rows).ok_or_else(|| Error::Shape("no matrices to evaluate on".into()))?;
    if u.iter().any(|x| x.rows() != dim || x.cols() != dim) {
        return Err(Error::Shape("monomial matrices must be square and of equal size".into()));
    }
    let mut acc = ComplexMatrix::identity(dim);
    for s in &m.symbols {
        let x = u.get(s.base).ok_or_else(|| Error::Bounds(format!("symbol {} outside {} matrices", s.base, u.len())))?;
        acc = if s.dagger { &acc * &x.adjoint() } else { &acc * x };
    }
    Ok(acc)
}

/// Average of the evaluated monomials.
pub fn eval_average(ms: &[MonomialWalk], u: &[ComplexMatrix]) -> Result<ComplexMatrix> {
    let dim = u.first().map(ComplexMatrix::rows).ok_or_else(|| Error::Shape("no matrices to evaluate on".into()))?;
    let mut acc = ComplexMatrix::zeros(dim, dim);
    let w = C64::new(1.0 / ms.len() as f64, 0.0);
    for m in ms {
        acc.add_scaled(&eval_monomial(m, u)?, w);
    }
    Ok(acc)
}

/// One stage of the asymptotic schedule. Sizes are base-2 logarithms.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageSpec {
    pub log2_vertices: u64,
    pub log2_degree: u64,
    pub mu: f64,
}

/// The parameter schedule for alphabet size `c`, gap `delta` and target
/// `eps`: `ell1` stages of degree 512 with `mu = .11`, then `ell2` stages
/// of degree `32^{2^j}` with `mu_j = 2^{-2^j} / 4`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CascadeParams {
    pub c: u64,
    pub delta: f64,
    pub eps: f64,
    pub ell1: u32,
    pub ell2: u32,
    pub stages: Vec<StageSpec>,
    /// `log2` of the monomial count (edges of the last graph).
    pub log2_n: u64,
    /// Monomial length `2^(ell1 + ell2)`.
    pub length: u128,
}

impl CascadeParams {
    pub fn mus(&self) -> Vec<f64> {
        self.stages.iter().map(|s| s.mu).collect()
    }

    /// `F(1 - delta)` over the schedule.
    pub fn predicted_bound(&self) -> f64 {
        f_cascade(&self.mus(), 1.0 - self.delta)
    }
}

fn exact_log2(x: f64) -> Option<i64> {
    if x <= 0.0 || !x.is_finite() {
        return None;
    }
    let l = x.log2().round();
    (2f64.powi(l as i32) == x).then_some(l as i64)
}

/// Schedule for admissible `c = 2^{i1}`, `delta = 16^{-i2}` (`i2 >= 1`) and
/// `eps = 2^{-2^{i3}}`.
pub fn cascade_params(c: u64, delta: f64, eps: f64) -> Result<CascadeParams> {
    let grid = "need c = 2^i1, delta = 16^-i2 with i2 >= 1, eps = 2^-(2^i3)";
    if c == 0 || !c.is_power_of_two() {
        return Err(Error::Rounding(format!("c = {c} is not a power of two; {grid}")));
    }
    let i2 = match exact_log2(delta) {
        Some(l) if l <= -4 && l % 4 == 0 => (-l / 4) as u32,
        _ => return Err(Error::Rounding(format!("delta = {delta} is off the grid; {grid}"))),
    };
    let log_inv_eps = match exact_log2(eps) {
        Some(l) if l < 0 && (-l as u64).is_power_of_two() => (-l) as u64,
        _ => return Err(Error::Rounding(format!("eps = {eps} is off the grid; {grid}"))),
    };
    let i3 = log_inv_eps.trailing_zeros();
    let ell1 = 5 * i2 + 3;
    let ell2 = i3;
    let overflow = || Error::Rounding("schedule sizes overflow 64-bit exponents".into());
    let mut log2_v = c.trailing_zeros() as u64;
    let mut stages = Vec::new();
    for _ in 0..ell1 {
        stages.push(StageSpec { log2_vertices: log2_v, log2_degree: 9, mu: 0.11 });
        log2_v = log2_v.checked_add(9).ok_or_else(overflow)?;
    }
    for j in 1..=ell2 {
        let log2_degree = 1u64.checked_shl(j).and_then(|p| p.checked_mul(5)).ok_or_else(overflow)?;
        let mu = 0.25 * 2f64.powf(-(2f64.powi(j as i32)));
        stages.push(StageSpec { log2_vertices: log2_v, log2_degree, mu });
        log2_v = log2_v.checked_add(log2_degree).ok_or_else(overflow)?;
    }
    let t = ell1 + ell2;
    let length = 1u128.checked_shl(t).ok_or_else(overflow)?;
    Ok(CascadeParams { c, delta, eps, ell1, ell2, stages, log2_n: log2_v, length })
}

/// A concrete cascade: graph `i+1` lives on the edges of graph `i`, and
/// graph 0 on the `c` alphabet symbols.
#[derive(Clone, Debug)]
pub struct Cascade {
    pub c: usize,
    pub graphs: Vec<RegularGraph>,
}

/// How to build one stage of a concrete cascade.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StagePlan {
    Expander { degree: usize, mu_target: f64 },
    Complete,
}

/// Serialized form of a concrete cascade; rotation maps are regenerated.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CascadeManifest {
    pub schema: u32,
    pub c: usize,
    pub stages: Vec<StageManifest>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StageManifest {
    Expander(GraphManifest),
    Complete { n: usize },
}

impl Cascade {
    pub fn new(c: usize, graphs: Vec<RegularGraph>) -> Result<Cascade> {
        if c == 0 {
            return Err(Error::Domain("alphabet must be nonempty".into()));
        }
        let mut vertices = c;
        for (i, g) in graphs.iter().enumerate() {
            if g.n != vertices {
                return Err(Error::Shape(format!("stage {i} graph has {} vertices, expected {vertices}", g.n)));
            }
            vertices = g.edge_count();
        }
        Ok(Cascade { c, graphs })
    }

    /// Builds each stage on the edge set of the previous one.
    pub fn build(c: usize, plan: &[StagePlan], caps: &Caps) -> Result<Cascade> {
        let mut graphs = Vec::with_capacity(plan.len());
        let mut vertices = c;
        for stage in plan {
            let g = match *stage {
                StagePlan::Expander { degree, mu_target } => build_expander(vertices, degree, mu_target, caps)?,
                StagePlan::Complete => complete_graph(vertices)?,
            };
            vertices = g.edge_count();
            graphs.push(g);
        }
        Cascade::new(c, graphs)
    }

    pub fn from_manifest(m: &CascadeManifest, caps: &Caps) -> Result<Cascade> {
        let graphs = m
            .stages
            .iter()
            .map(|s| match s {
                StageManifest::Expander(g) => from_manifest(g, caps),
                StageManifest::Complete { n } => complete_graph(*n),
            })
            .collect::<Result<Vec<_>>>()?;
        Cascade::new(m.c, graphs)
    }

    pub fn manifest(&self) -> Result<CascadeManifest> {
        let stages = self
            .graphs
            .iter()
            .map(|g| match g.manifest() {
                Some(m) => Ok(StageManifest::Expander(m)),
                None if g.d == g.n && g.mu() == Some(0.0) => Ok(StageManifest::Complete { n: g.n }),
                None => Err(Error::Domain("stage graph has no reproducible manifest".into())),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(CascadeManifest { schema: 1, c: self.c, stages })
    }

    pub fn depth(&self) -> usize {
        self.graphs.len()
    }

    /// Number of monomials.
    pub fn count(&self) -> usize {
        self.graphs.last().map_or(self.c, RegularGraph::edge_count)
    }

    /// Monomial length `2^depth`.
    pub fn length(&self) -> usize {
        1 << self.depth()
    }

    /// Certified expansion of each stage (complete graphs have 0).
    pub fn mus(&self) -> Result<Vec<f64>> {
        self.graphs
            .iter()
            .enumerate()
            .map(|(i, g)| g.mu().ok_or_else(|| Error::Domain(format!("stage {i} graph is not certified"))))
            .collect()
    }

    /// All monomials, composed stage by stage.
    pub fn materialize(&self) -> Result<Vec<MonomialWalk>> {
        let mut seq: Vec<MonomialWalk> = (0..self.c).map(MonomialWalk::single).collect();
        for g in &self.graphs {
            seq = q_compose(g, &seq)?;
        }
        Ok(seq)
    }

    /// Symbol `j` of monomial `i` by walking down the composition tree, one
    /// rotation-map lookup per level.
    pub fn walk_symbol(&self, i: usize, j: usize) -> Result<Symbol> {
        if i >= self.count() {
            return Err(Error::Bounds(format!("monomial {i} of {}", self.count())));
        }
        if j >= self.length() {
            return Err(Error::Bounds(format!("position {j} of {}", self.length())));
        }
        let (mut index, mut pos, mut flip) = (i, j, false);
        for (level, g) in self.graphs.iter().enumerate().rev() {
            let half = 1usize << level;
            let (v, w) = g.edge(index);
            if pos < half {
                // Inside s_w^dagger: mirrored position, flag flipped.
                index = w;
                pos = half - 1 - pos;
                flip = !flip;
            } else {
                index = v;
                pos -= half;
            }
        }
        Ok(Symbol { base: index, dagger: flip })
    }

    /// Monomial `i` assembled from [`Cascade::walk_symbol`].
    pub fn monomial(&self, i: usize) -> Result<MonomialWalk> {
        Ok(MonomialWalk { symbols: (0..self.length()).map(|j| self.walk_symbol(i, j)).collect::<Result<_>>()? })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expanders::permutation_graph;
    use crate::linalg::{ginibre, matrix_norm, NormKind, Rng};

    fn random_contractions(count: usize, dim: usize, seed: u64) -> Vec<ComplexMatrix> {
        let mut rng = Rng::new(seed);
        (0..count)
            .map(|_| {
                let g = ginibre(dim, false, &mut rng);
                let n = matrix_norm(&g, NormKind::Operator).unwrap();
                g.scale_real(rng.uniform() / n)
            })
            .collect()
    }

    #[test]
    fn k1_composition() {
        let k1 = complete_graph(1).unwrap();
        let out = q_compose(&k1, &[MonomialWalk::single(0)]).unwrap();
        assert_eq!(out, vec![MonomialWalk { symbols: vec![Symbol { base: 0, dagger: true }, Symbol::new(0)] }]);
        assert!(q_compose(&k1, &[]).is_err());
    }

    #[test]
    fn complete_graph_gives_hermitian_square() {
        let u = random_contractions(5, 3, 1);
        let s: Vec<MonomialWalk> = (0..5).map(MonomialWalk::single).collect();
        let avg = eval_average(&s, &u).unwrap();
        let sq = eval_average(&q_compose(&complete_graph(5).unwrap(), &s).unwrap(), &u).unwrap();
        assert!(sq.max_abs_diff(&(&avg.adjoint() * &avg)) < 1e-12);
    }

    #[test]
    fn f_examples() {
        assert_eq!(f_mu(0.0, 0.3), 0.09);
        assert_eq!(f_mu(0.4, 1.0), 1.0);
        assert!(f_cascade(&[0.11; 9], 0.985) <= 0.25);
    }

    #[test]
    fn params_examples() {
        let p = cascade_params(4, 1.0 / 16.0, 1.0 / 16.0).unwrap();
        assert_eq!((p.ell1, p.ell2, p.length), (8, 2, 1024));
        // L = 8 log2(1/eps) / delta^1.25.
        assert_eq!(p.length as f64, 8.0 * 4.0 / (1.0f64 / 16.0).powf(1.25));
        assert_eq!(p.log2_n, 2 + 9 * 8 + 10 + 20);
        assert!(cascade_params(3, 1.0 / 16.0, 0.5).is_err());
        assert!(matches!(cascade_params(4, 0.1, 0.5), Err(Error::Rounding(_))));
        assert!(cascade_params(4, 1.0 / 16.0, 1.0 / 8.0).is_err());
    }

    #[test]
    fn schedule_reaches_target() {
        let p = cascade_params(1, 1.0 / 16.0, 1.0 / 16.0).unwrap();
        assert!(p.predicted_bound() <= p.eps);
    }

    #[test]
    fn walk_symbol_matches_materialization() {
        let g1 = permutation_graph(4, 3, 0).unwrap();
        let g2 = permutation_graph(12, 2, 1).unwrap();
        let cascade = Cascade::new(4, vec![g1, g2]).unwrap();
        let all = cascade.materialize().unwrap();
        assert_eq!(all.len(), cascade.count());
        for (i, m) in all.iter().enumerate() {
            assert_eq!(m.len(), 4);
            assert_eq!(&cascade.monomial(i).unwrap(), m);
        }
        assert!(cascade.walk_symbol(24, 0).is_err());
        assert!(cascade.walk_symbol(0, 4).is_err());
    }

    #[test]
    fn depth_zero_and_one_symbols() {
        let c0 = Cascade::new(3, vec![]).unwrap();
        assert_eq!(c0.walk_symbol(2, 0).unwrap(), Symbol::new(2));
        let c1 = Cascade::new(3, vec![permutation_graph(3, 2, 4).unwrap()]).unwrap();
        assert!(c1.walk_symbol(0, 0).unwrap().dagger);
        assert!(!c1.walk_symbol(0, 1).unwrap().dagger);
    }

    #[test]
    fn eval_basics() {
        let u = random_contractions(3, 2, 2);
        assert_eq!(eval_monomial(&MonomialWalk::default(), &u).unwrap(), ComplexMatrix::identity(2));
        let q = ComplexMatrix::from_real(2, 2, &[0.6, -0.8, 0.8, 0.6]).unwrap();
        let m = MonomialWalk::single(0).dagger().concat(&MonomialWalk::single(0));
        assert!(eval_monomial(&m, &[q]).unwrap().max_abs_diff(&ComplexMatrix::identity(2)) < 1e-15);
        let word = MonomialWalk { symbols: vec![Symbol::new(2), Symbol::new(0).flipped(), Symbol::new(1)] };
        let oracle = &(&u[2] * &u[0].adjoint()) * &u[1];
        assert!(eval_monomial(&word, &u).unwrap().max_abs_diff(&oracle) < 1e-14);
        assert_eq!(word.dump(), "+2 -0 +1");
    }

    #[test]
    fn manifest_roundtrip() {
        let caps = Caps::default();
        let plan = [StagePlan::Expander { degree: 4, mu_target: 0.95 }, StagePlan::Complete];
        let c = Cascade::build(8, &plan, &caps).unwrap();
        let m = c.manifest().unwrap();
        let again = Cascade::from_manifest(&m, &caps).unwrap();
        assert_eq!(again.count(), c.count());
        assert_eq!(again.materialize().unwrap(), c.materialize().unwrap());
    }
}
