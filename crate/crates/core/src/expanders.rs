//! Regular graphs given by rotation maps, a seeded expander family with
//! spectral certificates, squaring and self-loop addition.
//!
//! A `d`-regular graph on `n` vertices has `n*d` directed edges indexed by
//! `v*d + port`; that index is the canonical edge order used by the walk
//! composition. Parallel edges and self-loops are allowed.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::caps::Caps;
use crate::error::{Error, Result};
use crate::linalg::{lanczos_extremes, LanczosOptions, Rng};

/// Seeds tried by [`build_expander`] before giving up.
pub const EXPANDER_SEEDS: u64 = 64;
/// Degree and two-sided expansion of the first cascade phase.
pub const PHASE1_PRESET: (usize, f64) = (512, 0.11);
/// Degree and two-sided expansion of the graphs squared in the second phase.
pub const PHASE2_PRESET: (usize, f64) = (32, 0.45);
/// Graphs up to this size are certified by a dense eigensolve.
const DENSE_CERT_LIMIT: usize = 128;

/// Extreme nontrivial eigenvalues of the normalized adjacency matrix (the
/// all-ones direction excluded).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub lambda_min: f64,
    pub lambda_max: f64,
}

impl Certificate {
    /// Two-sided expansion `max |lambda|` over nontrivial eigenvalues.
    pub fn mu(&self) -> f64 {
        self.lambda_min.abs().max(self.lambda_max.abs())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegularGraph {
    pub n: usize,
    pub d: usize,
    /// `rot[v*d + port] = (w, port')`.
    rot: Vec<(usize, usize)>,
    pub undirected: bool,
    pub certificate: Option<Certificate>,
    /// Seed of the family member, when the graph came from [`build_expander`].
    pub seed: Option<u64>,
}

/// Reproducible description of a seeded expander.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphManifest {
    pub schema: u32,
    pub n: usize,
    pub d: usize,
    pub seed: u64,
    pub mu_certified: f64,
}

impl RegularGraph {
    /// Builds a graph from a rotation table, checking bijectivity (and the
    /// involution property when `undirected`).
    pub fn from_rotation(n: usize, d: usize, rot: Vec<(usize, usize)>, undirected: bool) -> Result<RegularGraph> {
        if rot.len() != n * d {
            return Err(Error::Shape(format!("rotation table has {} entries, expected {}", rot.len(), n * d)));
        }
        let mut hit = vec![false; n * d];
        for (i, &(w, p)) in rot.iter().enumerate() {
            if w >= n || p >= d {
                return Err(Error::Shape(format!("rotation entry {i} points outside the graph")));
            }
            if std::mem::replace(&mut hit[w * d + p], true) {
                return Err(Error::Shape("rotation map is not a bijection".into()));
            }
            if undirected && rot[w * d + p] != (i / d, i % d) {
                return Err(Error::Shape("rotation map is not an involution".into()));
            }
        }
        Ok(RegularGraph { n, d, rot, undirected, certificate: None, seed: None })
    }

    pub fn rotate(&self, v: usize, port: usize) -> (usize, usize) {
        self.rot[v * self.d + port]
    }

    pub fn edge_count(&self) -> usize {
        self.n * self.d
    }

    /// Edge `e = v*d + port` as `(v, w)`.
    pub fn edge(&self, e: usize) -> (usize, usize) {
        (e / self.d, self.rot[e].0)
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.edge_count()).map(|e| self.edge(e))
    }

    pub fn mu(&self) -> Option<f64> {
        self.certificate.map(|c| c.mu())
    }

    /// `(A x)[v] = (1/d) sum_port x[rot(v, port)]`.
    pub fn apply_adjacency(&self, x: &[f64]) -> Vec<f64> {
        let inv = 1.0 / self.d as f64;
        (0..self.n)
            .map(|v| self.rot[v * self.d..(v + 1) * self.d].iter().map(|&(w, _)| x[w]).sum::<f64>() * inv)
            .collect()
    }

    /// Normalized adjacency matrix `A[v][w] = #edges(v, w) / d`.
    pub fn adjacency_dense(&self) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(self.n, self.n);
        for (v, w) in self.edges() {
            a[(v, w)] += 1.0 / self.d as f64;
        }
        a
    }

    /// Computes and stores the spectral certificate.
    pub fn certify(&mut self, caps: &Caps) -> Result<Certificate> {
        let cert = certify(self, caps)?;
        self.certificate = Some(cert);
        Ok(cert)
    }

    pub fn manifest(&self) -> Option<GraphManifest> {
        Some(GraphManifest { schema: 1, n: self.n, d: self.d, seed: self.seed?, mu_certified: self.mu()? })
    }
}

/// Nontrivial spectrum extremes of an undirected regular graph.
pub fn certify(g: &RegularGraph, caps: &Caps) -> Result<Certificate> {
    if !g.undirected {
        return Err(Error::Domain("spectral certification needs an undirected graph".into()));
    }
    if g.n > caps.graph_vertices {
        return Err(Error::Size(format!("{} vertices exceed the certification cap {}", g.n, caps.graph_vertices)));
    }
    if g.n == 1 {
        return Ok(Certificate { lambda_min: 0.0, lambda_max: 0.0 });
    }
    if g.n <= DENSE_CERT_LIMIT {
        let eig = g.adjacency_dense().symmetric_eigen();
        let mut ev: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        // Drop the eigenvalue belonging to the all-ones vector.
        let top = ev.pop().expect("n >= 2");
        debug_assert!((top - 1.0).abs() < 1e-9);
        return Ok(Certificate { lambda_min: ev[0], lambda_max: *ev.last().unwrap() });
    }
    let ones = vec![vec![1.0 / (g.n as f64).sqrt(); g.n]];
    let opts = LanczosOptions { max_steps: 800.min(g.n), tol: 1e-10, seed: 0xe7 };
    let ex = lanczos_extremes(g.n, |x: &[f64]| g.apply_adjacency(x), &ones, &opts)?;
    Ok(Certificate { lambda_min: ex.min, lambda_max: ex.max })
}

/// `K_m`: every ordered pair `(i, j)`, including `i = j`, is an edge;
/// `rot(v, p) = (p, v)`.
pub fn complete_graph(m: usize) -> Result<RegularGraph> {
    if m == 0 {
        return Err(Error::Domain("complete graph needs m >= 1".into()));
    }
    let rot = (0..m * m).map(|e| (e % m, e / m)).collect();
    let mut g = RegularGraph::from_rotation(m, m, rot, true)?;
    g.certificate = Some(Certificate { lambda_min: 0.0, lambda_max: 0.0 });
    Ok(g)
}

/// Union of `d/2` seeded uniform permutations and their inverses (ports
/// `2r` and `2r+1`), plus one self-loop port when `d` is odd.
pub fn permutation_graph(n: usize, d: usize, seed: u64) -> Result<RegularGraph> {
    if n == 0 || d == 0 {
        return Err(Error::Domain("permutation graphs need n, d >= 1".into()));
    }
    let mut rng = Rng::new(seed);
    let mut rot = vec![(0, 0); n * d];
    for r in 0..d / 2 {
        let mut sigma: Vec<usize> = (0..n).collect();
        rng.shuffle(&mut sigma);
        for v in 0..n {
            let w = sigma[v];
            rot[v * d + 2 * r] = (w, 2 * r + 1);
            rot[w * d + 2 * r + 1] = (v, 2 * r);
        }
    }
    if d % 2 == 1 {
        for v in 0..n {
            rot[v * d + d - 1] = (v, d - 1);
        }
    }
    RegularGraph::from_rotation(n, d, rot, true)
}

/// The first of [`EXPANDER_SEEDS`] seeded permutation graphs whose certified
/// two-sided expansion is at most `mu_target`.
pub fn build_expander(n: usize, d: usize, mu_target: f64, caps: &Caps) -> Result<RegularGraph> {
    if n > caps.graph_vertices {
        return Err(Error::Size(format!("{n} vertices exceed the certification cap {}", caps.graph_vertices)));
    }
    let mut best = f64::INFINITY;
    for seed in 0..EXPANDER_SEEDS {
        let mut g = permutation_graph(n, d, seed)?;
        let mu = g.certify(caps)?.mu();
        if mu <= mu_target {
            g.seed = Some(seed);
            return Ok(g);
        }
        best = best.min(mu);
    }
    Err(Error::Construction {
        message: format!("no seed below {EXPANDER_SEEDS} gives a ({n}, {d}) graph with mu <= {mu_target}"),
        best_mu: best,
    })
}

/// Regenerates the graph of a manifest and checks its certificate.
pub fn from_manifest(m: &GraphManifest, caps: &Caps) -> Result<RegularGraph> {
    let mut g = permutation_graph(m.n, m.d, m.seed)?;
    g.seed = Some(m.seed);
    let mu = g.certify(caps)?.mu();
    if (mu - m.mu_certified).abs() > 1e-8 {
        return Err(Error::Construction {
            message: format!("manifest claims mu {} but recertification gives {mu}", m.mu_certified),
            best_mu: mu,
        });
    }
    Ok(g)
}

/// Two steps at once: port `a*d + b` follows port `a`, then port `b`.
pub fn square_graph(g: &RegularGraph) -> Result<RegularGraph> {
    let d = g.d;
    let mut rot = Vec::with_capacity(g.n * d * d);
    for v in 0..g.n {
        for a in 0..d {
            let (w, a2) = g.rotate(v, a);
            for b in 0..d {
                let (x, b2) = g.rotate(w, b);
                rot.push((x, b2 * d + a2));
            }
        }
    }
    let mut sq = RegularGraph::from_rotation(g.n, d * d, rot, g.undirected)?;
    sq.certificate = g.certificate.map(|c| {
        let hi = c.lambda_max.powi(2).max(c.lambda_min.powi(2));
        // The smallest square is 0 when the spectrum straddles it.
        let lo = if c.lambda_min <= 0.0 && c.lambda_max >= 0.0 {
            0.0
        } else {
            c.lambda_max.powi(2).min(c.lambda_min.powi(2))
        };
        Certificate { lambda_min: lo, lambda_max: hi }
    });
    Ok(sq)
}

/// Adds `count` self-loop ports to every vertex.
pub fn add_self_loops(g: &RegularGraph, count: usize) -> Result<RegularGraph> {
    if count == 0 {
        return Err(Error::Domain("add_self_loops needs count >= 1".into()));
    }
    let d2 = g.d + count;
    let mut rot = Vec::with_capacity(g.n * d2);
    for v in 0..g.n {
        for p in 0..g.d {
            rot.push(g.rotate(v, p));
        }
        for p in g.d..d2 {
            rot.push((v, p));
        }
    }
    let mut out = RegularGraph::from_rotation(g.n, d2, rot, g.undirected)?;
    let map = |l: f64| (g.d as f64 * l + count as f64) / d2 as f64;
    out.certificate =
        g.certificate.map(|c| Certificate { lambda_min: map(c.lambda_min), lambda_max: map(c.lambda_max) });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn caps() -> Caps {
        Caps::default()
    }

    #[test]
    fn complete_graph_basics() {
        let k1 = complete_graph(1).unwrap();
        assert_eq!(k1.rotate(0, 0), (0, 0));
        let k3 = complete_graph(3).unwrap();
        assert_eq!(k3.edge_count(), 9);
        let ev = k3.adjacency_dense().symmetric_eigen().eigenvalues;
        let mut ev: Vec<f64> = ev.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        assert!(ev[0].abs() < 1e-12 && ev[1].abs() < 1e-12 && (ev[2] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rotation_maps_are_involutions() {
        let g = permutation_graph(20, 5, 3).unwrap();
        for v in 0..20 {
            for p in 0..5 {
                let (w, q) = g.rotate(v, p);
                assert_eq!(g.rotate(w, q), (v, p));
            }
        }
        let bad = vec![(0, 0), (0, 0)];
        assert!(RegularGraph::from_rotation(2, 1, bad, true).is_err());
    }

    #[test]
    fn ones_is_top_eigenvector() {
        let g = permutation_graph(50, 6, 1).unwrap();
        let y = g.apply_adjacency(&vec![1.0; 50]);
        assert!(y.iter().all(|x| (x - 1.0).abs() < 1e-14));
    }

    #[test]
    fn lanczos_certificate_matches_dense() {
        let g = permutation_graph(300, 8, 2).unwrap();
        let lanczos = certify(&g, &caps()).unwrap();
        let mut ev: Vec<f64> = g.adjacency_dense().symmetric_eigen().eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        assert!((lanczos.lambda_min - ev[0]).abs() < 1e-8);
        assert!((lanczos.lambda_max - ev[ev.len() - 2]).abs() < 1e-8);
    }

    #[test]
    fn squaring_squares_adjacency() {
        let g = permutation_graph(12, 3, 7).unwrap();
        let sq = square_graph(&g).unwrap();
        assert_eq!(sq.d, 9);
        let a = g.adjacency_dense();
        assert!((sq.adjacency_dense() - &a * &a).abs().max() < 1e-14);
        let k = complete_graph(4).unwrap();
        assert!((square_graph(&k).unwrap().adjacency_dense() - k.adjacency_dense()).abs().max() < 1e-14);
    }

    #[test]
    fn squared_certificate_bounds_recertification() {
        let mut g = permutation_graph(64, 4, 5).unwrap();
        let mu = g.certify(&caps()).unwrap().mu();
        let sq = square_graph(&g).unwrap();
        let fresh = certify(&sq, &caps()).unwrap().mu();
        assert!(fresh <= mu * mu + 1e-9);
        assert!((sq.mu().unwrap() - fresh).abs() < 1e-9);
    }

    #[test]
    fn self_loops_map_spectrum() {
        let k = complete_graph(5).unwrap();
        let l = add_self_loops(&k, 3).unwrap();
        assert_eq!(l.d, 8);
        let c = l.certificate.unwrap();
        assert!((c.lambda_max - 3.0 / 8.0).abs() < 1e-15);
        let mut g = permutation_graph(40, 4, 0).unwrap();
        g.certify(&caps()).unwrap();
        let l = add_self_loops(&g, 2).unwrap();
        let fresh = certify(&l, &caps()).unwrap();
        let c = l.certificate.unwrap();
        assert!((fresh.lambda_min - c.lambda_min).abs() < 1e-10);
        assert!((fresh.lambda_max - c.lambda_max).abs() < 1e-10);
    }

    #[test]
    fn build_expander_meets_target_and_roundtrips() {
        let g = build_expander(256, 16, 0.6, &caps()).unwrap();
        assert!(g.mu().unwrap() <= 0.6);
        let m = g.manifest().unwrap();
        let again = from_manifest(&m, &caps()).unwrap();
        assert_eq!(again.mu(), g.mu());
        assert!(matches!(build_expander(16, 2, 0.1, &caps()), Err(Error::Construction { .. })));
    }
}
