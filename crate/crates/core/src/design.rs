//! Seeded approximate k-designs: the placed base-gate alphabet, a walk
//! cascade over it, seed-to-circuit compilation and exhaustive evaluation of
//! small instances.
//!
//! The alphabet lists every lazy base element on every increasing 4-subset
//! of the wires, then as many identity symbols (the lazy half), then further
//! identities up to the next power of two.

use serde::{Deserialize, Serialize};

use crate::caps::Caps;
use crate::error::{Error, Result};
use crate::gates::{base_set, embed_gate, BaseSet, Circuit, Gate, GateKind, BASE_QUBITS};
use crate::linalg::{ComplexMatrix, GroupTag, NormKind, C64, MC_CHUNK};
use crate::moments::{design_error, moment_by_batches, multiset_moment};
use crate::schur_weyl::{haar_projector, HaarProjector};
use crate::walks::{cascade_params, eval_monomial, f_cascade, Cascade, CascadeManifest, CascadeParams, StagePlan, Symbol};

/// Seed-length budget `a * n * k + b * log2(1/eps)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedBudget {
    pub a: f64,
    pub b: f64,
}

impl Default for SeedBudget {
    fn default() -> Self {
        SeedBudget { a: 64.0, b: 32.0 }
    }
}

/// Stages used by desk-scale designs, in order; `--stages s` keeps the
/// first `s`.
pub const DESK_PLAN: [StagePlan; 2] = [
    StagePlan::Expander { degree: 16, mu_target: 0.6 },
    StagePlan::Expander { degree: 32, mu_target: 0.45 },
];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AlphabetEntry {
    /// Base element `element` placed on placement `placement`.
    Gate { element: usize, placement: usize },
    Identity,
}

#[derive(Clone, Debug)]
pub struct DesignSpec {
    pub group: GroupTag,
    pub n: usize,
    pub k: usize,
    pub eps: f64,
    pub base: BaseSet,
    /// Increasing 4-subsets of the wires, lexicographic.
    pub placements: Vec<Vec<usize>>,
    pub alphabet: Vec<AlphabetEntry>,
    pub cascade: Cascade,
    /// Asymptotic schedule for `(delta_used, eps_target)`.
    pub params: CascadeParams,
    pub delta_used: f64,
    /// `eps / 2^{nk}` rounded down to the admissible grid.
    pub eps_target: f64,
    pub budget: SeedBudget,
}

/// A seed together with its bit width.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Seed {
    pub value: u64,
    pub width: u32,
}

/// Increasing `size`-subsets of `[n]` in lexicographic order.
pub fn subsets(n: usize, size: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, size: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == size {
            out.push(cur.clone());
            return;
        }
        for x in start..n {
            cur.push(x);
            rec(x + 1, n, size, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, size, &mut Vec::new(), &mut out);
    out
}

/// Largest `16^{-i}` (`i >= 1`) not above `x`.
pub fn round_delta(x: f64) -> Result<f64> {
    if !(x > 0.0 && x < 1.0) {
        return Err(Error::Rounding(format!("delta = {x} must lie in (0, 1)")));
    }
    let i = ((-x.log2()) / 4.0).ceil().max(1.0);
    Ok(16f64.powf(-i))
}

/// Largest `2^{-2^i}` not above `x`.
pub fn round_eps(x: f64) -> Result<f64> {
    if !(x > 0.0 && x < 1.0) {
        return Err(Error::Rounding(format!("eps = {x} must lie in (0, 1)")));
    }
    let i = (-x.log2()).log2().ceil().max(0.0);
    let v = 2f64.powf(-(2f64.powf(i)));
    if v == 0.0 {
        return Err(Error::Rounding(format!("eps = {x} is below double precision on the grid")));
    }
    Ok(v)
}

/// Default gap placeholder `1 / (n k^3)`.
pub fn default_delta(n: usize, k: usize) -> f64 {
    1.0 / (n as f64 * (k as f64).powi(3))
}

/// Builds a design over `group` on `n` qubits with a concrete cascade from
/// `plan` and the asymptotic schedule for the rounded `(delta, eps/2^{nk})`.
pub fn build_design(
    group: GroupTag,
    n: usize,
    k: usize,
    eps: f64,
    delta: Option<f64>,
    plan: &[StagePlan],
    caps: &Caps,
) -> Result<DesignSpec> {
    if !matches!(group, GroupTag::SO | GroupTag::SU | GroupTag::O | GroupTag::U) {
        return Err(Error::Domain(format!("designs exist for SO, SU, O and U, not {group}")));
    }
    if n < BASE_QUBITS {
        return Err(Error::Domain(format!("designs need n >= {BASE_QUBITS}, got {n}")));
    }
    if k == 0 {
        return Err(Error::Domain("designs need k >= 1".into()));
    }
    let base = base_set(group.special(), true)?;
    let placements = subsets(n, BASE_QUBITS);
    let mut alphabet = Vec::new();
    for placement in 0..placements.len() {
        for element in 0..base.len() {
            alphabet.push(AlphabetEntry::Gate { element, placement });
        }
    }
    let lazy_len = 2 * alphabet.len();
    alphabet.resize(lazy_len.next_power_of_two(), AlphabetEntry::Identity);
    let cascade = Cascade::build(alphabet.len(), plan, caps)?;
    let delta_used = round_delta(delta.unwrap_or_else(|| default_delta(n, k)))?;
    let eps_target = round_eps(eps / 2f64.powi((n * k) as i32))?;
    let params = cascade_params(alphabet.len() as u64, delta_used, eps_target)?;
    Ok(DesignSpec {
        group,
        n,
        k,
        eps,
        base,
        placements,
        alphabet,
        cascade,
        params,
        delta_used,
        eps_target,
        budget: SeedBudget::default(),
    })
}

fn bits_for(count: u128) -> u32 {
    if count <= 1 {
        0
    } else {
        128 - (count - 1).leading_zeros()
    }
}

impl DesignSpec {
    pub fn c(&self) -> usize {
        self.alphabet.len()
    }

    /// Monomial count of the concrete cascade.
    pub fn count(&self) -> usize {
        self.cascade.count()
    }

    pub fn length(&self) -> usize {
        self.cascade.length()
    }

    fn lift_bits(&self) -> u32 {
        u32::from(self.group == GroupTag::O)
    }

    /// Number of valid seeds: `N`, doubled by the O lift.
    pub fn seed_domain(&self) -> u128 {
        (self.count() as u128) << self.lift_bits()
    }

    /// `ceil(log2 N)`, plus one for the O lift.
    pub fn seed_bits(&self) -> u32 {
        bits_for(self.count() as u128) + self.lift_bits()
    }

    /// Seed bits of the asymptotic schedule.
    pub fn theory_seed_bits(&self) -> u64 {
        self.params.log2_n + self.lift_bits() as u64
    }

    /// `a n k + b log2(1/eps)`.
    pub fn seed_bound(&self) -> f64 {
        self.budget.a * (self.n * self.k) as f64 + self.budget.b * (1.0 / self.eps).log2()
    }

    pub fn seed(&self, value: u64) -> Result<Seed> {
        if value as u128 >= self.seed_domain() {
            return Err(Error::Bounds(format!("seed {value} outside [0, {})", self.seed_domain())));
        }
        Ok(Seed { value, width: self.seed_bits() })
    }

    /// The placed gate of an alphabet entry, or `None` for the identity.
    fn placed(&self, a: usize) -> Option<(Gate, C64)> {
        match self.alphabet[a] {
            AlphabetEntry::Identity => None,
            AlphabetEntry::Gate { element, placement } => {
                let e = &self.base.elements[element];
                Some((e.gate.relabel(&self.placements[placement]), e.phase))
            }
        }
    }

    /// Matrix of every alphabet symbol on `n` qubits.
    pub fn alphabet_matrices(&self) -> Result<Vec<ComplexMatrix>> {
        let dim = 1usize << self.n;
        (0..self.c())
            .map(|a| match self.placed(a) {
                None => Ok(ComplexMatrix::identity(dim)),
                Some((g, phase)) => Ok(embed_gate(&g, self.n)?.scale(phase)),
            })
            .collect()
    }

    /// Circuit of a seed: symbols are emitted from the last position to the
    /// first so that gate order is time order.
    pub fn sample_circuit(&self, seed: Seed) -> Result<Circuit> {
        let seed = self.seed(seed.value)?;
        let n_mono = self.count() as u64;
        let (index, lift) = (seed.value % n_mono, seed.value / n_mono);
        let mut circuit = Circuit::new(self.n);
        if lift == 1 {
            circuit.push(Gate::new(GateKind::Col1Sign, (0..self.n).collect()));
        }
        for j in (0..self.length()).rev() {
            let Symbol { base, dagger } = self.cascade.walk_symbol(index as usize, j)?;
            if let Some((g, phase)) = self.placed(base) {
                if dagger {
                    circuit.push(g.inverse());
                    circuit.global_phase *= phase.conj();
                } else {
                    circuit.push(g);
                    circuit.global_phase *= phase;
                }
            }
        }
        Ok(circuit)
    }

    /// Moment of the alphabet itself (the depth-0 design).
    pub fn alphabet_gap(&self, k_eval: usize, caps: &Caps) -> Result<f64> {
        let haar = haar_projector(self.group.special(), 1 << self.n, k_eval, caps)?;
        let m = multiset_moment(&self.alphabet_matrices()?, k_eval, caps)?;
        design_error(&m, &haar, NormKind::Operator, caps)
    }
}

/// `O`: first column times `b`; `U`: unchanged.
pub fn lift_to_full_group(g: &ComplexMatrix, group: GroupTag, b: C64) -> ComplexMatrix {
    match group {
        GroupTag::O => {
            let mut out = g.clone();
            for r in 0..out.rows() {
                out[(r, 0)] *= b;
            }
            out
        }
        _ => g.clone(),
    }
}

/// Result of an exhaustive evaluation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DesignReport {
    pub schema: u32,
    pub group: GroupTag,
    pub n: usize,
    pub k: usize,
    pub eps: f64,
    #[serde(rename = "N")]
    pub count: u64,
    #[serde(rename = "L")]
    pub length: u64,
    pub seed_bits: u32,
    pub measured_gap: f64,
    pub design_error_op: f64,
    pub design_error_s1: f64,
    pub f_bound: f64,
}

/// Averages `rho^{k,k}` over every monomial of the concrete cascade and
/// compares with the Haar projector.
pub fn enumerate_design_moment(spec: &DesignSpec, k_eval: usize, caps: &Caps) -> Result<DesignReport> {
    let count = spec.count();
    if count as u64 > caps.enumeration {
        return Err(Error::Size(format!(
            "{count} monomials exceed the enumeration cap {}; use Monte-Carlo estimation instead",
            caps.enumeration
        )));
    }
    let group = spec.group;
    let haar: HaarProjector = haar_projector(group, 1 << spec.n, k_eval, caps)?;
    let letters = spec.alphabet_matrices()?;
    let real = group.is_real();
    let moment = moment_by_batches(
        count.div_ceil(MC_CHUNK),
        1 << spec.n,
        k_eval,
        real,
        |b| {
            (b * MC_CHUNK..((b + 1) * MC_CHUNK).min(count))
                .map(|i| eval_monomial(&spec.cascade.monomial(i)?, &letters))
                .collect()
        },
        caps,
    )?;
    let measured_gap = design_error(&multiset_moment(&letters, k_eval, caps)?, &haar, NormKind::Operator, caps)?;
    Ok(DesignReport {
        schema: 1,
        group,
        n: spec.n,
        k: k_eval,
        eps: spec.eps,
        count: count as u64,
        length: spec.length() as u64,
        seed_bits: spec.seed_bits(),
        measured_gap,
        design_error_op: design_error(&moment, &haar, NormKind::Operator, caps)?,
        design_error_s1: design_error(&moment, &haar, NormKind::Schatten1, caps)?,
        f_bound: f_cascade(&spec.cascade.mus()?, measured_gap),
    })
}

/// Summary of a built design, as emitted by `designforge build`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DesignSummary {
    pub schema: u32,
    pub group: GroupTag,
    pub n: usize,
    pub k: usize,
    pub eps: f64,
    pub eps_target: f64,
    pub delta_used: f64,
    pub c: usize,
    #[serde(rename = "N")]
    pub count: u64,
    #[serde(rename = "L")]
    pub length: u64,
    pub seed_bits: u32,
    pub theory: TheorySummary,
    pub cascade: CascadeManifest,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TheorySummary {
    pub ell1: u32,
    pub ell2: u32,
    pub log2_n: u64,
    pub log2_length: u32,
    pub seed_bits: u64,
    pub seed_bound: f64,
    pub seed_within_bound: bool,
    pub predicted_bound: f64,
}

impl DesignSpec {
    pub fn summary(&self) -> Result<DesignSummary> {
        Ok(DesignSummary {
            schema: 1,
            group: self.group,
            n: self.n,
            k: self.k,
            eps: self.eps,
            eps_target: self.eps_target,
            delta_used: self.delta_used,
            c: self.c(),
            count: self.count() as u64,
            length: self.length() as u64,
            seed_bits: self.seed_bits(),
            theory: TheorySummary {
                ell1: self.params.ell1,
                ell2: self.params.ell2,
                log2_n: self.params.log2_n,
                log2_length: self.params.ell1 + self.params.ell2,
                seed_bits: self.theory_seed_bits(),
                seed_bound: self.seed_bound(),
                seed_within_bound: self.theory_seed_bits() as f64 <= self.seed_bound(),
                predicted_bound: self.params.predicted_bound(),
            },
            cascade: self.cascade.manifest()?,
        })
    }
}
