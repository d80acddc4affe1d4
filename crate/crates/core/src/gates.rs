//! Elementary gates, their placement on n qubits, circuits, and the fixed
//! four-qubit base multisets.
//!
//! Wires are 0-based and wire 0 is the most significant tensor factor. A gate
//! on wires `(w_0, ..., w_{l-1})` reads its local basis index with `w_0` as
//! the most significant bit, so CNOT on `(c, t)` has control `c` and target
//! `t`.

use std::collections::BTreeSet;
use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_4};

use serde::{Deserialize, Serialize};

use crate::linalg::{ComplexMatrix, GroupTag, C64, ONE, ZERO};
use crate::error::{Error, Result};

/// Number of qubits the base multisets act on.
pub const BASE_QUBITS: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum GateKind {
    /// Rotation with entries 3/5 and 4/5.
    Q,
    Qinv,
    H,
    /// Phase gate diag(1, i).
    S,
    Sinv,
    /// diag(1, e^{i pi/4}).
    T,
    Tinv,
    #[serde(rename = "CNOT")]
    Cnot,
    /// -Id on one qubit; carries a global sign.
    NegId,
    /// diag(-1, 1, ..., 1) on all of its wires: flips the sign of the first
    /// column of whatever it is applied before.
    #[serde(rename = "COL1SIGN")]
    Col1Sign,
}

impl GateKind {
    pub fn arity(self) -> Option<usize> {
        match self {
            GateKind::Cnot => Some(2),
            GateKind::Col1Sign => None,
            _ => Some(1),
        }
    }

    pub fn inverse(self) -> GateKind {
        match self {
            GateKind::Q => GateKind::Qinv,
            GateKind::Qinv => GateKind::Q,
            GateKind::S => GateKind::Sinv,
            GateKind::Sinv => GateKind::S,
            GateKind::T => GateKind::Tinv,
            GateKind::Tinv => GateKind::T,
            k => k,
        }
    }

    pub fn is_real(self) -> bool {
        !matches!(self, GateKind::S | GateKind::Sinv | GateKind::T | GateKind::Tinv)
    }
}

/// A signed gate placed on named wires.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Gate {
    pub kind: GateKind,
    pub sign: i8,
    pub wires: Vec<usize>,
}

impl Gate {
    pub fn new(kind: GateKind, wires: Vec<usize>) -> Self {
        Gate { kind, sign: 1, wires }
    }

    pub fn signed(kind: GateKind, sign: i8, wires: Vec<usize>) -> Self {
        Gate { kind, sign, wires }
    }

    pub fn inverse(&self) -> Gate {
        Gate { kind: self.kind.inverse(), sign: self.sign, wires: self.wires.clone() }
    }

    pub fn negate(&self) -> Gate {
        Gate { kind: self.kind, sign: -self.sign, wires: self.wires.clone() }
    }

    /// The same gate moved onto other wires: local wire `i` goes to
    /// `placement[self.wires[i]]`.
    pub fn relabel(&self, placement: &[usize]) -> Gate {
        Gate { kind: self.kind, sign: self.sign, wires: self.wires.iter().map(|&w| placement[w]).collect() }
    }

    fn validate_shape(&self) -> Result<()> {
        if self.sign != 1 && self.sign != -1 {
            return Err(Error::Placement(format!("gate sign must be +1 or -1, got {}", self.sign)));
        }
        match self.kind.arity() {
            Some(a) if a != self.wires.len() => Err(Error::Placement(format!(
                "{:?} acts on {a} wire(s), got {}",
                self.kind,
                self.wires.len()
            ))),
            None if self.wires.is_empty() => Err(Error::Placement("COL1SIGN needs at least one wire".into())),
            _ => Ok(()),
        }
    }
}

/// Local matrix of a gate including its sign: 2x2 for one-qubit kinds, 4x4
/// for CNOT, `2^l x 2^l` for COL1SIGN on `l` wires.
pub fn gate_matrix(g: &Gate) -> ComplexMatrix {
    let r = |x: f64| C64::new(x, 0.0);
    let m = match g.kind {
        GateKind::Q => mat2([r(0.6), r(-0.8), r(0.8), r(0.6)]),
        GateKind::Qinv => mat2([r(0.6), r(0.8), r(-0.8), r(0.6)]),
        GateKind::H => mat2([r(FRAC_1_SQRT_2), r(FRAC_1_SQRT_2), r(FRAC_1_SQRT_2), r(-FRAC_1_SQRT_2)]),
        GateKind::S => mat2([ONE, ZERO, ZERO, C64::new(0.0, 1.0)]),
        GateKind::Sinv => mat2([ONE, ZERO, ZERO, C64::new(0.0, -1.0)]),
        GateKind::T => mat2([ONE, ZERO, ZERO, C64::from_polar(1.0, FRAC_PI_4)]),
        GateKind::Tinv => mat2([ONE, ZERO, ZERO, C64::from_polar(1.0, -FRAC_PI_4)]),
        GateKind::NegId => mat2([r(-1.0), ZERO, ZERO, r(-1.0)]),
        GateKind::Cnot => ComplexMatrix::from_real(
            4,
            4,
            &[1., 0., 0., 0., 0., 1., 0., 0., 0., 0., 0., 1., 0., 0., 1., 0.],
        )
        .unwrap(),
        GateKind::Col1Sign => {
            let dim = 1usize << g.wires.len().max(1);
            let mut d = vec![ONE; dim];
            d[0] = r(-1.0);
            ComplexMatrix::diagonal(&d)
        }
    };
    if g.sign < 0 {
        m.scale_real(-1.0)
    } else {
        m
    }
}

fn mat2(e: [C64; 4]) -> ComplexMatrix {
    ComplexMatrix::from_vec(2, 2, e.to_vec()).unwrap()
}

/// Column-sparse form of `g` placed on `n` qubits: for every input basis
/// state, the nonzero output amplitudes.
fn embedded_columns(g: &Gate, n: usize) -> Result<Vec<Vec<(usize, C64)>>> {
    g.validate_shape()?;
    let mut seen = BTreeSet::new();
    for &w in &g.wires {
        if w >= n {
            return Err(Error::Placement(format!("wire {w} out of range for {n} qubits")));
        }
        if !seen.insert(w) {
            return Err(Error::Placement(format!("duplicate wire {w}")));
        }
    }
    let local = gate_matrix(g);
    let l = g.wires.len();
    let shifts: Vec<usize> = g.wires.iter().map(|&w| n - 1 - w).collect();
    let mask: usize = shifts.iter().map(|&s| 1usize << s).sum();
    let scatter = |y: usize| -> usize {
        shifts.iter().enumerate().map(|(i, &s)| ((y >> (l - 1 - i)) & 1) << s).sum()
    };
    let outputs: Vec<usize> = (0..1usize << l).map(scatter).collect();
    Ok((0..1usize << n)
        .map(|x| {
            let sub = shifts.iter().fold(0, |acc, &s| (acc << 1) | ((x >> s) & 1));
            let rest = x & !mask;
            (0..1usize << l)
                .filter_map(|y| {
                    let v = local[(y, sub)];
                    (v != ZERO).then_some((rest | outputs[y], v))
                })
                .collect()
        })
        .collect())
}

/// `g` acting on the named wires of an `n`-qubit register, identity
/// elsewhere.
pub fn embed_gate(g: &Gate, n: usize) -> Result<ComplexMatrix> {
    let cols = embedded_columns(g, n)?;
    let dim = 1usize << n;
    let mut m = ComplexMatrix::zeros(dim, dim);
    for (x, entries) in cols.iter().enumerate() {
        for &(y, v) in entries {
            m[(y, x)] = v;
        }
    }
    Ok(m)
}

/// `embed_gate(g, n) * m` without materializing the embedded gate.
pub fn apply_gate_left(g: &Gate, n: usize, m: &ComplexMatrix) -> Result<ComplexMatrix> {
    let dim = 1usize << n;
    if m.rows() != dim {
        return Err(Error::Shape(format!("expected {dim} rows, got {}", m.rows())));
    }
    let cols = embedded_columns(g, n)?;
    let mut out = ComplexMatrix::zeros(dim, m.cols());
    let w = m.cols();
    for (x, entries) in cols.iter().enumerate() {
        let src = m.row(x).to_vec();
        for &(y, v) in entries {
            let dst = &mut out.data_mut()[y * w..(y + 1) * w];
            for (d, s) in dst.iter_mut().zip(&src) {
                *d += v * s;
            }
        }
    }
    Ok(out)
}

/// An ordered gate list on `n` qubits; `gates[0]` is applied first.
#[derive(Clone, Debug, PartialEq)]
pub struct Circuit {
    pub n: usize,
    pub gates: Vec<Gate>,
    pub global_phase: C64,
}

impl Circuit {
    pub fn new(n: usize) -> Self {
        Circuit { n, gates: Vec::new(), global_phase: ONE }
    }

    pub fn push(&mut self, g: Gate) {
        self.gates.push(g);
    }

    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    /// `phase * G_last * ... * G_first`.
    pub fn matrix(&self) -> Result<ComplexMatrix> {
        let mut m = ComplexMatrix::identity(1 << self.n);
        for g in &self.gates {
            m = apply_gate_left(g, self.n, &m)?;
        }
        Ok(m.scale(self.global_phase))
    }

    /// Rewrites every negative sign into a `NegId` on wire 0 so the circuit
    /// only uses unsigned elementary gates.
    pub fn emitted(&self) -> Circuit {
        let mut gates = Vec::with_capacity(self.gates.len());
        for g in &self.gates {
            if g.sign < 0 {
                gates.push(Gate { sign: 1, ..g.clone() });
                gates.push(Gate::new(GateKind::NegId, vec![0]));
            } else {
                gates.push(g.clone());
            }
        }
        Circuit { n: self.n, gates, global_phase: self.global_phase }
    }

    pub fn to_json_value(&self) -> CircuitJson {
        CircuitJson {
            schema: 1,
            n: self.n,
            gates: self.gates.clone(),
            phase: [self.global_phase.re, self.global_phase.im],
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_json_value()).expect("circuit serializes")
    }

    pub fn from_json(s: &str) -> Result<Circuit> {
        let raw: CircuitJson = serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))?;
        if raw.schema != 1 {
            return Err(Error::Parse(format!("unsupported circuit schema {}", raw.schema)));
        }
        for g in &raw.gates {
            g.validate_shape()?;
            if g.wires.iter().any(|&w| w >= raw.n) {
                return Err(Error::Placement(format!("gate {:?} exceeds {} qubits", g.kind, raw.n)));
            }
        }
        Ok(Circuit { n: raw.n, gates: raw.gates, global_phase: C64::new(raw.phase[0], raw.phase[1]) })
    }
}

/// Wire format of a circuit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CircuitJson {
    pub schema: u32,
    pub n: usize,
    pub gates: Vec<Gate>,
    pub phase: [f64; 2],
}

/// One element of a base multiset: a gate on the four base wires times a unit
/// phase making its determinant one.
#[derive(Clone, Debug, PartialEq)]
pub struct BaseElement {
    pub gate: Gate,
    pub phase: C64,
}

impl BaseElement {
    pub fn matrix(&self) -> ComplexMatrix {
        embed_gate(&self.gate, BASE_QUBITS).expect("base gates fit on four wires").scale(self.phase)
    }
}

/// The fixed base multiset on four qubits.
#[derive(Clone, Debug, PartialEq)]
pub struct BaseSet {
    pub group: GroupTag,
    pub n0: usize,
    pub elements: Vec<BaseElement>,
    /// The lazy version adjoins the identity with total weight 1/2.
    pub lazy: bool,
}

impl BaseSet {
    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn matrices(&self) -> Vec<ComplexMatrix> {
        self.elements.iter().map(BaseElement::matrix).collect()
    }
}

/// Closure of the generators under inverses and negations, ordered
/// lexicographically by `(kind, sign, wires)`.
///
/// SO: Q on each wire and CNOT on each ordered wire pair. SU: H, S and T on
/// each wire and CNOT on each ordered pair, each rescaled by the principal
/// 16th root of its inverse determinant.
pub fn base_set(group: GroupTag, lazy: bool) -> Result<BaseSet> {
    let one_qubit: &[GateKind] = match group {
        GroupTag::SO => &[GateKind::Q],
        GroupTag::SU => &[GateKind::H, GateKind::S, GateKind::T],
        other => {
            return Err(Error::Domain(format!("base sets exist for SO and SU only, not {other}")))
        }
    };
    let mut generators = Vec::new();
    for &kind in one_qubit {
        for w in 0..BASE_QUBITS {
            generators.push(Gate::new(kind, vec![w]));
        }
    }
    for c in 0..BASE_QUBITS {
        for t in 0..BASE_QUBITS {
            if c != t {
                generators.push(Gate::new(GateKind::Cnot, vec![c, t]));
            }
        }
    }
    let mut closed: BTreeSet<Gate> = BTreeSet::new();
    let mut work = generators;
    while let Some(g) = work.pop() {
        if closed.insert(g.clone()) {
            work.push(g.inverse());
            work.push(g.negate());
        }
    }
    let elements = closed
        .into_iter()
        .map(|gate| {
            let phase = match group {
                GroupTag::SU => {
                    let det = embed_gate(&gate, BASE_QUBITS)?.det()?;
                    C64::from_polar(1.0, det.inv().arg() / (1u32 << BASE_QUBITS) as f64)
                }
                _ => ONE,
            };
            Ok(BaseElement { gate, phase })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BaseSet { group, n0: BASE_QUBITS, elements, lazy })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{matrix_norm, NormKind};

    #[test]
    fn q_and_t_entries() {
        let q = gate_matrix(&Gate::new(GateKind::Q, vec![0]));
        let expect = [0.6, -0.8, 0.8, 0.6];
        for (z, e) in q.data().iter().zip(expect) {
            assert_eq!(*z, C64::new(e, 0.0));
        }
        let t = gate_matrix(&Gate::new(GateKind::T, vec![0]));
        assert_eq!(t[(0, 0)], ONE);
        assert!((t[(1, 1)] - C64::new(FRAC_1_SQRT_2, FRAC_1_SQRT_2)).norm() < 1e-15);
        assert_eq!(t[(0, 1)], ZERO);
    }

    #[test]
    fn inverse_kinds_invert() {
        for kind in [GateKind::Q, GateKind::H, GateKind::S, GateKind::T, GateKind::NegId] {
            let g = Gate::new(kind, vec![0]);
            let prod = &gate_matrix(&g.inverse()) * &gate_matrix(&g);
            assert!(prod.max_abs_diff(&ComplexMatrix::identity(2)) < 1e-15, "{kind:?}");
        }
        let c = gate_matrix(&Gate::new(GateKind::Cnot, vec![0, 1]));
        assert_eq!(&c * &c, ComplexMatrix::identity(4));
    }

    #[test]
    fn sign_scales_matrix() {
        let g = Gate::signed(GateKind::Q, -1, vec![0]);
        assert_eq!(gate_matrix(&g), gate_matrix(&g.negate()).scale_real(-1.0));
    }

    #[test]
    fn embed_cnot_natural_order() {
        let g = Gate::new(GateKind::Cnot, vec![0, 1]);
        assert_eq!(embed_gate(&g, 2).unwrap(), gate_matrix(&g));
        let q = Gate::new(GateKind::Q, vec![0]);
        assert_eq!(embed_gate(&q, 1).unwrap(), gate_matrix(&q));
    }

    #[test]
    fn embed_cnot_reversed_matches_swap_conjugation() {
        let swap = ComplexMatrix::from_real(
            4,
            4,
            &[1., 0., 0., 0., 0., 0., 1., 0., 0., 1., 0., 0., 0., 0., 0., 1.],
        )
        .unwrap();
        let cnot = gate_matrix(&Gate::new(GateKind::Cnot, vec![0, 1]));
        let oracle = &(&swap * &cnot) * &swap;
        assert_eq!(embed_gate(&Gate::new(GateKind::Cnot, vec![1, 0]), 2).unwrap(), oracle);
    }

    #[test]
    fn embed_rejects_bad_wires() {
        assert!(matches!(
            embed_gate(&Gate::new(GateKind::Cnot, vec![1, 1]), 2),
            Err(Error::Placement(_))
        ));
        assert!(embed_gate(&Gate::new(GateKind::Q, vec![3]), 3).is_err());
        assert!(embed_gate(&Gate::new(GateKind::Q, vec![0, 1]), 3).is_err());
        assert!(embed_gate(&Gate::signed(GateKind::Q, 2, vec![0]), 3).is_err());
    }

    #[test]
    fn embed_middle_wire_matches_kron() {
        let q = Gate::new(GateKind::Q, vec![1]);
        let id2 = ComplexMatrix::identity(2);
        let expect = crate::linalg::tensor(
            &crate::linalg::tensor(&id2, &gate_matrix(&q)).unwrap(),
            &id2,
        )
        .unwrap();
        assert_eq!(embed_gate(&q, 3).unwrap(), expect);
    }

    #[test]
    fn so_base_set_count_and_membership() {
        let set = base_set(GroupTag::SO, false).unwrap();
        assert_eq!(set.len(), 40);
        for e in &set.elements {
            let m = e.matrix();
            assert!(m.is_real(0.0));
            let dev = &(&m.adjoint() * &m) - &ComplexMatrix::identity(16);
            assert!(matrix_norm(&dev, NormKind::Operator).unwrap() <= 1e-12);
            assert!((m.det().unwrap() - ONE).norm() <= 1e-12);
        }
    }

    #[test]
    fn su_base_set_count_and_membership() {
        let set = base_set(GroupTag::SU, true).unwrap();
        assert_eq!(set.len(), 64);
        assert!(set.lazy);
        for e in &set.elements {
            let m = e.matrix();
            let dev = &(&m.adjoint() * &m) - &ComplexMatrix::identity(16);
            assert!(matrix_norm(&dev, NormKind::Operator).unwrap() <= 1e-12);
            assert!((m.det().unwrap() - ONE).norm() <= 1e-12);
        }
    }

    #[test]
    fn base_set_is_inverse_and_negation_closed() {
        for group in [GroupTag::SO, GroupTag::SU] {
            let set = base_set(group, false).unwrap();
            let mut gates: Vec<Gate> = set.elements.iter().map(|e| e.gate.clone()).collect();
            let mut inverses: Vec<Gate> = gates.iter().map(Gate::inverse).collect();
            let mut negations: Vec<Gate> = gates.iter().map(Gate::negate).collect();
            inverses.sort();
            negations.sort();
            gates.sort();
            assert_eq!(gates, inverses);
            assert_eq!(gates, negations);
        }
    }

    #[test]
    fn unsupported_group_rejected() {
        assert!(matches!(base_set(GroupTag::U, false), Err(Error::Domain(_))));
    }

    #[test]
    fn emitted_circuit_has_same_matrix() {
        let mut c = Circuit::new(3);
        c.push(Gate::signed(GateKind::Cnot, -1, vec![2, 0]));
        c.push(Gate::new(GateKind::Q, vec![1]));
        c.push(Gate::signed(GateKind::Qinv, -1, vec![2]));
        let e = c.emitted();
        assert!(e.gates.iter().all(|g| g.sign == 1));
        assert_eq!(e.len(), 5);
        assert!(c.matrix().unwrap().max_abs_diff(&e.matrix().unwrap()) < 1e-14);
    }

    #[test]
    fn circuit_matrix_fold_orders_agree() {
        let mut c = Circuit::new(3);
        let gates = [
            Gate::new(GateKind::H, vec![0]),
            Gate::new(GateKind::Cnot, vec![0, 2]),
            Gate::new(GateKind::T, vec![1]),
            Gate::new(GateKind::Cnot, vec![1, 0]),
            Gate::new(GateKind::S, vec![2]),
        ];
        for g in &gates {
            c.push(g.clone());
        }
        let mats: Vec<ComplexMatrix> = gates.iter().map(|g| embed_gate(g, 3).unwrap()).collect();
        let left = mats.iter().fold(ComplexMatrix::identity(8), |acc, m| m * &acc);
        let right = mats.iter().rev().fold(ComplexMatrix::identity(8), |acc, m| &acc * m);
        assert!(left.max_abs_diff(&right) < 1e-10);
        assert!(left.max_abs_diff(&c.matrix().unwrap()) < 1e-10);
    }

    #[test]
    fn circuit_json_roundtrip() {
        let mut c = Circuit::new(2);
        c.push(Gate::new(GateKind::Cnot, vec![0, 1]));
        c.push(Gate::signed(GateKind::Qinv, -1, vec![1]));
        c.push(Gate::new(GateKind::Col1Sign, vec![0, 1]));
        let s = c.to_json();
        assert_eq!(
            s,
            r#"{"schema":1,"n":2,"gates":[{"kind":"CNOT","sign":1,"wires":[0,1]},{"kind":"Qinv","sign":-1,"wires":[1]},{"kind":"COL1SIGN","sign":1,"wires":[0,1]}],"phase":[1.0,0.0]}"#
        );
        assert_eq!(Circuit::from_json(&s).unwrap(), c);
        assert!(Circuit::from_json(r#"{"schema":2,"n":1,"gates":[],"phase":[1.0,0.0]}"#).is_err());
    }
}
