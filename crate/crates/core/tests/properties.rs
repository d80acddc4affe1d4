//! Property tests over randomly generated inputs.

use proptest::prelude::*;

use designforge::expanders::permutation_graph;
use designforge::gates::{embed_gate, Circuit, Gate, GateKind};
use designforge::linalg::{
    eigvalsh, haar_sample, lanczos_extremes, matrix_norm, ComplexMatrix, GroupTag, LanczosOptions, NormKind, Rng, C64,
};
use designforge::schur_weyl::{cycle_count, enumerate_matchings, haar_projector, Matching};
use designforge::verify::{kappa_gram_sum, kappa_product, projector_instance};
use designforge::walks::{f_cascade, f_mu, Cascade};
use designforge::Caps;

const KINDS: [GateKind; 9] = [
    GateKind::Q,
    GateKind::Qinv,
    GateKind::H,
    GateKind::S,
    GateKind::Sinv,
    GateKind::T,
    GateKind::Tinv,
    GateKind::Cnot,
    GateKind::NegId,
];

fn arb_gate(n: usize) -> impl Strategy<Value = Gate> {
    (0..KINDS.len(), prop::bool::ANY, 0..n, 1..n).prop_map(move |(k, neg, a, off)| {
        let kind = KINDS[k];
        let wires = if kind == GateKind::Cnot { vec![a, (a + off) % n] } else { vec![a] };
        Gate::signed(kind, if neg { -1 } else { 1 }, wires)
    })
}

fn arb_circuit() -> impl Strategy<Value = Circuit> {
    (2usize..5).prop_flat_map(|n| {
        (prop::collection::vec(arb_gate(n), 0..12), -3.0f64..3.0).prop_map(move |(gates, theta)| Circuit {
            n,
            gates,
            global_phase: C64::from_polar(1.0, theta),
        })
    })
}

fn unitarity_defect(m: &ComplexMatrix) -> f64 {
    let p = &m.adjoint() * m;
    p.max_abs_diff(&ComplexMatrix::identity(m.rows()))
}

/// A perfect matching of `[2k]` from a shuffled point list.
fn arb_matching() -> impl Strategy<Value = Matching> {
    (1usize..5).prop_flat_map(|k| {
        Just((0..2 * k).collect::<Vec<usize>>()).prop_shuffle().prop_map(move |pts| {
            Matching::new(k, pts.chunks(2).map(|c| (c[0], c[1])).collect()).unwrap()
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn haar_samples_lie_in_their_group(dim in 1usize..9, seed in any::<u64>(), which in 0usize..4) {
        let group = [GroupTag::SO, GroupTag::SU, GroupTag::O, GroupTag::U][which];
        let g = haar_sample(group, dim, &mut Rng::new(seed)).unwrap();
        prop_assert!(unitarity_defect(&g) < 1e-12);
        let det = g.det().unwrap();
        prop_assert!((det.norm() - 1.0).abs() < 1e-10);
        if group.is_real() {
            prop_assert!(g.is_real(0.0));
        }
        if matches!(group, GroupTag::SO | GroupTag::SU) {
            prop_assert!((det - C64::new(1.0, 0.0)).norm() < 1e-10);
        }
    }

    #[test]
    fn circuit_json_roundtrip(c in arb_circuit()) {
        let back = Circuit::from_json(&c.to_json()).unwrap();
        prop_assert_eq!(&back.gates, &c.gates);
        prop_assert!(back.matrix().unwrap().max_abs_diff(&c.matrix().unwrap()) < 1e-15);
    }

    #[test]
    fn emitted_circuits_keep_their_matrix(c in arb_circuit()) {
        let e = c.emitted();
        prop_assert!(e.gates.iter().all(|g| g.sign == 1));
        prop_assert!(e.matrix().unwrap().max_abs_diff(&c.matrix().unwrap()) < 1e-12);
        prop_assert!(unitarity_defect(&c.matrix().unwrap()) < 1e-12);
    }

    #[test]
    fn gate_inverse_is_adjoint(g in arb_gate(3)) {
        let m = embed_gate(&g, 3).unwrap();
        let inv = embed_gate(&g.inverse(), 3).unwrap();
        prop_assert!(inv.max_abs_diff(&m.adjoint()) < 1e-15);
    }

    #[test]
    fn matchings_canonicalize_and_count_cycles(a in arb_matching(), seed in any::<u64>()) {
        let k = a.k;
        prop_assert!(a.pairs.windows(2).all(|w| w[0].0 < w[1].0));
        prop_assert!(a.pairs.iter().all(|&(lo, hi)| lo < hi));
        prop_assert_eq!(cycle_count(&a, &a), k);
        let caps = Caps::default();
        let all = enumerate_matchings(k, false, &caps).unwrap();
        prop_assert!(all.contains(&a));
        let b = &all[Rng::new(seed).below(all.len())];
        prop_assert_eq!(cycle_count(&a, b), cycle_count(b, &a));
        prop_assert!(cycle_count(&a, b) >= 1 && cycle_count(&a, b) <= k);
    }

    #[test]
    fn matching_sum_is_the_product(d in 2usize..200, k in 1usize..5) {
        let caps = Caps::default();
        prop_assert_eq!(kappa_gram_sum(d, k, &caps).unwrap(), kappa_product(d, k));
    }

    #[test]
    fn f_maps_are_monotone_and_contracting(mu in 0.0f64..1.0, a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(f_mu(mu, lo) <= f_mu(mu, hi) + 1e-15);
        prop_assert!(f_mu(mu, hi) <= 1.0 + 1e-15);
        prop_assert!(f_mu(mu, hi) >= hi * hi - 1e-15);
        prop_assert!((f_cascade(&[mu, mu], hi) - f_mu(mu, f_mu(mu, hi))).abs() < 1e-15);
    }

    #[test]
    fn walk_symbols_match_materialization(c in 2usize..6, d1 in 1usize..4, d2 in 1usize..4, seed in any::<u64>()) {
        let g1 = permutation_graph(c, d1, seed).unwrap();
        let g2 = permutation_graph(c * d1, d2, seed ^ 1).unwrap();
        let cascade = Cascade::new(c, vec![g1, g2]).unwrap();
        let all = cascade.materialize().unwrap();
        prop_assert_eq!(all.len(), c * d1 * d2);
        for (i, m) in all.iter().enumerate() {
            prop_assert_eq!(&cascade.monomial(i).unwrap(), m);
        }
    }

    #[test]
    fn lanczos_matches_dense_spectrum(n in 2usize..24, seed in any::<u64>()) {
        let mut rng = Rng::new(seed);
        let x = ComplexMatrix::from_fn(n, n, |_, _| rng.complex_normal());
        let h = x.hermitian_part();
        let ev = eigvalsh(&h).unwrap();
        let ext = lanczos_extremes(n, |v: &[C64]| h.matvec(v), &[], &LanczosOptions::default()).unwrap();
        let (lo, hi) = (ev.iter().cloned().fold(f64::INFINITY, f64::min), ev.iter().cloned().fold(f64::NEG_INFINITY, f64::max));
        prop_assert!((ext.min - lo).abs() < 1e-8);
        prop_assert!((ext.max - hi).abs() < 1e-8);
        let op = matrix_norm(&h, NormKind::Operator).unwrap();
        prop_assert!((op - lo.abs().max(hi.abs())).abs() < 1e-8);
    }

    #[test]
    fn projector_instances_respect_the_bound(seed in any::<u64>(), t in 0u64..1000, common in prop::bool::ANY) {
        let p = projector_instance(seed, t, common);
        prop_assert!((2..=6).contains(&p.m) && p.dim <= 64);
        prop_assert!(p.norm <= p.bound + 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn haar_projectors_are_orthogonal_projectors(which in 0usize..3, seed in any::<u64>()) {
        let (group, d, k) = [(GroupTag::U, 3, 2), (GroupTag::SO, 5, 2), (GroupTag::SU, 4, 1)][which];
        let caps = Caps::default();
        let p = haar_projector(group, d, k, &caps).unwrap();
        let mut rng = Rng::new(seed);
        let x: Vec<C64> = (0..p.dim()).map(|_| rng.complex_normal()).collect();
        let y: Vec<C64> = (0..p.dim()).map(|_| rng.complex_normal()).collect();
        let px = p.apply(&x);
        let ppx = p.apply(&px);
        prop_assert!(px.iter().zip(&ppx).all(|(a, b)| (a - b).norm() < 1e-10));
        // <y, P x> = <P y, x>
        let py = p.apply(&y);
        let lhs: C64 = y.iter().zip(&px).map(|(a, b)| a.conj() * b).sum();
        let rhs: C64 = py.iter().zip(&x).map(|(a, b)| a.conj() * b).sum();
        prop_assert!((lhs - rhs).norm() < 1e-9);
        // Invariance under a group element.
        let g = haar_sample(group, d, &mut rng).unwrap();
        let gpx = designforge::moments::apply_rho_kk(&g, k, &px).unwrap();
        prop_assert!(gpx.iter().zip(&px).all(|(a, b)| (a - b).norm() < 1e-9));
    }
}
