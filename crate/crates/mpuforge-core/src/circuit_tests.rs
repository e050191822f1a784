use std::sync::Arc;

use num_complex::Complex64;
use proptest::prelude::*;

use crate::circuit::*;
use crate::linalg::{c, identity, max_abs_diff, CMatrix};
use crate::sampling;

fn regs(dims: &[usize]) -> Vec<Register> {
    dims.iter()
        .enumerate()
        .map(|(id, &dim)| Register {
            id,
            kind: RegisterKind::Physical,
            dim,
        })
        .collect()
}

fn x_gate() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[c(0., 0.), c(1., 0.), c(1., 0.), c(0., 0.)])
}

#[test]
fn depth_recurrences() {
    let r = regs(&[2, 2]);
    let p = CircuitNode::primitive(Arc::new(Gate::Dense(x_gate())), vec![0]);
    let q = CircuitNode::primitive(Arc::new(Gate::Dense(x_gate())), vec![1]);
    assert_eq!(depth(&p).depth, 1);
    assert_eq!(
        depth(&CircuitNode::par(vec![p.clone(), q.clone()])).depth,
        1
    );
    assert_eq!(
        depth(&CircuitNode::seq(vec![p.clone(), q.clone()])).depth,
        2
    );
    let rep = CircuitNode::repeat(CircuitNode::seq(vec![p.clone(), q.clone()]), 3);
    assert_eq!(depth(&rep).depth, 6);
    let _ = r;
}

#[test]
fn wide_parallel_has_depth_one() {
    let r = regs(&[2; 6]);
    let ps: Vec<_> = (0..6)
        .map(|k| CircuitNode::primitive(Arc::new(Gate::Dense(x_gate())), vec![k]))
        .collect();
    let node = CircuitNode::par(ps);
    assert_eq!(depth(&node).depth, 1);
    let c = Circuit {
        registers: r,
        root: node,
    };
    c.validate().unwrap();
}

#[test]
fn primitive_x_on_first_qubit() {
    let r = regs(&[2, 2]);
    let node = CircuitNode::primitive(Arc::new(Gate::Dense(x_gate())), vec![0]);
    let mut state = basis_state(&r, &[0, 0]);
    apply_state(&r, &node, &mut state).unwrap();
    let want = basis_state(&r, &[1, 0]);
    assert!(state.iter().zip(&want).all(|(a, b)| (a - b).norm() < 1e-15));
}

#[test]
fn identity_tree_to_unitary() {
    let r = regs(&[2, 3]);
    let node = CircuitNode::seq(vec![]);
    assert!(max_abs_diff(&to_unitary(&r, &node).unwrap(), &identity(6)) < 1e-15);
}

#[test]
fn swap_from_three_primitives() {
    // swap = CX(0,1) CX(1,0) CX(0,1) on qubits
    let r = regs(&[2, 2]);
    let cx01 = {
        // control register 0, target 1; register order [1, 0]: select on last
        Gate::Select {
            blocks: vec![identity(2), x_gate()],
        }
    };
    let cx10 = Gate::Select {
        blocks: vec![identity(2), x_gate()],
    };
    let n1 = CircuitNode::primitive(Arc::new(cx01), vec![1, 0]);
    let n2 = CircuitNode::primitive(Arc::new(cx10), vec![0, 1]);
    let node = CircuitNode::seq(vec![n1.clone(), n2, n1]);
    let u = to_unitary(&r, &node).unwrap();
    let mut swap = CMatrix::zeros(4, 4);
    swap[(0, 0)] = c(1., 0.);
    swap[(1, 2)] = c(1., 0.);
    swap[(2, 1)] = c(1., 0.);
    swap[(3, 3)] = c(1., 0.);
    assert!(max_abs_diff(&u, &swap) < 1e-14);
}

#[test]
fn select_gate_agrees_with_dense_form() {
    let mut rng = sampling::rng(3);
    let b0 = sampling::random_unitary(&mut rng, 3);
    let b1 = sampling::random_unitary(&mut rng, 3);
    let r = regs(&[3, 2]);
    let sel = CircuitNode::primitive(
        Arc::new(Gate::Select {
            blocks: vec![b0.clone(), b1.clone()],
        }),
        vec![0, 1],
    );
    let dense = Gate::Select {
        blocks: vec![b0, b1],
    }
    .to_dense(&[3, 2]);
    let dn = CircuitNode::primitive(Arc::new(Gate::Dense(dense)), vec![0, 1]);
    let u1 = to_unitary(&r, &sel).unwrap();
    let u2 = to_unitary(&r, &dn).unwrap();
    assert!(max_abs_diff(&u1, &u2) < 1e-14);
}

#[test]
fn reflection_gates_match_their_dense_forms() {
    let r = regs(&[2, 3]);
    let refl = CircuitNode::primitive(Arc::new(Gate::AncillaReflection { negate: false }), vec![1]);
    let u = to_unitary(&r, &refl).unwrap();
    for idx in 0..6 {
        let want = if idx % 3 == 0 { 1.0 } else { -1.0 };
        assert!((u[(idx, idx)].re - want).abs() < 1e-15);
    }
    let flip = CircuitNode::primitive(Arc::new(Gate::SubspaceFlip), vec![0, 1]);
    let u = to_unitary(&r, &flip).unwrap();
    // -1 iff register 1 (control) == 0 and register 0 != 0
    for a in 0..2 {
        for b in 0..3 {
            let idx = a * 3 + b;
            let want = if b == 0 && a != 0 { -1.0 } else { 1.0 };
            assert!((u[(idx, idx)].re - want).abs() < 1e-15, "a={a} b={b}");
        }
    }
}

#[test]
fn dagger_inverts() {
    let mut rng = sampling::rng(8);
    let r = regs(&[2, 2, 3]);
    let g1 = CircuitNode::primitive(
        Arc::new(Gate::Dense(sampling::random_unitary(&mut rng, 4))),
        vec![0, 1],
    );
    let g2 = CircuitNode::primitive(
        Arc::new(Gate::Dense(sampling::random_unitary(&mut rng, 6))),
        vec![1, 2],
    );
    let node = CircuitNode::seq(vec![g1, CircuitNode::repeat(g2, 2)]);
    let u = to_unitary(&r, &node).unwrap();
    let ud = to_unitary(&r, &node.dagger()).unwrap();
    assert!(max_abs_diff(&(ud * u), &identity(12)) < 1e-12);
}

#[test]
fn zero_sector_extraction() {
    let r = regs(&[2, 2]);
    // state = (|00> + |11>)/sqrt(2); sector with register 1 = 0 keeps |0>_0
    let mut state = vec![Complex64::ZERO; 4];
    state[0] = c(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    state[3] = c(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let (sector, leak) = zero_sector(&r, &[1], &state);
    assert_eq!(sector.len(), 2);
    assert!((sector[0].re - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
    assert!((leak - 0.5).abs() < 1e-15);
}

#[test]
fn parallel_overlap_rejected() {
    let r = regs(&[2, 2]);
    let p = CircuitNode::primitive(Arc::new(Gate::Dense(x_gate())), vec![0]);
    let q = CircuitNode::primitive(Arc::new(Gate::Dense(x_gate())), vec![0]);
    let circ = Circuit {
        registers: r,
        root: CircuitNode::par(vec![p, q]),
    };
    assert!(circ.validate().is_err());
}

#[test]
fn json_round_trip_bit_exact() {
    let mut rng = sampling::rng(12);
    let r = vec![
        Register {
            id: 0,
            kind: RegisterKind::Physical,
            dim: 2,
        },
        Register {
            id: 1,
            kind: RegisterKind::Bond,
            dim: 3,
        },
        Register {
            id: 2,
            kind: RegisterKind::LcuAncilla,
            dim: 2,
        },
    ];
    let u = sampling::random_unitary(&mut rng, 6);
    let b0 = sampling::random_unitary(&mut rng, 2);
    let b1 = sampling::random_unitary(&mut rng, 2);
    let root = CircuitNode::seq(vec![
        CircuitNode::primitive(Arc::new(Gate::Dense(u.clone())), vec![0, 1]),
        CircuitNode::repeat(
            CircuitNode::seq(vec![
                CircuitNode::primitive(Arc::new(Gate::AncillaReflection { negate: true }), vec![2]),
                CircuitNode::primitive(
                    Arc::new(Gate::Select {
                        blocks: vec![b0, b1],
                    }),
                    vec![0, 2],
                ),
                CircuitNode::primitive(Arc::new(Gate::SubspaceFlip), vec![1, 2]),
            ]),
            3,
        ),
    ]);
    let circ = Circuit { registers: r, root };
    circ.validate().unwrap();
    let text = circuit_to_json(&circ);
    let back = circuit_from_json(&text).unwrap();
    let u1 = to_unitary(&circ.registers, &circ.root).unwrap();
    let u2 = to_unitary(&back.registers, &back.root).unwrap();
    assert_eq!(u1, u2); // bit-exact round trip
    assert_eq!(depth(&circ.root).depth, depth(&back.root).depth);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    /// apply_state agrees with to_unitary * state whenever both are feasible.
    #[test]
    fn apply_matches_dense(seed in 0u64..300) {
        let mut rng = sampling::rng(seed);
        let r = regs(&[2, 3, 2]);
        let nodes = vec![
            CircuitNode::primitive(Arc::new(Gate::Dense(sampling::random_unitary(&mut rng, 6))), vec![1, 0]),
            CircuitNode::primitive(Arc::new(Gate::Dense(sampling::random_unitary(&mut rng, 4))), vec![2, 0]),
            CircuitNode::primitive(Arc::new(Gate::AncillaReflection { negate: false }), vec![1]),
            CircuitNode::primitive(Arc::new(Gate::SubspaceFlip), vec![0, 2, 1]),
        ];
        let node = CircuitNode::seq(nodes);
        let u = to_unitary(&r, &node).unwrap();
        let psi = sampling::random_state(&mut rng, 12);
        let mut state: Vec<Complex64> = psi.iter().cloned().collect();
        apply_state(&r, &node, &mut state).unwrap();
        let want = &u * &psi;
        for (a, b) in state.iter().zip(want.iter()) {
            prop_assert!((a - b).norm() < 1e-12);
        }
    }

    /// Sequence product convention: leftmost child acts first.
    #[test]
    fn sequence_order_convention(seed in 0u64..300) {
        let mut rng = sampling::rng(seed);
        let r = regs(&[2, 2]);
        let a = sampling::random_unitary(&mut rng, 4);
        let b = sampling::random_unitary(&mut rng, 4);
        let na = CircuitNode::primitive(Arc::new(Gate::Dense(a.clone())), vec![0, 1]);
        let nb = CircuitNode::primitive(Arc::new(Gate::Dense(b.clone())), vec![0, 1]);
        let u = to_unitary(&r, &CircuitNode::seq(vec![na, nb])).unwrap();
        prop_assert!(max_abs_diff(&u, &(&b * &a)) < 1e-12);
    }
}
