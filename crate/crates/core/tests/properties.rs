use proptest::prelude::*;
use qtrojan_core::circuit::{emit_qasm, parse_qasm};
use qtrojan_core::sim::{circuit_unitary, evolve, gate_unitary, qubit_permutation};
use qtrojan_core::{transpile, Backend, Circuit, Gate, GateKind, StateVector};

fn gate(n: usize) -> impl Strategy<Value = Gate> {
    let q = 0..n;
    let pair = (0..n, 1..n.max(2)).prop_map(move |(a, d)| (a, (a + d) % n));
    let angle = -7.0f64..7.0;
    let one = prop_oneof![
        q.clone().prop_map(Gate::h),
        q.clone().prop_map(Gate::x),
        q.clone().prop_map(Gate::sx),
        (angle.clone(), q.clone()).prop_map(|(t, q)| Gate::rx(t, q)),
        (angle, q.clone()).prop_map(|(t, q)| Gate::rz(t, q)),
        q.prop_map(|q| Gate::barrier(vec![q])),
    ];
    if n < 2 {
        one.boxed()
    } else {
        prop_oneof![
            3 => one,
            1 => pair.clone().prop_map(|(a, b)| Gate::cx(a, b)),
            1 => pair.prop_map(|(a, b)| Gate::swap(a, b)),
        ]
        .boxed()
    }
}

fn circuit(max_qubits: usize) -> impl Strategy<Value = Circuit> {
    (1..=max_qubits).prop_flat_map(|n| {
        prop::collection::vec(gate(n), 0..30).prop_map(move |gs| Circuit::from_gates(n, 0, gs).unwrap())
    })
}

fn with_measures(c: &Circuit) -> Circuit {
    let mut m = Circuit::from_gates(c.num_qubits(), c.num_qubits(), c.gates().to_vec()).unwrap();
    for q in 0..c.num_qubits() {
        m.push(Gate::measure(q, q)).unwrap();
    }
    m
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn qasm_round_trip(c in circuit(5)) {
        let c = with_measures(&c);
        let text = emit_qasm(&c);
        let back = parse_qasm(&text).unwrap();
        prop_assert_eq!(back.num_qubits(), c.num_qubits());
        prop_assert_eq!(back.gates(), c.gates());
        prop_assert_eq!(emit_qasm(&back), text);
    }

    #[test]
    fn evolve_matches_unitary(c in circuit(5), basis in 0usize..32) {
        let n = c.num_qubits();
        let s0 = StateVector::<f64>::basis(n, basis % (1 << n));
        let s = evolve(&c, &s0).unwrap();
        prop_assert!((s.norm_sqr() - 1.0).abs() < 1e-10);
        let u = circuit_unitary::<f64>(&c).unwrap();
        prop_assert!(u.is_unitary(1e-9));
        let t = u.apply(&s0).unwrap();
        for (a, b) in s.amplitudes().iter().zip(t.amplitudes()) {
            prop_assert!((a - b).norm() < 1e-9);
        }
        for g in c.gates().iter().filter(|g| g.kind.is_unitary()) {
            prop_assert!(gate_unitary::<f64>(g, n).unwrap().unitarity_error() < 1e-9);
        }
    }

    #[test]
    fn ideal_transpile_preserves_unitary(c in circuit(5)) {
        let (out, layout) = transpile(&c, Backend::Ideal).unwrap();
        prop_assert!(layout.is_identity());
        prop_assert!(out.len() <= c.len());
        let u = circuit_unitary::<f64>(&c).unwrap();
        prop_assert!(circuit_unitary::<f64>(&out).unwrap().equal_up_to_phase(&u, 1e-9));
    }

    #[test]
    fn linear5_transpile_preserves_unitary_up_to_layout(c in circuit(5)) {
        let (out, layout) = transpile(&c, Backend::Linear5).unwrap();
        prop_assert_eq!(out.num_qubits(), 5);
        for g in out.gates() {
            prop_assert!(Backend::Linear5.supports(&g.kind), "{:?}", g);
            if g.qubits.len() == 2 {
                prop_assert!(Backend::Linear5.is_coupled(g.qubits[0], g.qubits[1]));
            }
        }
        let wide = Circuit::from_gates(5, 0, c.gates().to_vec()).unwrap();
        let expect = qubit_permutation::<f64>(layout.final_layout()).matmul(&circuit_unitary::<f64>(&wide).unwrap());
        prop_assert!(circuit_unitary::<f64>(&out).unwrap().equal_up_to_phase(&expect, 1e-9));
    }

    #[test]
    fn linear5_measures_land_on_final_layout(c in circuit(5)) {
        let (out, layout) = transpile(&with_measures(&c), Backend::Linear5).unwrap();
        let measures: Vec<&Gate> = out.gates().iter().filter(|g| g.kind == GateKind::Measure).collect();
        prop_assert_eq!(measures.len(), c.num_qubits());
        for m in measures {
            let clbit = m.clbit.unwrap();
            prop_assert_eq!(m.qubits[0], layout.final_layout()[clbit]);
        }
    }
}
