mod support;

use cqe_core::coupling::{coupling_op, matrix_element, CouplingKind, NodePair};
use cqe_core::hamiltonian::displacement_op;
use cqe_core::netlist::{format_netlist, from_si, to_si, ElementKind, ElementValue, Unit};
use cqe_core::transform::TransformOptions;
use cqe_core::wavefunction::{eig_phase_coord, phase_width, GridAxis, PhaseGrid};
use cqe_core::{parse_netlist, Circuit, CircuitOptions, C64};
use proptest::prelude::*;

const SYMBOLS: [&str; 17] = ["Hz", "kHz", "MHz", "GHz", "THz", "F", "mF", "uF", "nF", "pF", "fF", "aF", "H", "mH", "uH", "nH", "pH"];

/// Two-node circuit: a junction-shunted island coupled to an rf-SQUID-like node.
fn two_node(c1: f64, c2: f64, cc: f64, el: f64, ej1: f64, ej2: f64, flux: f64, ng: f64) -> String {
    format!(
        "[loops]\nl1 = flux {flux}\n[elements]\n(0,1): C {c1}; JJ {ej1}\n(1,2): C {cc}\n(0,2): C {c2}; L {el} loops l1; JJ {ej2} loops l1\n[settings]\nng.2 = {ng}\n"
    )
}

fn two_node_strategy() -> impl Strategy<Value = String> {
    (0.1..2.0f64, 0.1..2.0f64, 0.5..5.0f64, 0.2..2.0f64, 2.0..20.0f64, 2.0..20.0f64, 0.0..1.0f64, -0.5..0.5f64)
        .prop_map(|(c1, c2, cc, el, ej1, ej2, f, ng)| two_node(c1, c2, cc, el, ej1, ej2, f, ng))
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    #[test]
    fn netlist_format_round_trip(text in two_node_strategy()) {
        let spec = parse_netlist(&text).unwrap();
        let again = parse_netlist(&format_netlist(&spec)).unwrap();
        prop_assert_eq!(spec, again);
    }

    #[test]
    fn unit_round_trip(mag in 1e-3..1e3f64, idx in 0usize..17) {
        let unit = Unit::parse(SYMBOLS[idx]).unwrap();
        for kind in [ElementKind::Capacitor, ElementKind::Inductor, ElementKind::Junction] {
            if let Ok(si) = to_si(ElementValue::new(mag, unit), kind) {
                let back = from_si(si, unit, kind).unwrap();
                prop_assert!((back - mag).abs() <= 1e-12 * mag);
            }
        }
    }

    #[test]
    fn hamiltonian_is_hermitian_and_transform_canonical(text in two_node_strategy()) {
        let c = Circuit::from_netlist(&text).unwrap();
        prop_assert!(c.transformed().transformation.canonicality_error() <= 1e-9);
        let m = c.model(&[8, 7]).unwrap();
        let h = m.hamiltonian(m.nominal_params()).unwrap();
        prop_assert!(h.hermiticity_error() <= 1e-12 * h.max_abs());
    }

    #[test]
    fn ground_energy_is_monotone_in_truncation(text in two_node_strategy()) {
        let c = Circuit::from_netlist(&text).unwrap();
        let mut last = f64::INFINITY;
        for t in [[4, 3], [6, 3], [6, 5], [10, 7], [14, 9]] {
            let e0 = c.model(&t).unwrap().diag_nominal(1).unwrap().efreqs[0];
            prop_assert!(e0 <= last + 1e-9 * e0.abs(), "{:?}: {} > {}", t, e0, last);
            last = e0;
        }
    }

    #[test]
    fn displacement_vacuum_overlap(re in -3.0..3.0f64, im in -3.0..3.0f64) {
        let alpha = C64::new(re, im);
        let d = displacement_op(40, alpha);
        let want = (-alpha.norm_sqr() / 2.0).exp();
        prop_assert!((d.get(0, 0) - C64::new(want, 0.0)).norm() <= 1e-10);
    }

    #[test]
    fn coupling_elements_invariant_under_rescaling(s1 in 0.1..10.0f64, s2 in 0.1..10.0f64) {
        let text = support::fixture("two_loop");
        let base = Circuit::from_netlist(&text).unwrap();
        let scaled = base.with_options(CircuitOptions {
            transform: TransformOptions { rescale: Some(vec![s1, s2, 1.0]), ..Default::default() },
            ..Default::default()
        }).unwrap();
        let mut vals = Vec::new();
        for c in [&base, &scaled] {
            let m = c.model(&[8, 5, 5]).unwrap();
            let s = m.diag_nominal(2).unwrap();
            let op = coupling_op(&m, CouplingKind::Capacitive, NodePair::new(1, 2), m.nominal_params()).unwrap();
            vals.push(matrix_element(&op, &s, 0, 1).unwrap().norm());
        }
        prop_assert!((vals[0] - vals[1]).abs() <= 1e-8 * vals[0], "{:?}", vals);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 8, ..ProptestConfig::default() })]

    #[test]
    fn wavefunction_normalized_on_phase_grid(flux in 0.0..1.0f64, k in 0usize..3) {
        let c = support::circuit("fluxonium");
        let m = c.model(&[60]).unwrap();
        let mut p = m.nominal_params().clone();
        p.fluxes[0] = flux;
        let s = m.diag(&p, 3).unwrap();
        // The potential minima spread over a few zero-point widths, so use a wide window.
        let w = phase_width(c.transformed(), 0);
        let n = 2001;
        let grid = PhaseGrid { axes: vec![GridAxis::linspace(-12.0 * w, 12.0 * w, n)] };
        let psi = eig_phase_coord(&s.state(k), c.transformed(), m.basis(), &grid).unwrap();
        let dx = 24.0 * w / (n - 1) as f64;
        let total: f64 = psi.iter().map(|z| z.norm_sqr()).sum::<f64>() * dx;
        prop_assert!((total - 1.0).abs() <= 1e-3, "{}", total);
    }
}
