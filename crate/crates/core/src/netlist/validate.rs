//! Structural checks on a [`CircuitSpec`].

use std::collections::BTreeSet;

use super::*;
use crate::topology::{build_cap_matrix, trace_cycle};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostic {
    pub severity: Severity,
    pub message: String,
}

impl Diagnostic {
    fn error(message: impl Into<String>) -> Self {
        Diagnostic {
            severity: Severity::Error,
            message: message.into(),
        }
    }

    fn warning(message: impl Into<String>) -> Self {
        Diagnostic {
            severity: Severity::Warning,
            message: message.into(),
        }
    }
}

fn find(parent: &mut [usize], x: usize) -> usize {
    let mut r = x;
    while parent[r] != r {
        r = parent[r];
    }
    let mut y = x;
    while parent[y] != r {
        let next = parent[y];
        parent[y] = r;
        y = next;
    }
    r
}

/// Returns every problem found; an empty list means the spec is usable.
pub fn validate(spec: &CircuitSpec) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let n = spec.n_nodes();
    if spec.edges.is_empty() {
        out.push(Diagnostic::error("circuit has no elements"));
        return out;
    }

    let mut used = BTreeSet::new();
    let mut parent: Vec<usize> = (0..=n).collect();
    for (&(i, j), elements) in &spec.edges {
        if i == j {
            out.push(Diagnostic::error(format!("edge ({i},{j}) connects a node to itself")));
        }
        if elements.is_empty() {
            out.push(Diagnostic::error(format!("empty edge ({i},{j})")));
        }
        used.insert(i);
        used.insert(j);
        let (a, b) = (find(&mut parent, i), find(&mut parent, j));
        parent[a] = b;
    }
    for node in 0..=n {
        if !used.contains(&node) {
            out.push(Diagnostic::error(format!("disconnected node {node}: no element touches it")));
        } else if find(&mut parent, node) != find(&mut parent, 0) {
            out.push(Diagnostic::error(format!("disconnected node {node}: no path to ground")));
        }
    }

    for (&edge, elements) in &spec.edges {
        for e in elements {
            let v = e.value();
            if !(v.magnitude.is_finite() && v.magnitude > 0.0) {
                out.push(Diagnostic::error(format!("non-positive value on edge {edge:?}")));
            }
            if !e.kind().accepts(v.unit.family()) {
                let what = if e.kind() == ElementKind::Junction { "junction" } else { "element" };
                out.push(Diagnostic::error(format!("{what} on edge {edge:?} has illegal unit {}", v.unit)));
            }
            if let Some(c) = e.parallel_cap() {
                if !ElementKind::Capacitor.accepts(c.value.unit.family()) || !(c.value.magnitude > 0.0) {
                    out.push(Diagnostic::error(format!("invalid cap clause on edge {edge:?}")));
                }
            }
            for id in e.loops() {
                if spec.loop_index(id).is_none() {
                    out.push(Diagnostic::error(format!("edge {edge:?} references unknown loop '{id}'")));
                }
            }
            if let Element::Junction(j) = e {
                if !(j.gap_ev > 0.0) || j.noise_amp < 0.0 || j.qp_density < 0.0 {
                    out.push(Diagnostic::error(format!("junction on edge {edge:?} has invalid noise parameters")));
                }
            }
        }
    }

    let mut ids = BTreeSet::new();
    for l in &spec.loops {
        if !ids.insert(l.id.as_str()) {
            out.push(Diagnostic::error(format!("duplicate loop id '{}'", l.id)));
        }
        if !l.flux.is_finite() {
            out.push(Diagnostic::error(format!("loop '{}' has a non-finite flux", l.id)));
        }
        let ends: Vec<(usize, usize)> = spec
            .edges
            .iter()
            .flat_map(|(&edge, els)| {
                els.iter()
                    .filter(|e| e.is_inductive() && e.loops().iter().any(|x| x == &l.id))
                    .map(move |_| edge)
            })
            .collect();
        if ends.len() < 2 || trace_cycle(&ends, 0).is_none() {
            out.push(Diagnostic::error(format!(
                "loop '{}' is not closed by inductive branches ({} member(s))",
                l.id,
                ends.len()
            )));
        }
    }

    // Only meaningful once the node structure is sound.
    if out.iter().all(|d| d.severity == Severity::Warning) && n > 0 {
        if let Ok(c) = build_cap_matrix(spec) {
            let eig = c.clone().symmetric_eigen();
            let max = eig.eigenvalues.amax();
            for (idx, &lambda) in eig.eigenvalues.iter().enumerate() {
                if lambda <= 1e-12 * max {
                    let v = eig.eigenvectors.column(idx);
                    let node = v.iamax() + 1;
                    out.push(Diagnostic::warning(format!(
                        "capacitance matrix singular at node {node}: no capacitive path to ground"
                    )));
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec_of(edges: &[((usize, usize), Element)]) -> CircuitSpec {
        let mut s = CircuitSpec::default();
        for (e, el) in edges {
            s.add(e.0, e.1, el.clone());
        }
        s
    }

    fn cap(v: f64) -> Element {
        Element::Capacitor(Capacitor {
            value: ElementValue::new(v, Unit::GHz),
            quality: Quality::Default,
        })
    }

    #[test]
    fn unused_node_is_an_error() {
        let s = spec_of(&[((0, 1), cap(1.0)), ((0, 3), cap(1.0))]);
        let d = validate(&s);
        assert!(d.iter().any(|d| d.severity == Severity::Error && d.message.contains("disconnected node 2")));
    }

    #[test]
    fn two_loop_example_is_clean() {
        let text = "[loops]\nl1 = flux 0\nl2 = flux 0\n[elements]\n(0,1): C 1; JJ 5 loops l2 cap 2\n(0,2): JJ 5 loops l1 cap 3\n(1,3): JJ 5 loops l2 cap 4\n(2,3): C 6; JJ 5 loops l1 cap 7\n(0,3): L 1 loops l1,l2\n";
        let spec = parse_netlist(text).unwrap();
        assert!(validate(&spec).is_empty());
        assert_eq!(spec.loops.len(), 2);
    }

    #[test]
    fn junction_only_island_warns() {
        // Node 2 hangs between two junctions with no capacitor anywhere on it.
        let text = "[loops]\nl1 = flux 0\n[elements]\n(0,1): C 1; JJ 1 loops l1\n(1,2): JJ 1 loops l1\n(0,2): L 1 loops l1\n";
        let spec = parse_netlist(text).unwrap();
        let d = validate(&spec);
        assert!(d.iter().any(|d| d.severity == Severity::Warning && d.message.contains("singular at node 2")), "{d:?}");
    }

    #[test]
    fn open_loop_is_an_error() {
        let err = parse_netlist("[loops]\nl1 = flux 0\n[elements]\n(0,1): C 1; L 1 loops l1\n(1,2): C 1; L 1 loops l1\n").unwrap_err();
        assert!(err.to_string().contains("not closed"), "{err}");
    }

    #[test]
    fn junction_with_henry_unit_flagged() {
        let mut s = spec_of(&[((0, 1), cap(1.0))]);
        s.add(0, 1, Element::Junction(Junction::new(ElementValue::new(1.0, Unit::NanoH), vec![])));
        assert!(validate(&s).iter().any(|d| d.message.contains("junction") && d.message.contains("illegal unit")));
    }
}
