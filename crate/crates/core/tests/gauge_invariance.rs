mod support;

use cqe_core::netlist::FluxDistribution;
use cqe_core::topology::{timedep_residuals, TreeOrder};
use support::*;

const N_EIG: usize = 5;

fn gaps_for(fx: &GaugeFixture, tree: TreeOrder, dist: FluxDistribution) -> Vec<f64> {
    let c = gauge_circuit(fx.name, tree, dist, Some(fx.flux));
    let s = c.model(fx.truncations).unwrap().diag_nominal(N_EIG).unwrap();
    gaps(&s.efreqs)
}

#[test]
fn spectra_do_not_depend_on_tree_or_flux_placement() {
    for fx in GAUGE_FIXTURES {
        let reference = gaps_for(fx, TreeOrder::Standard, FluxDistribution::Junctions);
        for (tree, dist) in [
            (TreeOrder::Alternate, FluxDistribution::Junctions),
            (TreeOrder::Standard, FluxDistribution::All),
            (TreeOrder::Alternate, FluxDistribution::All),
        ] {
            let other = gaps_for(fx, tree, dist);
            let d = max_rel_diff(&other, &reference);
            assert!(d <= 1e-6, "{} {tree:?}/{dist:?}: relative difference {d:e}", fx.name);
        }
    }
}

#[test]
fn alternate_tree_moves_closures() {
    // At least one fixture must actually exercise a different closure choice.
    let moved = GAUGE_FIXTURES.iter().any(|fx| {
        let a = circuit_with(fx.name, TreeOrder::Standard, FluxDistribution::Junctions);
        let b = circuit_with(fx.name, TreeOrder::Alternate, FluxDistribution::Junctions);
        a.matrices().closures != b.matrices().closures
    });
    assert!(moved);
}

#[test]
fn time_dependent_flux_distribution_residuals() {
    for fx in GAUGE_FIXTURES {
        let name = fx.name;
        for tree in [TreeOrder::Standard, TreeOrder::Alternate] {
            let m = circuit_with(name, tree, FluxDistribution::All).matrices().clone();
            if m.n_loops == 0 {
                continue;
            }
            let (r_cap, r_loop) = timedep_residuals(&m.w, &m.g, &m.c_ed, &m.b);
            assert!(r_cap <= 1e-9, "{name}: ‖WᵀC_ed B‖ relative {r_cap:e}");
            assert!(r_loop <= 1e-9, "{name}: ‖GB − I‖ {r_loop:e}");
        }
    }
}
