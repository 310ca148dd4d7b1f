//! Helpers shared by the integration and acceptance test targets.
#![allow(dead_code)]

use cqe_core::netlist::FluxDistribution;
use cqe_core::topology::TreeOrder;
use cqe_core::{parse_netlist, Circuit, CircuitOptions};
use nalgebra::DMatrix;

pub struct GaugeFixture {
    pub name: &'static str,
    /// Large enough that the lowest levels converge well below the comparison tolerance.
    pub truncations: &'static [usize],
    /// Flux applied to every loop, so that moving it between branches matters.
    pub flux: f64,
}

/// Circuits used for the gauge and residual checks.
pub const GAUGE_FIXTURES: &[GaugeFixture] = &[
    GaugeFixture { name: "fluxonium", truncations: &[160], flux: 0.27 },
    GaugeFixture { name: "zero_pi", truncations: &[60, 1, 21], flux: 0.27 },
    GaugeFixture { name: "dc_squid_transmon", truncations: &[30, 25], flux: 0.3 },
    GaugeFixture { name: "two_loop", truncations: &[20, 11, 11], flux: 0.2 },
    GaugeFixture { name: "flux_qubit_3jj", truncations: &[21, 21], flux: 0.48 },
];

pub fn fixture_path(name: &str) -> String {
    format!("{}/../../fixtures/{name}.net", env!("CARGO_MANIFEST_DIR"))
}

pub fn fixture(name: &str) -> String {
    std::fs::read_to_string(fixture_path(name)).unwrap_or_else(|e| panic!("fixture {name}: {e}"))
}

pub fn circuit(name: &str) -> Circuit {
    Circuit::from_netlist(&fixture(name)).unwrap()
}

/// Builds a fixture with a given tree rule and flux distribution.
pub fn circuit_with(name: &str, tree: TreeOrder, dist: FluxDistribution) -> Circuit {
    gauge_circuit(name, tree, dist, None)
}

/// Like [`circuit_with`], optionally setting every loop flux to `flux`.
pub fn gauge_circuit(name: &str, tree: TreeOrder, dist: FluxDistribution, flux: Option<f64>) -> Circuit {
    let mut spec = parse_netlist(&fixture(name)).unwrap();
    spec.settings.flux_dist = dist;
    if let Some(f) = flux {
        for l in spec.loops.iter_mut() {
            l.flux = f;
        }
    }
    Circuit::new(
        spec,
        CircuitOptions {
            tree,
            ..Default::default()
        },
    )
    .unwrap()
}

/// Level differences E_k − E_0 for k ≥ 1.
pub fn gaps(levels: &[f64]) -> Vec<f64> {
    levels[1..].iter().map(|e| e - levels[0]).collect()
}

/// Largest |a_k − b_k| relative to the largest |b_k|.
pub fn max_rel_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let scale = b.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs())) / scale
}

/// Finite-difference fluxonium Hamiltonian on a uniform grid over
/// [−half_width, half_width] with an eighth-order central difference for ∂²_φ.
/// Returns the matrix and the grid step.
pub fn fluxonium_grid_matrix(e_c: f64, e_l: f64, e_j: f64, flux: f64, half_width: f64, points: usize) -> (DMatrix<f64>, f64) {
    const STENCIL: [f64; 5] = [-205.0 / 72.0, 8.0 / 5.0, -1.0 / 5.0, 8.0 / 315.0, -1.0 / 560.0];
    let a = -half_width;
    let h = 2.0 * half_width / (points - 1) as f64;
    let kinetic = -4.0 * e_c / (h * h);
    let mut m = DMatrix::<f64>::zeros(points, points);
    for i in 0..points {
        let phi = a + h * i as f64;
        m[(i, i)] = kinetic * STENCIL[0] + 0.5 * e_l * phi * phi - e_j * (phi - 2.0 * std::f64::consts::PI * flux).cos();
        for (d, &c) in STENCIL.iter().enumerate().skip(1) {
            if i + d < points {
                m[(i, i + d)] = kinetic * c;
                m[(i + d, i)] = kinetic * c;
            }
        }
    }
    (m, h)
}

/// Lowest `count` eigenvalues (same unit as the energies) of
/// 4E_C n² + E_L φ²/2 − E_J cos(φ − 2π·flux) on a uniform grid over [−8π, 8π].
pub fn fluxonium_grid_levels(e_c: f64, e_l: f64, e_j: f64, flux: f64, points: usize, count: usize) -> Vec<f64> {
    let (m, _) = fluxonium_grid_matrix(e_c, e_l, e_j, flux, 8.0 * std::f64::consts::PI, points);
    let mut ev: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev.truncate(count);
    ev
}

/// Lowest `count` eigenpairs of the grid Hamiltonian; vectors are normalized
/// so that Σ|ψ|²·h = 1.
pub fn fluxonium_grid_states(
    e_c: f64,
    e_l: f64,
    e_j: f64,
    flux: f64,
    half_width: f64,
    points: usize,
    count: usize,
) -> (Vec<f64>, Vec<Vec<f64>>, f64) {
    let (m, h) = fluxonium_grid_matrix(e_c, e_l, e_j, flux, half_width, points);
    let eig = m.symmetric_eigen();
    let mut order: Vec<usize> = (0..points).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order[..count].iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = order[..count]
        .iter()
        .map(|&i| eig.eigenvectors.column(i).iter().map(|x| x / h.sqrt()).collect())
        .collect();
    (values, vectors, h)
}
