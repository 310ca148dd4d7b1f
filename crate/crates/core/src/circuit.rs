//! High-level entry points tying the pipeline together.

use crate::error::{Error, Result};
use crate::hamiltonian::{HamiltonianParams, HamiltonianTerms, ModeBasis};
use crate::netlist::{parse_netlist, CircuitSpec};
use crate::solver::{diag, EigenOptions, Spectrum};
use crate::sparse::CsrMatrix;
use crate::topology::{build_matrices_with, CircuitMatrices, TreeOrder};
use crate::transform::{transform_circuit, ModePartition, TransformOptions, TransformedCircuit};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CircuitOptions {
    pub tree: TreeOrder,
    pub transform: TransformOptions,
}

/// A parsed circuit together with its classical matrices and transformation.
#[derive(Debug, Clone)]
pub struct Circuit {
    spec: CircuitSpec,
    options: CircuitOptions,
    transformed: TransformedCircuit,
    nominal: HamiltonianParams,
}

impl Circuit {
    pub fn from_netlist(text: &str) -> Result<Self> {
        Self::new(parse_netlist(text)?, CircuitOptions::default())
    }

    pub fn new(spec: CircuitSpec, options: CircuitOptions) -> Result<Self> {
        let matrices = build_matrices_with(&spec, options.tree)?;
        let transformed = transform_circuit(&matrices, &options.transform)?;
        let nominal = HamiltonianParams::nominal(&transformed, &spec)?;
        Ok(Circuit {
            spec,
            options,
            transformed,
            nominal,
        })
    }

    pub fn spec(&self) -> &CircuitSpec {
        &self.spec
    }

    pub fn options(&self) -> &CircuitOptions {
        &self.options
    }

    pub fn matrices(&self) -> &CircuitMatrices {
        &self.transformed.matrices
    }

    pub fn transformed(&self) -> &TransformedCircuit {
        &self.transformed
    }

    pub fn partition(&self) -> &ModePartition {
        &self.transformed.partition
    }

    pub fn n_modes(&self) -> usize {
        self.transformed.n_modes()
    }

    /// Hamiltonian parameters as written in the netlist.
    pub fn nominal_params(&self) -> &HamiltonianParams {
        &self.nominal
    }

    /// Same circuit with different construction options.
    pub fn with_options(&self, options: CircuitOptions) -> Result<Self> {
        Self::new(self.spec.clone(), options)
    }

    /// Rebuilds the circuit with one element's magnitude replaced (unit kept).
    pub fn with_element_value(&self, edge: (usize, usize), index: usize, magnitude: f64) -> Result<Self> {
        let key = (edge.0.min(edge.1), edge.0.max(edge.1));
        let mut spec = self.spec.clone();
        let element = spec
            .edges
            .get_mut(&key)
            .and_then(|v| v.get_mut(index))
            .ok_or_else(|| Error::Argument(format!("no element {index} on edge {key:?}")))?;
        if !(magnitude.is_finite() && magnitude > 0.0) {
            return Err(Error::Argument(format!("element value {magnitude} must be positive")));
        }
        element.value_mut().magnitude = magnitude;
        Self::new(spec, self.options.clone())
    }

    /// Builds the operator cache for the given truncations. Frozen charge
    /// modes are forced to a single state.
    pub fn model(&self, truncations: &[usize]) -> Result<Model> {
        let part = self.partition();
        let mut t = truncations.to_vec();
        for &f in &part.frozen {
            let m = part.n_h + f;
            if m < t.len() && t[m] != 1 {
                log::warn!("mode {} is frozen; truncation set to 1", m + 1);
                t[m] = 1;
            }
        }
        let basis = ModeBasis::new(&t, part.n_h, part.n_modes())?;
        let terms = HamiltonianTerms::new(&self.transformed, &basis)?;
        Ok(Model {
            circuit: self.clone(),
            terms,
            eigen: EigenOptions::default(),
        })
    }
}

/// A circuit with a fixed truncated basis and cached operators.
#[derive(Debug, Clone)]
pub struct Model {
    circuit: Circuit,
    terms: HamiltonianTerms,
    eigen: EigenOptions,
}

impl Model {
    pub fn with_eigen_options(mut self, eigen: EigenOptions) -> Self {
        self.eigen = eigen;
        self
    }

    pub fn circuit(&self) -> &Circuit {
        &self.circuit
    }

    pub fn terms(&self) -> &HamiltonianTerms {
        &self.terms
    }

    pub fn basis(&self) -> &ModeBasis {
        self.terms.basis()
    }

    pub fn eigen_options(&self) -> &EigenOptions {
        &self.eigen
    }

    pub fn dim(&self) -> usize {
        self.terms.dim()
    }

    pub fn nominal_params(&self) -> &HamiltonianParams {
        self.circuit.nominal_params()
    }

    pub fn hamiltonian(&self, params: &HamiltonianParams) -> Result<CsrMatrix> {
        self.terms.hamiltonian(params)
    }

    pub fn diag(&self, params: &HamiltonianParams, n_eig: usize) -> Result<Spectrum> {
        diag(&self.hamiltonian(params)?, n_eig, &self.eigen)
    }

    pub fn diag_nominal(&self, n_eig: usize) -> Result<Spectrum> {
        self.diag(self.nominal_params(), n_eig)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::PLANCK;
    use crate::netlist::tests_support::ZERO_PI;

    #[test]
    fn lc_level_spacing() {
        let c = Circuit::from_netlist("[units]\ncap = fF\nind = nH\n[elements]\n(0,1): C 100; L 10\n").unwrap();
        let s = c.model(&[30]).unwrap().diag_nominal(6).unwrap();
        let f = 1.0 / (2.0 * std::f64::consts::PI * (10e-9f64 * 100e-15).sqrt());
        for k in 0..5 {
            let gap = s.efreqs[k + 1] - s.efreqs[k];
            assert!((gap - f).abs() < 1e-9 * f);
        }
    }

    #[test]
    fn cooper_pair_box_without_junction_energy() {
        let c = Circuit::from_netlist("[elements]\n(0,1): C 0.25; JJ 10\n[settings]\nng.1 = 0.2\n").unwrap();
        let m = c.model(&[21]).unwrap();
        let mut p = m.nominal_params().clone();
        p.junction_energies[0] = 0.0;
        let s = m.diag(&p, 5).unwrap();
        let mut want: Vec<f64> = (-10..=10).map(|n: i32| 4.0 * 0.25e9 * (n as f64 + 0.2).powi(2)).collect();
        want.sort_by(f64::total_cmp);
        for k in 0..5 {
            assert!((s.efreqs[k] - want[k]).abs() < 1e-9 * want[4]);
        }
    }

    #[test]
    fn zero_pi_hamiltonian_is_hermitian() {
        let c = Circuit::from_netlist(ZERO_PI).unwrap();
        let m = c.model(&[8, 3, 9]).unwrap();
        let mut p = m.nominal_params().clone();
        p.fluxes[0] = 0.23;
        p.charge_offsets[0] = 0.1;
        let h = m.hamiltonian(&p).unwrap();
        assert!(h.hermiticity_error() <= 1e-12 * h.max_abs());
        let _ = PLANCK;
    }

    #[test]
    fn element_value_replacement() {
        let c = Circuit::from_netlist("[elements]\n(0,1): C 0.25; L 1\n").unwrap();
        let d = c.with_element_value((1, 0), 1, 4.0).unwrap();
        assert!((d.partition().omega[0] / c.partition().omega[0] - 2.0).abs() < 1e-12);
        assert!(c.with_element_value((0, 1), 5, 1.0).is_err());
    }
}
