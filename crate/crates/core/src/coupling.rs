//! Capacitive and inductive coupling operators between node pairs.
//!
//! Drive amplitudes (c_d·V_d or M·I_d) are left out; operators are returned
//! per unit drive in the weak-coupling limit.

use crate::circuit::Model;
use crate::error::{Error, Result};
use crate::hamiltonian::{charge_op, harmonic_charge_op, harmonic_flux_op, lift, HamiltonianParams};
use crate::netlist::{to_si, Element, ElementKind};
use crate::solver::Spectrum;
use crate::sparse::CsrMatrix;
use crate::C64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CouplingKind {
    Capacitive,
    Inductive,
}

/// Ordered node pair; either node may be ground (0).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodePair {
    pub i: usize,
    pub j: usize,
}

impl NodePair {
    pub fn new(i: usize, j: usize) -> Self {
        NodePair { i, j }
    }

    /// e_ij with +1 at i and −1 at j, ground dropped.
    pub fn vector(&self, n_nodes: usize) -> Result<Vec<f64>> {
        if self.i == self.j {
            return Err(Error::Argument("coupling nodes must differ".into()));
        }
        if self.i > n_nodes || self.j > n_nodes {
            return Err(Error::Argument(format!(
                "node pair ({},{}) outside circuit with {n_nodes} nodes",
                self.i, self.j
            )));
        }
        let mut e = vec![0.0; n_nodes];
        if self.i > 0 {
            e[self.i - 1] += 1.0;
        }
        if self.j > 0 {
            e[self.j - 1] -= 1.0;
        }
        Ok(e)
    }
}

/// Σ_m u_m Q̃_m with per-mode charge operators (charge modes include offsets).
pub fn mode_charge_combination(model: &Model, u: &[f64], charge_offsets: &[f64]) -> Result<CsrMatrix> {
    let tc = model.circuit().transformed();
    let basis = model.basis();
    let n_h = tc.partition.n_h;
    let dim = basis.dim();
    let mut out = CsrMatrix::zeros(dim, dim);
    for (m, &coef) in u.iter().enumerate() {
        if coef == 0.0 {
            continue;
        }
        let n = basis.truncations()[m];
        let op = if m < n_h {
            harmonic_charge_op(tc, m, n)
        } else {
            charge_op(n, charge_offsets[m - n_h])
        };
        out = out.add(&lift(&op.scale(C64::new(coef, 0.0)), m, basis)?);
    }
    Ok(out)
}

/// Σ_m v_m Φ̃_m over harmonic modes; charge-mode components must vanish.
pub fn mode_flux_combination(model: &Model, v: &[f64]) -> Result<CsrMatrix> {
    let tc = model.circuit().transformed();
    let basis = model.basis();
    let n_h = tc.partition.n_h;
    let dim = basis.dim();
    let scale = v.iter().map(|x| x.abs()).fold(0.0, f64::max);
    let mut out = CsrMatrix::zeros(dim, dim);
    for (m, &coef) in v.iter().enumerate() {
        if m >= n_h {
            if coef.abs() > 1e-9 * scale {
                return Err(Error::Argument(format!(
                    "flux across the node pair has a component on charge mode {}",
                    m + 1
                )));
            }
            continue;
        }
        if coef == 0.0 {
            continue;
        }
        let op = harmonic_flux_op(tc, m, basis.truncations()[m]).scale(C64::new(coef, 0.0));
        out = out.add(&lift(&op, m, basis)?);
    }
    Ok(out)
}

/// Coefficients u = Rᵀ·C⁻¹·e_ij so that e_ijᵀC⁻¹R Q̃ = u·Q̃.
pub fn voltage_coefficients(model: &Model, nodes: NodePair) -> Result<Vec<f64>> {
    let tc = model.circuit().transformed();
    let m = &tc.matrices;
    let e = nalgebra::DVector::from_vec(nodes.vector(m.n_nodes)?);
    let cinv = m
        .c
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Numerical("capacitance matrix lost positive definiteness".into()))?
        .inverse();
    let u = tc.transformation.r.transpose() * cinv * e;
    Ok(u.iter().copied().collect())
}

/// Coefficients v = Sᵀ·e_ij so that e_ijᵀ S Φ̃ = v·Φ̃.
pub fn flux_coefficients(model: &Model, nodes: NodePair) -> Result<Vec<f64>> {
    let tc = model.circuit().transformed();
    let e = nalgebra::DVector::from_vec(nodes.vector(tc.matrices.n_nodes)?);
    Ok((tc.transformation.s.transpose() * e).iter().copied().collect())
}

/// Combined inductance of the linear inductors on the edge (i, j) in henry.
pub fn edge_inductance(model: &Model, nodes: NodePair) -> Result<f64> {
    let key = (nodes.i.min(nodes.j), nodes.i.max(nodes.j));
    let spec = model.circuit().spec();
    let mut inverse = 0.0;
    for e in spec.edges.get(&key).into_iter().flatten() {
        if let Element::Inductor(l) = e {
            inverse += 1.0 / to_si(l.value, ElementKind::Inductor)?;
        }
    }
    if inverse == 0.0 {
        return Err(Error::Argument(format!("no inductor on edge ({},{})", key.0, key.1)));
    }
    Ok(1.0 / inverse)
}

/// Coupling operator: e_ijᵀC⁻¹RQ̃ (volt) or (1/l_ij)·e_ijᵀSΦ̃ (ampere).
pub fn coupling_op(model: &Model, kind: CouplingKind, nodes: NodePair, params: &HamiltonianParams) -> Result<CsrMatrix> {
    match kind {
        CouplingKind::Capacitive => {
            let u = voltage_coefficients(model, nodes)?;
            mode_charge_combination(model, &u, &params.charge_offsets)
        }
        CouplingKind::Inductive => {
            let l = edge_inductance(model, nodes)?;
            let v: Vec<f64> = flux_coefficients(model, nodes)?.iter().map(|x| x / l).collect();
            mode_flux_combination(model, &v)
        }
    }
}

/// ⟨m|op|n⟩ between eigenstates of `spectrum`.
pub fn matrix_element(op: &CsrMatrix, spectrum: &Spectrum, m: usize, n: usize) -> Result<C64> {
    let k = spectrum.n_eig();
    if m >= k || n >= k {
        return Err(Error::Argument(format!("states ({m},{n}) need n_eig > {}", m.max(n))));
    }
    let vn = spectrum.state(n);
    let ovn = op.matvec(&vn);
    Ok(spectrum.evecs.column(m).iter().zip(&ovn).map(|(a, b)| a.conj() * b).sum())
}
