//! Truncated operators and Hamiltonian assembly in the Fock ⊗ charge basis.
//!
//! Basis states are ordered with the first mode outermost in the Kronecker
//! product: index = Σ_m n_m·stride_m with stride of the last mode equal to 1.
//! Harmonic modes use Fock levels 0..N−1; charge modes use the symmetric
//! window −(N−1)/2..(N−1)/2.
//!
//! ```text
//! H = Σ ħω_m a†a + ½ Σ (C̃⁻¹)_mn Q_m Q_n
//!   + Σ_L (Φ0/2π)(b·φ_ext/l) w̃^ha·Φ̂
//!   − Σ_J (E_J/2)(e^{i b·φ_ext} M_J + h.c.)
//! ```
//!
//! where M_J = ⊗ D(α_Jm) ⊗ d^{w^ch_Jm}. Constant energy shifts are dropped.

use std::f64::consts::PI;

use crate::constants::{E_CHARGE, HBAR, PHI0};
use crate::error::{Error, Result};
use crate::netlist::CircuitSpec;
use crate::sparse::CsrMatrix;
use crate::special::ln_factorials;
use crate::topology::BranchKind;
use crate::transform::TransformedCircuit;
use crate::C64;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Charge numbers of a symmetric window with `n` states (n odd).
pub fn charge_window(n: usize) -> Vec<i64> {
    let half = (n as i64 - 1) / 2;
    (-half..=half).collect()
}

pub fn annihilation_op(n: usize) -> CsrMatrix {
    let t = (1..n).map(|k| (k - 1, k, C64::new((k as f64).sqrt(), 0.0))).collect();
    CsrMatrix::from_triplets(n, n, t)
}

pub fn creation_op(n: usize) -> CsrMatrix {
    annihilation_op(n).adjoint()
}

pub fn number_op(n: usize) -> CsrMatrix {
    let d: Vec<C64> = (0..n).map(|k| C64::new(k as f64, 0.0)).collect();
    CsrMatrix::from_diagonal(&d)
}

/// Diagonal charge operator 2e·(n + n_g) in coulomb.
pub fn charge_op(n: usize, ng: f64) -> CsrMatrix {
    let d: Vec<C64> = charge_window(n)
        .into_iter()
        .map(|q| C64::new(2.0 * E_CHARGE * (q as f64 + ng), 0.0))
        .collect();
    CsrMatrix::from_diagonal(&d)
}

/// d^w: shifts |q⟩ to |q + w⟩ inside the window; states leaving it are annihilated.
pub fn charge_shift_op(n: usize, w: i64) -> CsrMatrix {
    let t = (0..n as i64)
        .filter(|&k| k + w >= 0 && k + w < n as i64)
        .map(|k| ((k + w) as usize, k as usize, C64::new(1.0, 0.0)))
        .collect();
    CsrMatrix::from_triplets(n, n, t)
}

/// Charge raising operator d.
pub fn charge_raise_op(n: usize) -> CsrMatrix {
    charge_shift_op(n, 1)
}

/// Generalized Laguerre values L_j^{(k)}(x) for j = 0..=n_max, each returned
/// as (mantissa, log-scale) so that the value is mantissa·e^scale.
fn laguerre_scaled(n_max: usize, k: usize, x: f64) -> Vec<(f64, f64)> {
    let kf = k as f64;
    let mut out = Vec::with_capacity(n_max + 1);
    let mut scale = 0.0;
    let mut prev = 1.0;
    out.push((1.0, 0.0));
    if n_max == 0 {
        return out;
    }
    let mut cur = 1.0 + kf - x;
    out.push((cur, 0.0));
    for j in 1..n_max {
        let jf = j as f64;
        let next = ((2.0 * jf + 1.0 + kf - x) * cur - (jf + kf) * prev) / (jf + 1.0);
        prev = cur;
        cur = next;
        let mag = cur.abs().max(prev.abs());
        if mag > 1e150 {
            prev /= mag;
            cur /= mag;
            scale += mag.ln();
        }
        out.push((cur, scale));
    }
    out
}

/// Displacement operator D(α) = exp(α a† − α* a) on an `n`-level truncation,
/// from the analytic Fock-basis matrix elements.
pub fn displacement_op(n: usize, alpha: C64) -> CsrMatrix {
    if alpha == ZERO {
        return CsrMatrix::identity(n);
    }
    let lnf = ln_factorials(n);
    let x = alpha.norm_sqr();
    let ln_abs = alpha.norm().ln();
    let phase = alpha / alpha.norm();
    let mut t = Vec::with_capacity(n * n);
    for k in 0..n {
        // Elements with |m − n| = k: ⟨j+k|D|j⟩ and ⟨j|D|j+k⟩.
        let lag = laguerre_scaled(n - 1 - k, k, x);
        let lower_phase = phase.powi(k as i32);
        let upper_phase = (-phase.conj()).powi(k as i32);
        for (j, &(mant, scale)) in lag.iter().enumerate() {
            if mant == 0.0 {
                continue;
            }
            let ln_mag = 0.5 * (lnf[j] - lnf[j + k]) + k as f64 * ln_abs - 0.5 * x + scale + mant.abs().ln();
            let mag = ln_mag.exp() * mant.signum();
            if mag == 0.0 {
                continue;
            }
            t.push((j + k, j, lower_phase * mag));
            if k > 0 {
                t.push((j, j + k, upper_phase * mag));
            }
        }
    }
    CsrMatrix::from_triplets(n, n, t)
}

/// Truncation numbers per mode, harmonic modes first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModeBasis {
    truncations: Vec<usize>,
    n_h: usize,
}

impl ModeBasis {
    /// Validates truncations for a circuit with `n_h` harmonic modes. Even
    /// charge truncations are rounded up to the next odd number.
    pub fn new(truncations: &[usize], n_h: usize, n_modes: usize) -> Result<Self> {
        if truncations.len() != n_modes {
            return Err(Error::Argument(format!(
                "{} truncation numbers given but the circuit has {n_modes} modes",
                truncations.len()
            )));
        }
        let mut out = truncations.to_vec();
        for (m, t) in out.iter_mut().enumerate() {
            if *t == 0 {
                return Err(Error::Argument(format!("truncation of mode {} must be at least 1", m + 1)));
            }
            if m >= n_h && *t % 2 == 0 {
                log::warn!("charge mode {} truncation {} rounded up to {}", m + 1, *t, *t + 1);
                *t += 1;
            }
        }
        let dim = out.iter().try_fold(1usize, |acc, &t| acc.checked_mul(t));
        match dim {
            Some(d) if d <= 50_000_000 => Ok(ModeBasis { truncations: out, n_h }),
            _ => Err(Error::Argument("Hilbert space dimension too large".into())),
        }
    }

    pub fn truncations(&self) -> &[usize] {
        &self.truncations
    }

    pub fn n_h(&self) -> usize {
        self.n_h
    }

    pub fn n_modes(&self) -> usize {
        self.truncations.len()
    }

    pub fn dim(&self) -> usize {
        self.truncations.iter().product()
    }

    pub fn strides(&self) -> Vec<usize> {
        let mut s = vec![1; self.truncations.len()];
        for m in (0..self.truncations.len().saturating_sub(1)).rev() {
            s[m] = s[m + 1] * self.truncations[m + 1];
        }
        s
    }

    /// Per-mode level indices (0-based positions in each mode's local basis) of a global index.
    pub fn digits(&self, mut index: usize) -> Vec<usize> {
        let mut d = vec![0; self.truncations.len()];
        for m in (0..self.truncations.len()).rev() {
            d[m] = index % self.truncations[m];
            index /= self.truncations[m];
        }
        d
    }
}

/// Embeds `op` acting on `mode` into the full product space.
pub fn lift(op: &CsrMatrix, mode: usize, basis: &ModeBasis) -> Result<CsrMatrix> {
    if mode >= basis.n_modes() || op.nrows() != basis.truncations[mode] || op.ncols() != op.nrows() {
        return Err(Error::Argument(format!("operator does not match mode {}", mode + 1)));
    }
    let mut factors: Vec<Option<&CsrMatrix>> = vec![None; basis.n_modes()];
    factors[mode] = Some(op);
    Ok(kron_chain(&factors, basis))
}

/// ⊗_m factors[m], with identity where a factor is absent.
pub fn kron_chain(factors: &[Option<&CsrMatrix>], basis: &ModeBasis) -> CsrMatrix {
    let mut out = CsrMatrix::identity(1);
    let mut pending_identity = 1;
    for (m, f) in factors.iter().enumerate() {
        match f {
            Some(op) => {
                if pending_identity > 1 {
                    out = out.kron(&CsrMatrix::identity(pending_identity));
                    pending_identity = 1;
                }
                out = out.kron(op);
            }
            None => pending_identity *= basis.truncations[m],
        }
    }
    if pending_identity > 1 {
        out = out.kron(&CsrMatrix::identity(pending_identity));
    }
    out
}

/// Values of the parameters that vary between Hamiltonian instances.
#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianParams {
    /// External flux of each loop in units of Φ0.
    pub fluxes: Vec<f64>,
    /// Offset of each charge mode in units of 2e.
    pub charge_offsets: Vec<f64>,
    /// E_J of each junction (in branch order) in joule.
    pub junction_energies: Vec<f64>,
}

impl HamiltonianParams {
    /// Values taken from the netlist.
    pub fn nominal(tc: &TransformedCircuit, spec: &CircuitSpec) -> Result<Self> {
        let n_h = tc.partition.n_h;
        let mut offsets = vec![0.0; tc.partition.n_c];
        for (&mode, &ng) in &spec.settings.charge_offsets {
            if mode <= n_h || mode > tc.n_modes() {
                return Err(Error::Invalid(format!("ng.{mode}: mode {mode} is not a charge mode")));
            }
            offsets[mode - n_h - 1] = ng;
        }
        Ok(HamiltonianParams {
            fluxes: spec.loops.iter().map(|l| l.flux).collect(),
            charge_offsets: offsets,
            junction_energies: tc
                .matrices
                .branches
                .iter()
                .filter(|b| b.kind == BranchKind::Junction)
                .map(|b| b.value)
                .collect(),
        })
    }
}

#[derive(Debug, Clone)]
struct JunctionTerm {
    branch: usize,
    m: CsrMatrix,
    m_adj: CsrMatrix,
}

#[derive(Debug, Clone)]
struct InductorTerm {
    branch: usize,
    inductance: f64,
    /// w̃^ha·Φ̂ lifted to the full space.
    flux: CsrMatrix,
}

/// Flux-independent operator pieces cached for repeated assembly.
#[derive(Debug, Clone)]
pub struct HamiltonianTerms {
    basis: ModeBasis,
    harmonic_diag: Vec<f64>,
    charge_levels: Vec<Vec<i64>>,
    charge_cinv: nalgebra::DMatrix<f64>,
    junctions: Vec<JunctionTerm>,
    inductors: Vec<InductorTerm>,
    /// Branch b vectors (rows) for every inductive branch.
    b: nalgebra::DMatrix<f64>,
    n_loops: usize,
}

/// Flux operator √(ħZ/2)(a + a†) of a harmonic mode on `n` levels.
pub fn harmonic_flux_op(tc: &TransformedCircuit, mode: usize, n: usize) -> CsrMatrix {
    let a = annihilation_op(n);
    a.add(&a.adjoint()).scale(C64::new(tc.flux_zpf(mode), 0.0))
}

/// Charge operator i√(ħ/2Z)(a† − a) of a harmonic mode on `n` levels.
pub fn harmonic_charge_op(tc: &TransformedCircuit, mode: usize, n: usize) -> CsrMatrix {
    let a = annihilation_op(n);
    let one = C64::new(1.0, 0.0);
    CsrMatrix::linear_combination(&[(one, &a.adjoint()), (-one, &a)]).scale(C64::new(0.0, tc.charge_zpf(mode)))
}

impl HamiltonianTerms {
    pub fn new(tc: &TransformedCircuit, basis: &ModeBasis) -> Result<Self> {
        let n_h = tc.partition.n_h;
        if basis.n_modes() != tc.n_modes() || basis.n_h() != n_h {
            return Err(Error::Argument("basis does not match the circuit modes".into()));
        }
        let dim = basis.dim();
        let strides = basis.strides();
        let trunc = basis.truncations();

        let mut harmonic_diag = vec![0.0; dim];
        let mut charge_levels = vec![vec![0i64; dim]; tc.partition.n_c];
        for (idx, h) in harmonic_diag.iter_mut().enumerate() {
            for m in 0..basis.n_modes() {
                let level = (idx / strides[m]) % trunc[m];
                if m < n_h {
                    *h += HBAR * tc.partition.omega[m] * level as f64;
                } else {
                    charge_levels[m - n_h][idx] = level as i64 - (trunc[m] as i64 - 1) / 2;
                }
            }
        }

        let mut junctions = Vec::new();
        let mut inductors = Vec::new();
        for br in &tc.matrices.branches {
            match br.kind {
                BranchKind::Junction => {
                    let mut owned: Vec<Option<CsrMatrix>> = Vec::with_capacity(basis.n_modes());
                    for m in 0..basis.n_modes() {
                        let w = tc.w_tilde[(br.index, m)];
                        owned.push(if w == 0.0 {
                            None
                        } else if m < n_h {
                            let alpha = C64::new(0.0, 2.0 * PI / PHI0 * w * tc.flux_zpf(m));
                            Some(displacement_op(trunc[m], alpha))
                        } else {
                            Some(charge_shift_op(trunc[m], w as i64))
                        });
                    }
                    let refs: Vec<Option<&CsrMatrix>> = owned.iter().map(|o| o.as_ref()).collect();
                    let m = kron_chain(&refs, basis);
                    let m_adj = m.adjoint();
                    junctions.push(JunctionTerm {
                        branch: br.index,
                        m,
                        m_adj,
                    });
                }
                BranchKind::LinearInductor => {
                    if br.b.iter().all(|&x| x == 0.0) {
                        continue;
                    }
                    let mut flux = CsrMatrix::zeros(dim, dim);
                    for m in 0..n_h {
                        let w = tc.w_tilde[(br.index, m)];
                        if w != 0.0 {
                            let op = harmonic_flux_op(tc, m, trunc[m]).scale(C64::new(w, 0.0));
                            flux = flux.add(&lift(&op, m, basis)?);
                        }
                    }
                    inductors.push(InductorTerm {
                        branch: br.index,
                        inductance: br.value,
                        flux,
                    });
                }
            }
        }
        Ok(HamiltonianTerms {
            basis: basis.clone(),
            harmonic_diag,
            charge_levels,
            charge_cinv: tc.charge_cinv(),
            junctions,
            inductors,
            b: tc.matrices.b.clone(),
            n_loops: tc.matrices.n_loops,
        })
    }

    pub fn basis(&self) -> &ModeBasis {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    /// Phase b_k·φ_ext (radians) of branch `k` for fluxes in Φ0.
    pub fn branch_phase(&self, k: usize, fluxes: &[f64]) -> f64 {
        (0..self.n_loops).map(|l| self.b[(k, l)] * fluxes[l]).sum::<f64>() * 2.0 * PI
    }

    fn check(&self, p: &HamiltonianParams) -> Result<()> {
        if p.fluxes.len() != self.n_loops {
            return Err(Error::Argument(format!(
                "{} flux values given for {} loops",
                p.fluxes.len(),
                self.n_loops
            )));
        }
        if p.charge_offsets.len() != self.charge_levels.len() {
            return Err(Error::Argument("charge offset count does not match charge modes".into()));
        }
        if p.junction_energies.len() != self.junctions.len() {
            return Err(Error::Argument("junction energy count does not match junctions".into()));
        }
        if p.fluxes.iter().chain(&p.charge_offsets).chain(&p.junction_energies).any(|x| !x.is_finite()) {
            return Err(Error::Argument("non-finite Hamiltonian parameter".into()));
        }
        Ok(())
    }

    /// Diagonal part: harmonic energies plus the charging term.
    pub fn diagonal(&self, p: &HamiltonianParams) -> Vec<f64> {
        let n_c = self.charge_levels.len();
        let mut out = self.harmonic_diag.clone();
        if n_c == 0 {
            return out;
        }
        let two_e = 2.0 * E_CHARGE;
        let mut q = vec![0.0; n_c];
        for (idx, h) in out.iter_mut().enumerate() {
            for i in 0..n_c {
                q[i] = two_e * (self.charge_levels[i][idx] as f64 + p.charge_offsets[i]);
            }
            let mut e = 0.0;
            for i in 0..n_c {
                for j in 0..n_c {
                    e += 0.5 * self.charge_cinv[(i, j)] * q[i] * q[j];
                }
            }
            *h += e;
        }
        out
    }

    /// Assembles H (joule) for the given parameters.
    pub fn hamiltonian(&self, p: &HamiltonianParams) -> Result<CsrMatrix> {
        self.check(p)?;
        let diag: Vec<C64> = self.diagonal(p).into_iter().map(|x| C64::new(x, 0.0)).collect();
        let d = CsrMatrix::from_diagonal(&diag);
        let one = C64::new(1.0, 0.0);
        let mut terms: Vec<(C64, &CsrMatrix)> = vec![(one, &d)];
        for ind in &self.inductors {
            let phase = self.branch_phase(ind.branch, &p.fluxes);
            let coef = PHI0 / (2.0 * PI) * phase / ind.inductance;
            if coef != 0.0 {
                terms.push((C64::new(coef, 0.0), &ind.flux));
            }
        }
        for (j, term) in self.junctions.iter().enumerate() {
            let ej = p.junction_energies[j];
            if ej == 0.0 {
                continue;
            }
            let theta = self.branch_phase(term.branch, &p.fluxes);
            let e = C64::from_polar(-0.5 * ej, theta);
            terms.push((e, &term.m));
            terms.push((e.conj(), &term.m_adj));
        }
        Ok(CsrMatrix::linear_combination(&terms))
    }

    /// ∂H/∂E_J of junction `j` (in branch order among junctions), at the given fluxes.
    pub fn junction_operator(&self, j: usize, fluxes: &[f64]) -> CsrMatrix {
        let term = &self.junctions[j];
        let e = C64::from_polar(-0.5, self.branch_phase(term.branch, fluxes));
        CsrMatrix::linear_combination(&[(e, &term.m), (e.conj(), &term.m_adj)])
    }

    /// The cached e^{i(2π/Φ0)w̃·Φ̂} operator of junction `j`.
    pub fn junction_exponential(&self, j: usize) -> &CsrMatrix {
        &self.junctions[j].m
    }

    pub fn junction_branches(&self) -> Vec<usize> {
        self.junctions.iter().map(|j| j.branch).collect()
    }

    /// Charge numbers (without offset) of charge mode `i` for each basis index.
    pub fn charge_levels(&self, i: usize) -> &[i64] {
        &self.charge_levels[i]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    /// Dense matrix exponential by scaling and squaring with a Taylor series.
    fn expm(a: &DMatrix<C64>) -> DMatrix<C64> {
        let norm = a.iter().map(|z| z.norm()).sum::<f64>();
        let s = (norm.log2().ceil().max(0.0) as i32) + 4;
        let scaled = a / C64::new(2f64.powi(s), 0.0);
        let n = a.nrows();
        let mut result = DMatrix::identity(n, n);
        let mut term = DMatrix::identity(n, n);
        for k in 1..30 {
            term = &term * &scaled / C64::new(k as f64, 0.0);
            result += &term;
        }
        for _ in 0..s {
            result = &result * &result;
        }
        result
    }

    #[test]
    fn ladder_operators() {
        let a = annihilation_op(2).to_dense();
        assert_eq!(a, DMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]));
        let n = 6;
        let a = annihilation_op(n);
        let comm = a.matmul(&a.adjoint()).to_dense() - a.adjoint().matmul(&a).to_dense();
        for i in 0..n {
            let want = if i == n - 1 { 1.0 - n as f64 } else { 1.0 };
            assert!((comm[(i, i)] - c(want, 0.0)).norm() < 1e-12);
        }
        let num = a.adjoint().matmul(&a).to_dense();
        assert!((num - number_op(n).to_dense()).norm() < 1e-12);
    }

    #[test]
    fn charge_operators() {
        let q = charge_op(3, 0.0).to_dense();
        let two_e = 2.0 * E_CHARGE;
        assert_eq!(q[(0, 0)].re, -two_e);
        assert_eq!(q[(1, 1)].re, 0.0);
        assert_eq!(q[(2, 2)].re, two_e);
        let q = charge_op(3, 0.5).to_dense();
        assert!((q[(0, 0)].re + 0.5 * two_e).abs() < 1e-30);
        assert!((q[(2, 2)].re - 1.5 * two_e).abs() < 1e-30);
        let d = charge_raise_op(5);
        let dd = d.adjoint().matmul(&d).to_dense();
        for i in 0..5 {
            assert_eq!(dd[(i, i)].re, if i == 4 { 0.0 } else { 1.0 });
        }
        assert_eq!(charge_window(5), vec![-2, -1, 0, 1, 2]);
    }

    #[test]
    fn displacement_identity_and_vacuum_overlap() {
        assert_eq!(displacement_op(4, C64::new(0.0, 0.0)), CsrMatrix::identity(4));
        for &alpha in &[c(0.3, 0.0), c(0.0, 1.7), c(-1.1, 2.0)] {
            let n = (4.0 * alpha.norm_sqr()) as usize + 20;
            let d = displacement_op(n, alpha);
            let want = (-alpha.norm_sqr() / 2.0).exp();
            assert!((d.get(0, 0) - c(want, 0.0)).norm() < 1e-10);
        }
    }

    #[test]
    fn displacement_matches_dense_expm() {
        let n = 16;
        let big = 80;
        let alpha = c(0.0, 0.7);
        let a = annihilation_op(big).to_dense();
        let gen = a.adjoint() * alpha - &a * alpha.conj();
        let oracle = expm(&gen);
        let d = displacement_op(n, alpha).to_dense();
        for i in 0..n {
            for j in 0..n {
                assert!((d[(i, j)] - oracle[(i, j)]).norm() < 1e-9, "({i},{j}) {} vs {}", d[(i, j)], oracle[(i, j)]);
            }
        }
    }

    #[test]
    fn displacement_large_truncation_is_finite() {
        let d = displacement_op(300, c(0.0, 3.0));
        assert!(d.triplets().all(|(_, _, v)| v.re.is_finite() && v.im.is_finite()));
        // Unitarity away from the truncation edge.
        let p = d.adjoint().matmul(&d);
        for i in 0..50 {
            assert!((p.get(i, i) - c(1.0, 0.0)).norm() < 1e-9);
        }
    }

    #[test]
    fn lift_properties() {
        let basis = ModeBasis::new(&[3, 4, 5], 2, 3).unwrap();
        assert_eq!(lift(&CsrMatrix::identity(4), 1, &basis).unwrap(), CsrMatrix::identity(60));
        let a1 = lift(&annihilation_op(3), 0, &basis).unwrap();
        let a2d = lift(&creation_op(4), 1, &basis).unwrap();
        let comm = a1.matmul(&a2d).to_dense() - a2d.matmul(&a1).to_dense();
        assert!(comm.norm() < 1e-14);
        let n = number_op(4);
        let tr = lift(&n, 1, &basis).unwrap().trace();
        assert!((tr - n.trace() * C64::new(15.0, 0.0)).norm() < 1e-12);
        assert!(lift(&n, 0, &basis).is_err());
    }

    #[test]
    fn even_charge_truncation_rounds_up() {
        let b = ModeBasis::new(&[4, 6], 1, 2).unwrap();
        assert_eq!(b.truncations(), &[4, 7]);
        assert!(ModeBasis::new(&[0], 1, 1).is_err());
        assert!(ModeBasis::new(&[3], 1, 2).is_err());
    }

    #[test]
    fn digits_and_strides() {
        let b = ModeBasis::new(&[2, 3, 5], 3, 3).unwrap();
        assert_eq!(b.strides(), vec![15, 5, 1]);
        assert_eq!(b.digits(23), vec![1, 1, 3]);
    }
}
