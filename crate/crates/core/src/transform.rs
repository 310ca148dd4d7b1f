//! Two-step canonical transformation of node coordinates.
//!
//! The first step diagonalizes the quadratic part: with √C and √L* from
//! symmetric eigendecompositions, the SVD √L*·√C⁻¹ = V·D·Uᵀ yields
//! S1 = √C⁻¹·U·D_c and R1 = √C·U·D_c⁻¹. Columns with nonzero singular values
//! are harmonic modes (ω = D), the rest are charge modes. The second step
//! re-expresses the charge block on the lattice spanned by junction charge
//! vectors so that every junction shifts island charges by integer multiples
//! of 2e.
//!
//! Mode order is harmonic modes by descending frequency, then charge modes.
//!
//! D_c is chosen per harmonic mode so that the largest |w̃| among junctions
//! on that mode is 1 (linear inductors if no junction touches it). With this
//! choice the transformed flux of a mode is the physical flux a unit-coupled
//! junction sees. An extra positive rescaling can be injected through
//! [`TransformOptions::rescale`]; observables do not depend on it.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::constants::{E_CHARGE, HBAR, PHI0};
use crate::error::{Error, Result};
use crate::topology::{BranchKind, CircuitMatrices};

/// Largest condition number accepted for the capacitance matrix.
pub const MAX_CAP_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, PartialEq)]
pub struct TransformOptions {
    /// Relative singular-value threshold below which a mode is a charge mode.
    pub zero_tol: f64,
    /// Optional positive per-mode factors multiplied into D_c (length n_N).
    pub rescale: Option<Vec<f64>>,
}

impl Default for TransformOptions {
    fn default() -> Self {
        TransformOptions {
            zero_tol: 1e-11,
            rescale: None,
        }
    }
}

/// S = S1·S2 and R = R1·R2 with Sᵀ·R = I.
#[derive(Debug, Clone)]
pub struct Transformation {
    pub s1: DMatrix<f64>,
    pub r1: DMatrix<f64>,
    pub s2: DMatrix<f64>,
    pub r2: DMatrix<f64>,
    pub s: DMatrix<f64>,
    pub r: DMatrix<f64>,
}

impl Transformation {
    /// ‖Sᵀ·R − I‖_max.
    pub fn canonicality_error(&self) -> f64 {
        let n = self.s.nrows();
        (self.s.transpose() * &self.r - DMatrix::identity(n, n)).amax()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModePartition {
    pub n_h: usize,
    pub n_c: usize,
    /// Angular frequency of each harmonic mode in rad/s.
    pub omega: Vec<f64>,
    /// Impedance of each harmonic mode in ohm.
    pub impedance: Vec<f64>,
    /// Charge modes (indices within the charge block) without a junction pinning them.
    pub frozen: Vec<usize>,
}

impl ModePartition {
    pub fn n_modes(&self) -> usize {
        self.n_h + self.n_c
    }

    pub fn is_harmonic(&self, mode: usize) -> bool {
        mode < self.n_h
    }
}

/// Result of the first step, before charge-lattice rescaling.
#[derive(Debug, Clone)]
pub struct FirstTransformation {
    pub s1: DMatrix<f64>,
    pub r1: DMatrix<f64>,
    /// Singular values of √L*·√C⁻¹ in descending order (ω of harmonic modes).
    pub sigma: Vec<f64>,
    pub n_h: usize,
}

/// Per-junction data needed for operator assembly and reporting.
#[derive(Debug, Clone, PartialEq)]
pub struct JunctionPrefactors {
    /// Branch index in [`CircuitMatrices::branches`].
    pub branch: usize,
    /// φ_zp,m = (2π/Φ0)·w^ha_km·√(ħZ_m/2) for each harmonic mode (signed).
    pub phi_zp: Vec<f64>,
    /// Integer charge-shift powers w^ch_km for each charge mode.
    pub charge_powers: Vec<i32>,
}

#[derive(Debug, Clone)]
pub struct TransformedCircuit {
    pub matrices: CircuitMatrices,
    pub transformation: Transformation,
    pub partition: ModePartition,
    /// C̃⁻¹ = Rᵀ·C⁻¹·R.
    pub cinv_tilde: DMatrix<f64>,
    /// L̃* = Sᵀ·L*·S.
    pub lstar_tilde: DMatrix<f64>,
    /// Rows w̃_kᵀ = w_kᵀ·S, one per inductive branch.
    pub w_tilde: DMatrix<f64>,
    /// Junction branches chosen as charge-lattice pivots.
    pub pivots: Vec<usize>,
}

fn sym_sqrt_pair(m: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(m.clone());
    (eig.eigenvalues, eig.eigenvectors)
}

fn from_eig(vals: &DVector<f64>, vecs: &DMatrix<f64>, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
    let d = DMatrix::from_diagonal(&vals.map(f));
    vecs * d * vecs.transpose()
}

/// Normal-mode split with D_c = I.
pub fn first_transformation(c: &DMatrix<f64>, lstar: &DMatrix<f64>, zero_tol: f64) -> Result<FirstTransformation> {
    let n = c.nrows();
    if n == 0 {
        return Err(Error::Invalid("circuit has no nodes".into()));
    }
    let (cv, cq) = sym_sqrt_pair(c);
    let (cmin, cmax) = (cv.min(), cv.max());
    if cmin <= 0.0 || cmax / cmin > MAX_CAP_CONDITION {
        return Err(Error::Invalid(format!(
            "capacitance matrix is not positive definite (eigenvalues {cmin:e}..{cmax:e}); every node needs a capacitive path"
        )));
    }
    let sqrt_c = from_eig(&cv, &cq, f64::sqrt);
    let sqrt_cinv = from_eig(&cv, &cq, |x| 1.0 / x.sqrt());

    let (lv, lq) = sym_sqrt_pair(lstar);
    let lmax = lv.amax();
    let sqrt_l = from_eig(&lv, &lq, |x| if x <= 1e-12 * lmax { 0.0 } else { x.sqrt() });

    let m = &sqrt_l * &sqrt_cinv;
    let svd = m.svd(false, true);
    let v_t = svd.v_t.ok_or_else(|| Error::Numerical("SVD did not return right singular vectors".into()))?;
    let mut order: Vec<usize> = (0..n).collect();
    // Stable sort keeps the backend order for exact ties, which is deterministic.
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let sigma: Vec<f64> = order.iter().map(|&k| svd.singular_values[k]).collect();
    let u = DMatrix::from_fn(n, n, |i, j| v_t[(order[j], i)]);

    let smax = sigma[0];
    let n_h = if smax == 0.0 {
        0
    } else {
        sigma.iter().filter(|&&s| s >= zero_tol * smax).count()
    };
    Ok(FirstTransformation {
        s1: &sqrt_cinv * &u,
        r1: &sqrt_c * &u,
        sigma,
        n_h,
    })
}

fn rank(m: &DMatrix<f64>, tol: f64) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    let svd = m.clone().svd(false, false);
    let smax = svd.singular_values.max();
    svd.singular_values.iter().filter(|&&s| s > tol * smax.max(1.0)).count()
}

/// Charge-block rescaling. `wch` holds the charge-block prefactors of every
/// branch after the first step (rows). Returns (S2^ch, R2^ch, pivot branches,
/// frozen charge-mode indices).
pub fn second_transformation(
    wch: &DMatrix<f64>,
    kinds: &[BranchKind],
) -> Result<(DMatrix<f64>, DMatrix<f64>, Vec<usize>, Vec<usize>)> {
    let n_c = wch.ncols();
    if n_c == 0 {
        return Ok((DMatrix::zeros(0, 0), DMatrix::zeros(0, 0), vec![], vec![]));
    }
    let junctions: Vec<usize> = (0..kinds.len()).filter(|&k| kinds[k] == BranchKind::Junction).collect();
    let row = |k: usize| wch.row(k).clone_owned();

    let try_pivots = |pivots: &[usize]| -> Option<(DMatrix<f64>, Vec<usize>)> {
        let mut p = DMatrix::zeros(n_c, n_c);
        for (i, &k) in pivots.iter().enumerate() {
            p.set_row(i, &row(k));
        }
        let mut frozen = Vec::new();
        // Complete with standard directions for islands no junction reaches.
        let mut filled = pivots.len();
        for e in 0..n_c {
            if filled == n_c {
                break;
            }
            let mut trial = p.rows(0, filled).clone_owned().insert_row(filled, 0.0);
            trial[(filled, e)] = 1.0;
            if rank(&trial, 1e-9) == filled + 1 {
                p.set_row(filled, &trial.row(filled));
                frozen.push(filled);
                filled += 1;
            }
        }
        let s2 = p.clone().try_inverse()?;
        // Every junction must land on the integer lattice.
        for &k in &junctions {
            let w = row(k) * &s2;
            if w.iter().any(|x| (x - x.round()).abs() > 1e-6) {
                return None;
            }
        }
        Some((s2, frozen))
    };

    // Greedy pass in branch order.
    let mut greedy: Vec<usize> = Vec::new();
    for &k in &junctions {
        if greedy.len() == n_c {
            break;
        }
        let mut trial = DMatrix::zeros(greedy.len() + 1, n_c);
        for (i, &g) in greedy.iter().chain(std::iter::once(&k)).enumerate() {
            trial.set_row(i, &row(g));
        }
        if rank(&trial, 1e-9) == greedy.len() + 1 {
            greedy.push(k);
        }
    }
    let chosen = match try_pivots(&greedy) {
        Some((s2, frozen)) => Some((greedy.clone(), s2, frozen)),
        None => {
            let mut found = None;
            for subset in combinations(&junctions, greedy.len()) {
                if subset == greedy {
                    continue;
                }
                let mut trial = DMatrix::zeros(subset.len(), n_c);
                for (i, &g) in subset.iter().enumerate() {
                    trial.set_row(i, &row(g));
                }
                if rank(&trial, 1e-9) < subset.len() {
                    continue;
                }
                if let Some((s2, frozen)) = try_pivots(&subset) {
                    found = Some((subset, s2, frozen));
                    break;
                }
            }
            found
        }
    };
    let (pivots, s2, frozen) = chosen.ok_or_else(|| {
        Error::Transform("junction charge vectors do not span an integer charge lattice for any pivot choice".into())
    })?;
    if !frozen.is_empty() {
        log::warn!(
            "isolated charge island with no junction: {} charge mode(s) frozen at their offset",
            frozen.len()
        );
    }
    let r2 = s2.transpose().try_inverse().expect("inverse of an invertible matrix");
    Ok((s2, r2, pivots, frozen))
}

fn combinations(items: &[usize], k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut current = Vec::with_capacity(k);
    fn rec(items: &[usize], k: usize, start: usize, current: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if current.len() == k {
            out.push(current.clone());
            return;
        }
        for i in start..items.len() {
            current.push(items[i]);
            rec(items, k, i + 1, current, out);
            current.pop();
        }
    }
    rec(items, k, 0, &mut current, &mut out);
    out
}

/// Runs both transformation steps and verifies the block structure.
pub fn transform_circuit(matrices: &CircuitMatrices, opts: &TransformOptions) -> Result<TransformedCircuit> {
    let n = matrices.n_nodes;
    let first = first_transformation(&matrices.c, &matrices.lstar, opts.zero_tol)?;
    let n_h = first.n_h;
    let n_c = n - n_h;
    let has_junction = matrices.branches.iter().any(|b| b.kind == BranchKind::Junction);
    if n_h == 0 && !has_junction {
        return Err(Error::Invalid("circuit has no dynamics: no inductive elements".into()));
    }

    let wf = matrices.w.map(|x| x as f64);
    let mut s1 = first.s1.clone();
    let mut r1 = first.r1.clone();

    // D_c: unit largest junction coefficient on every harmonic mode.
    for m in 0..n_h {
        let col = &wf * s1.column(m);
        let scale = s1.column(m).amax();
        let pick = |kind: BranchKind| {
            matrices
                .branches
                .iter()
                .filter(|b| b.kind == kind)
                .map(|b| col[b.index].abs())
                .fold(0.0, f64::max)
        };
        let mut top = pick(BranchKind::Junction);
        if top <= 1e-9 * scale {
            top = pick(BranchKind::LinearInductor);
        }
        if top > 1e-9 * scale {
            s1.column_mut(m).scale_mut(1.0 / top);
            r1.column_mut(m).scale_mut(top);
        }
    }
    if let Some(extra) = &opts.rescale {
        if extra.len() != n || extra.iter().any(|&d| !(d > 0.0 && d.is_finite())) {
            return Err(Error::Argument(format!("rescale needs {n} positive finite factors")));
        }
        for (m, &d) in extra.iter().enumerate() {
            s1.column_mut(m).scale_mut(d);
            r1.column_mut(m).scale_mut(1.0 / d);
        }
    }

    // Charge prefactors of every branch after the first step.
    let w1 = &wf * &s1;
    let wch1 = w1.columns(n_h, n_c).clone_owned();
    let kinds: Vec<BranchKind> = matrices.branches.iter().map(|b| b.kind).collect();
    let (s2c, r2c, pivots, frozen) = second_transformation(&wch1, &kinds)?;

    let mut s2 = DMatrix::identity(n, n);
    let mut r2 = DMatrix::identity(n, n);
    s2.view_mut((n_h, n_h), (n_c, n_c)).copy_from(&s2c);
    r2.view_mut((n_h, n_h), (n_c, n_c)).copy_from(&r2c);
    let s = &s1 * &s2;
    let r = &r1 * &r2;

    let cinv = matrices
        .c
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Invalid("capacitance matrix is not positive definite".into()))?
        .inverse();
    let cinv_tilde = symmetrize(r.transpose() * &cinv * &r);
    let mut lstar_tilde = symmetrize(s.transpose() * &matrices.lstar * &s);
    let mut w_tilde = &wf * &s;

    // Clean numerical dust: decoupled entries and integer charge powers.
    for m in 0..n {
        let scale = s.column(m).amax();
        for k in 0..w_tilde.nrows() {
            let x = w_tilde[(k, m)];
            if m >= n_h {
                w_tilde[(k, m)] = if matrices.branches[k].kind == BranchKind::Junction {
                    x.round()
                } else {
                    0.0
                };
            } else if x.abs() < 1e-12 * scale {
                w_tilde[(k, m)] = 0.0;
            }
        }
    }

    verify_blocks(&cinv_tilde, &lstar_tilde, n_h)?;
    for i in 0..n {
        for j in 0..n {
            if i != j && (i < n_h || j < n_h) {
                lstar_tilde[(i, j)] = 0.0;
            }
            if i >= n_h && j >= n_h {
                lstar_tilde[(i, j)] = 0.0;
            }
        }
    }

    let mut omega = Vec::with_capacity(n_h);
    let mut impedance = Vec::with_capacity(n_h);
    for m in 0..n_h {
        let c_m = 1.0 / cinv_tilde[(m, m)];
        let l_m = lstar_tilde[(m, m)];
        let w = (l_m / c_m).sqrt();
        omega.push(w);
        impedance.push(1.0 / (w * c_m));
    }

    let transformation = Transformation { s1, r1, s2, r2, s, r };
    let canon = transformation.canonicality_error();
    if canon > 1e-9 {
        return Err(Error::Transform(format!("transformation is not canonical (error {canon:e})")));
    }
    Ok(TransformedCircuit {
        matrices: matrices.clone(),
        transformation,
        partition: ModePartition {
            n_h,
            n_c,
            omega,
            impedance,
            frozen,
        },
        cinv_tilde,
        lstar_tilde,
        w_tilde,
        pivots,
    })
}

fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}

fn verify_blocks(cinv: &DMatrix<f64>, lstar: &DMatrix<f64>, n_h: usize) -> Result<()> {
    let n = cinv.nrows();
    let ctol = 1e-8 * cinv.amax();
    let ltol = 1e-8 * lstar.amax().max(f64::MIN_POSITIVE);
    for i in 0..n {
        for j in 0..n {
            let coupled_c = i != j && (i < n_h || j < n_h);
            if coupled_c && cinv[(i, j)].abs() > ctol {
                return Err(Error::Transform(format!("C̃⁻¹ not block diagonal at ({i},{j})")));
            }
            let off_l = (i != j && (i < n_h || j < n_h)) || (i >= n_h && j >= n_h);
            if off_l && lstar[(i, j)].abs() > ltol {
                return Err(Error::Transform(format!("L̃* not block diagonal at ({i},{j})")));
            }
        }
    }
    for m in 0..n_h {
        if cinv[(m, m)] <= 0.0 || lstar[(m, m)] <= 0.0 {
            return Err(Error::Transform(format!("harmonic mode {} has non-positive diagonal", m + 1)));
        }
    }
    Ok(())
}

impl TransformedCircuit {
    pub fn n_modes(&self) -> usize {
        self.partition.n_modes()
    }

    /// Zero-point flux √(ħZ_m/2) of harmonic mode m in weber.
    pub fn flux_zpf(&self, m: usize) -> f64 {
        (HBAR * self.partition.impedance[m] / 2.0).sqrt()
    }

    /// Zero-point charge √(ħ/2Z_m) of harmonic mode m in coulomb.
    pub fn charge_zpf(&self, m: usize) -> f64 {
        (HBAR / (2.0 * self.partition.impedance[m])).sqrt()
    }

    /// Inverse capacitance of the charge block (n_C × n_C).
    pub fn charge_cinv(&self) -> DMatrix<f64> {
        let (n_h, n_c) = (self.partition.n_h, self.partition.n_c);
        self.cinv_tilde.view((n_h, n_h), (n_c, n_c)).clone_owned()
    }

    /// Charging energies of the charge block in joule, as coefficients of
    /// n_m·n_n in H: E_C,mn = 2e²·(C̃⁻¹)_mn (so a single island has 4E_c).
    pub fn charging_energies(&self) -> DMatrix<f64> {
        self.charge_cinv() * (2.0 * E_CHARGE * E_CHARGE)
    }

    pub fn junction_prefactors(&self) -> Vec<JunctionPrefactors> {
        let n_h = self.partition.n_h;
        self.matrices
            .branches
            .iter()
            .filter(|b| b.kind == BranchKind::Junction)
            .map(|b| JunctionPrefactors {
                branch: b.index,
                phi_zp: (0..n_h)
                    .map(|m| 2.0 * std::f64::consts::PI / PHI0 * self.w_tilde[(b.index, m)] * self.flux_zpf(m))
                    .collect(),
                charge_powers: (n_h..self.n_modes()).map(|m| self.w_tilde[(b.index, m)] as i32).collect(),
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::PLANCK;
    use crate::netlist::parse_netlist;
    use crate::netlist::tests_support::{FLUXONIUM, ZERO_PI};
    use crate::topology::build_matrices;

    fn transformed(text: &str) -> TransformedCircuit {
        let m = build_matrices(&parse_netlist(text).unwrap()).unwrap();
        transform_circuit(&m, &TransformOptions::default()).unwrap()
    }

    #[test]
    fn lc_oscillator_frequency() {
        let t = transformed("[units]\ncap = fF\nind = nH\n[elements]\n(0,1): C 100; L 10\n");
        let want = 1.0 / (10e-9f64 * 100e-15).sqrt();
        assert_eq!((t.partition.n_h, t.partition.n_c), (1, 0));
        assert!((t.partition.omega[0] - want).abs() < 1e-9 * want);
        let z = (10e-9f64 / 100e-15).sqrt();
        assert!((t.partition.impedance[0] - z).abs() < 1e-9 * z);
    }

    #[test]
    fn zero_pi_modes_and_prefactors() {
        let t = transformed(ZERO_PI);
        assert_eq!((t.partition.n_h, t.partition.n_c), (2, 1));
        let f: Vec<f64> = t.partition.omega.iter().map(|w| w / (2.0 * std::f64::consts::PI) / 1e9).collect();
        assert!((f[0] - 3.2249).abs() < 1e-3, "{f:?}");
        assert!((f[1] - 0.39497).abs() < 1e-4, "{f:?}");
        let ec = t.charging_energies()[(0, 0)] / PLANCK / 1e9;
        assert!((ec - 0.29557).abs() < 1e-4, "{ec}");
        for j in t.junction_prefactors() {
            assert!((j.phi_zp[0].abs() - 2.4903).abs() < 1e-3, "{:?}", j.phi_zp);
            assert_eq!(j.phi_zp[1], 0.0);
            assert!(j.charge_powers[0].abs() <= 1);
        }
    }

    #[test]
    fn fluxonium_has_one_harmonic_mode() {
        let t = transformed(FLUXONIUM);
        assert_eq!((t.partition.n_h, t.partition.n_c), (1, 0));
        assert!(t.pivots.is_empty());
    }

    #[test]
    fn transmon_charge_lattice() {
        let t = transformed("[elements]\n(0,1): C 0.2; JJ 10\n");
        assert_eq!((t.partition.n_h, t.partition.n_c), (0, 1));
        assert_eq!(t.w_tilde[(0, 0)].abs(), 1.0);
        let ec = t.charging_energies()[(0, 0)] / PLANCK / 1e9;
        assert!((ec - 0.8).abs() < 1e-12);
    }

    #[test]
    fn dynamical_matrix_eigenvalues_are_mode_frequencies() {
        let t = transformed(ZERO_PI);
        let m = &t.matrices;
        let dyn_m = m.c.clone().try_inverse().unwrap() * &m.lstar;
        let mut ev: Vec<f64> = dyn_m.complex_eigenvalues().iter().map(|z| z.re).collect();
        ev.sort_by(|a, b| b.total_cmp(a));
        for (i, w) in t.partition.omega.iter().enumerate() {
            assert!((ev[i] - w * w).abs() < 1e-9 * w * w);
        }
        assert!(ev[2].abs() < 1e-9 * ev[0]);
    }

    #[test]
    fn rescaling_leaves_physics_unchanged() {
        let m = build_matrices(&parse_netlist(ZERO_PI).unwrap()).unwrap();
        let a = transform_circuit(&m, &TransformOptions::default()).unwrap();
        let opts = TransformOptions {
            rescale: Some(vec![3.7, 0.21, 5.5]),
            ..Default::default()
        };
        let b = transform_circuit(&m, &opts).unwrap();
        for i in 0..2 {
            assert!((a.partition.omega[i] - b.partition.omega[i]).abs() < 1e-8 * a.partition.omega[i]);
        }
        let (pa, pb) = (a.junction_prefactors(), b.junction_prefactors());
        for (x, y) in pa.iter().zip(&pb) {
            for (u, v) in x.phi_zp.iter().zip(&y.phi_zp) {
                assert!((u - v).abs() <= 1e-8 * u.abs().max(1e-300));
            }
            assert_eq!(x.charge_powers, y.charge_powers);
        }
        assert!(b.transformation.canonicality_error() < 1e-9);
    }

    #[test]
    fn no_dynamics_is_an_error() {
        let m = build_matrices(&parse_netlist("[elements]\n(0,1): C 1\n").unwrap()).unwrap();
        let err = transform_circuit(&m, &TransformOptions::default()).unwrap_err();
        assert!(err.to_string().contains("no dynamics"));
    }

    #[test]
    fn floating_island_is_frozen() {
        // Node 2 couples to node 1 only through a capacitor: no junction reaches it.
        let t = transformed("[elements]\n(0,1): C 0.2; JJ 10\n(1,2): C 0.5\n(0,2): C 0.3\n");
        assert_eq!(t.partition.n_c, 2);
        assert_eq!(t.partition.frozen.len(), 1);
    }

    #[test]
    fn combinations_enumerate_lexicographically() {
        assert_eq!(combinations(&[1, 2, 3], 2), vec![vec![1, 2], vec![1, 3], vec![2, 3]]);
    }
}
