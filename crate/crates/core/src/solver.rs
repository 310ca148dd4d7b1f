//! Lowest eigenpairs of Hermitian operators, parameter sweeps and truncation
//! convergence probes.
//!
//! Small problems go through a dense Hermitian eigendecomposition. Larger ones
//! use a restarted block Krylov method: the subspace is grown by the
//! residuals of the wanted Ritz pairs (which spans the same space as block
//! Lanczos), every new direction is orthogonalized at least twice against the
//! basis, and when the basis is full it is compressed to the current Ritz
//! vectors.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::circuit::{Circuit, Model};
use crate::constants::PLANCK;
use crate::error::{Error, Result};
use crate::hamiltonian::HamiltonianParams;
use crate::sparse::CsrMatrix;
use crate::C64;

#[derive(Debug, Clone, PartialEq)]
pub struct EigenOptions {
    /// Problems up to this dimension are solved densely.
    pub dense_threshold: usize,
    /// Residual bound relative to the row-sum norm of H.
    pub tol: f64,
    /// Maximum number of subspace expansions.
    pub max_iter: usize,
    /// Largest basis size before a restart.
    pub max_basis: usize,
    /// Seed of the start block.
    pub seed: u64,
}

impl Default for EigenOptions {
    fn default() -> Self {
        EigenOptions {
            dense_threshold: 512,
            tol: 1e-10,
            max_iter: 5000,
            max_basis: 80,
            seed: 0x5eed,
        }
    }
}

/// Lowest eigenpairs of a Hamiltonian.
#[derive(Debug, Clone)]
pub struct Spectrum {
    /// Eigenenergies divided by h, ascending, in Hz.
    pub efreqs: Vec<f64>,
    /// Eigenvectors as columns, unit norm, largest component real positive.
    pub evecs: DMatrix<C64>,
    /// ‖Hv − Ev‖ of each pair in joule.
    pub residuals: Vec<f64>,
}

impl Spectrum {
    pub fn n_eig(&self) -> usize {
        self.efreqs.len()
    }

    /// Energy of level k in joule.
    pub fn energy(&self, k: usize) -> f64 {
        self.efreqs[k] * PLANCK
    }

    pub fn state(&self, k: usize) -> Vec<C64> {
        self.evecs.column(k).iter().copied().collect()
    }
}

fn fix_phase(v: &mut [C64]) {
    let mut best = 0;
    let mut best_mag = -1.0;
    for (i, z) in v.iter().enumerate() {
        let m = z.norm();
        // Ties within rounding go to the lowest index so the choice is stable.
        if m > best_mag * (1.0 + 1e-9) {
            best = i;
            best_mag = m;
        }
    }
    if best_mag > 0.0 {
        let p = v[best].conj() / best_mag;
        for z in v.iter_mut() {
            *z *= p;
        }
        v[best] = C64::new(v[best].norm(), 0.0);
    }
}

fn residual(h: &CsrMatrix, v: &[C64], e: f64) -> f64 {
    let hv = h.matvec(v);
    hv.iter().zip(v).map(|(a, b)| (a - b * e).norm_sqr()).sum::<f64>().sqrt()
}

fn finish(h: &CsrMatrix, energies: Vec<f64>, mut vecs: Vec<Vec<C64>>) -> Spectrum {
    let dim = h.nrows();
    let residuals = vecs
        .iter_mut()
        .zip(&energies)
        .map(|(v, &e)| {
            fix_phase(v);
            residual(h, v, e)
        })
        .collect();
    let n = energies.len();
    let evecs = DMatrix::from_fn(dim, n, |i, j| vecs[j][i]);
    Spectrum {
        efreqs: energies.iter().map(|e| e / PLANCK).collect(),
        evecs,
        residuals,
    }
}

fn dense_eigh(m: DMatrix<C64>) -> (Vec<f64>, DMatrix<C64>) {
    let n = m.nrows();
    // Hamiltonians in joule have entries near 1e-23; faer's larger-size path
    // loses all accuracy at that scale, so decompose a unit-scaled copy.
    let scale = m.iter().fold(0.0f64, |acc, z| acc.max(z.norm()));
    let scale = if scale > 0.0 { scale } else { 1.0 };
    let a = faer::Mat::<C64>::from_fn(n, n, |i, j| m[(i, j)] / scale);
    match a.self_adjoint_eigen(faer::Side::Lower) {
        Ok(eig) => {
            let (s, u) = (eig.S(), eig.U());
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&x, &y| s[x].re.total_cmp(&s[y].re));
            let vals = order.iter().map(|&k| s[k].re * scale).collect();
            let vecs = DMatrix::from_fn(n, n, |i, j| u[(i, order[j])]);
            (vals, vecs)
        }
        Err(_) => {
            // The QR iteration in faer did not converge; nalgebra's is slower but independent.
            let eig = m.symmetric_eigen();
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
            let vals = order.iter().map(|&k| eig.eigenvalues[k]).collect();
            let vecs = DMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
            (vals, vecs)
        }
    }
}

/// Lowest `n_eig` eigenpairs of the Hermitian matrix `h` (joule), returned in Hz.
pub fn diag(h: &CsrMatrix, n_eig: usize, opts: &EigenOptions) -> Result<Spectrum> {
    let dim = h.nrows();
    if h.ncols() != dim {
        return Err(Error::Argument("Hamiltonian is not square".into()));
    }
    if n_eig == 0 || n_eig > dim {
        return Err(Error::Argument(format!("n_eig = {n_eig} must lie in 1..={dim}")));
    }
    if dim <= opts.dense_threshold {
        let (vals, vecs) = dense_eigh(h.to_dense());
        let energies = vals[..n_eig].to_vec();
        let cols = (0..n_eig).map(|j| vecs.column(j).iter().copied().collect()).collect();
        return Ok(finish(h, energies, cols));
    }
    let (energies, cols) = krylov_lowest(h, n_eig, opts)?;
    Ok(finish(h, energies, cols))
}

fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[C64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Orthogonalizes `v` against `basis` and normalizes it. Passes are repeated
/// (at least two, at most four) until one no longer removes most of the
/// remaining norm. Returns false when nothing independent is left.
fn orthonormalize(basis: &[Vec<C64>], v: &mut [C64]) -> bool {
    let start = norm(v);
    if start == 0.0 {
        return false;
    }
    let mut prev = start;
    let mut n = start;
    for pass in 0..4 {
        for q in basis {
            let c = dot(q, v);
            for (x, y) in v.iter_mut().zip(q) {
                *x -= c * y;
            }
        }
        n = norm(v);
        if n <= 1e-10 * start {
            return false;
        }
        if pass >= 1 && n > 0.5 * prev {
            break;
        }
        prev = n;
    }
    for x in v.iter_mut() {
        *x /= n;
    }
    true
}

fn krylov_lowest(h: &CsrMatrix, n_eig: usize, opts: &EigenOptions) -> Result<(Vec<f64>, Vec<Vec<C64>>)> {
    let dim = h.nrows();
    let want = (n_eig + 2).min(dim);
    let max_basis = opts.max_basis.max(3 * want).min(dim);
    let hnorm = h.norm_inf().max(f64::MIN_POSITIVE);
    let tol = opts.tol * hnorm;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let random_vec = |rng: &mut ChaCha8Rng| -> Vec<C64> {
        (0..dim).map(|_| C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)).collect()
    };

    // Basis V, H·V and the projection T = Vᴴ H V, grown one column at a time.
    let mut v: Vec<Vec<C64>> = Vec::with_capacity(max_basis);
    let mut hv: Vec<Vec<C64>> = Vec::with_capacity(max_basis);
    let mut t = DMatrix::<C64>::zeros(max_basis, max_basis);
    let push = |v: &mut Vec<Vec<C64>>, hv: &mut Vec<Vec<C64>>, t: &mut DMatrix<C64>, mut x: Vec<C64>| -> bool {
        if !orthonormalize(v, &mut x) {
            return false;
        }
        let hx = h.matvec(&x);
        let k = v.len();
        for (i, vi) in v.iter().enumerate() {
            let z = dot(vi, &hx);
            t[(i, k)] = z;
            t[(k, i)] = z.conj();
        }
        t[(k, k)] = C64::new(dot(&x, &hx).re, 0.0);
        hv.push(hx);
        v.push(x);
        true
    };
    for _ in 0..want {
        let x = random_vec(&mut rng);
        push(&mut v, &mut hv, &mut t, x);
    }

    let mut last_res = vec![f64::INFINITY; n_eig];
    for iter in 0..opts.max_iter {
        let k = v.len();
        let (theta, y) = dense_eigh(t.view((0, 0), (k, k)).into_owned());
        let n_ritz = want.min(k);

        let combine = |basis: &[Vec<C64>], col: usize| -> Vec<C64> {
            let mut out = vec![C64::new(0.0, 0.0); dim];
            for (i, b) in basis.iter().enumerate() {
                let c = y[(i, col)];
                if c != C64::new(0.0, 0.0) {
                    for (o, x) in out.iter_mut().zip(b) {
                        *o += c * x;
                    }
                }
            }
            out
        };

        let mut ritz = Vec::with_capacity(n_ritz);
        let mut ritz_h = Vec::with_capacity(n_ritz);
        let mut res_vecs = Vec::with_capacity(n_ritz);
        let mut res_norms = Vec::with_capacity(n_ritz);
        for j in 0..n_ritz {
            let x = combine(&v, j);
            let hx = combine(&hv, j);
            let r: Vec<C64> = hx.iter().zip(&x).map(|(a, b)| a - b * theta[j]).collect();
            res_norms.push(norm(&r));
            res_vecs.push(r);
            ritz.push(x);
            ritz_h.push(hx);
        }
        last_res = res_norms[..n_eig.min(n_ritz)].to_vec();
        let done = n_ritz >= n_eig && res_norms[..n_eig].iter().all(|&r| r <= tol);
        // When the whole space is spanned the Ritz pairs are exact up to rounding.
        if done || k == dim {
            return Ok((theta[..n_eig].to_vec(), ritz.into_iter().take(n_eig).collect()));
        }

        let unconverged: Vec<usize> = (0..n_ritz).filter(|&j| res_norms[j] > tol).collect();
        if k + unconverged.len() > max_basis {
            // Thick restart: keep the wanted Ritz vectors plus a few more.
            let keep = (want + want / 2 + 2).min(k).min(max_basis - want);
            let mut nv = Vec::with_capacity(max_basis);
            let mut nhv = Vec::with_capacity(max_basis);
            for j in 0..keep {
                if j < n_ritz {
                    nv.push(ritz[j].clone());
                    nhv.push(ritz_h[j].clone());
                } else {
                    nv.push(combine(&v, j));
                    nhv.push(combine(&hv, j));
                }
            }
            v = nv;
            hv = nhv;
            t.fill(C64::new(0.0, 0.0));
            for j in 0..keep {
                t[(j, j)] = C64::new(theta[j], 0.0);
            }
        }
        let mut added = 0;
        for &j in &unconverged {
            if v.len() >= max_basis {
                break;
            }
            if push(&mut v, &mut hv, &mut t, res_vecs[j].clone()) {
                added += 1;
            }
        }
        if added == 0 && v.len() < max_basis {
            // Residuals already in the span: inject a fresh direction.
            let x = random_vec(&mut rng);
            push(&mut v, &mut hv, &mut t, x);
        }
        log::trace!("krylov iteration {iter}: basis {}, max residual {:e}", v.len(), last_res.iter().cloned().fold(0.0, f64::max));
    }
    let max_residual = last_res.iter().cloned().fold(0.0, f64::max);
    Err(Error::NonConvergence {
        iterations: opts.max_iter,
        residuals: last_res,
        max_residual,
    })
}

/// Parameter varied in a sweep.
#[derive(Debug, Clone, PartialEq)]
pub enum SweepParameter {
    /// External flux of a loop (values in Φ0).
    LoopFlux(String),
    /// Offset of a charge mode (1-based mode number, values in 2e).
    ChargeOffset(usize),
    /// Value of an element in its declared unit: edge, position within the edge.
    Element { edge: (usize, usize), index: usize },
}

/// Column-per-point result of a sweep: `efreqs[j][i]` is level i at point j (Hz).
#[derive(Debug, Clone)]
pub struct SweepResult {
    pub values: Vec<f64>,
    pub efreqs: Vec<Vec<f64>>,
}

/// Outcome of a sweep that may stop early: the completed prefix plus the
/// error at the first failing point.
#[derive(Debug)]
pub struct PartialSweep {
    pub values: Vec<f64>,
    pub efreqs: Vec<Option<Vec<f64>>>,
    pub failure: Option<Error>,
}

/// Nominal parameters of `model` with a flux or charge-offset sweep parameter set to `value`.
///
/// Element sweeps change the circuit itself and are rejected here; rebuild
/// with [`Circuit::with_element_value`] instead.
pub fn params_at(model: &Model, param: &SweepParameter, value: f64) -> Result<HamiltonianParams> {
    let circuit = model.circuit();
    let mut p = model.nominal_params().clone();
    match param {
        SweepParameter::LoopFlux(id) => {
            let l = circuit
                .spec()
                .loop_index(id)
                .ok_or_else(|| Error::Argument(format!("unknown loop '{id}'")))?;
            p.fluxes[l] = value;
        }
        SweepParameter::ChargeOffset(mode) => {
            let n_h = circuit.partition().n_h;
            if *mode <= n_h || *mode > circuit.n_modes() {
                return Err(Error::Argument(format!("mode {mode} is not a charge mode")));
            }
            p.charge_offsets[mode - n_h - 1] = value;
        }
        SweepParameter::Element { .. } => {
            return Err(Error::Argument("element sweeps rebuild the circuit and have no parameter form".into()))
        }
    }
    Ok(p)
}

fn sweep_point(model: &Model, param: &SweepParameter, value: f64, n_eig: usize) -> Result<Vec<f64>> {
    match param {
        SweepParameter::Element { edge, index } => {
            let c = model.circuit().with_element_value(*edge, *index, value)?;
            let m = c.model(model.basis().truncations())?.with_eigen_options(model.eigen_options().clone());
            Ok(m.diag_nominal(n_eig)?.efreqs)
        }
        _ => {
            let p = params_at(model, param, value)?;
            Ok(model.diag(&p, n_eig)?.efreqs)
        }
    }
}

/// Runs every point, recording failures instead of stopping.
pub fn sweep_partial(model: &Model, param: &SweepParameter, values: &[f64], n_eig: usize) -> PartialSweep {
    let results: Vec<Result<Vec<f64>>> = values.par_iter().map(|&x| sweep_point(model, param, x, n_eig)).collect();
    let mut efreqs = Vec::with_capacity(values.len());
    let mut failure = None;
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(e) if failure.is_none() => efreqs.push(Some(e)),
            Ok(_) => efreqs.push(None),
            Err(e) => {
                if failure.is_none() {
                    failure = Some(Error::Sweep {
                        index: i,
                        source: Box::new(e),
                    });
                }
                efreqs.push(None);
            }
        }
    }
    PartialSweep {
        values: values.to_vec(),
        efreqs,
        failure,
    }
}

/// Eigenfrequencies at each parameter value; points are evaluated in parallel.
pub fn sweep(model: &Model, param: &SweepParameter, values: &[f64], n_eig: usize) -> Result<SweepResult> {
    let partial = sweep_partial(model, param, values, n_eig);
    if let Some(e) = partial.failure {
        return Err(e);
    }
    Ok(SweepResult {
        values: partial.values,
        efreqs: partial.efreqs.into_iter().map(|e| e.expect("no failure recorded")).collect(),
    })
}

/// Per-level relative changes between successive truncation schedules.
#[derive(Debug, Clone)]
pub struct ConvergenceReport {
    pub schedule: Vec<Vec<usize>>,
    pub efreqs: Vec<Vec<f64>>,
    /// `changes[s][i]`: |E_i(s+1) − E_i(s)| / max(|E_i(s+1)|, scale).
    pub changes: Vec<Vec<f64>>,
    /// Levels whose last change exceeds the tolerance.
    pub unconverged: Vec<usize>,
}

/// Re-diagonalizes at each truncation of `schedule` and reports level changes.
pub fn convergence_probe(circuit: &Circuit, n_eig: usize, schedule: &[Vec<usize>], tol: f64) -> Result<ConvergenceReport> {
    let mut efreqs = Vec::with_capacity(schedule.len());
    for t in schedule {
        efreqs.push(circuit.model(t)?.diag_nominal(n_eig)?.efreqs);
    }
    let mut changes = Vec::new();
    for s in 1..efreqs.len() {
        let (a, b) = (&efreqs[s - 1], &efreqs[s]);
        let scale = b.iter().map(|x| x.abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        changes.push(a.iter().zip(b).map(|(x, y)| (y - x).abs() / y.abs().max(scale)).collect::<Vec<f64>>());
    }
    let unconverged = match changes.last() {
        Some(last) => (0..n_eig).filter(|&i| last[i] > tol).collect(),
        None => Vec::new(),
    };
    Ok(ConvergenceReport {
        schedule: schedule.to_vec(),
        efreqs,
        changes,
        unconverged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_hermitian(n: usize, density: f64, seed: u64) -> CsrMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, C64::new(rng.gen::<f64>() * 10.0, 0.0)));
            for j in (i + 1)..n {
                if rng.gen::<f64>() < density {
                    let z = C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5);
                    t.push((i, j, z));
                    t.push((j, i, z.conj()));
                }
            }
        }
        CsrMatrix::from_triplets(n, n, t)
    }

    #[test]
    fn small_random_matches_dense() {
        let h = random_hermitian(8, 0.5, 1);
        let s = diag(&h, 4, &EigenOptions::default()).unwrap();
        let (vals, _) = dense_eigh(h.to_dense());
        for i in 0..4 {
            assert!((s.efreqs[i] * PLANCK - vals[i]).abs() < 1e-10 * vals[7].abs());
        }
    }

    #[test]
    fn krylov_matches_dense() {
        let h = random_hermitian(300, 0.02, 7);
        let opts = EigenOptions {
            dense_threshold: 0,
            ..Default::default()
        };
        let s = diag(&h, 6, &opts).unwrap();
        let (vals, _) = dense_eigh(h.to_dense());
        for i in 0..6 {
            assert!((s.efreqs[i] * PLANCK - vals[i]).abs() < 1e-9, "{i}: {} vs {}", s.efreqs[i] * PLANCK, vals[i]);
            let col: Vec<C64> = s.evecs.column(i).iter().copied().collect();
            assert!((norm(&col) - 1.0).abs() < 1e-10);
            assert!(s.residuals[i] <= 1e-8 * h.norm_inf());
        }
    }

    #[test]
    fn krylov_handles_degeneracy() {
        // Two copies of the same block: every eigenvalue is doubly degenerate.
        let b = random_hermitian(200, 0.03, 3);
        let h = CsrMatrix::identity(2).kron(&b);
        let opts = EigenOptions {
            dense_threshold: 0,
            ..Default::default()
        };
        let s = diag(&h, 4, &opts).unwrap();
        let (vals, _) = dense_eigh(b.to_dense());
        assert!((s.efreqs[0] * PLANCK - vals[0]).abs() < 1e-9);
        assert!((s.efreqs[1] * PLANCK - vals[0]).abs() < 1e-9);
        assert!((s.efreqs[2] * PLANCK - vals[1]).abs() < 1e-9);
    }

    #[test]
    fn phase_convention() {
        let mut v = vec![C64::new(0.1, 0.0), C64::new(0.0, -0.9), C64::new(0.3, 0.3)];
        fix_phase(&mut v);
        assert_eq!(v[1].im, 0.0);
        assert!(v[1].re > 0.0);
    }

    #[test]
    fn argument_checks() {
        let h = CsrMatrix::identity(3);
        assert!(diag(&h, 0, &EigenOptions::default()).is_err());
        assert!(diag(&h, 4, &EigenOptions::default()).is_err());
    }

    #[test]
    fn deterministic_repeats() {
        let h = random_hermitian(600, 0.01, 11);
        let a = diag(&h, 3, &EigenOptions::default()).unwrap();
        let b = diag(&h, 3, &EigenOptions::default()).unwrap();
        assert_eq!(a.efreqs, b.efreqs);
        assert_eq!(a.evecs, b.evecs);
    }
}
