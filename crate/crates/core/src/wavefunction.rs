//! Eigenstates evaluated on phase-coordinate grids.
//!
//! Harmonic mode factors are Hermite functions of the mode phase in units of
//! its zero-point width φ0 = (2π/Φ0)·√(ħZ), normalized with respect to dφ.
//! Charge mode factors are e^{inφ}/√(2π). Both are tabulated once per grid
//! axis and contracted against the coefficient tensor one mode at a time.

use std::f64::consts::PI;

use crate::constants::{HBAR, PHI0};
use crate::error::{Error, Result};
use crate::hamiltonian::{charge_window, ModeBasis};
use crate::transform::TransformedCircuit;
use crate::C64;

/// Physicists' Hermite polynomial H_n(x) by the three-term recurrence.
///
/// Overflows for large n and |x|; use [`hermite_functions`] for wavefunctions.
pub fn hermite(n: usize, x: f64) -> f64 {
    let (mut prev, mut cur) = (1.0, 2.0 * x);
    if n == 0 {
        return prev;
    }
    for k in 1..n {
        let next = 2.0 * x * cur - 2.0 * k as f64 * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// Normalized Hermite functions ψ_0..ψ_{n_max−1} at x, where
/// ψ_n(x) = (2ⁿ n! √π)^{-1/2} H_n(x) e^{−x²/2}.
///
/// The recurrence runs on mantissas with a separate log scale so neither the
/// polynomial nor the Gaussian overflow or underflow prematurely.
pub fn hermite_functions(n_max: usize, x: f64) -> Vec<f64> {
    let mut out = vec![0.0; n_max];
    if n_max == 0 {
        return out;
    }
    let log0 = -0.5 * x * x - 0.25 * PI.ln();
    let mut scale = 0.0f64;
    let (mut prev, mut cur) = (0.0, 1.0);
    let emit = |m: f64, s: f64| -> f64 {
        if m == 0.0 {
            0.0
        } else {
            m.signum() * (m.abs().ln() + s + log0).exp()
        }
    };
    out[0] = emit(cur, scale);
    for k in 0..n_max - 1 {
        let kf = k as f64;
        let next = (2.0 / (kf + 1.0)).sqrt() * x * cur - (kf / (kf + 1.0)).sqrt() * prev;
        prev = cur;
        cur = next;
        let mag = cur.abs().max(prev.abs());
        if mag > 1e100 {
            cur /= mag;
            prev /= mag;
            scale += mag.ln();
        }
        out[k + 1] = emit(cur, scale);
    }
    out
}

/// Per-mode grid specification.
#[derive(Debug, Clone, PartialEq)]
pub enum GridAxis {
    /// The mode is evaluated at one phase value and contributes no array axis.
    Scalar(f64),
    Points(Vec<f64>),
}

impl GridAxis {
    pub fn values(&self) -> &[f64] {
        match self {
            GridAxis::Scalar(x) => std::slice::from_ref(x),
            GridAxis::Points(v) => v,
        }
    }

    /// Evenly spaced points including both ends.
    pub fn linspace(start: f64, stop: f64, count: usize) -> Self {
        let v = match count {
            0 => vec![],
            1 => vec![start],
            _ => (0..count).map(|i| start + (stop - start) * i as f64 / (count - 1) as f64).collect(),
        };
        GridAxis::Points(v)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseGrid {
    pub axes: Vec<GridAxis>,
}

impl PhaseGrid {
    /// Lengths of the array axes in mode order.
    pub fn shape(&self) -> Vec<usize> {
        self.axes
            .iter()
            .filter_map(|a| match a {
                GridAxis::Points(v) => Some(v.len()),
                GridAxis::Scalar(_) => None,
            })
            .collect()
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.values().len()).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Zero-point phase width φ0 = (2π/Φ0)·√(ħZ) of harmonic mode m.
pub fn phase_width(tc: &TransformedCircuit, m: usize) -> f64 {
    2.0 * PI / PHI0 * (HBAR * tc.partition.impedance[m]).sqrt()
}

/// Table `t[g][n]` of basis function n of `mode` at the grid values.
fn factor_table(tc: &TransformedCircuit, basis: &ModeBasis, mode: usize, values: &[f64]) -> Vec<Vec<C64>> {
    let n = basis.truncations()[mode];
    if mode < tc.partition.n_h {
        let w = phase_width(tc, mode);
        let norm = 1.0 / w.sqrt();
        values
            .iter()
            .map(|&phi| hermite_functions(n, phi / w).into_iter().map(|h| C64::new(h * norm, 0.0)).collect())
            .collect()
    } else {
        let window = charge_window(n);
        let norm = 1.0 / (2.0 * PI).sqrt();
        values
            .iter()
            .map(|&phi| window.iter().map(|&q| C64::from_polar(norm, q as f64 * phi)).collect())
            .collect()
    }
}

/// ⟨φ|ψ⟩ on the grid, flattened row-major over the array axes in mode order.
pub fn eig_phase_coord(state: &[C64], tc: &TransformedCircuit, basis: &ModeBasis, grid: &PhaseGrid) -> Result<Vec<C64>> {
    let n_modes = basis.n_modes();
    if grid.axes.len() != n_modes {
        return Err(Error::Argument(format!(
            "grid has {} axes but the circuit has {n_modes} modes",
            grid.axes.len()
        )));
    }
    if state.len() != basis.dim() {
        return Err(Error::Argument("state dimension does not match the basis".into()));
    }
    if grid.axes.iter().any(|a| a.values().iter().any(|x| !x.is_finite())) {
        return Err(Error::Argument("grid contains non-finite values".into()));
    }
    if grid.is_empty() {
        return Err(Error::Argument("grid axis with no points".into()));
    }

    // Contract the last mode first; `inner` is the product of grid sizes already contracted.
    let trunc = basis.truncations();
    let mut tensor: Vec<C64> = state.to_vec();
    let mut inner = 1usize;
    for m in (0..n_modes).rev() {
        let values = grid.axes[m].values();
        let table = factor_table(tc, basis, m, values);
        let n_m = trunc[m];
        let g_m = values.len();
        let outer: usize = trunc[..m].iter().product();
        let mut next = vec![C64::new(0.0, 0.0); outer * g_m * inner];
        for p in 0..outer {
            for (g, row) in table.iter().enumerate() {
                let dst = &mut next[(p * g_m + g) * inner..(p * g_m + g + 1) * inner];
                for (level, &f) in row.iter().enumerate() {
                    if f == C64::new(0.0, 0.0) {
                        continue;
                    }
                    let src = &tensor[(p * n_m + level) * inner..(p * n_m + level + 1) * inner];
                    for (d, s) in dst.iter_mut().zip(src) {
                        *d += f * s;
                    }
                }
            }
        }
        tensor = next;
        inner *= g_m;
    }
    Ok(tensor)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::Circuit;

    #[test]
    fn hermite_low_orders() {
        assert_eq!(hermite(0, 0.7), 1.0);
        assert_eq!(hermite(1, 0.7), 1.4);
        assert!((hermite(3, 0.7) - (8.0 * 0.343 - 12.0 * 0.7)).abs() < 1e-12);
    }

    #[test]
    fn hermite_functions_orthonormal() {
        let (a, b, n) = (-12.0, 12.0, 4001);
        let dx = (b - a) / (n - 1) as f64;
        let tables: Vec<Vec<f64>> = (0..n).map(|i| hermite_functions(11, a + dx * i as f64)).collect();
        for p in 0..11 {
            for q in 0..11 {
                let s: f64 = tables.iter().map(|t| t[p] * t[q]).sum::<f64>() * dx;
                let want = if p == q { 1.0 } else { 0.0 };
                assert!((s - want).abs() < 1e-8, "({p},{q}) {s}");
            }
        }
    }

    #[test]
    fn hermite_functions_high_order_finite() {
        let v = hermite_functions(151, 5.0);
        assert!(v.iter().all(|x| x.is_finite()));
        // Matches the direct formula where it does not overflow.
        let direct = hermite(20, 5.0) * (-12.5f64).exp() / (2f64.powi(20) * (1..=20).map(|k| k as f64).product::<f64>() * PI.sqrt()).sqrt();
        assert!((v[20] - direct).abs() < 1e-12 * direct.abs());
        // Far in the tail the Gaussian alone would underflow at this order.
        assert!(hermite_functions(200, 30.0)[199] > 0.0);
    }

    #[test]
    fn harmonic_ground_state_is_gaussian() {
        let c = Circuit::from_netlist("[elements]\n(0,1): C 0.2; L 1\n").unwrap();
        let m = c.model(&[10]).unwrap();
        let s = m.diag_nominal(1).unwrap();
        let w = phase_width(c.transformed(), 0);
        let grid = PhaseGrid {
            axes: vec![GridAxis::linspace(-4.0 * w, 4.0 * w, 401)],
        };
        let psi = eig_phase_coord(&s.state(0), c.transformed(), m.basis(), &grid).unwrap();
        let peak = psi.iter().map(|z| z.norm()).enumerate().fold((0, 0.0), |b, (i, x)| if x > b.1 { (i, x) } else { b });
        assert_eq!(peak.0, 200);
        let xs = grid.axes[0].values();
        for (i, z) in psi.iter().enumerate() {
            let want = (-(xs[i] / w).powi(2) / 2.0).exp() / (PI.sqrt() * w).sqrt();
            assert!((z.norm() - want).abs() < 1e-10);
        }
        let dx = xs[1] - xs[0];
        let total: f64 = psi.iter().map(|z| z.norm_sqr()).sum::<f64>() * dx;
        assert!((total - 1.0).abs() < 1e-3);
    }

    #[test]
    fn charge_state_modulus_and_periodicity() {
        let c = Circuit::from_netlist("[elements]\n(0,1): C 0.2; JJ 1\n").unwrap();
        let m = c.model(&[5]).unwrap();
        let mut state = vec![C64::new(0.0, 0.0); 5];
        state[3] = C64::new(1.0, 0.0); // n = +1
        let grid = PhaseGrid {
            axes: vec![GridAxis::Points(vec![-1.0, 0.3, 2.0, 0.3 + 2.0 * PI])],
        };
        let psi = eig_phase_coord(&state, c.transformed(), m.basis(), &grid).unwrap();
        for z in &psi {
            assert!((z.norm() - 1.0 / (2.0 * PI).sqrt()).abs() < 1e-14);
        }
        assert!((psi[1] - psi[3]).norm() < 1e-14);
    }

    #[test]
    fn shape_and_errors() {
        let c = Circuit::from_netlist(crate::netlist::tests_support::ZERO_PI).unwrap();
        let m = c.model(&[4, 1, 3]).unwrap();
        let s = m.diag_nominal(1).unwrap();
        let grid = PhaseGrid {
            axes: vec![GridAxis::linspace(-1.0, 1.0, 7), GridAxis::Scalar(0.0), GridAxis::linspace(0.0, 1.0, 5)],
        };
        assert_eq!(grid.shape(), vec![7, 5]);
        let psi = eig_phase_coord(&s.state(0), c.transformed(), m.basis(), &grid).unwrap();
        assert_eq!(psi.len(), 35);
        let bad = PhaseGrid { axes: vec![GridAxis::Scalar(0.0)] };
        assert!(eig_phase_coord(&s.state(0), c.transformed(), m.basis(), &bad).is_err());
    }
}
