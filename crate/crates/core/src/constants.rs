//! Exact SI defining constants (2019 redefinition) and derived quantities.

use std::f64::consts::PI;

/// Elementary charge in coulomb.
pub const E_CHARGE: f64 = 1.602_176_634e-19;
/// Planck constant in joule second.
pub const PLANCK: f64 = 6.626_070_15e-34;
/// Reduced Planck constant h / 2π.
pub const HBAR: f64 = PLANCK / (2.0 * PI);
/// Boltzmann constant in joule per kelvin.
pub const K_B: f64 = 1.380_649e-23;
/// Superconducting flux quantum h / 2e in weber.
pub const PHI0: f64 = PLANCK / (2.0 * E_CHARGE);
/// Von Klitzing constant h / e² in ohm.
pub const R_K: f64 = PLANCK / (E_CHARGE * E_CHARGE);

/// Reduced flux quantum Φ0 / 2π.
pub fn phi0_reduced() -> f64 {
    PHI0 / (2.0 * PI)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derived_constants() {
        assert!((PHI0 - 2.067_833_848e-15).abs() < 1e-23);
        assert!((R_K - 25_812.807_45).abs() < 1e-5);
        assert!((HBAR - 1.054_571_817e-34).abs() < 1e-43);
    }
}
