//! Depolarization and 1/f dephasing rates.
//!
//! Decay: Γ_{m→n} = |⟨n|Ô|m⟩|²·S(ω_mn)/ħ² with ω_mn = (E_m − E_n)/ħ. Every
//! bath spectral density is written as f(|ω|)·|1 + coth(ħω/2k_BT)|, which is
//! positive for both signs of ω and satisfies S(ω)/S(−ω) = e^{ħω/k_BT}.
//!
//! Dephasing: derivatives of ω_mn with respect to dimensionless noise
//! parameters (E_J/E_J0, n_g, flux in Φ0) are taken by central differences
//! and combined through the 1/f formula
//! κ² = Σ_λ 2A²(∂ω)²|ln ω_low t| + 2A⁴(∂²ω)²(ln²(ω_hi/ω_low) + 2 ln² ω_low t).

use std::f64::consts::PI;

use crate::circuit::Model;
use crate::constants::{E_CHARGE, HBAR, K_B, PHI0, PLANCK, R_K};
use crate::coupling::{flux_coefficients, mode_charge_combination, mode_flux_combination, voltage_coefficients, NodePair};
use crate::error::{Error, Result};
use crate::hamiltonian::{charge_window, displacement_op, kron_chain, HamiltonianParams};
use crate::netlist::{to_si, Element, ElementKind, FluxDistribution, Quality, Settings, DEFAULT_CHARGE_NOISE};
use crate::solver::Spectrum;
use crate::sparse::CsrMatrix;
use crate::special::k0_sinh;
use crate::topology::BranchKind;
use crate::C64;

/// Transitions slower than this (rad/s) are rejected for SDF evaluation.
pub const MIN_TRANSITION_OMEGA: f64 = 1e3;

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseEnvironment {
    /// Bath temperature in kelvin.
    pub temperature: f64,
    /// 1/f low cutoff in rad/s.
    pub omega_low: f64,
    /// 1/f high cutoff in rad/s.
    pub omega_high: f64,
    /// Measurement time in seconds.
    pub t_exp: f64,
}

impl Default for NoiseEnvironment {
    fn default() -> Self {
        Self::from_settings(&Settings::default())
    }
}

impl NoiseEnvironment {
    pub fn from_settings(s: &Settings) -> Self {
        NoiseEnvironment {
            temperature: s.temperature,
            omega_low: 2.0 * PI * s.low_freq,
            omega_high: 2.0 * PI * s.high_freq,
            t_exp: s.t_exp,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.temperature > 0.0) {
            return Err(Error::Argument("temperature must be positive".into()));
        }
        if !(self.omega_low > 0.0 && self.omega_low < self.omega_high) {
            return Err(Error::Argument("1/f cutoffs must satisfy 0 < low < high".into()));
        }
        if !(self.t_exp > 0.0) {
            return Err(Error::Argument("measurement time must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecayChannel {
    Capacitive,
    Inductive,
    Quasiparticle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DephasingChannel {
    CriticalCurrent,
    Charge,
    Flux,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Channel {
    Decay(DecayChannel),
    Dephasing(DephasingChannel),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// From the higher-energy state of the pair to the lower one.
    Downward,
    Upward,
    Total,
}

/// Rate contribution of one noise source.
#[derive(Debug, Clone, PartialEq)]
pub struct Contribution {
    pub source: String,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateResult {
    /// Rate in 1/s.
    pub rate: f64,
    pub channel: Channel,
    pub states: (usize, usize),
    pub direction: Direction,
    pub contributions: Vec<Contribution>,
}

/// |1 + coth(ħω/2k_BT)| = 2/|1 − e^{−ħω/k_BT}|.
pub fn thermal_factor(omega: f64, temperature: f64) -> f64 {
    let x = HBAR * omega / (K_B * temperature);
    2.0 / (-x).exp_m1().abs()
}

/// Default capacitor quality factor 10⁶·(2π·6 GHz/|ω|)^0.7.
pub fn default_q_cap(omega: f64) -> f64 {
    1e6 * (2.0 * PI * 6e9 / omega.abs()).powf(0.7)
}

/// Default inductor quality factor, referenced to 500·10⁶ at 0.5 GHz.
pub fn default_q_ind(omega: f64, temperature: f64) -> f64 {
    let x0 = PLANCK * 0.5e9 / (2.0 * K_B * temperature);
    let x = HBAR * omega.abs() / (2.0 * K_B * temperature);
    500e6 * k0_sinh(x0) / k0_sinh(x)
}

/// Voltage SDF ħ/(c·Q)·|1 + coth|.
pub fn s_vv(omega: f64, c: f64, quality: &Quality, temperature: f64) -> f64 {
    let q = quality.eval(omega.abs(), default_q_cap);
    HBAR / (c * q) * thermal_factor(omega, temperature)
}

/// Current SDF ħ/(l·Q)·|1 + coth|.
pub fn s_ii(omega: f64, l: f64, quality: &Quality, temperature: f64) -> f64 {
    let q = quality.eval(omega.abs(), |w| default_q_ind(w, temperature));
    HBAR / (l * q) * thermal_factor(omega, temperature)
}

/// Re Y_qp(|ω|) for a junction with energy `ej` (J), gap `delta` (J) and density `x_qp`.
pub fn re_y_qp(omega: f64, ej: f64, delta: f64, x_qp: f64, temperature: f64) -> f64 {
    let w = omega.abs();
    let x = HBAR * w / (2.0 * K_B * temperature);
    (2.0 / PI).sqrt() * 8.0 * ej / (R_K * delta) * (2.0 * delta / (HBAR * w)).powf(1.5) * x_qp * x.sqrt() * k0_sinh(x)
}

/// Quasiparticle SDF ħ|ω|·Re Y_qp·|1 + coth|.
pub fn s_qp(omega: f64, ej: f64, delta: f64, x_qp: f64, temperature: f64) -> f64 {
    HBAR * omega.abs() * re_y_qp(omega, ej, delta, x_qp, temperature) * thermal_factor(omega, temperature)
}

fn transition_omega(spectrum: &Spectrum, m: usize, n: usize) -> Result<f64> {
    let k = spectrum.n_eig();
    if m >= k || n >= k {
        return Err(Error::Argument(format!("states ({m},{n}) need n_eig > {}", m.max(n))));
    }
    if m == n {
        return Err(Error::Argument("decay needs two distinct states".into()));
    }
    let w = 2.0 * PI * (spectrum.efreqs[m] - spectrum.efreqs[n]);
    if w.abs() < MIN_TRANSITION_OMEGA {
        return Err(Error::Numerical(format!(
            "transition frequency too small for bath SDF evaluation (|ω| = {:e} rad/s)",
            w.abs()
        )));
    }
    Ok(w)
}

fn element_sq(op: &CsrMatrix, spectrum: &Spectrum, a: usize, b: usize) -> f64 {
    let vb = spectrum.state(b);
    let ovb = op.matvec(&vb);
    spectrum.evecs.column(a).iter().zip(&ovb).map(|(x, y)| x.conj() * y).sum::<C64>().norm_sqr()
}

/// Combines |⟨O⟩|² and an SDF evaluated at ±ω into the requested direction.
fn directional(me_sq: f64, omega_down: f64, direction: Direction, sdf: &dyn Fn(f64) -> f64) -> f64 {
    let down = me_sq * sdf(omega_down) / (HBAR * HBAR);
    let up = me_sq * sdf(-omega_down) / (HBAR * HBAR);
    match direction {
        Direction::Downward => down,
        Direction::Upward => up,
        Direction::Total => down + up,
    }
}

/// e^{i(π/Φ0) w̃·Φ̂}: half of the junction phase, with charge shifts
/// evaluated as ⟨n'|e^{iwφ/2}|n⟩ = sinc(n − n' + w/2).
fn half_phase_exponential(model: &Model, branch: usize) -> CsrMatrix {
    let tc = model.circuit().transformed();
    let basis = model.basis();
    let n_h = tc.partition.n_h;
    let mut owned: Vec<Option<CsrMatrix>> = Vec::with_capacity(basis.n_modes());
    for m in 0..basis.n_modes() {
        let w = tc.w_tilde[(branch, m)];
        let n = basis.truncations()[m];
        owned.push(if w == 0.0 {
            None
        } else if m < n_h {
            let alpha = C64::new(0.0, PI / PHI0 * w * tc.flux_zpf(m));
            Some(displacement_op(n, alpha))
        } else {
            let window = charge_window(n);
            let mut t = Vec::new();
            for (col, &q) in window.iter().enumerate() {
                for (row, &q2) in window.iter().enumerate() {
                    let x = (q - q2) as f64 + w / 2.0;
                    let v = if x == 0.0 { 1.0 } else { (PI * x).sin() / (PI * x) };
                    if v.abs() > 1e-15 {
                        t.push((row, col, C64::new(v, 0.0)));
                    }
                }
            }
            Some(CsrMatrix::from_triplets(n, n, t))
        });
    }
    let refs: Vec<Option<&CsrMatrix>> = owned.iter().map(|o| o.as_ref()).collect();
    kron_chain(&refs, basis)
}

/// Quasiparticle operator (Φ0/π)·sin(½((2π/Φ0)w̃·Φ̂ − b·φ_ext)) of a junction branch.
pub fn quasiparticle_op(model: &Model, branch: usize, fluxes: &[f64]) -> CsrMatrix {
    let half = half_phase_exponential(model, branch);
    let theta = model.terms().branch_phase(branch, fluxes);
    // sin(A/2 − θ/2) = (e^{−iθ/2}E − e^{iθ/2}E†)/(2i) with E = e^{iA/2}.
    let a = C64::from_polar(1.0, -theta / 2.0) / C64::new(0.0, 2.0);
    let scale = C64::new(PHI0 / PI, 0.0);
    CsrMatrix::linear_combination(&[(a * scale, &half), (-a.conj() * scale, &half.adjoint())])
}

/// Ordered (higher, lower) pair and the positive downward angular frequency.
fn order_pair(spectrum: &Spectrum, m: usize, n: usize) -> Result<(usize, usize, f64)> {
    let w = transition_omega(spectrum, m, n)?;
    Ok(if w > 0.0 { (m, n, w) } else { (n, m, -w) })
}

/// Decay rate of `channel` between states `states` of `spectrum`, which must
/// have been computed from `model` at `params`.
pub fn decay_rate(
    model: &Model,
    params: &HamiltonianParams,
    spectrum: &Spectrum,
    channel: DecayChannel,
    states: (usize, usize),
    direction: Direction,
    env: &NoiseEnvironment,
) -> Result<RateResult> {
    env.validate()?;
    let (hi, lo, omega) = order_pair(spectrum, states.0, states.1)?;
    let spec = model.circuit().spec();
    let tc = model.circuit().transformed();
    let t = env.temperature;
    let mut contributions = Vec::new();
    match channel {
        DecayChannel::Capacitive => {
            for (&(i, j), elements) in &spec.edges {
                for (pos, e) in elements.iter().enumerate() {
                    let cap = match e {
                        Element::Capacitor(c) => c,
                        other => match other.parallel_cap() {
                            Some(c) => c,
                            None => continue,
                        },
                    };
                    let c = to_si(cap.value, ElementKind::Capacitor)?;
                    let u: Vec<f64> = voltage_coefficients(model, NodePair::new(i, j))?.iter().map(|x| x * c).collect();
                    let op = mode_charge_combination(model, &u, &params.charge_offsets)?;
                    let me = element_sq(&op, spectrum, lo, hi);
                    let rate = directional(me, omega, direction, &|w| s_vv(w, c, &cap.quality, t));
                    contributions.push(Contribution {
                        source: format!("C ({i},{j})#{pos}"),
                        rate,
                    });
                }
            }
        }
        DecayChannel::Inductive => {
            for (&(i, j), elements) in &spec.edges {
                for (pos, e) in elements.iter().enumerate() {
                    let Element::Inductor(ind) = e else { continue };
                    let l = to_si(ind.value, ElementKind::Inductor)?;
                    let v = flux_coefficients(model, NodePair::new(i, j))?;
                    let op = mode_flux_combination(model, &v)?;
                    let me = element_sq(&op, spectrum, lo, hi);
                    let rate = directional(me, omega, direction, &|w| s_ii(w, l, &ind.quality, t));
                    contributions.push(Contribution {
                        source: format!("L ({i},{j})#{pos}"),
                        rate,
                    });
                }
            }
        }
        DecayChannel::Quasiparticle => {
            let mut junction_index = 0;
            for br in &tc.matrices.branches {
                if br.kind != BranchKind::Junction {
                    continue;
                }
                let Element::Junction(jj) = &spec.edges[&br.edge][br.element] else {
                    unreachable!("junction branch points at a junction element")
                };
                let ej = params.junction_energies[junction_index];
                junction_index += 1;
                let delta = jj.gap_ev * E_CHARGE;
                let op = quasiparticle_op(model, br.index, &params.fluxes);
                let me = element_sq(&op, spectrum, lo, hi);
                let rate = directional(me, omega, direction, &|w| s_qp(w, ej, delta, jj.qp_density, t));
                contributions.push(Contribution {
                    source: format!("JJ ({},{})#{}", br.edge.0, br.edge.1, br.element),
                    rate,
                });
            }
        }
    }
    Ok(RateResult {
        rate: contributions.iter().map(|c| c.rate).sum(),
        channel: Channel::Decay(channel),
        states,
        direction,
        contributions,
    })
}

/// One dimensionless noise parameter of a dephasing channel.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSource {
    pub label: String,
    pub amplitude: f64,
    kind: SourceKind,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum SourceKind {
    Junction(usize),
    Offset(usize),
    Loop(usize),
}

/// Noise parameters of a dephasing channel with their 1/f amplitudes.
pub fn noise_sources(model: &Model, channel: DephasingChannel) -> Vec<NoiseSource> {
    let circuit = model.circuit();
    let spec = circuit.spec();
    let tc = circuit.transformed();
    match channel {
        DephasingChannel::CriticalCurrent => tc
            .matrices
            .branches
            .iter()
            .filter(|b| b.kind == BranchKind::Junction)
            .enumerate()
            .map(|(j, b)| {
                let Element::Junction(jj) = &spec.edges[&b.edge][b.element] else {
                    unreachable!("junction branch points at a junction element")
                };
                NoiseSource {
                    label: format!("JJ ({},{})#{}", b.edge.0, b.edge.1, b.element),
                    amplitude: jj.noise_amp,
                    kind: SourceKind::Junction(j),
                }
            })
            .collect(),
        DephasingChannel::Charge => (0..tc.partition.n_c)
            .map(|i| {
                let mode = tc.partition.n_h + i + 1;
                NoiseSource {
                    label: format!("ng{mode}"),
                    amplitude: spec.settings.charge_noise.get(&mode).copied().unwrap_or(DEFAULT_CHARGE_NOISE),
                    kind: SourceKind::Offset(i),
                }
            })
            .collect(),
        DephasingChannel::Flux => spec
            .loops
            .iter()
            .enumerate()
            .map(|(l, lp)| NoiseSource {
                label: format!("loop {}", lp.id),
                amplitude: lp.noise_amp,
                kind: SourceKind::Loop(l),
            })
            .collect(),
    }
}

fn shifted(params: &HamiltonianParams, nominal_ej: &[f64], kind: SourceKind, delta: f64) -> HamiltonianParams {
    let mut p = params.clone();
    match kind {
        SourceKind::Junction(j) => p.junction_energies[j] = nominal_ej[j] * (1.0 + delta),
        SourceKind::Offset(i) => p.charge_offsets[i] += delta,
        SourceKind::Loop(l) => p.fluxes[l] += delta,
    }
    p
}

/// Finite-difference derivatives of ω_mn with respect to one source.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Derivatives {
    pub first: f64,
    pub second: f64,
    /// |D(h) − D(h/2)| of the first-derivative estimates.
    pub first_change: f64,
}

/// First step (Richardson-extrapolated) and second-derivative step.
pub const FIRST_STEP: f64 = 1e-6;
pub const SECOND_STEP: f64 = 1e-4;

fn omega_mn(model: &Model, p: &HamiltonianParams, m: usize, n: usize) -> Result<f64> {
    let s = model.diag(p, m.max(n) + 1)?;
    Ok(2.0 * PI * (s.efreqs[m] - s.efreqs[n]))
}

fn derivatives(model: &Model, params: &HamiltonianParams, kind: SourceKind, m: usize, n: usize) -> Result<Derivatives> {
    // E_J derivatives are relative to the netlist value so λ = 1 at the nominal point.
    let nominal_ej = match kind {
        SourceKind::Junction(_) => params.junction_energies.clone(),
        _ => Vec::new(),
    };
    let w = |d: f64| omega_mn(model, &shifted(params, &nominal_ej, kind, d), m, n);
    let w0 = w(0.0)?;
    let h = FIRST_STEP;
    let d_h = (w(h)? - w(-h)?) / (2.0 * h);
    let d_h2 = (w(h / 2.0)? - w(-h / 2.0)?) / h;
    let first = (4.0 * d_h2 - d_h) / 3.0;
    let change = (d_h - d_h2).abs();
    if change > 1e-3 * first.abs() + 1e-4 * w0.abs() {
        return Err(Error::Numerical(format!(
            "first derivative did not converge: D(h={h:e}) = {d_h:e}, D(h/2) = {d_h2:e}"
        )));
    }
    let h2 = SECOND_STEP;
    let second = (w(h2)? - 2.0 * w0 + w(-h2)?) / (h2 * h2);
    Ok(Derivatives {
        first,
        second,
        first_change: change,
    })
}

/// κ contribution (squared) of one source with amplitude `a`.
pub fn dephasing_kappa_sq(d: &Derivatives, a: f64, env: &NoiseEnvironment) -> f64 {
    let ln_t = (env.omega_low * env.t_exp).ln();
    let ln_band = (env.omega_high / env.omega_low).ln();
    2.0 * a * a * d.first * d.first * ln_t.abs() + 2.0 * a.powi(4) * d.second * d.second * (ln_band * ln_band + 2.0 * ln_t * ln_t)
}

/// 1/f dephasing rate of the (m, n) coherence at `params`.
pub fn dephasing_rate(
    model: &Model,
    params: &HamiltonianParams,
    channel: DephasingChannel,
    states: (usize, usize),
    env: &NoiseEnvironment,
) -> Result<RateResult> {
    env.validate()?;
    let (m, n) = states;
    if m == n {
        return Err(Error::Argument("dephasing needs two distinct states".into()));
    }
    if channel == DephasingChannel::Flux && model.circuit().matrices().flux_dist == FluxDistribution::Junctions {
        log::warn!("flux noise with flux_dist = junctions: time-dependent flux makes the rate tree-dependent; use flux_dist = all");
    }
    let mut contributions = Vec::new();
    let mut kappa_sq = 0.0;
    for src in noise_sources(model, channel) {
        let d = derivatives(model, params, src.kind, m, n)?;
        let k2 = dephasing_kappa_sq(&d, src.amplitude, env);
        kappa_sq += k2;
        contributions.push(Contribution {
            source: src.label,
            rate: k2.sqrt(),
        });
    }
    Ok(RateResult {
        rate: kappa_sq.sqrt(),
        channel: Channel::Dephasing(channel),
        states,
        direction: Direction::Total,
        contributions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::Circuit;
    use crate::netlist::tests_support::FLUXONIUM;

    #[test]
    fn thermal_factor_detailed_balance() {
        for &t in &[0.015, 0.1] {
            for &w in &[1e6, 2.0 * PI * 1e9, 2.0 * PI * 8e9] {
                let ratio = thermal_factor(w, t) / thermal_factor(-w, t);
                let want = (HBAR * w / (K_B * t)).exp();
                assert!((ratio / want - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn default_quality_factors() {
        assert!((default_q_cap(2.0 * PI * 6e9) - 1e6).abs() < 1e-6);
        assert!((default_q_ind(2.0 * PI * 0.5e9, 0.015) - 500e6).abs() < 1e-3);
        assert!((default_q_ind(-2.0 * PI * 0.5e9, 0.015) - 500e6).abs() < 1e-3);
    }

    fn fluxonium() -> (Model, HamiltonianParams) {
        let c = Circuit::from_netlist(FLUXONIUM).unwrap();
        let m = c.model(&[60]).unwrap();
        let mut p = m.nominal_params().clone();
        p.fluxes[0] = 0.3;
        (m, p)
    }

    #[test]
    fn decay_channels_obey_detailed_balance() {
        let (m, p) = fluxonium();
        let s = m.diag(&p, 3).unwrap();
        for &t in &[0.015, 0.1] {
            let env = NoiseEnvironment {
                temperature: t,
                ..Default::default()
            };
            for ch in [DecayChannel::Capacitive, DecayChannel::Inductive, DecayChannel::Quasiparticle] {
                let down = decay_rate(&m, &p, &s, ch, (1, 0), Direction::Downward, &env).unwrap().rate;
                let up = decay_rate(&m, &p, &s, ch, (1, 0), Direction::Upward, &env).unwrap().rate;
                let total = decay_rate(&m, &p, &s, ch, (0, 1), Direction::Total, &env).unwrap().rate;
                let w = 2.0 * PI * (s.efreqs[1] - s.efreqs[0]);
                let want = (-HBAR * w / (K_B * t)).exp();
                assert!(down > 0.0, "{ch:?}");
                assert!((up / down / want - 1.0).abs() < 1e-8, "{ch:?}");
                assert!((total - (up + down)).abs() <= 1e-12 * total);
            }
        }
    }

    #[test]
    fn degenerate_transition_is_rejected() {
        let (m, p) = fluxonium();
        let mut s = m.diag(&p, 2).unwrap();
        s.efreqs[1] = s.efreqs[0] + 1e-3;
        let err = decay_rate(&m, &p, &s, DecayChannel::Capacitive, (1, 0), Direction::Downward, &NoiseEnvironment::default()).unwrap_err();
        assert!(err.to_string().contains("too small"));
    }

    #[test]
    fn no_junction_means_no_cc_dephasing() {
        let c = Circuit::from_netlist("[elements]\n(0,1): C 0.2; L 1\n").unwrap();
        let m = c.model(&[8]).unwrap();
        let r = dephasing_rate(&m, m.nominal_params(), DephasingChannel::CriticalCurrent, (0, 1), &NoiseEnvironment::default()).unwrap();
        assert_eq!(r.rate, 0.0);
    }

    #[test]
    fn first_order_term_scales_quadratically() {
        let d = Derivatives {
            first: 3e8,
            second: 0.0,
            first_change: 0.0,
        };
        let env = NoiseEnvironment::default();
        let k1 = dephasing_kappa_sq(&d, 1e-6, &env);
        let k2 = dephasing_kappa_sq(&d, 2e-6, &env);
        assert!((k2 / k1 - 4.0).abs() < 1e-12);
    }

    #[test]
    fn sweet_spot_leaves_second_order_term() {
        let (m, mut p) = fluxonium();
        p.fluxes[0] = 0.5;
        let src = noise_sources(&m, DephasingChannel::Flux);
        let d = derivatives(&m, &p, src[0].kind, 1, 0).unwrap();
        assert!(d.first.abs() < 1e-6 * d.second.abs(), "{d:?}");
        let r = dephasing_rate(&m, &p, DephasingChannel::Flux, (1, 0), &NoiseEnvironment::default()).unwrap();
        assert!(r.rate > 0.0);
    }

    #[test]
    fn half_shift_is_identity_for_zero_weight() {
        let c = Circuit::from_netlist("[elements]\n(0,1): C 0.2; JJ 5\n").unwrap();
        let m = c.model(&[7]).unwrap();
        let e = half_phase_exponential(&m, 0);
        // w = ±1: elements sinc(n − n' ± 1/2) = ±2/π·(−1)^k/(2k±1).
        let v = e.get(3, 3).re;
        assert!((v - 2.0 / PI).abs() < 1e-14, "{v}");
    }
}
