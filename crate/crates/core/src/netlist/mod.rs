//! Netlist data model, text parser, canonical serializer and validation.
//!
//! # File format
//!
//! ```text
//! # comments start with '#'
//! [units]                      # optional default units per element kind
//! cap = GHz
//! ind = GHz
//! jj  = GHz
//!
//! [loops]
//! l1 = flux 0.0 A 1e-6         # flux in units of Φ0, optional 1/f amplitude
//!
//! [elements]
//! (0,1): C 3.6 GHz Q 1e6; L 0.46 GHz loops l1 Q default
//! (0,1): JJ 10.2 GHz loops l1 A 5e-7 delta 3.4e-4 x 3e-6 cap 3.6 GHz Q 1e6
//!
//! [settings]
//! flux_dist = all              # junctions | all
//! temp = 0.015                 # kelvin
//! low_freq = 1                 # Hz, 1/f low cutoff
//! high_freq = 3e9              # Hz, 1/f high cutoff
//! t_exp = 1e-5                 # seconds
//! ng.3 = 0.25                  # charge offset of mode 3 (1-based, units of 2e)
//! charge_noise.3 = 1e-4        # charge-noise amplitude of mode 3
//! ```
//!
//! | clause            | meaning                                                  |
//! |-------------------|----------------------------------------------------------|
//! | `C v [unit]`      | capacitor; Hz family is E_c = e²/2c, farad family is c    |
//! | `L v [unit]`      | inductor; Hz family is E_l = (Φ0/2π)²/l, henry family l   |
//! | `JJ v [unit]`     | junction E_J/h; Hz family only                            |
//! | `loops a,b`       | loops the inductive element belongs to                    |
//! | `Q spec`          | quality factor: number, `default`, `pow:q0:f0_Hz:exp`     |
//! | `A`, `delta`, `x` | junction 1/f amplitude, gap in eV, quasiparticle density  |
//! | `cap v [unit] [Q spec]` | capacitor associated with the element; must be last |
//!
//! An edge may appear on several lines; elements accumulate in order of appearance.

mod format;
mod parser;
mod units;
mod validate;

use std::collections::BTreeMap;

pub use format::format_netlist;
pub use parser::parse_netlist;
pub use units::{from_si, to_si, ElementKind, ElementValue, Unit, UnitFamily};
pub use validate::{validate, Diagnostic, Severity};

pub const DEFAULT_JJ_NOISE: f64 = 1e-7;
pub const DEFAULT_GAP_EV: f64 = 3.4e-4;
pub const DEFAULT_QP_DENSITY: f64 = 3e-6;
pub const DEFAULT_FLUX_NOISE: f64 = 1e-6;
pub const DEFAULT_CHARGE_NOISE: f64 = 1e-4;

/// Quality factor of a lossy element, evaluated at an angular frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Quality {
    /// The element kind's default frequency dependence.
    Default,
    Constant(f64),
    /// q0 · (2π f0 / |ω|)^exponent.
    PowerLaw { q0: f64, f0: f64, exponent: f64 },
}

impl Quality {
    /// Evaluates the quality factor, delegating `Default` to `default_fn`.
    pub fn eval(&self, omega: f64, default_fn: impl Fn(f64) -> f64) -> f64 {
        match *self {
            Quality::Default => default_fn(omega),
            Quality::Constant(q) => q,
            Quality::PowerLaw { q0, f0, exponent } => {
                q0 * (2.0 * std::f64::consts::PI * f0 / omega.abs()).powf(exponent)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Capacitor {
    pub value: ElementValue,
    pub quality: Quality,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Inductor {
    pub value: ElementValue,
    pub loops: Vec<String>,
    pub quality: Quality,
    pub cap: Option<Capacitor>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Junction {
    pub value: ElementValue,
    pub loops: Vec<String>,
    pub cap: Option<Capacitor>,
    /// Critical-current 1/f amplitude A_J / E_J.
    pub noise_amp: f64,
    /// Superconducting gap in eV.
    pub gap_ev: f64,
    pub qp_density: f64,
}

impl Junction {
    pub fn new(value: ElementValue, loops: Vec<String>) -> Self {
        Junction {
            value,
            loops,
            cap: None,
            noise_amp: DEFAULT_JJ_NOISE,
            gap_ev: DEFAULT_GAP_EV,
            qp_density: DEFAULT_QP_DENSITY,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Element {
    Capacitor(Capacitor),
    Inductor(Inductor),
    Junction(Junction),
}

impl Element {
    pub fn kind(&self) -> ElementKind {
        match self {
            Element::Capacitor(_) => ElementKind::Capacitor,
            Element::Inductor(_) => ElementKind::Inductor,
            Element::Junction(_) => ElementKind::Junction,
        }
    }

    pub fn value(&self) -> ElementValue {
        match self {
            Element::Capacitor(c) => c.value,
            Element::Inductor(l) => l.value,
            Element::Junction(j) => j.value,
        }
    }

    pub fn value_mut(&mut self) -> &mut ElementValue {
        match self {
            Element::Capacitor(c) => &mut c.value,
            Element::Inductor(l) => &mut l.value,
            Element::Junction(j) => &mut j.value,
        }
    }

    pub fn loops(&self) -> &[String] {
        match self {
            Element::Capacitor(_) => &[],
            Element::Inductor(l) => &l.loops,
            Element::Junction(j) => &j.loops,
        }
    }

    /// Capacitor attached to an inductive element, if any.
    pub fn parallel_cap(&self) -> Option<&Capacitor> {
        match self {
            Element::Capacitor(_) => None,
            Element::Inductor(l) => l.cap.as_ref(),
            Element::Junction(j) => j.cap.as_ref(),
        }
    }

    pub fn is_inductive(&self) -> bool {
        !matches!(self, Element::Capacitor(_))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoopDef {
    pub id: String,
    /// External flux in units of Φ0.
    pub flux: f64,
    pub noise_amp: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FluxDistribution {
    /// Spanning-tree assignment: each closure branch carries its loop's flux.
    #[default]
    Junctions,
    /// Capacitance-weighted distribution over all inductive branches.
    All,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DefaultUnits {
    pub cap: Unit,
    pub ind: Unit,
    pub jj: Unit,
}

impl Default for DefaultUnits {
    fn default() -> Self {
        DefaultUnits {
            cap: Unit::GHz,
            ind: Unit::GHz,
            jj: Unit::GHz,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub flux_dist: FluxDistribution,
    /// Bath temperature in kelvin.
    pub temperature: f64,
    /// 1/f low cutoff in Hz (ordinary frequency).
    pub low_freq: f64,
    /// 1/f high cutoff in Hz.
    pub high_freq: f64,
    /// Measurement time in seconds.
    pub t_exp: f64,
    /// Charge offsets keyed by 1-based mode number.
    pub charge_offsets: BTreeMap<usize, f64>,
    /// Charge-noise amplitudes keyed by 1-based mode number.
    pub charge_noise: BTreeMap<usize, f64>,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            flux_dist: FluxDistribution::Junctions,
            temperature: 0.015,
            low_freq: 1.0,
            high_freq: 3.0e9,
            t_exp: 1e-5,
            charge_offsets: BTreeMap::new(),
            charge_noise: BTreeMap::new(),
        }
    }
}

/// A parsed circuit: elements per node pair, loops and settings.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CircuitSpec {
    /// Keys are normalized so that the first node is the smaller one.
    pub edges: BTreeMap<(usize, usize), Vec<Element>>,
    pub loops: Vec<LoopDef>,
    pub settings: Settings,
    pub units: DefaultUnits,
}

impl CircuitSpec {
    /// Number of non-ground nodes n_N.
    pub fn n_nodes(&self) -> usize {
        self.edges.keys().map(|&(_, j)| j).max().unwrap_or(0)
    }

    pub fn loop_index(&self, id: &str) -> Option<usize> {
        self.loops.iter().position(|l| l.id == id)
    }

    /// Adds an element, normalizing the node order.
    pub fn add(&mut self, i: usize, j: usize, element: Element) {
        let key = (i.min(j), i.max(j));
        self.edges.entry(key).or_default().push(element);
    }

    pub fn set_flux(&mut self, id: &str, flux: f64) -> bool {
        match self.loops.iter_mut().find(|l| l.id == id) {
            Some(l) => {
                l.flux = flux;
                true
            }
            None => false,
        }
    }
}
