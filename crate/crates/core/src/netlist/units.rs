//! Units accepted in netlists and conversion of element values to SI.

use std::fmt;

use crate::constants::{phi0_reduced, E_CHARGE, PLANCK};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnitFamily {
    /// Energy quoted as a frequency E/h.
    Frequency,
    Farad,
    Henry,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Unit {
    Hz,
    KHz,
    MHz,
    GHz,
    THz,
    F,
    MilliF,
    MicroF,
    NanoF,
    PicoF,
    FemtoF,
    AttoF,
    H,
    MilliH,
    MicroH,
    NanoH,
    PicoH,
}

const ALL_UNITS: [Unit; 17] = [
    Unit::Hz,
    Unit::KHz,
    Unit::MHz,
    Unit::GHz,
    Unit::THz,
    Unit::F,
    Unit::MilliF,
    Unit::MicroF,
    Unit::NanoF,
    Unit::PicoF,
    Unit::FemtoF,
    Unit::AttoF,
    Unit::H,
    Unit::MilliH,
    Unit::MicroH,
    Unit::NanoH,
    Unit::PicoH,
];

impl Unit {
    pub fn symbol(self) -> &'static str {
        match self {
            Unit::Hz => "Hz",
            Unit::KHz => "kHz",
            Unit::MHz => "MHz",
            Unit::GHz => "GHz",
            Unit::THz => "THz",
            Unit::F => "F",
            Unit::MilliF => "mF",
            Unit::MicroF => "uF",
            Unit::NanoF => "nF",
            Unit::PicoF => "pF",
            Unit::FemtoF => "fF",
            Unit::AttoF => "aF",
            Unit::H => "H",
            Unit::MilliH => "mH",
            Unit::MicroH => "uH",
            Unit::NanoH => "nH",
            Unit::PicoH => "pH",
        }
    }

    pub fn parse(symbol: &str) -> Option<Unit> {
        ALL_UNITS.iter().copied().find(|u| u.symbol() == symbol)
    }

    pub fn family(self) -> UnitFamily {
        match self {
            Unit::Hz | Unit::KHz | Unit::MHz | Unit::GHz | Unit::THz => UnitFamily::Frequency,
            Unit::F
            | Unit::MilliF
            | Unit::MicroF
            | Unit::NanoF
            | Unit::PicoF
            | Unit::FemtoF
            | Unit::AttoF => UnitFamily::Farad,
            _ => UnitFamily::Henry,
        }
    }

    /// Multiplier taking a magnitude in this unit to the base unit of its family.
    pub fn factor(self) -> f64 {
        match self {
            Unit::Hz | Unit::F | Unit::H => 1.0,
            Unit::KHz => 1e3,
            Unit::MHz => 1e6,
            Unit::GHz => 1e9,
            Unit::THz => 1e12,
            Unit::MilliF | Unit::MilliH => 1e-3,
            Unit::MicroF | Unit::MicroH => 1e-6,
            Unit::NanoF | Unit::NanoH => 1e-9,
            Unit::PicoF | Unit::PicoH => 1e-12,
            Unit::FemtoF => 1e-15,
            Unit::AttoF => 1e-18,
        }
    }
}

impl fmt::Display for Unit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ElementKind {
    Capacitor,
    Inductor,
    Junction,
}

impl ElementKind {
    pub fn accepts(self, family: UnitFamily) -> bool {
        match self {
            ElementKind::Capacitor => family != UnitFamily::Henry,
            ElementKind::Inductor => family != UnitFamily::Farad,
            ElementKind::Junction => family == UnitFamily::Frequency,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementValue {
    pub magnitude: f64,
    pub unit: Unit,
}

impl ElementValue {
    pub fn new(magnitude: f64, unit: Unit) -> Self {
        ElementValue { magnitude, unit }
    }
}

/// Converts a value to farad, henry or joule depending on `kind`.
///
/// Frequency-family capacitors are charging energies E_c = e²/2c, frequency-family
/// inductors are inductive energies E_l = (Φ0/2π)²/l and junction values are E_J/h.
pub fn to_si(value: ElementValue, kind: ElementKind) -> Result<f64> {
    let family = value.unit.family();
    if !kind.accepts(family) {
        return Err(Error::Invalid(format!(
            "unit {} is not allowed for a {:?}",
            value.unit, kind
        )));
    }
    if !(value.magnitude.is_finite() && value.magnitude > 0.0) {
        return Err(Error::Invalid(format!(
            "element value must be finite and positive, got {}",
            value.magnitude
        )));
    }
    let base = value.magnitude * value.unit.factor();
    Ok(match (kind, family) {
        (ElementKind::Capacitor, UnitFamily::Frequency) => {
            E_CHARGE * E_CHARGE / (2.0 * PLANCK * base)
        }
        (ElementKind::Inductor, UnitFamily::Frequency) => {
            phi0_reduced() * phi0_reduced() / (PLANCK * base)
        }
        (ElementKind::Junction, _) => PLANCK * base,
        _ => base,
    })
}

/// Inverse of [`to_si`]: expresses an SI quantity in `unit`.
pub fn from_si(si: f64, unit: Unit, kind: ElementKind) -> Result<f64> {
    let family = unit.family();
    if !kind.accepts(family) {
        return Err(Error::Invalid(format!(
            "unit {} is not allowed for a {:?}",
            unit, kind
        )));
    }
    let base = match (kind, family) {
        (ElementKind::Capacitor, UnitFamily::Frequency) => E_CHARGE * E_CHARGE / (2.0 * PLANCK * si),
        (ElementKind::Inductor, UnitFamily::Frequency) => {
            phi0_reduced() * phi0_reduced() / (PLANCK * si)
        }
        (ElementKind::Junction, _) => si / PLANCK,
        _ => si,
    };
    Ok(base / unit.factor())
}
