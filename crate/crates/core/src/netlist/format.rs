//! Canonical text serializer; `parse_netlist(format_netlist(s)) == s`.

use std::fmt::Write;

use super::*;

fn num(v: f64) -> String {
    // Debug formatting is the shortest representation that round-trips.
    format!("{v:?}")
}

fn quality(q: &Quality) -> String {
    match q {
        Quality::Default => "default".into(),
        Quality::Constant(v) => num(*v),
        Quality::PowerLaw { q0, f0, exponent } => format!("pow:{}:{}:{}", num(*q0), num(*f0), num(*exponent)),
    }
}

fn value(v: &ElementValue) -> String {
    format!("{} {}", num(v.magnitude), v.unit)
}

fn cap_clause(out: &mut String, cap: &Option<Capacitor>) {
    if let Some(c) = cap {
        let _ = write!(out, " cap {}", value(&c.value));
        if c.quality != Quality::Default {
            let _ = write!(out, " Q {}", quality(&c.quality));
        }
    }
}

fn element(e: &Element) -> String {
    let mut out = String::new();
    match e {
        Element::Capacitor(c) => {
            let _ = write!(out, "C {}", value(&c.value));
            if c.quality != Quality::Default {
                let _ = write!(out, " Q {}", quality(&c.quality));
            }
        }
        Element::Inductor(l) => {
            let _ = write!(out, "L {}", value(&l.value));
            if !l.loops.is_empty() {
                let _ = write!(out, " loops {}", l.loops.join(","));
            }
            if l.quality != Quality::Default {
                let _ = write!(out, " Q {}", quality(&l.quality));
            }
            cap_clause(&mut out, &l.cap);
        }
        Element::Junction(j) => {
            let _ = write!(out, "JJ {}", value(&j.value));
            if !j.loops.is_empty() {
                let _ = write!(out, " loops {}", j.loops.join(","));
            }
            if j.noise_amp != DEFAULT_JJ_NOISE {
                let _ = write!(out, " A {}", num(j.noise_amp));
            }
            if j.gap_ev != DEFAULT_GAP_EV {
                let _ = write!(out, " delta {}", num(j.gap_ev));
            }
            if j.qp_density != DEFAULT_QP_DENSITY {
                let _ = write!(out, " x {}", num(j.qp_density));
            }
            cap_clause(&mut out, &j.cap);
        }
    }
    out
}

/// Renders a spec in canonical form. Defaults are omitted; units are always explicit.
pub fn format_netlist(spec: &CircuitSpec) -> String {
    let mut out = String::new();
    if spec.units != DefaultUnits::default() {
        let _ = writeln!(out, "[units]");
        let _ = writeln!(out, "cap = {}", spec.units.cap);
        let _ = writeln!(out, "ind = {}", spec.units.ind);
        let _ = writeln!(out, "jj = {}", spec.units.jj);
    }
    if !spec.loops.is_empty() {
        let _ = writeln!(out, "[loops]");
        for l in &spec.loops {
            let _ = write!(out, "{} = flux {}", l.id, num(l.flux));
            if l.noise_amp != DEFAULT_FLUX_NOISE {
                let _ = write!(out, " A {}", num(l.noise_amp));
            }
            out.push('\n');
        }
    }
    let _ = writeln!(out, "[elements]");
    for (&(i, j), elements) in &spec.edges {
        let parts: Vec<String> = elements.iter().map(element).collect();
        let _ = writeln!(out, "({i},{j}): {}", parts.join("; "));
    }
    let s = &spec.settings;
    let d = Settings::default();
    let mut lines = Vec::new();
    if s.flux_dist != d.flux_dist {
        lines.push("flux_dist = all".to_string());
    }
    if s.temperature != d.temperature {
        lines.push(format!("temp = {}", num(s.temperature)));
    }
    if s.low_freq != d.low_freq {
        lines.push(format!("low_freq = {}", num(s.low_freq)));
    }
    if s.high_freq != d.high_freq {
        lines.push(format!("high_freq = {}", num(s.high_freq)));
    }
    if s.t_exp != d.t_exp {
        lines.push(format!("t_exp = {}", num(s.t_exp)));
    }
    for (m, v) in &s.charge_offsets {
        lines.push(format!("ng.{m} = {}", num(*v)));
    }
    for (m, v) in &s.charge_noise {
        lines.push(format!("charge_noise.{m} = {}", num(*v)));
    }
    if !lines.is_empty() {
        let _ = writeln!(out, "[settings]");
        for l in lines {
            let _ = writeln!(out, "{l}");
        }
    }
    out
}
