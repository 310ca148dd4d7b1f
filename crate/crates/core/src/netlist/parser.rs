//! Line-oriented netlist parser with line/column diagnostics.

use super::*;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
enum Section {
    Units,
    Loops,
    Elements,
    Settings,
}

#[derive(Debug, Clone, Copy)]
struct Token<'a> {
    text: &'a str,
    /// 1-based column of the first character.
    column: usize,
}

fn tokenize(text: &str, offset: usize) -> Vec<Token<'_>> {
    let mut out = Vec::new();
    let mut start: Option<usize> = None;
    for (idx, ch) in text.char_indices() {
        if ch.is_whitespace() {
            if let Some(s) = start.take() {
                out.push(Token {
                    text: &text[s..idx],
                    column: offset + s + 1,
                });
            }
        } else if start.is_none() {
            start = Some(idx);
        }
    }
    if let Some(s) = start {
        out.push(Token {
            text: &text[s..],
            column: offset + s + 1,
        });
    }
    out
}

fn strip_comment(line: &str) -> &str {
    match line.find('#') {
        Some(i) => &line[..i],
        None => line,
    }
}

fn parse_float(tok: Token<'_>, line: usize, what: &str) -> Result<f64> {
    tok.text
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::syntax(line, tok.column, format!("expected {what}, found '{}'", tok.text)))
}

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// Parses netlist text into a validated [`CircuitSpec`].
pub fn parse_netlist(text: &str) -> Result<CircuitSpec> {
    let mut spec = CircuitSpec::default();
    let mut section: Option<Section> = None;
    // Element lines are parsed after the whole file so that `[units]` may come anywhere.
    let mut element_lines: Vec<(usize, &str)> = Vec::new();
    let mut seen_units = false;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = strip_comment(raw);
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if trimmed.starts_with('[') {
            let col = line.find('[').unwrap() + 1;
            if !trimmed.ends_with(']') {
                return Err(Error::syntax(line_no, col, "unterminated section header"));
            }
            let name = trimmed[1..trimmed.len() - 1].trim();
            section = Some(match name {
                "units" => {
                    seen_units = true;
                    Section::Units
                }
                "loops" => Section::Loops,
                "elements" => Section::Elements,
                "settings" => Section::Settings,
                other => {
                    return Err(Error::syntax(line_no, col, format!("unknown section '[{other}]'")))
                }
            });
            continue;
        }
        match section {
            None => {
                let col = line.len() - line.trim_start().len() + 1;
                return Err(Error::syntax(line_no, col, "content before the first section header"));
            }
            Some(Section::Units) => parse_units_line(line, line_no, &mut spec.units)?,
            Some(Section::Loops) => {
                let def = parse_loop_line(line, line_no)?;
                if spec.loops.iter().any(|l| l.id == def.id) {
                    return Err(Error::syntax(line_no, 1, format!("duplicate loop id '{}'", def.id)));
                }
                spec.loops.push(def);
            }
            Some(Section::Elements) => element_lines.push((line_no, line)),
            Some(Section::Settings) => parse_settings_line(line, line_no, &mut spec.settings)?,
        }
    }
    let _ = seen_units;

    for (line_no, line) in element_lines {
        parse_element_line(line, line_no, &mut spec)?;
    }

    let diagnostics = validate(&spec);
    if let Some(d) = diagnostics.iter().find(|d| d.severity == Severity::Error) {
        return Err(Error::Invalid(d.message.clone()));
    }
    for d in diagnostics {
        log::warn!("{}", d.message);
    }
    Ok(spec)
}

fn split_assignment(line: &str, line_no: usize) -> Result<(Token<'_>, Vec<Token<'_>>)> {
    let eq = line
        .find('=')
        .ok_or_else(|| Error::syntax(line_no, 1, "expected 'key = value'"))?;
    let lhs = tokenize(&line[..eq], 0);
    if lhs.len() != 1 {
        let col = lhs.first().map(|t| t.column).unwrap_or(1);
        return Err(Error::syntax(line_no, col, "expected a single key before '='"));
    }
    let rhs = tokenize(&line[eq + 1..], eq + 1);
    if rhs.is_empty() {
        return Err(Error::syntax(line_no, eq + 2, "missing value after '='"));
    }
    Ok((lhs[0], rhs))
}

fn parse_units_line(line: &str, line_no: usize, units: &mut DefaultUnits) -> Result<()> {
    let (key, rhs) = split_assignment(line, line_no)?;
    if rhs.len() != 1 {
        return Err(Error::syntax(line_no, rhs[1].column, "unexpected token"));
    }
    let unit = Unit::parse(rhs[0].text)
        .ok_or_else(|| Error::syntax(line_no, rhs[0].column, format!("unknown unit '{}'", rhs[0].text)))?;
    let (slot, kind) = match key.text {
        "cap" => (&mut units.cap, ElementKind::Capacitor),
        "ind" => (&mut units.ind, ElementKind::Inductor),
        "jj" => (&mut units.jj, ElementKind::Junction),
        other => {
            return Err(Error::syntax(line_no, key.column, format!("unknown unit key '{other}'")))
        }
    };
    if !kind.accepts(unit.family()) {
        return Err(Error::syntax(line_no, rhs[0].column, format!("unit {unit} not allowed for {kind:?}")));
    }
    *slot = unit;
    Ok(())
}

fn parse_loop_line(line: &str, line_no: usize) -> Result<LoopDef> {
    let (key, rhs) = split_assignment(line, line_no)?;
    if !is_identifier(key.text) {
        return Err(Error::syntax(line_no, key.column, format!("invalid loop id '{}'", key.text)));
    }
    if rhs[0].text != "flux" {
        return Err(Error::syntax(line_no, rhs[0].column, "expected 'flux <value>'"));
    }
    let flux_tok = rhs
        .get(1)
        .ok_or_else(|| Error::syntax(line_no, rhs[0].column, "missing flux value"))?;
    let flux = parse_float(*flux_tok, line_no, "a flux value")?;
    let mut noise_amp = DEFAULT_FLUX_NOISE;
    let mut i = 2;
    while i < rhs.len() {
        match rhs[i].text {
            "A" => {
                let t = rhs
                    .get(i + 1)
                    .ok_or_else(|| Error::syntax(line_no, rhs[i].column, "missing amplitude"))?;
                noise_amp = parse_float(*t, line_no, "an amplitude")?;
                if noise_amp < 0.0 {
                    return Err(Error::syntax(line_no, t.column, "amplitude must be non-negative"));
                }
                i += 2;
            }
            other => {
                return Err(Error::syntax(line_no, rhs[i].column, format!("unexpected token '{other}'")))
            }
        }
    }
    Ok(LoopDef {
        id: key.text.to_string(),
        flux,
        noise_amp,
    })
}

fn parse_settings_line(line: &str, line_no: usize, settings: &mut Settings) -> Result<()> {
    let (key, rhs) = split_assignment(line, line_no)?;
    if rhs.len() != 1 {
        return Err(Error::syntax(line_no, rhs[1].column, "unexpected token"));
    }
    let val = rhs[0];
    let positive = |v: f64| -> Result<f64> {
        if v > 0.0 {
            Ok(v)
        } else {
            Err(Error::syntax(line_no, val.column, "value must be positive"))
        }
    };
    match key.text {
        "flux_dist" => {
            settings.flux_dist = match val.text {
                "junctions" => FluxDistribution::Junctions,
                "all" => FluxDistribution::All,
                other => {
                    return Err(Error::syntax(
                        line_no,
                        val.column,
                        format!("flux_dist must be 'junctions' or 'all', found '{other}'"),
                    ))
                }
            }
        }
        "temp" => settings.temperature = positive(parse_float(val, line_no, "a temperature")?)?,
        "low_freq" => settings.low_freq = positive(parse_float(val, line_no, "a frequency")?)?,
        "high_freq" => settings.high_freq = positive(parse_float(val, line_no, "a frequency")?)?,
        "t_exp" => settings.t_exp = positive(parse_float(val, line_no, "a time")?)?,
        k => {
            let (map, prefix) = if let Some(rest) = k.strip_prefix("ng.") {
                (&mut settings.charge_offsets, rest)
            } else if let Some(rest) = k.strip_prefix("charge_noise.") {
                (&mut settings.charge_noise, rest)
            } else {
                return Err(Error::syntax(line_no, key.column, format!("unknown setting '{k}'")));
            };
            let mode: usize = prefix
                .parse()
                .ok()
                .filter(|&m: &usize| m >= 1)
                .ok_or_else(|| Error::syntax(line_no, key.column, "mode number must be a positive integer"))?;
            let v = parse_float(val, line_no, "a number")?;
            if k.starts_with("charge_noise") && v < 0.0 {
                return Err(Error::syntax(line_no, val.column, "amplitude must be non-negative"));
            }
            map.insert(mode, v);
        }
    }
    Ok(())
}

fn parse_node_pair(line: &str, line_no: usize) -> Result<((usize, usize), usize)> {
    let open = line.find('(').unwrap();
    let close = line
        .find(')')
        .ok_or_else(|| Error::syntax(line_no, open + 1, "missing ')' in node pair"))?;
    let inner = &line[open + 1..close];
    let parts: Vec<&str> = inner.split(',').collect();
    if parts.len() != 2 {
        return Err(Error::syntax(line_no, open + 1, "node pair must be '(i,j)'"));
    }
    let parse_node = |s: &str| -> Result<usize> {
        s.trim()
            .parse::<usize>()
            .map_err(|_| Error::syntax(line_no, open + 2, format!("invalid node index '{}'", s.trim())))
    };
    let i = parse_node(parts[0])?;
    let j = parse_node(parts[1])?;
    if i == j {
        return Err(Error::syntax(line_no, open + 1, "edge endpoints must differ"));
    }
    let rest = &line[close + 1..];
    let colon = rest.find(|c: char| !c.is_whitespace());
    match colon {
        Some(p) if rest[p..].starts_with(':') => Ok(((i.min(j), i.max(j)), close + 1 + p + 1)),
        _ => Err(Error::syntax(line_no, close + 2, "expected ':' after node pair")),
    }
}

fn parse_element_line(line: &str, line_no: usize, spec: &mut CircuitSpec) -> Result<()> {
    let first = line.find(|c: char| !c.is_whitespace()).unwrap();
    if !line[first..].starts_with('(') {
        return Err(Error::syntax(line_no, first + 1, "element lines start with '(i,j):'"));
    }
    let (key, body_start) = parse_node_pair(line, line_no)?;
    let body = &line[body_start..];
    let mut elements = Vec::new();
    let mut offset = body_start;
    for chunk in body.split(';') {
        let tokens = tokenize(chunk, offset);
        offset += chunk.len() + 1;
        if tokens.is_empty() {
            continue;
        }
        elements.push(parse_element(&tokens, line_no, &spec.units)?);
    }
    if elements.is_empty() {
        return Err(Error::syntax(line_no, body_start + 1, "empty edge"));
    }
    spec.edges.entry(key).or_default().extend(elements);
    Ok(())
}

struct Cursor<'t, 'a> {
    tokens: &'t [Token<'a>],
    pos: usize,
    line: usize,
}

impl<'t, 'a> Cursor<'t, 'a> {
    fn peek(&self) -> Option<Token<'a>> {
        self.tokens.get(self.pos).copied()
    }

    fn next(&mut self, what: &str) -> Result<Token<'a>> {
        let t = self.tokens.get(self.pos).copied().ok_or_else(|| {
            let col = self.tokens.last().map(|t| t.column + t.text.len()).unwrap_or(1);
            Error::syntax(self.line, col, format!("expected {what}"))
        })?;
        self.pos += 1;
        Ok(t)
    }

    fn value(&mut self, kind: ElementKind, default_unit: Unit) -> Result<ElementValue> {
        let tok = self.next("an element value")?;
        let magnitude = parse_float(tok, self.line, "an element value")?;
        if magnitude <= 0.0 {
            return Err(Error::syntax(self.line, tok.column, "element value must be positive"));
        }
        let mut unit = default_unit;
        if let Some(t) = self.peek() {
            if let Some(u) = Unit::parse(t.text) {
                unit = u;
                self.pos += 1;
            } else if t.text.chars().next().is_some_and(|c| c.is_ascii_alphabetic())
                && !is_keyword(t.text)
            {
                return Err(Error::syntax(self.line, t.column, format!("unknown unit '{}'", t.text)));
            }
        }
        if !kind.accepts(unit.family()) {
            let col = self.tokens[self.pos - 1].column;
            return Err(Error::syntax(self.line, col, format!("unit {unit} not allowed for {kind:?}")));
        }
        Ok(ElementValue::new(magnitude, unit))
    }

    fn quality(&mut self) -> Result<Quality> {
        let tok = self.next("a quality factor")?;
        if tok.text == "default" {
            return Ok(Quality::Default);
        }
        if let Some(rest) = tok.text.strip_prefix("pow:") {
            let parts: Vec<f64> = rest.split(':').filter_map(|p| p.parse().ok()).collect();
            if parts.len() != 3 || parts[0] <= 0.0 || parts[1] <= 0.0 || !parts.iter().all(|p| p.is_finite()) {
                return Err(Error::syntax(self.line, tok.column, "expected 'pow:<q0>:<f0_Hz>:<exponent>'"));
            }
            return Ok(Quality::PowerLaw {
                q0: parts[0],
                f0: parts[1],
                exponent: parts[2],
            });
        }
        let q = parse_float(tok, self.line, "a quality factor")?;
        if q <= 0.0 {
            return Err(Error::syntax(self.line, tok.column, "quality factor must be positive"));
        }
        Ok(Quality::Constant(q))
    }

    fn loop_list(&mut self) -> Result<Vec<String>> {
        let first = self.next("a loop list")?;
        let mut joined = first.text.to_string();
        while joined.ends_with(',') || self.peek().is_some_and(|t| t.text.starts_with(',')) {
            match self.peek() {
                Some(t) => {
                    joined.push_str(t.text);
                    self.pos += 1;
                }
                None => break,
            }
        }
        let ids: Vec<String> = joined.split(',').map(|s| s.to_string()).collect();
        for id in &ids {
            if !is_identifier(id) {
                return Err(Error::syntax(self.line, first.column, format!("invalid loop id '{id}'")));
            }
        }
        Ok(ids)
    }

    fn amplitude(&mut self, what: &str) -> Result<f64> {
        let tok = self.next(what)?;
        let v = parse_float(tok, self.line, what)?;
        if v < 0.0 {
            return Err(Error::syntax(self.line, tok.column, format!("{what} must be non-negative")));
        }
        Ok(v)
    }

    fn capacitor_clause(&mut self, units: &DefaultUnits) -> Result<Capacitor> {
        let value = self.value(ElementKind::Capacitor, units.cap)?;
        let mut quality = Quality::Default;
        if let Some(t) = self.peek() {
            if t.text == "Q" {
                self.pos += 1;
                quality = self.quality()?;
            } else {
                return Err(Error::syntax(self.line, t.column, "'cap' must be the last clause"));
            }
        }
        if let Some(t) = self.peek() {
            return Err(Error::syntax(self.line, t.column, "'cap' must be the last clause"));
        }
        Ok(Capacitor { value, quality })
    }
}

fn is_keyword(s: &str) -> bool {
    matches!(s, "Q" | "loops" | "cap" | "A" | "delta" | "x")
}

fn parse_element(tokens: &[Token<'_>], line: usize, units: &DefaultUnits) -> Result<Element> {
    let mut cur = Cursor { tokens, pos: 0, line };
    let head = cur.next("an element kind")?;
    match head.text {
        "C" => {
            let value = cur.value(ElementKind::Capacitor, units.cap)?;
            let mut quality = Quality::Default;
            while let Some(t) = cur.peek() {
                cur.pos += 1;
                match t.text {
                    "Q" => quality = cur.quality()?,
                    other => {
                        return Err(Error::syntax(line, t.column, format!("unexpected '{other}' in capacitor")))
                    }
                }
            }
            Ok(Element::Capacitor(Capacitor { value, quality }))
        }
        "L" => {
            let value = cur.value(ElementKind::Inductor, units.ind)?;
            let mut ind = Inductor {
                value,
                loops: Vec::new(),
                quality: Quality::Default,
                cap: None,
            };
            while let Some(t) = cur.peek() {
                cur.pos += 1;
                match t.text {
                    "Q" => ind.quality = cur.quality()?,
                    "loops" => ind.loops = cur.loop_list()?,
                    "cap" => ind.cap = Some(cur.capacitor_clause(units)?),
                    other => {
                        return Err(Error::syntax(line, t.column, format!("unexpected '{other}' in inductor")))
                    }
                }
            }
            Ok(Element::Inductor(ind))
        }
        "JJ" => {
            let value = cur.value(ElementKind::Junction, units.jj)?;
            let mut jj = Junction::new(value, Vec::new());
            while let Some(t) = cur.peek() {
                cur.pos += 1;
                match t.text {
                    "loops" => jj.loops = cur.loop_list()?,
                    "A" => jj.noise_amp = cur.amplitude("an amplitude")?,
                    "delta" => {
                        let tok = cur.peek();
                        jj.gap_ev = cur.amplitude("a gap")?;
                        if jj.gap_ev <= 0.0 {
                            return Err(Error::syntax(line, tok.map(|t| t.column).unwrap_or(1), "gap must be positive"));
                        }
                    }
                    "x" => jj.qp_density = cur.amplitude("a quasiparticle density")?,
                    "cap" => jj.cap = Some(cur.capacitor_clause(units)?),
                    other => {
                        return Err(Error::syntax(line, t.column, format!("unexpected '{other}' in junction")))
                    }
                }
            }
            Ok(Element::Junction(jj))
        }
        other => Err(Error::syntax(line, head.column, format!("unknown element kind '{other}'"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    use crate::netlist::tests_support::ZERO_PI;

    #[test]
    fn zero_pi_netlist() {
        let spec = parse_netlist(ZERO_PI).unwrap();
        assert_eq!(spec.n_nodes(), 3);
        assert_eq!(spec.edges.len(), 6);
        assert_eq!(spec.loops.len(), 1);
    }

    #[test]
    fn empty_edge_is_rejected() {
        let err = parse_netlist("[elements]\n(0,1):\n").unwrap_err();
        assert!(err.to_string().contains("empty edge"), "{err}");
    }

    #[test]
    fn minimal_capacitor_circuit() {
        let spec = parse_netlist("[elements]\n(0,1): C 1 fF\n").unwrap();
        assert!(spec.loops.is_empty());
        assert_eq!(spec.edges[&(0, 1)].len(), 1);
    }

    #[test]
    fn reports_line_and_column() {
        let err = parse_netlist("[elements]\n(0,1): C 1 furlong\n").unwrap_err();
        match err {
            Error::Syntax { line, column, message } => {
                assert_eq!((line, column), (2, 12));
                assert!(message.contains("unknown unit"));
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn dangling_loop_reference() {
        let err = parse_netlist("[elements]\n(0,1): C 1; L 1 loops nope; JJ 1 loops nope\n").unwrap_err();
        assert!(err.to_string().contains("nope"), "{err}");
    }

    #[test]
    fn duplicate_loop_and_negative_value() {
        assert!(parse_netlist("[loops]\na = flux 0\na = flux 0.1\n").is_err());
        assert!(parse_netlist("[elements]\n(0,1): C -1 GHz\n").is_err());
    }

    #[test]
    fn junction_with_henry_units_is_rejected() {
        assert!(parse_netlist("[elements]\n(0,1): C 1; JJ 1 nH\n").is_err());
    }

    #[test]
    fn full_clause_set() {
        let text = "\
[units]
cap = fF
[loops]
l1 = flux 0.25 A 5e-6
[elements]
(1,0): L 0.46 GHz loops l1 Q 3e8; JJ 10.2 GHz loops l1 A 5e-7 delta 2.5e-4 x 8e-6 cap 5.38 Q 1e6
[settings]
flux_dist = all
temp = 0.02
ng.1 = 0.1
";
        let spec = parse_netlist(text).unwrap();
        let els = &spec.edges[&(0, 1)];
        match &els[1] {
            Element::Junction(j) => {
                assert_eq!(j.noise_amp, 5e-7);
                assert_eq!(j.gap_ev, 2.5e-4);
                assert_eq!(j.qp_density, 8e-6);
                let cap = j.cap.as_ref().unwrap();
                assert_eq!(cap.value.unit, Unit::FemtoF);
                assert_eq!(cap.quality, Quality::Constant(1e6));
            }
            other => panic!("{other:?}"),
        }
        assert_eq!(spec.settings.flux_dist, FluxDistribution::All);
        assert_eq!(spec.loops[0].noise_amp, 5e-6);
        assert_eq!(spec.settings.charge_offsets[&1], 0.1);
    }
}
