//! Parsers for the small value languages used on the command line.

use cqe_core::solver::SweepParameter;
use cqe_core::wavefunction::GridAxis;

use crate::error::{CliError, CliResult};

/// Splits `KEY=VALUE`.
pub fn key_value(s: &str) -> CliResult<(&str, &str)> {
    s.split_once('=')
        .map(|(k, v)| (k.trim(), v.trim()))
        .ok_or_else(|| CliError::input(format!("expected KEY=VALUE, got '{s}'")))
}

/// A real number, optionally involving π: `1.5`, `pi`, `-pi/2`, `3pi/2`, `0.5*pi`.
pub fn real(s: &str) -> CliResult<f64> {
    let t = s.trim();
    let err = || CliError::input(format!("cannot parse number '{s}'"));
    let Some(pos) = t.find("pi") else {
        return t.parse::<f64>().map_err(|_| err());
    };
    let head = t[..pos].trim_end_matches('*');
    let tail = &t[pos + 2..];
    let factor = match head {
        "" | "+" => 1.0,
        "-" => -1.0,
        h => h.parse::<f64>().map_err(|_| err())?,
    };
    let divisor = match tail {
        "" => 1.0,
        d => d.strip_prefix('/').ok_or_else(err)?.parse::<f64>().map_err(|_| err())?,
    };
    Ok(factor * std::f64::consts::PI / divisor)
}

/// `start:stop:count` (inclusive) or a comma-separated list.
pub fn values(s: &str) -> CliResult<Vec<f64>> {
    if s.contains(':') {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(CliError::input(format!("range '{s}' must be start:stop:count")));
        }
        let count: usize = parts[2]
            .trim()
            .parse()
            .map_err(|_| CliError::input(format!("bad point count in '{s}'")))?;
        if count == 0 {
            return Err(CliError::input("a range needs at least one point"));
        }
        let GridAxis::Points(v) = GridAxis::linspace(real(parts[0])?, real(parts[1])?, count) else {
            unreachable!("linspace always returns points")
        };
        Ok(v)
    } else {
        s.split(',').map(real).collect()
    }
}

/// Sweep target parsed from `loop`, `ng<k>` / `ng.<k>`, or `(i,j)#k`.
pub fn sweep_target(s: &str) -> CliResult<SweepParameter> {
    if let Some(rest) = s.strip_prefix('(') {
        let (pair, idx) = rest
            .split_once(")#")
            .ok_or_else(|| CliError::input(format!("element target '{s}' must look like (i,j)#k")))?;
        let (i, j) = pair
            .split_once(',')
            .ok_or_else(|| CliError::input(format!("bad node pair in '{s}'")))?;
        let parse = |x: &str| x.trim().parse::<usize>().map_err(|_| CliError::input(format!("bad integer in '{s}'")));
        return Ok(SweepParameter::Element {
            edge: (parse(i)?, parse(j)?),
            index: parse(idx)?,
        });
    }
    if let Some(rest) = s.strip_prefix("ng") {
        let rest = rest.strip_prefix('.').unwrap_or(rest);
        if let Ok(mode) = rest.parse::<usize>() {
            return Ok(SweepParameter::ChargeOffset(mode));
        }
    }
    Ok(SweepParameter::LoopFlux(s.to_string()))
}

/// Full sweep specification `TARGET=VALUES`.
pub fn sweep(s: &str) -> CliResult<(SweepParameter, Vec<f64>)> {
    let (target, vals) = key_value(s)?;
    Ok((sweep_target(target)?, values(vals)?))
}

/// Grid specification: one comma-separated entry per mode.
pub fn grid(s: &str) -> CliResult<Vec<GridAxis>> {
    s.split(',')
        .map(|entry| {
            if entry.contains(':') {
                Ok(GridAxis::Points(values(entry)?))
            } else {
                Ok(GridAxis::Scalar(real(entry)?))
            }
        })
        .collect()
}

/// Frequency unit name to its size in Hz.
pub fn frequency_unit(s: &str) -> CliResult<f64> {
    match s {
        "Hz" => Ok(1.0),
        "kHz" => Ok(1e3),
        "MHz" => Ok(1e6),
        "GHz" => Ok(1e9),
        "THz" => Ok(1e12),
        _ => Err(CliError::input(format!("unknown frequency unit '{s}'"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn numbers_with_pi() {
        assert_eq!(real("2.5").unwrap(), 2.5);
        assert_eq!(real("pi").unwrap(), PI);
        assert_eq!(real("-pi/2").unwrap(), -PI / 2.0);
        assert_eq!(real("3pi/2").unwrap(), 1.5 * PI);
        assert_eq!(real("0.5*pi").unwrap(), 0.5 * PI);
        assert!(real("pix").is_err());
        assert!(real("abc").is_err());
    }

    #[test]
    fn ranges_and_lists() {
        assert_eq!(values("0:1:3").unwrap(), vec![0.0, 0.5, 1.0]);
        assert_eq!(values("0.1,0.2").unwrap(), vec![0.1, 0.2]);
        assert!(values("0:1").is_err());
        assert!(values("0:1:0").is_err());
    }

    #[test]
    fn sweep_targets() {
        assert_eq!(sweep_target("loop1").unwrap(), SweepParameter::LoopFlux("loop1".into()));
        assert_eq!(sweep_target("ng3").unwrap(), SweepParameter::ChargeOffset(3));
        assert_eq!(sweep_target("ng.2").unwrap(), SweepParameter::ChargeOffset(2));
        assert_eq!(sweep_target("(0,1)#1").unwrap(), SweepParameter::Element { edge: (0, 1), index: 1 });
        assert!(sweep_target("(0,1)").is_err());
    }

    #[test]
    fn grid_entries() {
        let g = grid("-pi:pi:5,0,1:2:2").unwrap();
        assert_eq!(g.len(), 3);
        assert_eq!(g[1], GridAxis::Scalar(0.0));
        assert_eq!(g[0].values().len(), 5);
    }
}
