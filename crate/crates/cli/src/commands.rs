use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde_json::{json, Value};

use cqe_core::constants::{HBAR, K_B, PHI0, PLANCK};
use cqe_core::coupling::{self, coupling_op, CouplingKind, NodePair};
use cqe_core::netlist::FluxDistribution;
use cqe_core::noise::{
    decay_rate, dephasing_rate, Channel, DecayChannel, DephasingChannel, Direction, NoiseEnvironment, RateResult,
};
use cqe_core::solver::{params_at, sweep_partial, SweepParameter};
use cqe_core::topology::{BranchKind, TreeOrder};
use cqe_core::wavefunction::{eig_phase_coord, GridAxis, PhaseGrid};
use cqe_core::{Circuit, CircuitOptions, HamiltonianParams, Model};

use crate::args::*;
use crate::error::{CliError, CliResult};
use crate::output;
use crate::parse;

fn load_circuit(a: &CircuitArgs) -> CliResult<Circuit> {
    let text = fs::read_to_string(&a.netlist)
        .map_err(|e| CliError::input(format!("cannot read {}: {e}", a.netlist.display())))?;
    let mut spec = cqe_core::parse_netlist(&text)?;
    for f in &a.fluxes {
        let (id, v) = parse::key_value(f)?;
        if !spec.set_flux(id, parse::real(v)?) {
            return Err(CliError::input(format!("--flux: unknown loop '{id}'")));
        }
    }
    for g in &a.offsets {
        let (mode, v) = parse::key_value(g)?;
        let mode: usize = mode
            .parse()
            .map_err(|_| CliError::input(format!("--ng: '{mode}' is not a mode number")))?;
        spec.settings.charge_offsets.insert(mode, parse::real(v)?);
    }
    if let Some(d) = a.flux_dist {
        spec.settings.flux_dist = match d {
            FluxDistArg::Junctions => FluxDistribution::Junctions,
            FluxDistArg::All => FluxDistribution::All,
        };
    }
    let tree = match a.tree {
        TreeArg::Standard => TreeOrder::Standard,
        TreeArg::Alternate => TreeOrder::Alternate,
    };
    Ok(Circuit::new(
        spec,
        CircuitOptions {
            tree,
            ..Default::default()
        },
    )?)
}

fn load_model(circuit: &Circuit, s: &SolveArgs) -> CliResult<Model> {
    let mut opts = cqe_core::EigenOptions::default();
    if let Some(t) = s.tol {
        opts.tol = t;
    }
    if let Some(m) = s.max_iter {
        opts.max_iter = m;
    }
    if let Some(d) = s.dense_threshold {
        opts.dense_threshold = d;
    }
    Ok(circuit.model(&s.truncations)?.with_eigen_options(opts))
}

/// Rejects sweep targets that would fail at every point, so they surface as input errors.
fn check_target(model: &Model, target: &SweepParameter, values: &[f64]) -> CliResult<()> {
    if values.is_empty() {
        return Err(CliError::input("sweep has no points"));
    }
    match target {
        SweepParameter::Element { edge, index } => {
            let key = (edge.0.min(edge.1), edge.0.max(edge.1));
            let found = model.circuit().spec().edges.get(&key).is_some_and(|v| *index < v.len());
            if !found {
                return Err(CliError::input(format!("no element #{index} on edge ({},{})", key.0, key.1)));
            }
            Ok(())
        }
        _ => params_at(model, target, values[0]).map(|_| ()).map_err(Into::into),
    }
}

fn target_name(t: &SweepParameter) -> String {
    match t {
        SweepParameter::LoopFlux(id) => id.clone(),
        SweepParameter::ChargeOffset(m) => format!("ng{m}"),
        SweepParameter::Element { edge, index } => format!("({},{})#{index}", edge.0, edge.1),
    }
}

/// Model and parameters at one sweep point; element sweeps rebuild the model.
fn point(model: &Model, target: &SweepParameter, value: f64) -> cqe_core::Result<(Option<Model>, HamiltonianParams)> {
    match target {
        SweepParameter::Element { edge, index } => {
            let m = model
                .circuit()
                .with_element_value(*edge, *index, value)?
                .model(model.basis().truncations())?
                .with_eigen_options(model.eigen_options().clone());
            let p = m.nominal_params().clone();
            Ok((Some(m), p))
        }
        _ => Ok((None, params_at(model, target, value)?)),
    }
}

/// Human-readable number with six significant digits.
fn short(x: f64) -> String {
    let a = x.abs();
    if a == 0.0 {
        "0".into()
    } else if (1e-3..1e6).contains(&a) {
        let decimals = (5 - a.log10().floor() as i32).max(0) as usize;
        let s = format!("{x:.decimals$}");
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    } else {
        format!("{x:.5e}")
    }
}

pub fn describe(a: &DescribeArgs) -> CliResult<()> {
    let circuit = load_circuit(&a.circuit)?;
    let unit = parse::frequency_unit(&a.unit)?;
    let tc = circuit.transformed();
    let m = circuit.matrices();
    let part = circuit.partition();
    let spec = circuit.spec();
    let nominal = circuit.nominal_params();
    let ec = tc.charging_energies() / (PLANCK * unit);
    let prefactors = tc.junction_prefactors();

    let mut modes = Vec::new();
    for k in 0..part.n_modes() {
        if k < part.n_h {
            modes.push(json!({
                "mode": k + 1,
                "type": "harmonic",
                "frequency": part.omega[k] / (2.0 * PI * unit),
                "impedance_ohm": part.impedance[k],
                "phi_zp": 2.0 * PI / PHI0 * tc.flux_zpf(k),
            }));
        } else {
            let c = k - part.n_h;
            modes.push(json!({
                "mode": k + 1,
                "type": "charge",
                "offset": nominal.charge_offsets[c],
                "frozen": part.frozen.contains(&c),
            }));
        }
    }
    let mut charging = Vec::new();
    for i in 0..part.n_c {
        for j in i..part.n_c {
            charging.push(json!({
                "modes": [part.n_h + i + 1, part.n_h + j + 1],
                "value": ec[(i, j)],
            }));
        }
    }
    let mut junctions = Vec::new();
    for p in &prefactors {
        let br = &m.branches[p.branch];
        let flux: Vec<Value> = (0..m.n_loops)
            .filter(|&l| m.b[(p.branch, l)].abs() > 1e-12)
            .map(|l| json!({"loop": spec.loops[l].id, "factor": m.b[(p.branch, l)]}))
            .collect();
        junctions.push(json!({
            "label": format!("JJ ({},{})#{}", br.edge.0, br.edge.1, br.element),
            "energy": br.value / (PLANCK * unit),
            "phi_zp": p.phi_zp,
            "charge_powers": p.charge_powers,
            "flux_factors": flux,
        }));
    }
    let n_junctions = prefactors.len();
    let report = json!({
        "netlist": a.circuit.netlist.display().to_string(),
        "unit": a.unit,
        "nodes": m.n_nodes,
        "loops": spec.loops.iter().map(|l| json!({"id": l.id, "flux": l.flux})).collect::<Vec<_>>(),
        "inductive_branches": m.branches.len(),
        "linear_inductors": m.branches.iter().filter(|b| b.kind != BranchKind::Junction).count(),
        "harmonic_modes": part.n_h,
        "charge_modes": part.n_c,
        "modes": modes,
        "charging_energies": charging,
        "junctions": junctions,
    });
    if a.format == TextFormat::Json {
        return output::write_json(None, &report);
    }

    let u = &a.unit;
    let mut s = String::new();
    s += &format!("netlist: {}\n", a.circuit.netlist.display());
    s += &format!(
        "nodes: {}   loops: {}   inductive branches: {} ({} junctions)\n",
        m.n_nodes,
        m.n_loops,
        m.branches.len(),
        n_junctions
    );
    s += &format!("modes: {} harmonic, {} charge\n", part.n_h, part.n_c);
    for k in 0..part.n_modes() {
        if k < part.n_h {
            s += &format!(
                "mode {}: harmonic   ω/2π = {} {u}   φ_zp = {}   Z = {} Ω\n",
                k + 1,
                short(part.omega[k] / (2.0 * PI * unit)),
                short(2.0 * PI / PHI0 * tc.flux_zpf(k)),
                short(part.impedance[k])
            );
        } else {
            let c = k - part.n_h;
            let frozen = if part.frozen.contains(&c) { "   (frozen)" } else { "" };
            s += &format!("mode {}: charge     ng{} = {}{frozen}\n", k + 1, k + 1, short(nominal.charge_offsets[c]));
        }
    }
    if part.n_c > 0 {
        s += &format!("charging energies 2e²C̃⁻¹/h [{u}]:\n");
        for i in 0..part.n_c {
            for j in i..part.n_c {
                s += &format!("  E_C{}{} = {}\n", part.n_h + i + 1, part.n_h + j + 1, short(ec[(i, j)]));
            }
        }
    }
    if prefactors.is_empty() {
        s += "junction terms: none\n";
    } else {
        s += "junction terms:\n";
    }
    for p in &prefactors {
        let br = &m.branches[p.branch];
        s += &format!(
            "  JJ ({},{})#{}: E_J/h = {} {u}\n",
            br.edge.0,
            br.edge.1,
            br.element,
            short(br.value / (PLANCK * unit))
        );
        if !p.phi_zp.is_empty() {
            let z: Vec<String> = p.phi_zp.iter().map(|&x| short(x)).collect();
            s += &format!("    φ_zp = [{}]\n", z.join(", "));
        }
        if !p.charge_powers.is_empty() {
            let c: Vec<String> = p.charge_powers.iter().map(|x| x.to_string()).collect();
            s += &format!("    charge shifts = [{}]\n", c.join(", "));
        }
        let terms: Vec<String> = (0..m.n_loops)
            .filter(|&l| m.b[(p.branch, l)].abs() > 1e-12)
            .map(|l| format!("{}·φ_ext({})", short(m.b[(p.branch, l)]), spec.loops[l].id))
            .collect();
        if !terms.is_empty() {
            s += &format!("    flux factor = {}\n", terms.join(" + "));
        }
    }
    output::write_text(None, &s)
}

pub fn spectrum(a: &SpectrumArgs) -> CliResult<()> {
    let circuit = load_circuit(&a.circuit)?;
    let model = load_model(&circuit, &a.solve)?;
    let unit = parse::frequency_unit(&a.unit)?;
    if a.n_eig == 0 {
        return Err(CliError::input("--n-eig must be at least 1"));
    }
    let format = a.format.unwrap_or_else(|| match a.out.as_ref().and_then(|p| p.extension()) {
        Some(e) if e == "json" => TableFormat::Json,
        _ => TableFormat::Csv,
    });
    if a.plot_script.is_some() && (format != TableFormat::Csv || a.out.is_none()) {
        return Err(CliError::input("--plot-script needs CSV output written with --out"));
    }
    let out = a.out.as_deref();
    let levels: Vec<String> = (0..a.n_eig).map(|i| format!("E{i}_{}", a.unit)).collect();

    let Some(sweep) = &a.sweep else {
        let s = model.diag_nominal(a.n_eig)?;
        let row: Vec<f64> = s.efreqs.iter().map(|f| f / unit).collect();
        match format {
            TableFormat::Csv => output::write_text(out, &output::csv(&levels, &[row]))?,
            TableFormat::Json => output::write_json(out, &json!({"unit": a.unit, "levels": row}))?,
        }
        if let Some(p) = &a.plot_script {
            write_plot_script(p, out.expect("checked above"), None, a.n_eig, &a.unit)?;
        }
        return Ok(());
    };

    let (target, values) = parse::sweep(sweep)?;
    check_target(&model, &target, &values)?;
    let partial = sweep_partial(&model, &target, &values, a.n_eig);
    let rows: Vec<Vec<f64>> = partial
        .values
        .iter()
        .zip(&partial.efreqs)
        .map_while(|(&v, e)| e.as_ref().map(|e| std::iter::once(v).chain(e.iter().map(|f| f / unit)).collect()))
        .collect();
    let name = target_name(&target);
    match format {
        TableFormat::Csv => {
            let mut header = vec![name.clone()];
            header.extend(levels);
            output::write_text(out, &output::csv(&header, &rows))?;
        }
        TableFormat::Json => {
            let pts: Vec<f64> = rows.iter().map(|r| r[0]).collect();
            let lv: Vec<&[f64]> = rows.iter().map(|r| &r[1..]).collect();
            output::write_json(out, &json!({"unit": a.unit, "parameter": name, "values": pts, "levels": lv}))?;
        }
    }
    if let Some(p) = &a.plot_script {
        write_plot_script(p, out.expect("checked above"), Some(&name), a.n_eig, &a.unit)?;
    }
    match partial.failure {
        None => Ok(()),
        Some(e) => {
            let index = rows.len();
            output::write_manifest(
                out,
                &json!({
                    "status": "failed",
                    "completed_points": index,
                    "total_points": values.len(),
                    "failed_index": index,
                    "failed_value": values[index],
                    "error": e.to_string(),
                }),
            )?;
            Err(CliError::Numerical(e.to_string()))
        }
    }
}

fn write_plot_script(path: &Path, data: &Path, target: Option<&str>, n: usize, unit: &str) -> CliResult<()> {
    let data = data.display();
    let mut s = String::from("set datafile separator ','\nset key autotitle columnhead\n");
    s += &format!("set ylabel 'E/h [{unit}]'\n");
    match target {
        Some(t) => {
            s += &format!("set xlabel '{t}'\n");
            s += &format!("plot for [i=2:{}] '{data}' using 1:i with lines\n", n + 1);
        }
        None => s += &format!("plot for [i=1:{n}] '{data}' using (0):i with points\n"),
    }
    s += "pause mouse close\n";
    output::write_text(Some(path), &s)
}

pub fn wavefunction(a: &WavefunctionArgs) -> CliResult<()> {
    let circuit = load_circuit(&a.circuit)?;
    let model = load_model(&circuit, &a.solve)?;
    let grid = PhaseGrid {
        axes: parse::grid(&a.grid)?,
    };
    let spectrum = model.diag_nominal(a.state + 1)?;
    let psi = eig_phase_coord(&spectrum.state(a.state), circuit.transformed(), model.basis(), &grid)?;
    let density: Vec<f64> = psi.iter().map(|z| z.norm_sqr()).collect();
    let array_axes: Vec<(usize, &[f64])> = grid
        .axes
        .iter()
        .enumerate()
        .filter_map(|(m, ax)| match ax {
            GridAxis::Points(v) => Some((m + 1, v.as_slice())),
            GridAxis::Scalar(_) => None,
        })
        .collect();

    match a.format {
        GridFormat::Csv => {
            let mut header: Vec<String> = array_axes.iter().map(|(m, _)| format!("phi{m}")).collect();
            header.push("density".into());
            if a.components {
                header.push("re".into());
                header.push("im".into());
            }
            let rows: Vec<Vec<f64>> = (0..psi.len())
                .map(|flat| {
                    let mut row = Vec::with_capacity(header.len());
                    let mut rest = flat;
                    let mut coords = vec![0.0; array_axes.len()];
                    for (k, (_, vals)) in array_axes.iter().enumerate().rev() {
                        coords[k] = vals[rest % vals.len()];
                        rest /= vals.len();
                    }
                    row.extend(coords);
                    row.push(density[flat]);
                    if a.components {
                        row.push(psi[flat].re);
                        row.push(psi[flat].im);
                    }
                    row
                })
                .collect();
            output::write_text(a.out.as_deref(), &output::csv(&header, &rows))
        }
        GridFormat::Bin => {
            let out = a.out.as_deref().ok_or_else(|| CliError::input("--format bin needs --out"))?;
            let mut bytes = Vec::with_capacity(psi.len() * 8 * if a.components { 3 } else { 1 });
            let mut fields = vec!["density"];
            for x in &density {
                bytes.extend_from_slice(&x.to_le_bytes());
            }
            if a.components {
                fields.extend(["re", "im"]);
                for z in &psi {
                    bytes.extend_from_slice(&z.re.to_le_bytes());
                }
                for z in &psi {
                    bytes.extend_from_slice(&z.im.to_le_bytes());
                }
            }
            output::write_bytes(Some(out), &bytes)?;
            let axes: Vec<Value> = grid
                .axes
                .iter()
                .enumerate()
                .map(|(m, ax)| match ax {
                    GridAxis::Points(v) => json!({"mode": m + 1, "values": v}),
                    GridAxis::Scalar(x) => json!({"mode": m + 1, "scalar": x}),
                })
                .collect();
            let mut header_path = out.as_os_str().to_owned();
            header_path.push(".json");
            output::write_json(
                Some(Path::new(&header_path)),
                &json!({
                    "dtype": "<f8",
                    "order": "C",
                    "shape": grid.shape(),
                    "fields": fields,
                    "axes": axes,
                    "state": a.state,
                    "frequency_hz": spectrum.efreqs[a.state],
                }),
            )
        }
    }
}

fn pair(v: &[usize], what: &str) -> CliResult<(usize, usize)> {
    match v {
        [a, b] => Ok((*a, *b)),
        _ => Err(CliError::input(format!("{what} takes exactly two comma-separated values"))),
    }
}

pub fn matrix_element(a: &MatrixElementArgs) -> CliResult<()> {
    let circuit = load_circuit(&a.circuit)?;
    let model = load_model(&circuit, &a.solve)?;
    let (i, j) = pair(&a.nodes, "--nodes")?;
    let (m, n) = pair(&a.states, "--states")?;
    let kind = match a.kind {
        CouplingArg::Capacitive => CouplingKind::Capacitive,
        CouplingArg::Inductive => CouplingKind::Inductive,
    };
    let op = coupling_op(&model, kind, NodePair::new(i, j), model.nominal_params())?;
    let spectrum = model.diag_nominal(m.max(n) + 1)?;
    let z = coupling::matrix_element(&op, &spectrum, m, n)?;
    let (name, unit) = match kind {
        CouplingKind::Capacitive => ("capacitive", "V"),
        CouplingKind::Inductive => ("inductive", "A"),
    };
    output::write_json(
        None,
        &json!({
            "type": name,
            "unit": unit,
            "nodes": [i, j],
            "states": [m, n],
            "re": z.re,
            "im": z.im,
            "abs": z.norm(),
        }),
    )
}

fn channel(c: ChannelArg) -> Channel {
    match c {
        ChannelArg::Capacitive => Channel::Decay(DecayChannel::Capacitive),
        ChannelArg::Inductive => Channel::Decay(DecayChannel::Inductive),
        ChannelArg::Quasiparticle => Channel::Decay(DecayChannel::Quasiparticle),
        ChannelArg::Cc => Channel::Dephasing(DephasingChannel::CriticalCurrent),
        ChannelArg::Charge => Channel::Dephasing(DephasingChannel::Charge),
        ChannelArg::Flux => Channel::Dephasing(DephasingChannel::Flux),
    }
}

fn channel_name(c: Channel) -> &'static str {
    match c {
        Channel::Decay(DecayChannel::Capacitive) => "capacitive",
        Channel::Decay(DecayChannel::Inductive) => "inductive",
        Channel::Decay(DecayChannel::Quasiparticle) => "quasiparticle",
        Channel::Dephasing(DephasingChannel::CriticalCurrent) => "cc",
        Channel::Dephasing(DephasingChannel::Charge) => "charge",
        Channel::Dephasing(DephasingChannel::Flux) => "flux",
    }
}

fn compute_rate(
    model: &Model,
    params: &HamiltonianParams,
    ch: Channel,
    states: (usize, usize),
    direction: Direction,
    env: &NoiseEnvironment,
) -> cqe_core::Result<RateResult> {
    match ch {
        Channel::Decay(d) => {
            let s = model.diag(params, states.0.max(states.1) + 1)?;
            decay_rate(model, params, &s, d, states, direction, env)
        }
        Channel::Dephasing(d) => dephasing_rate(model, params, d, states, env),
    }
}

pub fn decoherence(a: &DecoherenceArgs) -> CliResult<()> {
    let circuit = load_circuit(&a.circuit)?;
    let model = load_model(&circuit, &a.solve)?;
    let states = pair(&a.states, "--states")?;
    let ch = channel(a.channel);
    let direction = match (a.total, a.direction) {
        (true, _) | (_, DirectionArg::Total) => Direction::Total,
        (_, DirectionArg::Down) => Direction::Downward,
        (_, DirectionArg::Up) => Direction::Upward,
    };
    let mut env = NoiseEnvironment::from_settings(&circuit.spec().settings);
    if let Some(t) = a.temperature {
        env.temperature = t;
    }
    env.validate()?;
    let out = a.out.as_deref();

    if a.detailed_balance {
        if a.sweep.is_some() {
            return Err(CliError::input("--detailed-balance does not combine with --sweep"));
        }
        let Channel::Decay(d) = ch else {
            return Err(CliError::input("--detailed-balance applies to decay channels only"));
        };
        let params = model.nominal_params();
        let s = model.diag(params, states.0.max(states.1) + 1)?;
        let up = decay_rate(&model, params, &s, d, states, Direction::Upward, &env)?.rate;
        let down = decay_rate(&model, params, &s, d, states, Direction::Downward, &env)?.rate;
        let omega = 2.0 * PI * (s.efreqs[states.0] - s.efreqs[states.1]).abs();
        let boltzmann = (-HBAR * omega / (K_B * env.temperature)).exp();
        let ratio = up / down;
        return output::write_json(
            out,
            &json!({
                "channel": channel_name(ch),
                "states": [states.0, states.1],
                "temperature_k": env.temperature,
                "transition_frequency_hz": omega / (2.0 * PI),
                "gamma_up": up,
                "gamma_down": down,
                "ratio": ratio,
                "boltzmann_factor": boltzmann,
                "relative_difference": (ratio - boltzmann).abs() / boltzmann,
            }),
        );
    }

    let Some(sweep) = &a.sweep else {
        let r = compute_rate(&model, model.nominal_params(), ch, states, direction, &env)?;
        let direction = match (ch, r.direction) {
            (Channel::Dephasing(_), _) => Value::Null,
            (_, Direction::Downward) => json!("down"),
            (_, Direction::Upward) => json!("up"),
            (_, Direction::Total) => json!("total"),
        };
        let contributions: Vec<Value> = r
            .contributions
            .iter()
            .map(|c| json!({"source": c.source, "rate": c.rate}))
            .collect();
        return output::write_json(
            out,
            &json!({
                "channel": channel_name(ch),
                "states": [states.0, states.1],
                "direction": direction,
                "temperature_k": env.temperature,
                "rate": r.rate,
                "time": 1.0 / r.rate,
                "contributions": contributions,
            }),
        );
    };

    let (target, values) = parse::sweep(sweep)?;
    check_target(&model, &target, &values)?;
    let results: Vec<cqe_core::Result<f64>> = values
        .par_iter()
        .map(|&v| {
            let (rebuilt, params) = point(&model, &target, v)?;
            let m = rebuilt.as_ref().unwrap_or(&model);
            Ok(compute_rate(m, &params, ch, states, direction, &env)?.rate)
        })
        .collect();
    let mut rows = Vec::new();
    let mut failure = None;
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(rate) => rows.push(vec![values[i], rate, 1.0 / rate]),
            Err(e) => {
                failure = Some((i, e));
                break;
            }
        }
    }
    let header = vec![target_name(&target), "rate_per_s".into(), "time_s".into()];
    output::write_text(out, &output::csv(&header, &rows))?;
    match failure {
        None => Ok(()),
        Some((i, e)) => {
            output::write_manifest(
                out,
                &json!({
                    "status": "failed",
                    "completed_points": i,
                    "total_points": values.len(),
                    "failed_index": i,
                    "failed_value": values[i],
                    "error": e.to_string(),
                }),
            )?;
            Err(e.into())
        }
    }
}

pub fn dump_matrices(a: &DumpArgs) -> CliResult<()> {
    let circuit = load_circuit(&a.circuit)?;
    let m = circuit.matrices();
    let tc = circuit.transformed();
    fs::create_dir_all(&a.out_dir)?;
    let files = [
        ("C.csv", output::matrix_csv(&m.c)),
        ("Lstar.csv", output::matrix_csv(&m.lstar)),
        ("W.csv", output::matrix_csv(&m.w)),
        ("B.csv", output::matrix_csv(&m.b)),
        ("G.csv", output::matrix_csv(&m.g)),
        ("S.csv", output::matrix_csv(&tc.transformation.s)),
        ("R.csv", output::matrix_csv(&tc.transformation.r)),
        ("w_tilde.csv", output::matrix_csv(&tc.w_tilde)),
    ];
    for (name, text) in files {
        let p = a.out_dir.join(name);
        output::write_text(Some(&p), &text)?;
        log::info!("wrote {}", p.display());
    }
    Ok(())
}
