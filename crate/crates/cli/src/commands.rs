use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::Context;
use rayon::prelude::*;
use serde_json::{json, Map, Value};

use nilflow::curvature::{christoffel, curvature_report, ricci_specialized};
use nilflow::flow::{closed_form, closed_form_coeffs, integrate, FlowParams, Termination, Trajectory};
use nilflow::joperator::{classify, p_factor_condition_holds, spectrum, theoretical_p_factor};
use nilflow::spectrum::{central_periods, length_scaling_factors, length_spectrum_witness, noncentral_period};
use nilflow::suite::{run_suite, SuiteConfig};
use nilflow::{build_group, GroupFamily, MetricState, NilflowError};

use crate::args::{CurvatureArgs, FlowArgs, Format, GroupArgs, OutputArgs, SpectrumArgs, StepArgs, SweepArgs, VerifyArgs};
use crate::json::{self, num, nums, opt};

/// Outcome classes mapped to process exit codes.
#[derive(Debug)]
pub enum Failure {
    Invalid(String),
    Verification(usize),
    Stopped(String),
    Runtime(anyhow::Error),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Invalid(_) => 2,
            Failure::Verification(_) | Failure::Runtime(_) => 1,
            Failure::Stopped(_) => 3,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Invalid(m) => write!(f, "invalid parameters: {m}"),
            Failure::Verification(k) => write!(f, "{k} check(s) failed"),
            Failure::Stopped(m) => write!(f, "run stopped early: {m}"),
            Failure::Runtime(e) => write!(f, "{e:#}"),
        }
    }
}

impl From<NilflowError> for Failure {
    fn from(e: NilflowError) -> Self {
        Failure::Invalid(e.to_string())
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Runtime(e.into())
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

type CmdResult = Result<(), Failure>;

fn invalid(msg: impl Into<String>) -> Failure {
    Failure::Invalid(msg.into())
}

pub fn parse_list(s: &str, what: &str) -> Result<Vec<f64>, Failure> {
    s.split(',')
        .map(|p| {
            let p = p.trim();
            let v: f64 = p.parse().map_err(|_| invalid(format!("{what}: cannot parse '{p}'")))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(invalid(format!("{what}: '{p}' is not finite")))
            }
        })
        .collect()
}

fn finite(x: f64, what: &str) -> Result<f64, Failure> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(invalid(format!("{what} must be finite")))
    }
}

struct Group {
    family: GroupFamily,
    n: usize,
    g0: Vec<f64>,
}

fn resolve_group(args: &GroupArgs) -> Result<Group, Failure> {
    let family: GroupFamily = args.family.into();
    if args.n == 0 {
        return Err(invalid("n must be at least 1"));
    }
    let dim = family.dim(args.n);
    let g0 = if args.g0.trim() == "identity" {
        vec![1.0; dim]
    } else {
        parse_list(&args.g0, "g0")?
    };
    if g0.len() != dim {
        return Err(invalid(format!("g0 has {} entries, {family} n={} needs {dim}", g0.len(), args.n)));
    }
    if let Some(v) = g0.iter().find(|v| **v <= 0.0) {
        return Err(invalid(format!("g0 entries must be positive, got {v}")));
    }
    Ok(Group { family, n: args.n, g0 })
}

fn group_config(cmd: &str, g: &Group) -> Map<String, Value> {
    let mut c = Map::new();
    c.insert("subcommand".into(), json!(cmd));
    c.insert("family".into(), json!(g.family.name()));
    c.insert("n".into(), json!(g.n));
    c.insert("g0".into(), nums(&g.g0));
    c
}

fn step_config(c: &mut Map<String, Value>, step: &StepArgs) {
    c.insert("dt".into(), num(step.dt));
    c.insert("t_end".into(), num(step.t_end));
    c.insert("record_every".into(), json!(step.record_every));
}

/// Writes to a file, or to standard output for `-`.
fn write_output(path: &str, contents: impl FnOnce(&mut dyn Write) -> io::Result<()>) -> Result<(), Failure> {
    if path == "-" {
        let stdout = io::stdout();
        let mut lock = stdout.lock();
        contents(&mut lock)?;
        lock.flush()?;
    } else {
        let file = File::create(path).with_context(|| format!("creating {path}"))?;
        let mut w = BufWriter::new(file);
        contents(&mut w)?;
        w.flush()?;
    }
    Ok(())
}

fn emit_json(path: &str, doc: &Value) -> CmdResult {
    let text = json::to_string(doc);
    write_output(path, |w| w.write_all(text.as_bytes()))
}

fn json_only(out: &OutputArgs, cmd: &str) -> CmdResult {
    match out.format {
        None | Some(Format::Json) => Ok(()),
        Some(Format::Csv) => Err(invalid(format!("{cmd} output is JSON only"))),
    }
}

pub fn curvature(args: &CurvatureArgs) -> CmdResult {
    json_only(&args.out, "curvature")?;
    let g = resolve_group(&args.group)?;
    let spec = build_group(g.family, g.n)?;
    let metric = MetricState::from_diagonal(&g.g0, 0.0)?;
    let report = curvature_report(&spec, &metric)?;
    let conn = christoffel(&spec, &metric)?;
    let d = spec.dim();

    let mut gamma = Vec::new();
    for i in 0..d {
        for j in 0..d {
            for k in 0..d {
                let v = conn.gamma[(i, j, k)];
                if v != 0.0 {
                    gamma.push(json!({"i": i + 1, "j": j + 1, "k": k + 1, "value": num(v)}));
                }
            }
        }
    }
    let mut riemann = Vec::new();
    for i in 0..d {
        for j in 0..d {
            for k in 0..d {
                for l in 0..d {
                    let v = report.riemann[(i, j, k, l)];
                    if v != 0.0 {
                        riemann.push(json!({"i": i + 1, "j": j + 1, "k": k + 1, "l": l + 1, "value": num(v)}));
                    }
                }
            }
        }
    }
    let ricci_diag: Vec<f64> = (0..d).map(|i| report.ricci[(i, i)]).collect();
    let result = json!({
        "dim": d,
        "christoffel": gamma,
        "riemann": riemann,
        "ricci": json::matrix(&report.ricci),
        "ricci_diagonal": nums(&ricci_diag),
        "ricci_specialized": nums(&ricci_specialized(g.family, &g.g0, g.n)?),
        "scalar": num(report.scalar),
        "sigma": opt(report.sigma),
        "ricci_index_form_discrepancy": num(report.index_form_discrepancy),
    });
    let config = Value::Object(group_config("curvature", &g));
    emit_json(&args.out.output, &json::document(config, result))
}

fn warn_threshold(params: &FlowParams) {
    if params.exceeds_existence_threshold() {
        eprintln!(
            "warning: rho = {} is not below 1/(2(dim-1)) = {}; short-time existence is not guaranteed",
            params.rho,
            params.existence_threshold()
        );
    }
}

fn closed_form_error(traj: &Trajectory, g0: &[f64]) -> Option<f64> {
    let p = &traj.params;
    closed_form_coeffs(p.family, g0, p.n, p.rho).ok()?;
    let mut worst = 0.0_f64;
    for s in &traj.samples {
        let exact = closed_form(p.family, g0, p.n, p.rho, s.t).ok()?;
        for (a, b) in s.g.iter().zip(&exact) {
            worst = worst.max((a - b).abs() / b.abs());
        }
    }
    Some(worst)
}

fn ledger_value(traj: &Trajectory, g0: &[f64]) -> Value {
    let drift: Map<String, Value> = traj.invariant_ledger.iter().map(|(k, v)| (k.clone(), num(*v))).collect();
    let last = traj.last();
    json!({
        "termination": traj.termination.to_string(),
        "final_t": num(last.t),
        "final_g": nums(&last.g),
        "samples": traj.samples.len(),
        "invariant_drift": drift,
        "closed_form_max_rel_error": opt(closed_form_error(traj, g0)),
        "existence_threshold": num(traj.params.existence_threshold()),
        "rho_exceeds_threshold": traj.params.exceeds_existence_threshold(),
    })
}

fn trajectory_json(traj: &Trajectory) -> Value {
    let samples: Vec<Value> = traj
        .samples
        .iter()
        .map(|s| json!({"t": num(s.t), "g": nums(&s.g)}))
        .collect();
    json!({"termination": traj.termination.to_string(), "samples": samples})
}

fn write_trajectory(path: &str, format: Format, traj: &Trajectory, config: &Value) -> CmdResult {
    match format {
        Format::Csv => write_output(path, |w| traj.write_csv(w)),
        Format::Json => emit_json(path, &json::document(config.clone(), trajectory_json(traj))),
    }
}

/// `<dir>/<stem>.ledger.json` for an output file path.
pub fn default_ledger_path(output: &Path) -> PathBuf {
    let stem = output.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "flow".into());
    output.with_file_name(format!("{stem}.ledger.json"))
}

fn flow_params(g: &Group, rho: f64, step: &StepArgs) -> Result<FlowParams, Failure> {
    let rho = finite(rho, "rho")?;
    let params = FlowParams::new(g.family, g.n, rho)
        .with_step(finite(step.dt, "dt")?, finite(step.t_end, "t-end")?)
        .with_record_every(step.record_every);
    params.validate()?;
    Ok(params)
}

pub fn flow(args: &FlowArgs) -> CmdResult {
    let g = resolve_group(&args.group)?;
    let params = flow_params(&g, args.rho, &args.step)?;
    let format = args.out.format.unwrap_or(Format::Csv);
    warn_threshold(&params);

    let mut c = group_config("flow", &g);
    c.insert("rho".into(), num(params.rho));
    step_config(&mut c, &args.step);
    c.insert("format".into(), json!(format.name()));
    c.insert("output".into(), json!(args.out.output));
    c.insert("seed".into(), json!(args.seed));
    c.insert("strict".into(), json!(args.strict));
    let config = Value::Object(c);

    let traj = integrate(&params, &g.g0)?;
    write_trajectory(&args.out.output, format, &traj, &config)?;

    let ledger_path = match (&args.ledger, args.out.output.as_str()) {
        (Some(p), _) => Some(p.clone()),
        (None, "-") => None,
        (None, out) => Some(default_ledger_path(Path::new(out))),
    };
    if let Some(path) = ledger_path {
        let doc = json::document(config, ledger_value(&traj, &g.g0));
        fs::write(&path, json::to_string(&doc)).with_context(|| format!("writing {}", path.display()))?;
    }

    if args.strict && traj.termination != Termination::Horizon {
        return Err(Failure::Stopped(format!("{} at t = {}", traj.termination, traj.last().t)));
    }
    Ok(())
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn verify(args: &VerifyArgs) -> CmdResult {
    if args.n == 0 {
        return Err(invalid("n must be at least 1"));
    }
    let family: GroupFamily = args.family.into();
    let rhos = parse_list(&args.rho, "rho")?;
    let config = SuiteConfig {
        family,
        n: args.n,
        rhos: rhos.clone(),
        seed: args.seed,
    };
    let results = run_suite(&config);
    let failed = results.iter().filter(|r| !r.passed).count();

    for r in &results {
        let status = if r.passed { "PASS" } else { "FAIL" };
        eprintln!("{status} {} (measured {:e}, tolerance {:e}) {}", r.name, r.measured, r.tolerance, r.detail);
    }

    match args.out.format.unwrap_or(Format::Csv) {
        Format::Csv => write_output(&args.out.output, |w| {
            writeln!(w, "name,passed,measured,tolerance,detail")?;
            for r in &results {
                writeln!(
                    w,
                    "{},{},{},{},{}",
                    csv_field(&r.name),
                    r.passed,
                    nilflow::format::fmt_f64(r.measured),
                    nilflow::format::fmt_f64(r.tolerance),
                    csv_field(&r.detail)
                )?;
            }
            Ok(())
        })?,
        Format::Json => {
            let checks: Vec<Value> = results
                .iter()
                .map(|r| {
                    json!({
                        "name": r.name,
                        "passed": r.passed,
                        "measured": num(r.measured),
                        "tolerance": num(r.tolerance),
                        "detail": r.detail,
                    })
                })
                .collect();
            let cfg = json!({
                "subcommand": "verify",
                "family": family.name(),
                "n": args.n,
                "rho": nums(&rhos),
                "seed": args.seed,
            });
            emit_json(&args.out.output, &json::document(cfg, json!({"passed": failed == 0, "checks": checks})))?;
        }
    }
    if failed > 0 {
        return Err(Failure::Verification(failed));
    }
    Ok(())
}

pub fn spectrum_cmd(args: &SpectrumArgs) -> CmdResult {
    json_only(&args.out, "spectrum")?;
    let g = resolve_group(&args.group)?;
    let rho = finite(args.rho, "rho")?;
    let t = finite(args.t_end, "t-end")?;
    if t < 0.0 {
        return Err(invalid("t-end must be nonnegative"));
    }
    let spec = build_group(g.family, g.n)?;
    let g_t = closed_form(g.family, &g.g0, g.n, rho, t)?;
    let metric = MetricState::from_diagonal(&g_t, t)?;

    let zc = match &args.z {
        Some(s) => parse_list(s, "z")?,
        None => {
            let mut v = vec![0.0; g.family.center_dim()];
            v[0] = 1.0;
            v
        }
    };
    if zc.len() != g.family.center_dim() {
        return Err(invalid(format!("z needs {} center coordinates", g.family.center_dim())));
    }
    let z = spec.embed_center(&zc);
    let report = spectrum(&spec, &metric, &z)?;
    let verdict = classify(&spec, &metric)?;
    let p_theory = if p_factor_condition_holds(g.family, &g.g0, g.n) {
        Some(theoretical_p_factor(g.family, g.n, rho, t)?)
    } else {
        None
    };
    let z_norm = report.z_norm_sq.sqrt();
    let periods = central_periods(z_norm)?;
    let (vf, cf) = length_scaling_factors(g.family, g.n, rho, &g.g0, t)?;

    let spectral = json!({
        "mu": report.mu,
        "thetas": nums(&report.thetas),
        "subspace_dims": report.subspace_dims,
        "eigenvalues": nums(&report.eigenvalues),
        "z_norm_sq": num(report.z_norm_sq),
        "verdict": report.verdict.to_string(),
        "p_factor_observed": opt(report.p_factor_observed),
        "p_factor_theoretical": opt(p_theory),
    });
    let mut result = Map::new();
    result.insert("metric".into(), nums(&g_t));
    result.insert("spectral".into(), spectral);
    result.insert("classification".into(), json!(verdict.to_string()));
    result.insert(
        "central_periods".into(),
        json!({"source": "central", "values": nums(&periods.values), "multiset": nums(&periods.multiset)}),
    );
    result.insert("scaling_factors".into(), json!({"vector": num(vf), "center": num(cf)}));

    let mut c = group_config("spectrum", &g);
    c.insert("rho".into(), num(rho));
    c.insert("t_end".into(), num(t));
    c.insert("z".into(), nums(&zc));

    if let Some(s) = &args.v_star {
        let v = parse_list(s, "v-star")?;
        let period = noncentral_period(g.family, g.n, rho, &g.g0, t, &v)?;
        let w = length_spectrum_witness(g.family, g.n, rho, &g.g0, t, &v)?;
        result.insert(
            "noncentral".into(),
            json!({
                "source": "noncentral",
                "period": num(period),
                "witness": nums(&w.w_star),
                "witness_norm_t": num(w.norm_w_t),
                "norm_0": num(w.norm_v_0),
                "residual": num(w.residual),
            }),
        );
        c.insert("v_star".into(), nums(&v));
    }
    emit_json(&args.out.output, &json::document(Value::Object(c), Value::Object(result)))
}

fn thread_cap() -> Result<Option<usize>, Failure> {
    match std::env::var("NILFLOW_THREADS") {
        Err(_) => Ok(None),
        Ok(s) => match s.trim().parse::<usize>() {
            Ok(k) if k >= 1 => Ok(Some(k)),
            _ => Err(invalid(format!("NILFLOW_THREADS must be a positive integer, got '{s}'"))),
        },
    }
}

/// File name for one ρ of a sweep, e.g. `flow_rho_-0.5.csv`.
pub fn sweep_file_name(rho: f64, format: Format) -> String {
    format!("flow_rho_{rho}.{}", format.name())
}

pub fn sweep(args: &SweepArgs) -> CmdResult {
    let g = resolve_group(&args.group)?;
    let rhos = parse_list(&args.rho, "rho")?;
    let format = args.format.unwrap_or(Format::Csv);
    let all_params = rhos
        .iter()
        .map(|&rho| flow_params(&g, rho, &args.step))
        .collect::<Result<Vec<_>, _>>()?;
    for p in &all_params {
        warn_threshold(p);
    }
    fs::create_dir_all(&args.output).with_context(|| format!("creating {}", args.output.display()))?;

    let mut c = group_config("sweep", &g);
    c.insert("rho".into(), nums(&rhos));
    step_config(&mut c, &args.step);
    c.insert("format".into(), json!(format.name()));
    c.insert("output".into(), json!(args.output.display().to_string()));
    c.insert("seed".into(), json!(args.seed));
    c.insert("strict".into(), json!(args.strict));
    let config = Value::Object(c);

    let run_one = |params: &FlowParams| -> Result<(Trajectory, String), Failure> {
        let traj = integrate(params, &g.g0)?;
        let name = sweep_file_name(params.rho, format);
        let path = args.output.join(&name);
        let mut cfg = config.clone();
        cfg["rho"] = num(params.rho);
        write_trajectory(&path.to_string_lossy(), format, &traj, &cfg)?;
        Ok((traj, name))
    };
    let runs: Vec<Result<(Trajectory, String), Failure>> = match thread_cap()? {
        Some(k) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(k)
                .build()
                .map_err(|e| Failure::Runtime(e.into()))?;
            pool.install(|| all_params.par_iter().map(run_one).collect())
        }
        None => all_params.par_iter().map(run_one).collect(),
    };

    let mut entries = Vec::new();
    let mut stopped = Vec::new();
    for r in runs {
        let (traj, name) = r?;
        if traj.termination != Termination::Horizon {
            stopped.push(format!("rho = {}: {}", traj.params.rho, traj.termination));
        }
        let mut e = Map::new();
        e.insert("rho".into(), num(traj.params.rho));
        e.insert("file".into(), json!(name));
        if let Value::Object(ledger) = ledger_value(&traj, &g.g0) {
            e.extend(ledger);
        }
        entries.push(Value::Object(e));
    }
    let doc = json::document(config, json!({"runs": entries}));
    let summary = args.output.join("summary.json");
    fs::write(&summary, json::to_string(&doc)).with_context(|| format!("writing {}", summary.display()))?;

    if args.strict && !stopped.is_empty() {
        return Err(Failure::Stopped(stopped.join("; ")));
    }
    Ok(())
}
