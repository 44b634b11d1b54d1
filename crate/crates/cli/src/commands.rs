//! The four verbs: `validate`, `run`, `compare`, `sweep`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use dqm_core::{
    build_generator, compare_trajectories, integrate, relaxation_rate, CoupledState, Flow,
    GeneratorMode, HermitianOperator, Method, ObservableComparison, Trajectory,
};
use rayon::prelude::*;
use serde::Serialize;
use toml::{Table, Value};

use crate::error::CliError;
use crate::output::{self, num, Failure, RunSummary};
use crate::scenario::{
    self, Diagnostic, LoadError, Prepared, Scenario, SystemConfig, PARTICLE_OBSERVABLES,
};

/// Differences below this are reported as agreement.
pub const COMPARE_TOLERANCE: f64 = 1e-6;

/// Threshold for the "entropy production is non-negative" sweep column.
pub const ENTROPY_PRODUCTION_SLACK: f64 = 1e-10;

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out: PathBuf,
    pub stride: Option<usize>,
    pub quiet: bool,
}

/// Diagnostics for a scenario file; `Err` only when it cannot be read.
pub fn validate(path: &Path) -> Result<Vec<Diagnostic>, CliError> {
    match scenario::load(path) {
        Ok(_) => Ok(Vec::new()),
        Err(LoadError::Invalid(d)) => Ok(d),
        Err(LoadError::Io(msg)) => Err(CliError::Io(msg)),
    }
}

fn load(path: &Path, opts: &RunOptions) -> Result<Scenario, CliError> {
    let mut s = scenario::load(path)?;
    if let Some(stride) = opts.stride {
        if stride == 0 {
            return Err(CliError::Validation(vec![Diagnostic {
                path: "--stride".into(),
                line: None,
                message: "must be at least 1".into(),
            }]));
        }
        s.integrator.monitor_stride = stride;
    }
    Ok(s)
}

fn prepare(s: &Scenario) -> Result<Prepared, CliError> {
    s.prepare().map_err(|e| {
        CliError::Validation(vec![Diagnostic {
            path: "(scenario)".into(),
            line: None,
            message: e.to_string(),
        }])
    })
}

fn flow_name(flow: Flow) -> &'static str {
    match flow {
        Flow::Nonlinear => "nonlinear",
        Flow::Linearized => "linearized",
    }
}

/// Integrates one flow; a failed run still yields its partial trajectory.
fn integrate_flow(s: &Scenario, prep: &Prepared, flow: Flow) -> (Trajectory, Option<Failure>) {
    let start = CoupledState::new(prep.initial.clone(), dqm_core::BathState::new(s.bath.initial_energy));
    match integrate(&start, &prep.spec, &s.config(flow)) {
        Ok(t) => (t, None),
        Err(f) => (
            f.trajectory,
            Some(Failure {
                time: f.time,
                error: f.error.to_string(),
            }),
        ),
    }
}

/// Runs a validated scenario into `out`: `trajectory.csv` and `summary.json`.
pub fn execute(s: &Scenario, out: &Path) -> Result<RunSummary, CliError> {
    let prep = prepare(s)?;
    output::ensure_dir(out)?;
    let clock = std::time::Instant::now();
    let (traj, failure) = integrate_flow(s, &prep, Flow::Nonlinear);
    let mut summary = output::summarize(&s.name, "nonlinear", &prep, &traj, failure);
    summary.elapsed_seconds = clock.elapsed().as_secs_f64();
    output::write(&out.join("trajectory.csv"), &output::trajectory_csv(&prep, &traj))?;
    output::write_json(&out.join("summary.json"), &summary)?;
    Ok(summary)
}

fn abort_of(summary: &RunSummary) -> Option<CliError> {
    summary
        .failure
        .as_ref()
        .map(|f| CliError::Abort(format!("t = {}: {}", f.time, f.error)))
}

/// `run`: exit 4 (after flushing the partial trajectory) if integration aborts.
pub fn run(path: &Path, opts: &RunOptions) -> Result<RunSummary, CliError> {
    let s = load(path, opts)?;
    let summary = execute(&s, &opts.out)?;
    match abort_of(&summary) {
        Some(e) => Err(e),
        None => Ok(summary),
    }
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct Difference {
    pub name: String,
    pub sup_abs_diff: f64,
    pub terminal_nonlinear: f64,
    pub terminal_linearized: f64,
    pub terminal_abs_diff: f64,
    /// Records where the quantity is undefined for one of the flows.
    pub undefined_samples: usize,
}

impl Difference {
    pub fn within(&self, tol: f64) -> bool {
        self.undefined_samples == 0 && self.sup_abs_diff <= tol
    }
}

impl From<ObservableComparison> for Difference {
    fn from(c: ObservableComparison) -> Self {
        Difference {
            name: c.name,
            sup_abs_diff: c.sup_abs_diff,
            terminal_nonlinear: c.terminal_nonlinear,
            terminal_linearized: c.terminal_linearized,
            terminal_abs_diff: c.terminal_abs_diff,
            undefined_samples: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct Rate {
    pub name: String,
    pub value: f64,
}

/// Serialized form of a comparison.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct Comparison {
    pub scenario: String,
    pub tolerance: f64,
    pub within_tolerance: bool,
    pub differences: Vec<Difference>,
    pub final_trace_distance: f64,
    pub linearized_min_eigenvalue: f64,
    pub linearized_positivity_lost: bool,
    pub relaxation_rates: Vec<Rate>,
    pub nonlinear: RunSummary,
    pub linearized: RunSummary,
}

impl Comparison {
    pub fn difference(&self, name: &str) -> Option<&Difference> {
        self.differences.iter().find(|d| d.name == name)
    }

    pub fn rate(&self, name: &str) -> Option<f64> {
        self.relaxation_rates.iter().find(|r| r.name == name).map(|r| r.value)
    }
}

/// Tracked observables plus the model's standard set.
fn with_default_observables(s: &Scenario) -> Scenario {
    let mut s = s.clone();
    let (names, extra): (&[&str], &[(&str, &str)]) = match s.system {
        SystemConfig::TwoLevel { .. } => (&["sigma3", "excited", "H"], &[]),
        SystemConfig::Particle { .. } => (PARTICLE_OBSERVABLES, &[("P", "Q"), ("P", "P")]),
    };
    for n in names {
        if !s.output.observables.iter().any(|o| o == n) {
            s.output.observables.push(n.to_string());
        }
    }
    for (a, b) in extra {
        let pair = (a.to_string(), b.to_string());
        if !s.output.correlations.contains(&pair) {
            s.output.correlations.push(pair);
        }
    }
    s
}

fn correlation_track(prep: &Prepared, traj: &Trajectory, a: &HermitianOperator, b: &HermitianOperator) -> Vec<f64> {
    traj.rho
        .iter()
        .map(|rho| output::correlation(&prep.spec, rho, a, b))
        .collect()
}

fn track_difference(name: &str, x: &[f64], y: &[f64]) -> Difference {
    // samples where either state left the positive cone are counted, not compared
    let diffs: Vec<f64> = x.iter().zip(y).map(|(a, b)| (a - b).abs()).collect();
    let undefined = diffs.iter().filter(|d| d.is_nan()).count();
    let sup = diffs.iter().copied().filter(|d| !d.is_nan()).fold(0.0, f64::max);
    let (tx, ty) = (*x.last().unwrap_or(&f64::NAN), *y.last().unwrap_or(&f64::NAN));
    Difference {
        name: name.to_string(),
        sup_abs_diff: sup,
        terminal_nonlinear: tx,
        terminal_linearized: ty,
        terminal_abs_diff: (tx - ty).abs(),
        undefined_samples: undefined,
    }
}

/// Decay-rate fits of the excited population and the spectral gap of the
/// linearized generator's population block.
fn two_level_rates(s: &Scenario, prep: &Prepared, nl: &Trajectory, lin: &Trajectory) -> Vec<Rate> {
    let mut rates = Vec::new();
    let Some(gamma) = prep.two_level_rate else {
        return rates;
    };
    rates.push(Rate {
        name: "gamma".into(),
        value: gamma,
    });
    let bath = dqm_core::BathState::new(s.bath.initial_energy);
    let Ok(gen) = build_generator(&prep.spec, &bath, GeneratorMode::Linearized, None) else {
        return rates;
    };
    let m = dqm_core::population_block(&gen);
    // the 2×2 block has eigenvalues 0 and its trace
    rates.push(Rate {
        name: "generator_population_gap".into(),
        value: -m.trace(),
    });
    let Some(op) = prep
        .observables
        .iter()
        .find(|(n, _)| n == "excited")
        .map(|(_, a)| a.matrix().clone())
    else {
        return rates;
    };
    let window = (0.5 / gamma, 5.0 / gamma);
    // stationary excited population of each flow
    let linear_steady = m[(0, 1)] / (m[(0, 1)] - m[(0, 0)]);
    let gibbs_steady = nl
        .monitors
        .last()
        .and_then(|last| dqm_core::gibbs_state(prep.spec.hamiltonian(), last.bath_temperature, prep.spec.constants()).ok())
        .map(|g| (&op * g.matrix()).trace().re);
    for (name, traj, asymptote) in [
        ("linearized_fit", lin, Some(linear_steady)),
        ("nonlinear_fit", nl, gibbs_steady),
    ] {
        let Some(asymptote) = asymptote else { continue };
        if let Ok(r) = relaxation_rate(&traj.times, &traj.averages(&op), asymptote, window) {
            rates.push(Rate {
                name: name.into(),
                value: r,
            });
        }
    }
    rates
}

fn report_text(c: &Comparison, particle: bool) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "scenario: {}", c.scenario);
    let _ = writeln!(out, "tolerance: {}", c.tolerance);
    if c.within_tolerance {
        let _ = writeln!(out, "verdict: all differences within tolerance");
    } else {
        let _ = writeln!(out, "verdict: nonlinear and linearized dynamics differ");
    }
    for (label, s) in [("nonlinear", &c.nonlinear), ("linearized", &c.linearized)] {
        let _ = writeln!(out, "{label} run: {}", s.status);
    }
    if particle {
        let q = c.difference("Q").map_or(f64::NAN, |d| d.sup_abs_diff);
        let p = c.difference("P").map_or(f64::NAN, |d| d.sup_abs_diff);
        let agree = q <= c.tolerance && p <= c.tolerance;
        let _ = writeln!(
            out,
            "first-moment agreement: {} (sup |d<Q>| = {}, sup |d<P>| = {})",
            if agree { "yes" } else { "no" },
            num(q),
            num(p)
        );
    }
    let _ = writeln!(out, "final trace distance: {}", num(c.final_trace_distance));
    let _ = writeln!(
        out,
        "linearized min eigenvalue: {}{}",
        num(c.linearized_min_eigenvalue),
        if c.linearized_positivity_lost { " (positivity lost)" } else { "" }
    );
    let over: Vec<&Difference> = c
        .differences
        .iter()
        .filter(|d| !d.within(c.tolerance))
        .collect();
    if !over.is_empty() {
        let _ = writeln!(out, "\n[differences]");
        for d in over {
            let _ = write!(
                out,
                "{}: sup {} terminal {} (nonlinear {}, linearized {})",
                d.name,
                num(d.sup_abs_diff),
                num(d.terminal_abs_diff),
                num(d.terminal_nonlinear),
                num(d.terminal_linearized)
            );
            if d.undefined_samples > 0 {
                let _ = write!(out, ", undefined at {} records", d.undefined_samples);
            }
            out.push('\n');
        }
    }
    let _ = writeln!(out, "\n[observables]");
    for d in &c.differences {
        let _ = writeln!(out, "{}: sup {} terminal {}", d.name, num(d.sup_abs_diff), num(d.terminal_abs_diff));
    }
    if !c.relaxation_rates.is_empty() {
        let _ = writeln!(out, "\n[relaxation rates]");
        for r in &c.relaxation_rates {
            let _ = writeln!(out, "{}: {}", r.name, num(r.value));
        }
    }
    out
}

/// `compare`: nonlinear and linearized runs on the same time grid.
pub fn compare(path: &Path, opts: &RunOptions) -> Result<Comparison, CliError> {
    let s = with_default_observables(&load(path, opts)?);
    if matches!(s.integrator.method, Method::Rk45 { .. }) {
        return Err(CliError::Validation(vec![Diagnostic {
            path: "integrator.method".into(),
            line: std::fs::read_to_string(path).ok().and_then(|t| scenario::locate(&t, "integrator.method")),
            message: "compare needs a shared time grid; use method = \"rk4\"".into(),
        }]));
    }
    let prep = prepare(&s)?;
    output::ensure_dir(&opts.out)?;
    let ((nl, nl_fail), (lin, lin_fail)) = rayon::join(
        || integrate_flow(&s, &prep, Flow::Nonlinear),
        || integrate_flow(&s, &prep, Flow::Linearized),
    );
    output::write(&opts.out.join("nonlinear.csv"), &output::trajectory_csv(&prep, &nl))?;
    output::write(&opts.out.join("linearized.csv"), &output::trajectory_csv(&prep, &lin))?;
    let nl_summary = output::summarize(&s.name, flow_name(Flow::Nonlinear), &prep, &nl, nl_fail);
    let lin_summary = output::summarize(&s.name, flow_name(Flow::Linearized), &prep, &lin, lin_fail);
    for summary in [&nl_summary, &lin_summary] {
        if let Some(e) = abort_of(summary) {
            return Err(e);
        }
    }

    let ops: Vec<(String, dqm_core::CMatrix)> = prep
        .observables
        .iter()
        .map(|(n, a)| (n.clone(), a.matrix().clone()))
        .collect();
    let report = compare_trajectories(&s.name, &nl, &lin, &ops).map_err(|e| CliError::Abort(e.to_string()))?;
    let mut differences: Vec<Difference> = report.observables.into_iter().map(Difference::from).collect();
    for (name, a, b) in &prep.correlations {
        let x = correlation_track(&prep, &nl, a, b);
        let y = correlation_track(&prep, &lin, a, b);
        differences.push(track_difference(name, &x, &y));
    }
    let within_tolerance = differences.iter().all(|d| d.within(COMPARE_TOLERANCE));
    let comparison = Comparison {
        scenario: s.name.clone(),
        tolerance: COMPARE_TOLERANCE,
        within_tolerance,
        differences,
        final_trace_distance: report.final_trace_distance,
        linearized_min_eigenvalue: report.linearized_min_eigenvalue,
        linearized_positivity_lost: report.linearized_positivity_lost,
        relaxation_rates: two_level_rates(&s, &prep, &nl, &lin),
        nonlinear: nl_summary,
        linearized: lin_summary,
    };
    let particle = matches!(s.system, SystemConfig::Particle { .. });
    output::write_json(&opts.out.join("comparison.json"), &comparison)?;
    output::write(&opts.out.join("report.txt"), &report_text(&comparison, particle))?;
    Ok(comparison)
}

/// One grid point of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub index: usize,
    pub values: Vec<(String, Value)>,
    pub status: String,
    pub summary: Option<RunSummary>,
    pub error: Option<String>,
}

impl SweepPoint {
    pub fn succeeded(&self) -> bool {
        self.status == "ok"
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutcome {
    pub parameters: Vec<String>,
    pub points: Vec<SweepPoint>,
}

impl SweepOutcome {
    pub fn failures(&self) -> usize {
        self.points.iter().filter(|p| !p.succeeded()).count()
    }

    /// 0 when every point succeeded, else 2 if any point was invalid, else 4.
    pub fn exit_code(&self) -> i32 {
        if self.points.iter().all(SweepPoint::succeeded) {
            0
        } else if self.points.iter().any(|p| p.status == "invalid") {
            2
        } else {
            4
        }
    }
}

fn sweep_error(path: &str, text: &str, message: impl Into<String>) -> CliError {
    CliError::Validation(vec![Diagnostic {
        path: path.into(),
        line: scenario::locate(text, path),
        message: message.into(),
    }])
}

/// Flattens `[grid]` into dotted paths mapped to their value lists.
fn grid_axes(prefix: &str, t: &Table, text: &str, axes: &mut BTreeMap<String, Vec<Value>>) -> Result<(), CliError> {
    for (k, v) in t {
        let path = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        match v {
            Value::Table(inner) => grid_axes(&path, inner, text, axes)?,
            Value::Array(items) if !items.is_empty() => {
                axes.insert(path, items.clone());
            }
            _ => return Err(sweep_error(&format!("grid.{path}"), text, "must be a non-empty array of values")),
        }
    }
    Ok(())
}

fn render_value(v: &Value) -> String {
    match v {
        Value::Float(x) => num(*x),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn sweep_csv(outcome: &SweepOutcome) -> String {
    let mut cols = vec!["point".to_string()];
    cols.extend(outcome.parameters.iter().cloned());
    cols.extend(
        [
            "status",
            "final_time",
            "bath_temperature",
            "trace_distance_to_gibbs",
            "max_rel_energy_drift",
            "min_entropy_step",
            "min_entropy_production",
            "entropy_production_nonnegative",
            "min_eigenvalue",
            "max_trace_error",
            "error",
        ]
        .map(String::from),
    );
    let mut out = cols.join(",");
    out.push('\n');
    let opt = |x: Option<f64>| x.map(num).unwrap_or_default();
    for p in &outcome.points {
        let mut row = vec![format!("{:03}", p.index)];
        row.extend(p.values.iter().map(|(_, v)| render_value(v)));
        row.push(p.status.clone());
        let cons = p.summary.as_ref().and_then(|s| s.conservation.as_ref());
        let fin = p.summary.as_ref().and_then(|s| s.final_state.as_ref());
        row.push(opt(fin.map(|f| f.time)));
        row.push(opt(fin.map(|f| f.bath_temperature)));
        row.push(opt(fin.and_then(|f| f.trace_distance_to_gibbs)));
        row.push(opt(cons.map(|c| c.max_rel_energy_drift)));
        row.push(opt(cons.and_then(|c| c.min_entropy_step)));
        row.push(opt(cons.map(|c| c.min_entropy_production)));
        row.push(
            cons.map(|c| (c.min_entropy_production >= -ENTROPY_PRODUCTION_SLACK).to_string())
                .unwrap_or_default(),
        );
        row.push(opt(cons.map(|c| c.min_eigenvalue)));
        row.push(opt(cons.map(|c| c.max_trace_error)));
        // keep the error in one CSV field
        row.push(
            p.error
                .as_deref()
                .map(|e| format!("\"{}\"", e.replace('"', "'").replace('\n', "; ")))
                .unwrap_or_default(),
        );
        let _ = writeln!(out, "{}", row.join(","));
    }
    out
}

/// `sweep`: every grid point runs independently (in parallel) into
/// `point_NNN/`; `sweep_summary.csv` aggregates terminal diagnostics.
///
/// Axes are ordered by dotted path; the first varies slowest.
pub fn sweep(path: &Path, opts: &RunOptions) -> Result<SweepOutcome, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let doc = scenario::parse_table(&text)?;
    let dir = path.parent().unwrap_or(Path::new("."));
    let base_rel = match doc.get("base") {
        Some(Value::String(s)) => s.clone(),
        Some(_) => return Err(sweep_error("base", &text, "must be a path string")),
        None => return Err(sweep_error("base", &text, "missing base scenario")),
    };
    let mut axes = BTreeMap::new();
    match doc.get("grid") {
        Some(Value::Table(t)) => grid_axes("", t, &text, &mut axes)?,
        Some(_) => return Err(sweep_error("grid", &text, "must be a table")),
        None => return Err(sweep_error("grid", &text, "missing [grid] block")),
    }
    if axes.is_empty() {
        return Err(sweep_error("grid", &text, "no parameters to sweep"));
    }
    let base_path = dir.join(&base_rel);
    let base_text = std::fs::read_to_string(&base_path)
        .map_err(|e| CliError::Io(format!("{}: {e}", base_path.display())))?;
    let base_doc = scenario::parse_table(&base_text)?;
    let base_dir = base_path.parent().unwrap_or(Path::new(".")).to_path_buf();

    let parameters: Vec<String> = axes.keys().cloned().collect();
    let mut grid: Vec<Vec<(String, Value)>> = vec![Vec::new()];
    for (name, values) in &axes {
        grid = grid
            .into_iter()
            .flat_map(|prefix| {
                values.iter().map(move |v| {
                    let mut p = prefix.clone();
                    p.push((name.clone(), v.clone()));
                    p
                })
            })
            .collect();
    }
    output::ensure_dir(&opts.out)?;

    let points: Vec<SweepPoint> = grid
        .into_par_iter()
        .enumerate()
        .map(|(index, values)| {
            let out = opts.out.join(format!("point_{index:03}"));
            let mut point = SweepPoint {
                index,
                values,
                status: "ok".into(),
                summary: None,
                error: None,
            };
            let mut doc = base_doc.clone();
            for (k, v) in &point.values {
                if let Err(e) = scenario::apply_override(&mut doc, k, v.clone()) {
                    point.status = "invalid".into();
                    point.error = Some(e);
                    return point;
                }
            }
            let mut s = match scenario::check(&doc, &base_text, &base_dir) {
                Ok(s) => s,
                Err(d) => {
                    point.status = "invalid".into();
                    point.error = Some(CliError::Validation(d).to_string());
                    return point;
                }
            };
            if let Some(stride) = opts.stride {
                s.integrator.monitor_stride = stride.max(1);
            }
            match execute(&s, &out) {
                Ok(summary) => {
                    if let Some(f) = &summary.failure {
                        point.status = "aborted".into();
                        point.error = Some(format!("t = {}: {}", f.time, f.error));
                    }
                    point.summary = Some(summary);
                }
                Err(e) => {
                    point.status = if e.exit_code() == 2 { "invalid" } else { "failed" }.into();
                    point.error = Some(e.to_string());
                }
            }
            point
        })
        .collect();
    let outcome = SweepOutcome { parameters, points };
    output::write(&opts.out.join("sweep_summary.csv"), &sweep_csv(&outcome))?;
    Ok(outcome)
}
