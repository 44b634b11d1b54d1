//! Trajectory CSV files and JSON summaries.

use std::fmt::Write as _;
use std::path::Path;

use dqm_core::{
    gibbs_state, trace_distance_matrices, DensityMatrix, HermitianOperator, SpectralContext,
    SystemSpec, Trajectory,
};
use serde::Serialize;

use crate::error::CliError;
use crate::scenario::Prepared;

/// 17 significant digits.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// Column names in file order.
pub fn header(prep: &Prepared) -> Vec<String> {
    let mut cols = vec!["t".to_string()];
    cols.extend(prep.observables.iter().map(|(n, _)| n.clone()));
    cols.extend(prep.correlations.iter().map(|(n, _, _)| n.clone()));
    cols.extend(
        [
            "H_e",
            "T_e",
            "E_total",
            "S_total",
            "entropy_production",
            "min_eigenvalue",
            "trace_error",
        ]
        .map(String::from),
    );
    cols
}

/// `⟪A;B⟫` in `rho`; NaN when `rho` is not a valid full-rank state.
pub fn correlation(spec: &SystemSpec, rho: &dqm_core::CMatrix, a: &HermitianOperator, b: &HermitianOperator) -> f64 {
    let Ok(rho) = DensityMatrix::new(rho.clone()) else {
        return f64::NAN;
    };
    match SpectralContext::new(&rho, spec.kernel()) {
        Ok(ctx) => ctx.correlation(a.matrix(), b.matrix()),
        Err(_) => f64::NAN,
    }
}

/// Renders the trajectory table.
pub fn trajectory_csv(prep: &Prepared, traj: &Trajectory) -> String {
    let mut out = header(prep).join(",");
    out.push('\n');
    for i in 0..traj.len() {
        let rho = &traj.rho[i];
        let m = &traj.monitors[i];
        let mut row = vec![num(traj.times[i])];
        row.extend(
            prep.observables
                .iter()
                .map(|(_, a)| num((a.matrix() * rho).trace().re)),
        );
        row.extend(
            prep.correlations
                .iter()
                .map(|(_, a, b)| num(correlation(&prep.spec, rho, a, b))),
        );
        row.extend(
            [
                traj.bath[i].energy,
                m.bath_temperature,
                m.total_energy,
                m.total_entropy,
                m.entropy_production,
                m.min_eigenvalue,
                m.trace_error,
            ]
            .map(num),
        );
        let _ = writeln!(out, "{}", row.join(","));
    }
    out
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct Failure {
    pub time: f64,
    pub error: String,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct Conservation {
    pub initial_total_energy: f64,
    /// `max_t |Ē(t) − Ē(0)| / |Ē(0)|` (absolute when `Ē(0) = 0`).
    pub max_rel_energy_drift: f64,
    pub min_entropy_step: Option<f64>,
    pub min_entropy_production: f64,
    pub max_trace_error: f64,
    pub max_hermiticity_error: f64,
    pub min_eigenvalue: f64,
    pub max_projection_displacement: f64,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct NamedValue {
    pub name: String,
    pub value: f64,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct FinalState {
    pub time: f64,
    pub bath_energy: f64,
    pub bath_temperature: f64,
    pub trace_distance_to_gibbs: Option<f64>,
    pub observables: Vec<NamedValue>,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct RunSummary {
    pub scenario: String,
    pub flow: String,
    pub status: String,
    pub failure: Option<Failure>,
    pub records: usize,
    pub steps: usize,
    pub rejected_steps: usize,
    pub initial_regularization: Option<f64>,
    pub conservation: Option<Conservation>,
    pub final_state: Option<FinalState>,
    /// Wall-clock seconds; kept out of files so outputs stay reproducible.
    #[serde(skip)]
    pub elapsed_seconds: f64,
}

impl RunSummary {
    pub fn succeeded(&self) -> bool {
        self.failure.is_none()
    }
}

fn fold_max(it: impl Iterator<Item = f64>) -> f64 {
    it.fold(0.0, f64::max)
}

/// Conservation and terminal diagnostics of a (possibly partial) trajectory.
pub fn summarize(
    name: &str,
    flow: &str,
    prep: &Prepared,
    traj: &Trajectory,
    failure: Option<Failure>,
) -> RunSummary {
    let (conservation, final_state) = if traj.is_empty() {
        (None, None)
    } else {
        let e0 = traj.monitors[0].total_energy;
        let scale = if e0 != 0.0 { e0.abs() } else { 1.0 };
        let mons = &traj.monitors;
        let conservation = Conservation {
            initial_total_energy: e0,
            max_rel_energy_drift: fold_max(mons.iter().map(|m| (m.total_energy - e0).abs() / scale)),
            min_entropy_step: traj.min_entropy_step.is_finite().then_some(traj.min_entropy_step),
            min_entropy_production: mons
                .iter()
                .map(|m| m.entropy_production)
                .fold(f64::INFINITY, f64::min),
            max_trace_error: fold_max(mons.iter().map(|m| m.trace_error)),
            max_hermiticity_error: fold_max(mons.iter().map(|m| m.hermiticity_error)),
            min_eigenvalue: mons.iter().map(|m| m.min_eigenvalue).fold(f64::INFINITY, f64::min),
            max_projection_displacement: traj.max_projection_displacement,
        };
        let last = traj.len() - 1;
        let temp = mons[last].bath_temperature;
        let c = *prep.spec.constants();
        let trace_distance_to_gibbs = gibbs_state(prep.spec.hamiltonian(), temp, &c)
            .ok()
            .and_then(|g| trace_distance_matrices(&traj.rho[last], g.matrix()).ok());
        let observables = prep
            .observables
            .iter()
            .map(|(n, a)| NamedValue {
                name: n.clone(),
                value: (a.matrix() * &traj.rho[last]).trace().re,
            })
            .collect();
        let final_state = FinalState {
            time: traj.times[last],
            bath_energy: traj.bath[last].energy,
            bath_temperature: temp,
            trace_distance_to_gibbs,
            observables,
        };
        (Some(conservation), Some(final_state))
    };
    RunSummary {
        scenario: name.to_string(),
        flow: flow.to_string(),
        status: if failure.is_none() { "ok" } else { "aborted" }.to_string(),
        failure,
        records: traj.len(),
        steps: traj.steps,
        rejected_steps: traj.rejected_steps,
        initial_regularization: traj.initial_regularization,
        conservation,
        final_state,
        elapsed_seconds: 0.0,
    }
}

pub fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
    text.push('\n');
    write(path, &text)
}

pub fn ensure_dir(path: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}
