//! Time integration of the coupled state `(ρ, H_e)`.
//!
//! Explicit Runge–Kutta (classic RK4 or Dormand–Prince 5(4)) on the matrix
//! and bath energy directly, followed after every accepted step by a
//! projection back onto density matrices with eigenvalues `≥ p_floor`.
//! Stage states of the nonlinear flow are projected the same way before the
//! right-hand side is evaluated, since the mollifier needs a floored spectrum.
//! Projection is a diagnostic: its displacement is recorded per step and a
//! large displacement aborts the run.

use thiserror::Error;

use crate::comparator::linearized_rates;
use crate::correlation::above_floor;
use crate::dynamics::{CoupledState, Snapshot, SystemSpec};
use crate::environment::{BathState, Environment};
use crate::error::{Error, Result};
use crate::operator::{
    eigh_matrix, hermitian_part, hermiticity_residual, max_abs, re, trace_product, CMatrix,
    DensityMatrix, EigenDecomposition,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    /// Classic fourth-order Runge–Kutta with a fixed step.
    Rk4 { dt: f64 },
    /// Dormand–Prince 5(4) with embedded error control.
    Rk45 { rtol: f64, atol: f64, dt_initial: f64 },
}

/// Which right-hand side drives the quantum state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Flow {
    /// The thermodynamic master equation (mollified drift).
    #[default]
    Nonlinear,
    /// Anticommutator linearization; no positivity floor is imposed.
    Linearized,
}

pub const MIN_ADAPTIVE_STEP: f64 = 1e-8;
pub const MAX_ADAPTIVE_STEP: f64 = 1e-1;
const SAFETY: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig {
    pub method: Method,
    pub t_end: f64,
    pub p_floor: f64,
    pub projection_tol: f64,
    pub monitor_stride: usize,
    pub flow: Flow,
}

impl IntegratorConfig {
    pub fn rk4(dt: f64, t_end: f64) -> Self {
        Self {
            method: Method::Rk4 { dt },
            t_end,
            p_floor: 1e-12,
            projection_tol: 1e-10,
            monitor_stride: 1,
            flow: Flow::Nonlinear,
        }
    }

    pub fn rk45(rtol: f64, atol: f64, t_end: f64) -> Self {
        Self {
            method: Method::Rk45 {
                rtol,
                atol,
                dt_initial: 1e-3,
            },
            ..Self::rk4(1e-3, t_end)
        }
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.monitor_stride = stride;
        self
    }

    pub fn with_flow(mut self, flow: Flow) -> Self {
        self.flow = flow;
        self
    }

    pub fn with_p_floor(mut self, p_floor: f64) -> Self {
        self.p_floor = p_floor;
        self
    }

    pub fn validate(&self) -> Result<()> {
        match self.method {
            Method::Rk4 { dt } => {
                if !(dt > 0.0 && dt.is_finite()) {
                    return Err(Error::invalid("dt", format!("must be positive, got {dt}")));
                }
            }
            Method::Rk45 {
                rtol,
                atol,
                dt_initial,
            } => {
                for (name, v) in [("rtol", rtol), ("atol", atol)] {
                    if !(v > 0.0 && v < 1e-2) {
                        return Err(Error::invalid(name, format!("must lie in (0, 1e-2), got {v}")));
                    }
                }
                if !(dt_initial > 0.0 && dt_initial.is_finite()) {
                    return Err(Error::invalid(
                        "dt_initial",
                        format!("must be positive, got {dt_initial}"),
                    ));
                }
            }
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(Error::invalid("t_end", format!("must be positive, got {}", self.t_end)));
        }
        if !(self.p_floor > 0.0 && self.p_floor <= 1e-6) {
            return Err(Error::invalid(
                "p_floor",
                format!("must lie in (0, 1e-6], got {}", self.p_floor),
            ));
        }
        if !(self.projection_tol > 0.0 && self.projection_tol < 1e-2) {
            return Err(Error::invalid(
                "projection_tol",
                format!("must lie in (0, 1e-2), got {}", self.projection_tol),
            ));
        }
        if self.monitor_stride == 0 {
            return Err(Error::invalid("monitor_stride", "must be at least 1"));
        }
        Ok(())
    }
}

/// Diagnostics recorded at each output time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonitorRecord {
    /// `Ē = ⟨H⟩ + H_e`
    pub total_energy: f64,
    /// `S̄ = −k_B tr ρ ln ρ + S_e(H_e)`; NaN for non-positive states.
    pub total_entropy: f64,
    /// `dS̄/dt`; NaN when `ln ρ` is undefined.
    pub entropy_production: f64,
    pub min_eigenvalue: f64,
    pub bath_temperature: f64,
    /// `|tr ρ − 1|` of the step result before projection.
    pub trace_error: f64,
    /// Hermiticity residual of the step result before projection.
    pub hermiticity_error: f64,
    /// `‖ρ_projected − ρ_raw‖_max` of the step that produced this record.
    pub projection_displacement: f64,
}

/// Recorded time series. `rho[i]` and `bath[i]` are the state at `times[i]`.
#[derive(Debug, Clone, Default)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub rho: Vec<CMatrix>,
    pub bath: Vec<BathState>,
    pub monitors: Vec<MonitorRecord>,
    /// `ε` of the initial mix `(1 − ε)ρ + (ε/d)I`, if one was applied.
    pub initial_regularization: Option<f64>,
    pub steps: usize,
    pub rejected_steps: usize,
    /// Largest per-step projection displacement over all steps.
    pub max_projection_displacement: f64,
    /// Smallest per-step change of `S̄` over all steps (nonlinear flow).
    pub min_entropy_step: f64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Recorded state `i` as a validated [`CoupledState`].
    pub fn state(&self, i: usize) -> Result<CoupledState> {
        Ok(CoupledState::new(
            DensityMatrix::new(self.rho[i].clone())?,
            self.bath[i],
        ))
    }

    pub fn final_state(&self) -> Result<CoupledState> {
        self.state(self.len() - 1)
    }

    /// `⟨A⟩(t)` along the recorded states.
    pub fn averages(&self, a: &CMatrix) -> Vec<f64> {
        self.rho.iter().map(|r| trace_product(a, r).re).collect()
    }
}

/// Integration stopped early; `trajectory` holds everything recorded so far
/// (including the last good state).
#[derive(Clone, Error)]
#[error("integration aborted at t = {time}: {error}")]
pub struct IntegrationFailure {
    pub error: Error,
    pub time: f64,
    pub trajectory: Trajectory,
}

impl std::fmt::Debug for IntegrationFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("IntegrationFailure")
            .field("error", &self.error)
            .field("time", &self.time)
            .field("records", &self.trajectory.len())
            .finish()
    }
}

/// Result of projecting a raw step result.
#[derive(Debug, Clone)]
pub struct Projection {
    pub rho: DensityMatrix,
    pub displacement: f64,
    pub clamped: bool,
}

/// Re-Hermitizes, clamps eigenvalues to `≥ p_floor` and renormalizes.
pub fn project(rho_raw: &CMatrix, cfg: &IntegratorConfig) -> Result<Projection> {
    let scale = max_abs(rho_raw);
    let residual = hermiticity_residual(rho_raw);
    if residual > cfg.projection_tol * scale {
        return Err(Error::NotHermitian {
            residual: residual / scale.max(f64::MIN_POSITIVE),
        });
    }
    let m = hermitian_part(rho_raw);
    let spectrum = eigh_matrix(&m)?;
    let min = spectrum.min_eigenvalue();
    if min < -cfg.projection_tol {
        return Err(Error::PositivityCollapse {
            min_eigenvalue: min,
            tolerance: cfg.projection_tol,
        });
    }
    let clamped = min < cfg.p_floor;
    let (matrix, spectrum) = if clamped {
        let raw: Vec<f64> = spectrum
            .eigenvalues()
            .iter()
            .map(|&p| p.max(cfg.p_floor))
            .collect();
        let total: f64 = raw.iter().sum();
        let spectrum = spectrum.with_eigenvalues(raw.iter().map(|p| p / total).collect());
        (spectrum.reconstruct(), spectrum)
    } else {
        let total = m.trace().re;
        let spectrum =
            spectrum.with_eigenvalues(spectrum.eigenvalues().iter().map(|p| p / total).collect());
        (&m * re(1.0 / total), spectrum)
    };
    let displacement = max_abs(&(&matrix - rho_raw));
    let limit = 100.0 * cfg.projection_tol;
    if displacement > limit {
        return Err(Error::ProjectionDisplacement {
            displacement,
            limit,
        });
    }
    Ok(Projection {
        rho: DensityMatrix::from_parts(matrix, spectrum),
        displacement,
        clamped,
    })
}

/// Integrates from `initial` to `cfg.t_end`.
pub fn integrate<E: Environment>(
    initial: &CoupledState,
    spec: &SystemSpec<E>,
    cfg: &IntegratorConfig,
) -> std::result::Result<Trajectory, IntegrationFailure> {
    let fail = |error: Error, trajectory: Trajectory| IntegrationFailure {
        error,
        time: 0.0,
        trajectory,
    };
    cfg.validate().map_err(|e| fail(e, Trajectory::default()))?;
    spec.check_state(initial)
        .map_err(|e| fail(e, Trajectory::default()))?;
    let mut run = Run::new(spec, cfg);
    let start = run
        .initial(initial)
        .map_err(|e| fail(e, Trajectory::default()))?;
    run.drive(start)
}

/// ODE state: raw matrix plus bath energy.
#[derive(Debug, Clone)]
struct Point {
    rho: CMatrix,
    energy: f64,
}

impl Point {
    fn axpy(&self, h: f64, ks: &[(f64, &Point)]) -> Point {
        let mut rho = self.rho.clone();
        let mut energy = self.energy;
        for (w, k) in ks {
            if *w != 0.0 {
                rho += &k.rho * re(h * w);
                energy += h * w * k.energy;
            }
        }
        Point { rho, energy }
    }
}

/// Accepted state with the spectrum used to validate it.
struct Accepted {
    rho: CMatrix,
    spectrum: EigenDecomposition,
    energy: f64,
    displacement: f64,
    trace_error: f64,
    hermiticity_error: f64,
}

struct Run<'a, E: Environment> {
    spec: &'a SystemSpec<E>,
    cfg: &'a IntegratorConfig,
    traj: Trajectory,
    last_entropy: Option<f64>,
}

impl<'a, E: Environment> Run<'a, E> {
    fn new(spec: &'a SystemSpec<E>, cfg: &'a IntegratorConfig) -> Self {
        Self {
            spec,
            cfg,
            traj: Trajectory {
                min_entropy_step: f64::INFINITY,
                ..Trajectory::default()
            },
            last_entropy: None,
        }
    }

    fn initial(&mut self, initial: &CoupledState) -> Result<Accepted> {
        let mut rho = initial.rho.clone();
        // both flows start from the same regularized state so they can be compared
        if rho.min_eigenvalue() < self.cfg.p_floor {
            let eps = rho.dim() as f64 * self.cfg.p_floor;
            rho = rho.mixed_with_identity(eps)?;
            self.traj.initial_regularization = Some(eps);
        }
        Ok(Accepted {
            rho: rho.matrix().clone(),
            spectrum: rho.spectrum().clone(),
            energy: initial.bath.energy,
            displacement: 0.0,
            trace_error: (initial.rho.matrix().trace().re - 1.0).abs(),
            hermiticity_error: 0.0,
        })
    }

    /// Stage states are evaluated as they are; only the spectrum feeding the
    /// log-mean weights and `ln ρ` is floored at `p_floor`.
    fn stage_state(&self, rho: &CMatrix) -> Result<DensityMatrix> {
        let m = hermitian_part(rho);
        let spectrum = eigh_matrix(&m)?;
        let floored = spectrum.with_eigenvalues(
            spectrum
                .eigenvalues()
                .iter()
                .map(|&p| p.max(self.cfg.p_floor))
                .collect(),
        );
        Ok(DensityMatrix::from_parts(m, floored))
    }

    /// Right-hand side at a stage point.
    fn rates(&self, p: &Point) -> Result<Point> {
        let bath = BathState::new(p.energy);
        match self.cfg.flow {
            Flow::Nonlinear => {
                let state = CoupledState::new(self.stage_state(&p.rho)?, bath);
                let snap = Snapshot::new(&state, self.spec)?;
                Ok(Point {
                    rho: snap.master_rhs(),
                    energy: snap.classical_rhs(),
                })
            }
            Flow::Linearized => {
                let (rho, energy) = linearized_rates(&hermitian_part(&p.rho), &bath, self.spec)?;
                Ok(Point { rho, energy })
            }
        }
    }

    fn accept(&self, p: &Point) -> Result<Accepted> {
        let trace_error = (p.rho.trace().re - 1.0).abs();
        let hermiticity_error = hermiticity_residual(&p.rho);
        match self.cfg.flow {
            Flow::Nonlinear => {
                let proj = project(&p.rho, self.cfg)?;
                Ok(Accepted {
                    rho: proj.rho.matrix().clone(),
                    spectrum: proj.rho.spectrum().clone(),
                    energy: p.energy,
                    displacement: proj.displacement,
                    trace_error,
                    hermiticity_error,
                })
            }
            Flow::Linearized => {
                let m = hermitian_part(&p.rho);
                let m = &m * re(1.0 / m.trace().re);
                let displacement = max_abs(&(&m - &p.rho));
                let spectrum = eigh_matrix(&m)?;
                Ok(Accepted {
                    rho: m,
                    spectrum,
                    energy: p.energy,
                    displacement,
                    trace_error,
                    hermiticity_error,
                })
            }
        }
    }

    fn entropy_of(&self, a: &Accepted) -> Result<f64> {
        if a.spectrum.min_eigenvalue() <= 0.0 {
            return Ok(f64::NAN);
        }
        let k_b = self.spec.constants().k_b();
        let s_q: f64 = -k_b * a.spectrum.eigenvalues().iter().map(|p| p * p.ln()).sum::<f64>();
        Ok(s_q + self.spec.environment().entropy(&BathState::new(a.energy))?)
    }

    fn monitor(&self, a: &Accepted) -> Result<MonitorRecord> {
        let bath = BathState::new(a.energy);
        let total_energy = trace_product(self.spec.hamiltonian().matrix(), &a.rho).re + a.energy;
        let bath_temperature = self.spec.environment().temperature(&bath)?;
        let total_entropy = self.entropy_of(a)?;
        let floored = above_floor(&a.spectrum, self.cfg.p_floor);
        let entropy_production = match (self.cfg.flow, floored) {
            (_, false) => f64::NAN,
            (Flow::Nonlinear, true) => {
                let state = CoupledState::new(
                    DensityMatrix::from_parts(a.rho.clone(), a.spectrum.clone()),
                    bath,
                );
                Snapshot::new(&state, self.spec)?.entropy_production()
            }
            (Flow::Linearized, true) => {
                // actual dS̄/dt along the linearized flow
                let (rho_dot, e_dot) = linearized_rates(&a.rho, &bath, self.spec)?;
                let k_b = self.spec.constants().k_b();
                let s = a.spectrum.map(|p| -k_b * p.ln());
                trace_product(&s, &rho_dot).re + e_dot / bath_temperature
            }
        };
        Ok(MonitorRecord {
            total_energy,
            total_entropy,
            entropy_production,
            min_eigenvalue: a.spectrum.min_eigenvalue(),
            bath_temperature,
            trace_error: a.trace_error,
            hermiticity_error: a.hermiticity_error,
            projection_displacement: a.displacement,
        })
    }

    fn record(&mut self, t: f64, a: &Accepted) -> Result<()> {
        let m = self.monitor(a)?;
        self.traj.times.push(t);
        self.traj.rho.push(a.rho.clone());
        self.traj.bath.push(BathState::new(a.energy));
        self.traj.monitors.push(m);
        Ok(())
    }

    fn note_step(&mut self, a: &Accepted) -> Result<()> {
        self.traj.steps += 1;
        self.traj.max_projection_displacement = self.traj.max_projection_displacement.max(a.displacement);
        if self.cfg.flow == Flow::Nonlinear {
            let s = self.entropy_of(a)?;
            if let Some(prev) = self.last_entropy {
                self.traj.min_entropy_step = self.traj.min_entropy_step.min(s - prev);
            }
            self.last_entropy = Some(s);
        }
        Ok(())
    }

    fn drive(mut self, start: Accepted) -> std::result::Result<Trajectory, IntegrationFailure> {
        let mut t = 0.0;
        let outcome = (|| -> Result<()> {
            self.record(0.0, &start)?;
            if self.cfg.flow == Flow::Nonlinear {
                self.last_entropy = Some(self.entropy_of(&start)?);
            }
            let mut current = start;
            match self.cfg.method {
                Method::Rk4 { dt } => {
                    let n = ((self.cfg.t_end / dt) - 1e-9).ceil().max(1.0) as usize;
                    let h = self.cfg.t_end / n as f64;
                    for k in 1..=n {
                        let next = self.rk4_step(&current, h)?;
                        t = k as f64 * h;
                        self.note_step(&next)?;
                        if k % self.cfg.monitor_stride == 0 || k == n {
                            self.record(t, &next)?;
                        }
                        current = next;
                    }
                }
                Method::Rk45 {
                    rtol,
                    atol,
                    dt_initial,
                } => {
                    let mut h = dt_initial.clamp(MIN_ADAPTIVE_STEP, MAX_ADAPTIVE_STEP);
                    let mut accepted = 0usize;
                    while t < self.cfg.t_end {
                        let last = t + h >= self.cfg.t_end * (1.0 - 1e-14);
                        let step = if last { self.cfg.t_end - t } else { h };
                        let (candidate, err) = self.dopri_step(&current, step, rtol, atol)?;
                        if err <= 1.0 {
                            let next = self.accept(&candidate)?;
                            t = if last { self.cfg.t_end } else { t + step };
                            accepted += 1;
                            self.note_step(&next)?;
                            if accepted % self.cfg.monitor_stride == 0 || last {
                                self.record(t, &next)?;
                            }
                            current = next;
                        } else {
                            self.traj.rejected_steps += 1;
                        }
                        let factor = if err == 0.0 {
                            5.0
                        } else {
                            (SAFETY * err.powf(-0.2)).clamp(0.2, 5.0)
                        };
                        let proposal = step * factor;
                        if proposal < MIN_ADAPTIVE_STEP {
                            return Err(Error::StepRejectionCascade {
                                time: t,
                                min_step: MIN_ADAPTIVE_STEP,
                            });
                        }
                        h = proposal.min(MAX_ADAPTIVE_STEP);
                    }
                }
            }
            Ok(())
        })();
        match outcome {
            Ok(()) => Ok(self.traj),
            Err(error) => Err(IntegrationFailure {
                error,
                time: t,
                trajectory: self.traj,
            }),
        }
    }

    fn point(a: &Accepted) -> Point {
        Point {
            rho: a.rho.clone(),
            energy: a.energy,
        }
    }

    fn rk4_step(&self, a: &Accepted, h: f64) -> Result<Accepted> {
        let y = Self::point(a);
        let k1 = self.rates(&y)?;
        let k2 = self.rates(&y.axpy(h, &[(0.5, &k1)]))?;
        let k3 = self.rates(&y.axpy(h, &[(0.5, &k2)]))?;
        let k4 = self.rates(&y.axpy(h, &[(1.0, &k3)]))?;
        let next = y.axpy(
            h,
            &[(1.0 / 6.0, &k1), (1.0 / 3.0, &k2), (1.0 / 3.0, &k3), (1.0 / 6.0, &k4)],
        );
        self.accept(&next)
    }

    /// One Dormand–Prince step; returns the fifth-order point and the scaled
    /// RMS error estimate (accept when ≤ 1).
    fn dopri_step(&self, a: &Accepted, h: f64, rtol: f64, atol: f64) -> Result<(Point, f64)> {
        const C: [[f64; 6]; 6] = [
            [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
            [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
            [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
            [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
            [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
            [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
        ];
        const B4: [f64; 7] = [
            5179.0 / 57600.0,
            0.0,
            7571.0 / 16695.0,
            393.0 / 640.0,
            -92097.0 / 339200.0,
            187.0 / 2100.0,
            1.0 / 40.0,
        ];
        let y = Self::point(a);
        let mut ks: Vec<Point> = vec![self.rates(&y)?];
        for row in C.iter() {
            let terms: Vec<(f64, &Point)> = row.iter().copied().zip(ks.iter()).collect();
            let stage = y.axpy(h, &terms);
            ks.push(self.rates(&stage)?);
        }
        let fifth = y.axpy(h, &C[5].iter().copied().zip(ks.iter()).collect::<Vec<_>>());
        let fourth = y.axpy(h, &B4.iter().copied().zip(ks.iter()).collect::<Vec<_>>());

        let mut sum = 0.0;
        let mut count = 0usize;
        for (i, (z5, z4)) in fifth.rho.iter().zip(fourth.rho.iter()).enumerate() {
            let z0 = y.rho[i];
            for (a5, a4, a0) in [(z5.re, z4.re, z0.re), (z5.im, z4.im, z0.im)] {
                let sc = atol + rtol * a0.abs().max(a5.abs());
                sum += ((a5 - a4) / sc).powi(2);
                count += 1;
            }
        }
        let sc = atol + rtol * y.energy.abs().max(fifth.energy.abs());
        sum += ((fifth.energy - fourth.energy) / sc).powi(2);
        count += 1;
        Ok((fifth, (sum / count as f64).sqrt()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{build_two_level, pauli};
    use crate::operator::{HermitianOperator, PhysicalConstants};

    fn cfg() -> IntegratorConfig {
        IntegratorConfig::rk4(0.01, 1.0)
    }

    #[test]
    fn projection_of_valid_state_is_identity() {
        let rho = DensityMatrix::from_populations(&[0.3, 0.7]).unwrap();
        let p = project(rho.matrix(), &cfg()).unwrap();
        assert!(max_abs(&(p.rho.matrix() - rho.matrix())) <= 1e-15);
        assert!(!p.clamped);
    }

    #[test]
    fn projection_clamps_small_negative_eigenvalues() {
        let raw = HermitianOperator::diagonal(&[1.0 + 1e-12, -1e-12]).into_matrix();
        let p = project(&raw, &cfg()).unwrap();
        assert!(p.clamped);
        let ev = p.rho.eigenvalues();
        assert!((ev[0] - 1e-12).abs() < 1e-20);
        assert!((ev[1] - (1.0 - 1e-12)).abs() < 1e-15);
        assert!((p.rho.matrix().trace().re - 1.0).abs() < 1e-15);
    }

    #[test]
    fn projection_rejects_non_hermitian_input() {
        let mut raw = CMatrix::identity(2, 2) * re(0.5);
        raw[(0, 1)] = re(1e-6);
        assert!(matches!(project(&raw, &cfg()), Err(Error::NotHermitian { .. })));
    }

    #[test]
    fn projection_rejects_collapse_and_large_displacement() {
        let raw = HermitianOperator::diagonal(&[1.1, -0.1]).into_matrix();
        assert!(matches!(
            project(&raw, &cfg()),
            Err(Error::PositivityCollapse { .. })
        ));
        let raw = HermitianOperator::diagonal(&[0.6, 0.6]).into_matrix();
        assert!(matches!(
            project(&raw, &cfg()),
            Err(Error::ProjectionDisplacement { .. })
        ));
    }

    #[test]
    fn config_validation() {
        assert!(IntegratorConfig::rk4(0.0, 1.0).validate().is_err());
        assert!(IntegratorConfig::rk4(0.1, -1.0).validate().is_err());
        assert!(IntegratorConfig::rk45(0.1, 1e-8, 1.0).validate().is_err());
        assert!(IntegratorConfig::rk4(0.1, 1.0).with_p_floor(1e-3).validate().is_err());
        assert!(IntegratorConfig::rk4(0.1, 1.0).with_stride(0).validate().is_err());
        assert!(IntegratorConfig::rk45(1e-8, 1e-10, 1.0).validate().is_ok());
    }

    #[test]
    fn closed_precession_keeps_amplitude() {
        let c = PhysicalConstants::default();
        let omega = 2.0;
        let model = build_two_level(omega, 0.0, 1.0, c).unwrap();
        let spec = model.system_spec().unwrap();
        let plus = nalgebra::DVector::from_vec(vec![re(1.0), re(1.0)]);
        let rho = DensityMatrix::pure(&plus).unwrap();
        let state = CoupledState::new(rho, BathState::new(0.0));
        let period = 2.0 * std::f64::consts::PI / omega;
        let traj = integrate(&state, &spec, &IntegratorConfig::rk4(period / 1000.0, 10.0 * period)).unwrap();
        assert!(traj.initial_regularization.is_some());
        let [s1, s2, _] = pauli();
        let x = traj.averages(s1.matrix());
        let y = traj.averages(s2.matrix());
        let amp0 = x[0].hypot(y[0]);
        for (k, t) in traj.times.iter().enumerate() {
            assert!((x[k].hypot(y[k]) - amp0).abs() < 1e-8);
            assert!((x[k] - amp0 * (omega * t).cos()).abs() < 1e-7, "t = {t}");
        }
    }

    #[test]
    fn adaptive_matches_fixed_step() {
        let c = PhysicalConstants::default();
        let model = build_two_level(1.0, 0.2, 1.0, c).unwrap();
        let spec = model.system_spec().unwrap();
        let rho = DensityMatrix::from_populations(&[0.9, 0.1]).unwrap();
        let state = CoupledState::new(rho, BathState::new(1.0));
        let fixed = integrate(&state, &spec, &IntegratorConfig::rk4(0.01, 5.0)).unwrap();
        let adaptive = integrate(&state, &spec, &IntegratorConfig::rk45(1e-9, 1e-12, 5.0)).unwrap();
        assert_eq!(*adaptive.times.last().unwrap(), 5.0);
        assert!(adaptive.times.windows(2).all(|w| w[1] > w[0]));
        let a = fixed.final_state().unwrap();
        let b = adaptive.final_state().unwrap();
        assert!(a.rho.trace_distance(&b.rho).unwrap() < 1e-8);
    }

    #[test]
    fn stride_controls_records() {
        let c = PhysicalConstants::default();
        let model = build_two_level(1.0, 0.1, 1.0, c).unwrap();
        let spec = model.system_spec().unwrap();
        let state = CoupledState::new(model.gibbs().unwrap(), BathState::new(0.0));
        let traj = integrate(&state, &spec, &IntegratorConfig::rk4(0.1, 1.05).with_stride(4)).unwrap();
        // 11 steps of 1.05/11; records at 0, 4, 8 and the final step
        assert_eq!(traj.len(), 4);
        assert_eq!(traj.steps, 11);
        assert!((traj.times[3] - 1.05).abs() < 1e-15);
    }
}
