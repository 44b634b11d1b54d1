//! Linearized dynamics and side-by-side comparison with the nonlinear flow.
//!
//! Replacing the mollified product by the symmetrized product
//! `({Q,H})_ρ → ½{{Q,H}, ρ}₊` turns the master equation into a linear map
//! `ρ ↦ ℒρ`. The bath energy is closed by `dH_e/dt = −tr(H ℒρ)`, which keeps
//! `⟨H⟩ + H_e` conserved. No positivity floor applies to this flow.

use nalgebra::DMatrix;

use crate::correlation::arithmetic_mollify;
use crate::dynamics::{CoupledState, Snapshot, SystemSpec};
use crate::environment::{bracket_coefficients, BathState, Environment};
use crate::error::{Error, Result};
use crate::integrator::Trajectory;
use crate::operator::{
    bracket, eigh_matrix, hermitian_part, max_abs, re, trace_product, CMatrix, DensityMatrix, C64,
};

/// `ℒρ` for an arbitrary (not necessarily Hermitian) matrix; linear in `rho`.
fn linear_map<E: Environment>(rho: &CMatrix, bath: &BathState, spec: &SystemSpec<E>) -> Result<CMatrix> {
    let hbar = spec.constants().hbar();
    let k_b = spec.constants().k_b();
    let mut out = -bracket(rho, spec.hamiltonian().matrix(), hbar);
    for (k, ch) in spec.channels().iter().enumerate() {
        let c = bracket_coefficients(ch, spec.environment(), bath)?;
        let q = ch.q().matrix();
        out += bracket(q, &arithmetic_mollify(spec.qh(k), rho), hbar) * re(c.e_hs);
        out += bracket(q, &bracket(q, rho, hbar), hbar) * re(k_b * c.e_hh);
    }
    Ok(out)
}

/// `(dρ/dt, dH_e/dt)` of the linearized flow at a Hermitian `rho`.
pub fn linearized_rates<E: Environment>(
    rho: &CMatrix,
    bath: &BathState,
    spec: &SystemSpec<E>,
) -> Result<(CMatrix, f64)> {
    if rho.nrows() != spec.dim() || rho.ncols() != spec.dim() {
        return Err(Error::DimensionMismatch {
            expected: spec.dim(),
            found: rho.nrows(),
        });
    }
    let rho_dot = hermitian_part(&linear_map(rho, bath, spec)?);
    let e_dot = -trace_product(spec.hamiltonian().matrix(), &rho_dot).re;
    Ok((rho_dot, e_dot))
}

/// `dρ/dt` of the linearized flow.
pub fn linearized_rhs<E: Environment>(state: &CoupledState, spec: &SystemSpec<E>) -> Result<CMatrix> {
    spec.check_state(state)?;
    Ok(linearized_rates(state.rho.matrix(), &state.bath, spec)?.0)
}

/// Matrix of a linear map on `d × d` matrices acting on column-stacked
/// vectors: `vec(X)[i + d j] = X[i, j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Superoperator {
    dim: usize,
    matrix: CMatrix,
}

impl Superoperator {
    pub fn from_matrix(dim: usize, matrix: CMatrix) -> Result<Self> {
        let n = dim * dim;
        if matrix.nrows() != n || matrix.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: matrix.nrows(),
            });
        }
        Ok(Self { dim, matrix })
    }

    fn from_columns<F>(dim: usize, mut apply: F) -> Result<Self>
    where
        F: FnMut(&CMatrix) -> Result<CMatrix>,
    {
        let n = dim * dim;
        let mut matrix = CMatrix::zeros(n, n);
        for j in 0..dim {
            for i in 0..dim {
                let mut e = CMatrix::zeros(dim, dim);
                e[(i, j)] = re(1.0);
                let image = apply(&e)?;
                matrix.column_mut(i + dim * j).copy_from_slice(image.as_slice());
            }
        }
        Ok(Self { dim, matrix })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn apply(&self, x: &CMatrix) -> Result<CMatrix> {
        if x.nrows() != self.dim || x.ncols() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: x.nrows(),
            });
        }
        let v = nalgebra::DVector::from_column_slice(x.as_slice());
        let out = &self.matrix * v;
        Ok(CMatrix::from_column_slice(self.dim, self.dim, out.as_slice()))
    }

    /// `max_j |Σ_i M[(i,i), j]|`: zero for a trace-annihilating generator.
    pub fn trace_residual(&self) -> f64 {
        let d = self.dim;
        (0..d * d)
            .map(|col| (0..d).map(|i| self.matrix[(i + d * i, col)]).sum::<C64>().norm())
            .fold(0.0, f64::max)
    }

    /// Largest deviation from Hermiticity preservation, `‖L(X)† − L(X†)‖`
    /// over the matrix units.
    pub fn hermiticity_residual(&self) -> f64 {
        let d = self.dim;
        let mut worst = 0.0_f64;
        for j in 0..d {
            for i in 0..d {
                let mut e = CMatrix::zeros(d, d);
                e[(i, j)] = re(1.0);
                let a = self.apply(&e).expect("dimension matches").adjoint();
                let b = self.apply(&e.adjoint()).expect("dimension matches");
                worst = worst.max(max_abs(&(a - b)));
            }
        }
        worst
    }

    /// Complex eigenvalues, sorted by real part then imaginary part.
    pub fn eigenvalues(&self) -> Result<Vec<C64>> {
        let ev = self
            .matrix
            .clone()
            .try_schur(f64::EPSILON, 100_000)
            .ok_or(Error::EigenNonConvergence)?
            .eigenvalues()
            .ok_or(Error::EigenNonConvergence)?;
        let mut ev: Vec<C64> = ev.iter().copied().collect();
        ev.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        Ok(ev)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GeneratorMode {
    /// The exact matrix of the linearized map.
    Linearized,
    /// Finite-difference Jacobian of the nonlinear `dρ/dt` at a given state.
    NonlinearTangent,
}

/// Relative step of the central differences used for the tangent map.
pub const TANGENT_STEP: f64 = 1e-5;

/// Superoperator of the requested dynamics with the bath held at `bath`.
///
/// For [`GeneratorMode::NonlinearTangent`], `rho` is the linearization point
/// (it must be positive definite with some margin above the floor).
pub fn build_generator<E: Environment>(
    spec: &SystemSpec<E>,
    bath: &BathState,
    mode: GeneratorMode,
    rho: Option<&DensityMatrix>,
) -> Result<Superoperator> {
    let d = spec.dim();
    match mode {
        GeneratorMode::Linearized => Superoperator::from_columns(d, |e| linear_map(e, bath, spec)),
        GeneratorMode::NonlinearTangent => {
            let rho = rho.ok_or_else(|| {
                Error::invalid("rho", "tangent generator needs a linearization point")
            })?;
            if rho.dim() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: rho.dim(),
                });
            }
            let h = TANGENT_STEP * rho.min_eigenvalue();
            if !(h > 0.0) {
                return Err(Error::PositivityViolation {
                    min_eigenvalue: rho.min_eigenvalue(),
                    floor: 0.0,
                });
            }
            let rhs_at = |m: CMatrix| -> Result<CMatrix> {
                let spectrum = eigh_matrix(&m)?;
                let state = CoupledState::new(DensityMatrix::from_parts(m, spectrum), *bath);
                Ok(Snapshot::new(&state, spec)?.master_rhs())
            };
            // directional derivative along a Hermitian direction
            let tangent = |dir: &CMatrix| -> Result<CMatrix> {
                let plus = rhs_at(rho.matrix() + dir * re(h))?;
                let minus = rhs_at(rho.matrix() - dir * re(h))?;
                Ok((plus - minus) * re(0.5 / h))
            };
            Superoperator::from_columns(d, |e| {
                // E = A + iB with A, B Hermitian; extend complex-linearly
                let a = hermitian_part(e);
                let b = (e - e.adjoint()) * C64::new(0.0, -0.5);
                Ok(tangent(&a)? + tangent(&b)? * C64::i())
            })
        }
    }
}

/// `½‖A − B‖₁` for Hermitian matrices that need not be positive.
pub fn trace_distance_matrices(a: &CMatrix, b: &CMatrix) -> Result<f64> {
    let diff = hermitian_part(&(a - b));
    let eig = eigh_matrix(&diff)?;
    Ok(0.5 * eig.eigenvalues().iter().map(|x| x.abs()).sum::<f64>())
}

/// Decay rate `λ` of `|y(t) − y_∞| ≈ c e^{−λt}` from a least-squares fit of
/// the logarithm over `t ∈ [t_lo, t_hi]`.
pub fn relaxation_rate(times: &[f64], values: &[f64], asymptote: f64, window: (f64, f64)) -> Result<f64> {
    let mut pts = Vec::new();
    for (&t, &y) in times.iter().zip(values) {
        let dev = (y - asymptote).abs();
        if t >= window.0 && t <= window.1 && dev > 0.0 && dev.is_finite() {
            pts.push((t, dev.ln()));
        }
    }
    if pts.len() < 3 {
        return Err(Error::invalid(
            "window",
            format!("needs at least 3 usable samples, found {}", pts.len()),
        ));
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|(t, y)| (t - mt) * (y - my)).sum();
    let sxx: f64 = pts.iter().map(|(t, _)| (t - mt).powi(2)).sum();
    Ok(-sxy / sxx)
}

/// Differences of one observable between the two flows.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservableComparison {
    pub name: String,
    pub sup_abs_diff: f64,
    pub terminal_nonlinear: f64,
    pub terminal_linearized: f64,
    pub terminal_abs_diff: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    pub scenario: String,
    pub observables: Vec<ObservableComparison>,
    /// `½‖ρ_nl(T) − ρ_lin(T)‖₁`.
    pub final_trace_distance: f64,
    /// Smallest eigenvalue reached by the linearized state.
    pub linearized_min_eigenvalue: f64,
    pub linearized_positivity_lost: bool,
    /// Named decay-rate fits, filled in by the caller.
    pub relaxation_rates: Vec<(String, f64)>,
}

impl ComparisonReport {
    pub fn with_relaxation_rate(mut self, name: impl Into<String>, rate: f64) -> Self {
        self.relaxation_rates.push((name.into(), rate));
        self
    }
}

/// Compares two trajectories recorded on the same time grid.
pub fn compare_trajectories(
    scenario: &str,
    nonlinear: &Trajectory,
    linearized: &Trajectory,
    observables: &[(String, CMatrix)],
) -> Result<ComparisonReport> {
    if nonlinear.len() != linearized.len() || nonlinear.is_empty() {
        return Err(Error::invalid(
            "trajectories",
            format!(
                "must share a non-empty time grid ({} vs {} records)",
                nonlinear.len(),
                linearized.len()
            ),
        ));
    }
    for (a, b) in nonlinear.times.iter().zip(&linearized.times) {
        if (a - b).abs() > 1e-12 * a.abs().max(1.0) {
            return Err(Error::invalid("trajectories", format!("time grids differ at t = {a}")));
        }
    }
    let observables = observables
        .iter()
        .map(|(name, op)| {
            let x = nonlinear.averages(op);
            let y = linearized.averages(op);
            let sup = x.iter().zip(&y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            let (tx, ty) = (*x.last().unwrap(), *y.last().unwrap());
            ObservableComparison {
                name: name.clone(),
                sup_abs_diff: sup,
                terminal_nonlinear: tx,
                terminal_linearized: ty,
                terminal_abs_diff: (tx - ty).abs(),
            }
        })
        .collect();
    let last = nonlinear.len() - 1;
    let final_trace_distance = trace_distance_matrices(&nonlinear.rho[last], &linearized.rho[last])?;
    let linearized_min_eigenvalue = linearized
        .monitors
        .iter()
        .map(|m| m.min_eigenvalue)
        .fold(f64::INFINITY, f64::min);
    Ok(ComparisonReport {
        scenario: scenario.to_string(),
        observables,
        final_trace_distance,
        linearized_min_eigenvalue,
        linearized_positivity_lost: linearized_min_eigenvalue < 0.0,
        relaxation_rates: Vec::new(),
    })
}

/// Real matrix of the restriction of a generator to the diagonal
/// (population) block, `M[i][j] = ⟨i|ℒ(|j⟩⟨j|)|i⟩`.
pub fn population_block(gen: &Superoperator) -> DMatrix<f64> {
    let d = gen.dim();
    DMatrix::from_fn(d, d, |i, j| gen.matrix()[(i + d * i, j + d * j)].re)
}
