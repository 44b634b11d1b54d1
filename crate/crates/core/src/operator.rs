//! Dense complex-matrix foundation: observables, density matrices, brackets,
//! traces, averages and the Hermitian eigendecomposition everything else
//! rests on.
//!
//! All matrices are dense [`CMatrix`] values. Observables are wrapped in
//! [`HermitianOperator`], which checks Hermiticity once at construction and
//! stores the exactly-Hermitian part, so downstream bracket arithmetic stays
//! Hermitian to rounding.

use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;

/// Relative tolerance for accepting a matrix as Hermitian.
pub const HERMITICITY_TOL: f64 = 1e-12;
/// Absolute tolerance on `|tr ρ − 1|` for density matrices.
pub const TRACE_TOL: f64 = 1e-12;
/// Eigenvalues of a density matrix may dip this far below zero.
pub const EIGENVALUE_TOL: f64 = 1e-12;

pub(crate) fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// Largest entry modulus.
pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// `max |M_ij − conj(M_ji)|`.
pub fn hermiticity_residual(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// `(M + M†)/2`.
pub fn hermitian_part(m: &CMatrix) -> CMatrix {
    let mut out = m.clone();
    let n = m.nrows();
    for i in 0..n {
        out[(i, i)] = re(m[(i, i)].re);
        for j in (i + 1)..n {
            let z = (m[(i, j)] + m[(j, i)].conj()) * 0.5;
            out[(i, j)] = z;
            out[(j, i)] = z.conj();
        }
    }
    out
}

/// `tr(AB)` without forming the product.
pub fn trace_product(a: &CMatrix, b: &CMatrix) -> C64 {
    let n = a.nrows();
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            acc += a[(i, j)] * b[(j, i)];
        }
    }
    acc
}

fn check_same_dim(a: &CMatrix, b: &CMatrix) -> Result<()> {
    check_square(a)?;
    check_square(b)?;
    if a.nrows() != b.nrows() {
        return Err(Error::DimensionMismatch {
            expected: a.nrows(),
            found: b.nrows(),
        });
    }
    Ok(())
}

fn check_square(m: &CMatrix) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    if m.nrows() == 0 {
        return Err(Error::Empty);
    }
    Ok(())
}

/// Planck's and Boltzmann's constants. Natural units (both 1) by default.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalConstants {
    hbar: f64,
    k_b: f64,
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self {
            hbar: 1.0,
            k_b: 1.0,
        }
    }
}

impl PhysicalConstants {
    pub fn new(hbar: f64, k_b: f64) -> Result<Self> {
        if !(hbar.is_finite() && hbar > 0.0) {
            return Err(Error::invalid("hbar", format!("must be positive, got {hbar}")));
        }
        if !(k_b.is_finite() && k_b > 0.0) {
            return Err(Error::invalid("k_b", format!("must be positive, got {k_b}")));
        }
        Ok(Self { hbar, k_b })
    }

    /// CODATA SI values (J·s, J/K).
    pub fn si() -> Self {
        Self {
            hbar: 1.054_571_817e-34,
            k_b: 1.380_649e-23,
        }
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    pub fn k_b(&self) -> f64 {
        self.k_b
    }
}

/// Physical dimension tag carried by an operator. Informational only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Units {
    #[default]
    Dimensionless,
    Energy,
    Length,
    Momentum,
    Entropy,
}

/// A quantum observable: a Hermitian matrix with a unit tag.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianOperator {
    matrix: CMatrix,
    units: Units,
}

impl HermitianOperator {
    /// Accepts `matrix` if `‖M − M†‖_max ≤ 1e−12·‖M‖_max`; stores `(M + M†)/2`.
    pub fn new(matrix: CMatrix) -> Result<Self> {
        check_square(&matrix)?;
        if matrix.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite);
        }
        let scale = max_abs(&matrix);
        let residual = hermiticity_residual(&matrix);
        if residual > HERMITICITY_TOL * scale {
            return Err(Error::NotHermitian {
                residual: if scale > 0.0 { residual / scale } else { residual },
            });
        }
        Ok(Self::from_hermitian(matrix))
    }

    /// For results that are Hermitian in exact arithmetic (brackets of
    /// Hermitian operators, spectral functions). Rounding noise is removed.
    pub(crate) fn from_hermitian(matrix: CMatrix) -> Self {
        Self {
            matrix: hermitian_part(&matrix),
            units: Units::Dimensionless,
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_hermitian(CMatrix::identity(dim, dim))
    }

    pub fn zeros(dim: usize) -> Self {
        Self::from_hermitian(CMatrix::zeros(dim, dim))
    }

    pub fn diagonal(values: &[f64]) -> Self {
        let d = DVector::from_iterator(values.len(), values.iter().map(|&v| re(v)));
        Self::from_hermitian(CMatrix::from_diagonal(&d))
    }

    pub fn with_units(mut self, units: Units) -> Self {
        self.units = units;
        self
    }

    pub fn units(&self) -> Units {
        self.units
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn max_norm(&self) -> f64 {
        max_abs(&self.matrix)
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            matrix: &self.matrix * re(s),
            units: self.units,
        }
    }

    /// Operator product symmetrized to stay Hermitian: `(AB + BA)/2`.
    pub fn symmetric_product(&self, other: &Self) -> Result<Self> {
        let ac = anticommutator(&self.matrix, &other.matrix)?;
        Ok(Self::from_hermitian(ac * re(0.5)))
    }

    /// `A^k` for a non-negative integer power.
    pub fn powi(&self, k: u32) -> Self {
        let mut out = CMatrix::identity(self.dim(), self.dim());
        for _ in 0..k {
            out = &out * &self.matrix;
        }
        Self::from_hermitian(out).with_units(self.units)
    }
}

impl Add for &HermitianOperator {
    type Output = HermitianOperator;
    fn add(self, rhs: Self) -> HermitianOperator {
        HermitianOperator {
            matrix: &self.matrix + &rhs.matrix,
            units: self.units,
        }
    }
}

impl Sub for &HermitianOperator {
    type Output = HermitianOperator;
    fn sub(self, rhs: Self) -> HermitianOperator {
        HermitianOperator {
            matrix: &self.matrix - &rhs.matrix,
            units: self.units,
        }
    }
}

impl Mul<f64> for &HermitianOperator {
    type Output = HermitianOperator;
    fn mul(self, rhs: f64) -> HermitianOperator {
        self.scaled(rhs)
    }
}

impl Neg for &HermitianOperator {
    type Output = HermitianOperator;
    fn neg(self) -> HermitianOperator {
        self.scaled(-1.0)
    }
}

/// Spectral decomposition `M = U diag(λ) U†` with ascending eigenvalues.
///
/// Each eigenvector column is rotated so its first component with modulus
/// above 1e−10 is real and positive.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenDecomposition {
    eigenvalues: Vec<f64>,
    eigenvectors: CMatrix,
}

impl EigenDecomposition {
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &CMatrix {
        &self.eigenvectors
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eigenvalues[self.dim() - 1]
    }

    /// `U f(Λ) U†`.
    pub fn map<F: Fn(f64) -> f64>(&self, f: F) -> CMatrix {
        let u = &self.eigenvectors;
        let mut scaled = u.clone();
        for (j, &lambda) in self.eigenvalues.iter().enumerate() {
            let fj = re(f(lambda));
            scaled.column_mut(j).iter_mut().for_each(|z| *z *= fj);
        }
        hermitian_part(&(scaled * u.adjoint()))
    }

    pub fn reconstruct(&self) -> CMatrix {
        self.map(|x| x)
    }

    /// `U† A U`.
    pub fn to_eigenbasis(&self, a: &CMatrix) -> CMatrix {
        self.eigenvectors.adjoint() * a * &self.eigenvectors
    }

    /// `U A U†`.
    pub fn from_eigenbasis(&self, a: &CMatrix) -> CMatrix {
        &self.eigenvectors * a * self.eigenvectors.adjoint()
    }

    /// Same eigenvectors, eigenvalues replaced (must stay ascending).
    pub(crate) fn with_eigenvalues(&self, eigenvalues: Vec<f64>) -> Self {
        debug_assert!(eigenvalues.windows(2).all(|w| w[0] <= w[1]));
        Self {
            eigenvalues,
            eigenvectors: self.eigenvectors.clone(),
        }
    }
}

/// Hermitian eigendecomposition of an observable.
pub fn eigh(m: &HermitianOperator) -> Result<EigenDecomposition> {
    eigh_matrix(m.matrix())
}

pub(crate) fn eigh_matrix(m: &CMatrix) -> Result<EigenDecomposition> {
    let n = m.nrows();
    let raw = SymmetricEigen::try_new(m.clone(), f64::EPSILON, 10_000)
        .ok_or(Error::EigenNonConvergence)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| raw.eigenvalues[a].total_cmp(&raw.eigenvalues[b]));

    let mut eigenvectors = CMatrix::zeros(n, n);
    let mut eigenvalues = Vec::with_capacity(n);
    for (j, &k) in order.iter().enumerate() {
        eigenvalues.push(raw.eigenvalues[k]);
        let col = raw.eigenvectors.column(k);
        let phase = col
            .iter()
            .find(|z| z.norm() > 1e-10)
            .map(|z| z.conj() / z.norm())
            .unwrap_or(re(1.0));
        for i in 0..n {
            eigenvectors[(i, j)] = col[i] * phase;
        }
    }
    if eigenvalues.iter().any(|x| !x.is_finite()) {
        return Err(Error::EigenNonConvergence);
    }
    Ok(EigenDecomposition {
        eigenvalues,
        eigenvectors,
    })
}

/// A Hermitian, unit-trace, positive semidefinite matrix with its spectrum.
///
/// The spectrum is computed once at construction (positivity must be checked
/// anyway) and shared by every spectral function applied to the state.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    op: HermitianOperator,
    spectrum: EigenDecomposition,
}

impl DensityMatrix {
    pub fn new(matrix: CMatrix) -> Result<Self> {
        let op = HermitianOperator::new(matrix)?;
        Self::from_operator(op)
    }

    pub fn from_operator(op: HermitianOperator) -> Result<Self> {
        let trace = op.matrix().trace();
        if (trace.re - 1.0).abs() > TRACE_TOL || trace.im.abs() > TRACE_TOL {
            return Err(Error::TraceNotUnit { trace: trace.re });
        }
        let spectrum = eigh(&op)?;
        if spectrum.min_eigenvalue() < -EIGENVALUE_TOL {
            return Err(Error::PositivityViolation {
                min_eigenvalue: spectrum.min_eigenvalue(),
                floor: 0.0,
            });
        }
        Ok(Self {
            op: op.with_units(Units::Dimensionless),
            spectrum,
        })
    }

    /// Builds `U diag(p) U†` and keeps the given spectrum.
    pub(crate) fn from_spectrum(spectrum: EigenDecomposition) -> Self {
        let op = HermitianOperator::from_hermitian(spectrum.reconstruct());
        Self { op, spectrum }
    }

    /// Pairs an exactly-Hermitian matrix with its already computed spectrum.
    pub(crate) fn from_parts(matrix: CMatrix, spectrum: EigenDecomposition) -> Self {
        Self {
            op: HermitianOperator::from_hermitian(matrix),
            spectrum,
        }
    }

    /// Diagonal density matrix in the computational basis.
    pub fn from_populations(populations: &[f64]) -> Result<Self> {
        Self::new(HermitianOperator::diagonal(populations).into_matrix())
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        let p = 1.0 / dim as f64;
        Self::from_populations(&vec![p; dim]).expect("I/d is a valid state")
    }

    /// `|ψ⟩⟨ψ|/⟨ψ|ψ⟩`.
    pub fn pure(psi: &DVector<C64>) -> Result<Self> {
        let norm2: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
        if !(norm2 > 0.0 && norm2.is_finite()) {
            return Err(Error::invalid("psi", "state vector must be nonzero and finite"));
        }
        let m = psi * psi.adjoint() * re(1.0 / norm2);
        Self::new(hermitian_part(&m))
    }

    pub fn dim(&self) -> usize {
        self.op.dim()
    }

    pub fn matrix(&self) -> &CMatrix {
        self.op.matrix()
    }

    pub fn as_operator(&self) -> &HermitianOperator {
        &self.op
    }

    pub fn spectrum(&self) -> &EigenDecomposition {
        &self.spectrum
    }

    pub fn eigenvalues(&self) -> &[f64] {
        self.spectrum.eigenvalues()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.spectrum.min_eigenvalue()
    }

    /// `(1 − ε)ρ + (ε/d)I`.
    pub fn mixed_with_identity(&self, epsilon: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&epsilon) {
            return Err(Error::invalid("epsilon", format!("must lie in [0, 1], got {epsilon}")));
        }
        let shift = epsilon / self.dim() as f64;
        let eigenvalues = self
            .eigenvalues()
            .iter()
            .map(|p| (1.0 - epsilon) * p + shift)
            .collect();
        Ok(Self::from_spectrum(self.spectrum.with_eigenvalues(eigenvalues)))
    }

    /// `−k_B Σ p ln p`, with `0 ln 0 = 0`.
    pub fn von_neumann_entropy(&self, c: &PhysicalConstants) -> f64 {
        -c.k_b()
            * self
                .eigenvalues()
                .iter()
                .filter(|&&p| p > 0.0)
                .map(|p| p * p.ln())
                .sum::<f64>()
    }

    /// `½‖ρ − σ‖₁`.
    pub fn trace_distance(&self, other: &DensityMatrix) -> Result<f64> {
        check_same_dim(self.matrix(), other.matrix())?;
        let diff = HermitianOperator::from_hermitian(self.matrix() - other.matrix());
        let eig = eigh(&diff)?;
        Ok(0.5 * eig.eigenvalues().iter().map(|x| x.abs()).sum::<f64>())
    }
}

/// `AB − BA`.
pub fn commutator(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    check_same_dim(a, b)?;
    Ok(a * b - b * a)
}

/// `AB + BA`.
pub fn anticommutator(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    check_same_dim(a, b)?;
    Ok(a * b + b * a)
}

/// `(1/iħ)[A, B]` without dimension checks.
pub(crate) fn bracket(a: &CMatrix, b: &CMatrix, hbar: f64) -> CMatrix {
    (a * b - b * a) * C64::new(0.0, -1.0 / hbar)
}

/// Quantum Poisson bracket `{A, B} = (1/iħ)[A, B]`.
pub fn quantum_poisson(
    a: &HermitianOperator,
    b: &HermitianOperator,
    c: &PhysicalConstants,
) -> Result<HermitianOperator> {
    check_same_dim(a.matrix(), b.matrix())?;
    Ok(HermitianOperator::from_hermitian(bracket(
        a.matrix(),
        b.matrix(),
        c.hbar(),
    )))
}

/// `⟨A⟩ = tr(Aρ)`.
pub fn average(a: &HermitianOperator, rho: &DensityMatrix) -> Result<f64> {
    check_same_dim(a.matrix(), rho.matrix())?;
    let t = trace_product(a.matrix(), rho.matrix());
    if t.im.abs() > HERMITICITY_TOL * a.max_norm().max(1.0) {
        return Err(Error::ImaginaryResidue { residue: t.im });
    }
    Ok(t.re)
}

/// Entropy operator `S = −k_B ln ρ`.
pub fn entropy_operator(rho: &DensityMatrix, c: &PhysicalConstants) -> Result<HermitianOperator> {
    let min = rho.min_eigenvalue();
    if min <= 0.0 {
        return Err(Error::PositivityViolation {
            min_eigenvalue: min,
            floor: 0.0,
        });
    }
    let k_b = c.k_b();
    Ok(HermitianOperator::from_hermitian(rho.spectrum().map(|p| -k_b * p.ln()))
        .with_units(Units::Entropy))
}
