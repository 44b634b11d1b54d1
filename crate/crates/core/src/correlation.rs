//! Canonical (Kubo–Mori) correlation and the mollified product `A_ρ`.
//!
//! `A_ρ = ∫₀¹ ρ^λ A ρ^{1−λ} dλ` is evaluated spectrally: in the eigenbasis of
//! ρ the λ-integral of `p_n^λ p_m^{1−λ}` is the logarithmic mean
//! `L(p_n, p_m) = (p_n − p_m)/(ln p_n − ln p_m)`, so `A_ρ` is the Hadamard
//! product of `A` (rotated into that basis) with the matrix of log-means.
//! The same weights give `⟪A;B⟫ = tr(A_ρ B)` without forming `A_ρ`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::operator::{
    bracket, max_abs, re, trace_product, CMatrix, DensityMatrix, EigenDecomposition,
    HermitianOperator, PhysicalConstants,
};

/// Smallest eigenvalue of ρ accepted by operations that take `ln ρ`.
pub const DEFAULT_P_FLOOR: f64 = 1e-12;

/// Configuration of the logarithmic-mean kernel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogMeanKernel {
    rel_tol_equal: f64,
    p_floor: f64,
}

impl Default for LogMeanKernel {
    fn default() -> Self {
        Self {
            rel_tol_equal: 1e-8,
            p_floor: DEFAULT_P_FLOOR,
        }
    }
}

impl LogMeanKernel {
    /// `rel_tol_equal` must lie in (0, 1e−4].
    pub fn new(rel_tol_equal: f64) -> Result<Self> {
        if !(rel_tol_equal > 0.0 && rel_tol_equal <= 1e-4) {
            return Err(Error::invalid(
                "rel_tol_equal",
                format!("must lie in (0, 1e-4], got {rel_tol_equal}"),
            ));
        }
        Ok(Self {
            rel_tol_equal,
            ..Self::default()
        })
    }

    pub fn with_p_floor(self, p_floor: f64) -> Result<Self> {
        if !(p_floor > 0.0 && p_floor < 1.0) {
            return Err(Error::invalid(
                "p_floor",
                format!("must lie in (0, 1), got {p_floor}"),
            ));
        }
        Ok(Self { p_floor, ..self })
    }

    pub fn rel_tol_equal(&self) -> f64 {
        self.rel_tol_equal
    }

    pub fn p_floor(&self) -> f64 {
        self.p_floor
    }

    /// Kernel value for positive arguments.
    fn weight(&self, p: f64, q: f64) -> f64 {
        let diff = p - q;
        if diff.abs() <= self.rel_tol_equal * p.max(q) {
            return 0.5 * (p + q);
        }
        // ln p − ln q = ln(1 + (p − q)/q) keeps full relative precision for close arguments
        diff / (diff / q).ln_1p()
    }

    fn check_floor(&self, spectrum: &EigenDecomposition) -> Result<()> {
        let min = spectrum.min_eigenvalue();
        if !above_floor(spectrum, self.p_floor) {
            return Err(Error::PositivityViolation {
                min_eigenvalue: min,
                floor: self.p_floor,
            });
        }
        Ok(())
    }
}

/// Whether the spectrum clears `p_floor`. States projected onto the floor
/// come back a rounding error below it, so a few ulps of `λ_max` are allowed.
pub(crate) fn above_floor(spectrum: &EigenDecomposition, p_floor: f64) -> bool {
    let min = spectrum.min_eigenvalue();
    let slack = 64.0 * f64::EPSILON * spectrum.max_eigenvalue().abs().max(1.0);
    min > 0.0 && min >= p_floor - slack
}

/// Logarithmic mean `(p − q)/(ln p − ln q)`, equal to `p` when `p = q`.
pub fn log_mean(p: f64, q: f64, kernel: &LogMeanKernel) -> Result<f64> {
    if !(p > 0.0 && p.is_finite()) {
        return Err(Error::invalid("p", format!("must be positive, got {p}")));
    }
    if !(q > 0.0 && q.is_finite()) {
        return Err(Error::invalid("q", format!("must be positive, got {q}")));
    }
    Ok(kernel.weight(p, q))
}

/// Everything derived from one eigendecomposition of ρ: log-mean weights,
/// `ln ρ`, mollified products and canonical correlations.
#[derive(Debug, Clone)]
pub struct SpectralContext<'a> {
    spectrum: &'a EigenDecomposition,
    weights: DMatrix<f64>,
}

impl<'a> SpectralContext<'a> {
    pub fn new(rho: &'a DensityMatrix, kernel: &LogMeanKernel) -> Result<Self> {
        Self::from_spectrum(rho.spectrum(), kernel)
    }

    pub(crate) fn from_spectrum(
        spectrum: &'a EigenDecomposition,
        kernel: &LogMeanKernel,
    ) -> Result<Self> {
        kernel.check_floor(spectrum)?;
        let p = spectrum.eigenvalues();
        let n = p.len();
        let weights = DMatrix::from_fn(n, n, |i, j| kernel.weight(p[i], p[j]));
        Ok(Self { spectrum, weights })
    }

    pub fn spectrum(&self) -> &EigenDecomposition {
        self.spectrum
    }

    /// `A_ρ` for an arbitrary (Hermitian) matrix.
    pub fn mollify(&self, a: &CMatrix) -> CMatrix {
        let mut t = self.spectrum.to_eigenbasis(a);
        t.zip_apply(&self.weights, |z, w| *z *= w);
        crate::operator::hermitian_part(&self.spectrum.from_eigenbasis(&t))
    }

    /// `⟪A;B⟫ = tr(A_ρ B)`.
    pub fn correlation(&self, a: &CMatrix, b: &CMatrix) -> f64 {
        let ta = self.spectrum.to_eigenbasis(a);
        let tb = self.spectrum.to_eigenbasis(b);
        let n = ta.nrows();
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                acc += self.weights[(i, j)] * (ta[(i, j)] * tb[(j, i)]).re;
            }
        }
        acc
    }

    /// `⟪A;A⟫ = Σ L(p_n, p_m)|A_nm|²`, non-negative by construction.
    pub fn quadratic(&self, a: &CMatrix) -> f64 {
        let ta = self.spectrum.to_eigenbasis(a);
        ta.iter()
            .zip(self.weights.iter())
            .map(|(z, w)| w * z.norm_sqr())
            .sum()
    }

    /// `ln ρ`.
    pub fn log_rho(&self) -> CMatrix {
        self.spectrum.map(f64::ln)
    }

    pub fn max_abs_log(&self) -> f64 {
        self.spectrum
            .eigenvalues()
            .iter()
            .map(|p| p.ln().abs())
            .fold(0.0, f64::max)
    }
}

fn check_dims(a: &HermitianOperator, rho: &DensityMatrix) -> Result<()> {
    if a.dim() != rho.dim() {
        return Err(Error::DimensionMismatch {
            expected: rho.dim(),
            found: a.dim(),
        });
    }
    Ok(())
}

/// Mollified product `A_ρ = ∫₀¹ ρ^λ A ρ^{1−λ} dλ`.
pub fn mollified_product(
    a: &HermitianOperator,
    rho: &DensityMatrix,
    kernel: &LogMeanKernel,
) -> Result<HermitianOperator> {
    check_dims(a, rho)?;
    let ctx = SpectralContext::new(rho, kernel)?;
    Ok(HermitianOperator::from_hermitian(ctx.mollify(a.matrix())))
}

/// Canonical correlation `⟪A;B⟫ = tr(A_ρ B)`.
pub fn canonical_correlation(
    a: &HermitianOperator,
    b: &HermitianOperator,
    rho: &DensityMatrix,
    kernel: &LogMeanKernel,
) -> Result<f64> {
    check_dims(a, rho)?;
    check_dims(b, rho)?;
    let ctx = SpectralContext::new(rho, kernel)?;
    Ok(ctx.correlation(a.matrix(), b.matrix()))
}

/// `‖{ln ρ, A_ρ} − {ρ, A}‖_max`; zero in exact arithmetic.
pub fn verify_ln_lemma(
    a: &HermitianOperator,
    rho: &DensityMatrix,
    kernel: &LogMeanKernel,
    c: &PhysicalConstants,
) -> Result<f64> {
    check_dims(a, rho)?;
    let ctx = SpectralContext::new(rho, kernel)?;
    let a_rho = ctx.mollify(a.matrix());
    let lhs = bracket(&ctx.log_rho(), &a_rho, c.hbar());
    let rhs = bracket(rho.matrix(), a.matrix(), c.hbar());
    Ok(max_abs(&(lhs - rhs)))
}

/// Both sides of `−⟪{A,Q};{ln ρ,Q}⟫ = ⟨{Q,{Q,A}}⟩` and their discrepancy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentityResidual {
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
    /// `‖A‖‖Q‖²/ħ² · max(1, max|ln p|)`, the natural magnitude of either side.
    pub scale: f64,
}

impl IdentityResidual {
    pub fn relative(&self) -> f64 {
        if self.scale > 0.0 {
            self.residual / self.scale
        } else {
            self.residual
        }
    }
}

/// Evaluates the double-commutator identity through two independent paths:
/// the canonical correlation with `ln ρ` on the left, a plain trace of the
/// nested brackets on the right.
pub fn verify_double_commutator_identity(
    a: &HermitianOperator,
    q: &HermitianOperator,
    rho: &DensityMatrix,
    kernel: &LogMeanKernel,
    c: &PhysicalConstants,
) -> Result<IdentityResidual> {
    check_dims(a, rho)?;
    check_dims(q, rho)?;
    let hbar = c.hbar();
    let ctx = SpectralContext::new(rho, kernel)?;
    let aq = bracket(a.matrix(), q.matrix(), hbar);
    let lq = bracket(&ctx.log_rho(), q.matrix(), hbar);
    let lhs = -ctx.correlation(&aq, &lq);
    let nested = bracket(q.matrix(), &bracket(q.matrix(), a.matrix(), hbar), hbar);
    let rhs = trace_product(&nested, rho.matrix()).re;
    let scale = a.max_norm() * q.max_norm().powi(2) / (hbar * hbar) * ctx.max_abs_log().max(1.0);
    Ok(IdentityResidual {
        lhs,
        rhs,
        residual: (lhs - rhs).abs(),
        scale,
    })
}

/// `A ∘ ρ` linearization of the mollifier: `{A, ρ}₊/2`.
pub(crate) fn arithmetic_mollify(a: &CMatrix, rho: &CMatrix) -> CMatrix {
    (a * rho + rho * a) * re(0.5)
}
