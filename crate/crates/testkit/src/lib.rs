//! Test-only oracles and random ensembles.
//!
//! Nothing in here calls into `dqm-core`: every routine is an independent
//! route to the quantity it checks (λ-quadrature instead of the log-mean
//! kernel, closed-form ODE solutions, Lindblad generators assembled from
//! jump operators by Kronecker products).

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Pauli matrices σ₁, σ₂, σ₃ with σ₃ = diag(1, −1).
pub fn pauli() -> [CMatrix; 3] {
    let z = c(0.0, 0.0);
    let one = c(1.0, 0.0);
    let i = c(0.0, 1.0);
    [
        CMatrix::from_row_slice(2, 2, &[z, one, one, z]),
        CMatrix::from_row_slice(2, 2, &[z, -i, i, z]),
        CMatrix::from_row_slice(2, 2, &[one, z, z, -one]),
    ]
}

/// Hermitian matrix with entries uniform in the complex square of half-width `scale`.
pub fn random_hermitian<R: Rng>(rng: &mut R, dim: usize, scale: f64) -> CMatrix {
    let mut m = CMatrix::zeros(dim, dim);
    for i in 0..dim {
        m[(i, i)] = c(rng.random_range(-scale..scale), 0.0);
        for j in (i + 1)..dim {
            let z = c(rng.random_range(-scale..scale), rng.random_range(-scale..scale));
            m[(i, j)] = z;
            m[(j, i)] = z.conj();
        }
    }
    m
}

/// Haar-ish random unitary from the QR factorization of a random complex matrix.
pub fn random_unitary<R: Rng>(rng: &mut R, dim: usize) -> CMatrix {
    let g = CMatrix::from_fn(dim, dim, |_, _| {
        c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    });
    g.qr().q()
}

/// Random full-rank density matrix with every eigenvalue at least `min_eig`.
pub fn random_density<R: Rng>(rng: &mut R, dim: usize, min_eig: f64) -> CMatrix {
    assert!(min_eig * (dim as f64) < 1.0);
    let raw: Vec<f64> = (0..dim).map(|_| rng.random_range(0.0..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let free = 1.0 - min_eig * dim as f64;
    let pops: Vec<f64> = raw.iter().map(|r| min_eig + free * r / total).collect();
    let u = random_unitary(rng, dim);
    let d = CMatrix::from_diagonal(&DVector::from_iterator(
        dim,
        pops.iter().map(|&p| c(p, 0.0)),
    ));
    let rho = &u * d * u.adjoint();
    (&rho + rho.adjoint()) * c(0.5, 0.0)
}

/// Nodes and weights of the n-point Gauss–Legendre rule mapped to [0, 1].
///
/// Roots found by Newton iteration on P_n from the Chebyshev initial guess.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for k in 0..n {
        let mut x = (std::f64::consts::PI * (k as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for j in 2..=n {
                let p2 = ((2 * j - 1) as f64 * x * p1 - (j - 1) as f64 * p0) / j as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[k] = 0.5 * (1.0 - x);
        weights[k] = 1.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

/// ρ^λ for a positive definite Hermitian ρ.
pub fn hermitian_power(rho: &CMatrix, lambda: f64) -> CMatrix {
    let eig = SymmetricEigen::new(rho.clone());
    let d = CMatrix::from_diagonal(&DVector::from_iterator(
        rho.nrows(),
        eig.eigenvalues.iter().map(|&p| c(p.powf(lambda), 0.0)),
    ));
    &eig.eigenvectors * d * eig.eigenvectors.adjoint()
}

/// ∫₀¹ ρ^λ A ρ^{1−λ} dλ by Gauss–Legendre quadrature with `nodes` points.
pub fn quadrature_mollifier(a: &CMatrix, rho: &CMatrix, nodes: usize) -> CMatrix {
    let (x, w) = gauss_legendre(nodes);
    let mut acc = CMatrix::zeros(a.nrows(), a.ncols());
    for (lambda, weight) in x.iter().zip(&w) {
        let left = hermitian_power(rho, *lambda);
        let right = hermitian_power(rho, 1.0 - lambda);
        acc += (left * a * right) * c(*weight, 0.0);
    }
    acc
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Closed-form solution of q' = p/m, p' = −mΩ²q − (ζ/m)p (underdamped or not).
pub fn damped_oscillator(
    q0: f64,
    p0: f64,
    mass: f64,
    omega: f64,
    zeta: f64,
    t: f64,
) -> (f64, f64) {
    // q'' + 2β q' + Ω² q = 0 with 2β = ζ/m
    let beta = zeta / (2.0 * mass);
    let v0 = p0 / mass;
    let disc = omega * omega - beta * beta;
    let (q, v) = if disc > 0.0 {
        let wd = disc.sqrt();
        let a = q0;
        let b = (v0 + beta * q0) / wd;
        let e = (-beta * t).exp();
        let (s, co) = (wd * t).sin_cos();
        let q = e * (a * co + b * s);
        let v = e * (-beta * (a * co + b * s) + wd * (-a * s + b * co));
        (q, v)
    } else if disc < 0.0 {
        let r = (-disc).sqrt();
        let (r1, r2) = (-beta + r, -beta - r);
        let a2 = (v0 - r1 * q0) / (r2 - r1);
        let a1 = q0 - a2;
        let q = a1 * (r1 * t).exp() + a2 * (r2 * t).exp();
        let v = a1 * r1 * (r1 * t).exp() + a2 * r2 * (r2 * t).exp();
        (q, v)
    } else {
        let b = v0 + beta * q0;
        let e = (-beta * t).exp();
        (e * (q0 + b * t), e * (b - beta * (q0 + b * t)))
    };
    (q, mass * v)
}

fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    CMatrix::from_fn(ar * br, ac * bc, |i, j| a[(i / br, j / bc)] * b[(i % br, j % bc)])
}

/// Lindblad generator acting on column-stacked density matrices:
/// vec(−(i/ħ)[H, ρ] + Σ_k γ_k (L_k ρ L_k† − ½{L_k†L_k, ρ})).
pub fn lindblad_generator(h: &CMatrix, hbar: f64, jumps: &[(f64, CMatrix)]) -> CMatrix {
    let d = h.nrows();
    let id = CMatrix::identity(d, d);
    let mi = c(0.0, -1.0 / hbar);
    let mut gen = (kron(&id, h) - kron(&h.transpose(), &id)) * mi;
    for (rate, l) in jumps {
        let ldl = l.adjoint() * l;
        let term = kron(&l.conjugate(), l)
            - kron(&id, &ldl) * c(0.5, 0.0)
            - kron(&ldl.transpose(), &id) * c(0.5, 0.0);
        gen += term * c(*rate, 0.0);
    }
    gen
}

/// Quantum-optical two-level generator for H = ½ħωσ₃ with emission rate
/// `down` along σ₋ = |g⟩⟨e| and absorption rate `up` along σ₊.
///
/// Basis order is (e, g), matching σ₃ = diag(1, −1).
pub fn two_level_optical_generator(omega: f64, hbar: f64, down: f64, up: f64) -> CMatrix {
    let [_, _, s3] = pauli();
    let h = s3 * c(0.5 * hbar * omega, 0.0);
    let mut lower = CMatrix::zeros(2, 2);
    lower[(1, 0)] = c(1.0, 0.0);
    let raise = lower.adjoint();
    lindblad_generator(&h, hbar, &[(down, lower), (up, raise)])
}

/// Column-stacking vec.
pub fn vec_col(m: &CMatrix) -> DVector<C64> {
    DVector::from_column_slice(m.as_slice())
}
