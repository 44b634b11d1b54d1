//! Prebuilt systems: a particle in a polynomial potential represented in a
//! truncated harmonic-oscillator basis, and the thermally relaxing two-level
//! atom.

use nalgebra::DVector;

use crate::dynamics::SystemSpec;
use crate::environment::{BathModel, CouplingChannel};
use crate::error::{Error, Result};
use crate::operator::{
    eigh, re, CMatrix, DensityMatrix, HermitianOperator, PhysicalConstants, Units, C64,
};

/// Pauli matrices σ₁, σ₂, σ₃ with σ₃ = diag(1, −1) (excited state first).
pub fn pauli() -> [HermitianOperator; 3] {
    let z = re(0.0);
    let one = re(1.0);
    let i = C64::new(0.0, 1.0);
    [
        CMatrix::from_row_slice(2, 2, &[z, one, one, z]),
        CMatrix::from_row_slice(2, 2, &[z, -i, i, z]),
        CMatrix::from_row_slice(2, 2, &[one, z, z, -one]),
    ]
    .map(HermitianOperator::from_hermitian)
}

/// `exp(−H/(k_B T))/Z`, built in the eigenbasis of `H`.
///
/// Energies are measured from the ground state before exponentiating, so the
/// largest Boltzmann factor is exactly 1.
pub fn gibbs_state(
    h: &HermitianOperator,
    temperature: f64,
    c: &PhysicalConstants,
) -> Result<DensityMatrix> {
    if !(temperature > 0.0 && temperature.is_finite()) {
        return Err(Error::invalid(
            "temperature",
            format!("must be positive, got {temperature}"),
        ));
    }
    let spectrum = eigh(h)?;
    let e0 = spectrum.min_eigenvalue();
    let beta = 1.0 / (c.k_b() * temperature);
    let z: f64 = spectrum
        .eigenvalues()
        .iter()
        .map(|e| (-(e - e0) * beta).exp())
        .sum();
    DensityMatrix::new(spectrum.map(|e| (-(e - e0) * beta).exp() / z))
}

/// Polynomial potential `V(Q) = Σ_k c_k Q^k`, degree at most 4.
#[derive(Debug, Clone, PartialEq)]
pub struct Potential {
    coefficients: Vec<f64>,
}

impl Potential {
    pub fn new(coefficients: Vec<f64>) -> Result<Self> {
        if coefficients.len() > 5 {
            return Err(Error::invalid(
                "potential",
                format!("degree at most 4 supported, got {} coefficients", coefficients.len()),
            ));
        }
        if coefficients.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid("potential", "non-finite coefficient"));
        }
        Ok(Self { coefficients })
    }

    pub fn free() -> Self {
        Self {
            coefficients: Vec::new(),
        }
    }

    /// `½ m Ω² Q²`.
    pub fn harmonic(mass: f64, omega: f64) -> Self {
        Self {
            coefficients: vec![0.0, 0.0, 0.5 * mass * omega * omega],
        }
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn derivative(&self) -> Self {
        Self {
            coefficients: self
                .coefficients
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, c)| k as f64 * c)
                .collect(),
        }
    }

    pub fn eval_operator(&self, q: &HermitianOperator) -> HermitianOperator {
        let mut out = HermitianOperator::zeros(q.dim());
        for (k, &c) in self.coefficients.iter().enumerate() {
            if c != 0.0 {
                out = &out + &q.powi(k as u32).scaled(c);
            }
        }
        out.with_units(Units::Energy)
    }
}

/// Particle of mass `m` in one dimension, truncated to `N` oscillator levels.
#[derive(Debug, Clone)]
pub struct ParticleModel {
    mass: f64,
    basis_omega: f64,
    potential: Potential,
    constants: PhysicalConstants,
    q: HermitianOperator,
    p: HermitianOperator,
    h: HermitianOperator,
}

/// Builds `Q`, `P` from ladder operators of an oscillator with frequency
/// `basis_omega`, and `H = P²/(2m) + V(Q)`.
///
/// `H` is assembled on `basis_dim + 2` levels and then truncated, so that with
/// a matching basis frequency the harmonic Hamiltonian is exactly diagonal.
///
/// `{Q, P} = 1` holds on every level except the top one.
pub fn build_particle(
    mass: f64,
    potential: Potential,
    basis_dim: usize,
    basis_omega: f64,
    constants: PhysicalConstants,
) -> Result<ParticleModel> {
    if basis_dim < 4 {
        return Err(Error::invalid(
            "basis_dim",
            format!("need at least 4 levels, got {basis_dim}"),
        ));
    }
    if !(mass > 0.0 && mass.is_finite()) {
        return Err(Error::invalid("mass", format!("must be positive, got {mass}")));
    }
    if !(basis_omega > 0.0 && basis_omega.is_finite()) {
        return Err(Error::invalid(
            "basis_omega",
            format!("must be positive, got {basis_omega}"),
        ));
    }
    let hbar = constants.hbar();
    // two spare levels: P² and Q⁴ then have exact elements on every kept level
    let big = basis_dim + 2;
    let mut lower = CMatrix::zeros(big, big);
    for n in 1..big {
        lower[(n - 1, n)] = re((n as f64).sqrt());
    }
    let raise = lower.adjoint();
    let x0 = (hbar / (mass * basis_omega)).sqrt();
    let q_big = HermitianOperator::new((&lower + &raise) * re(x0 / 2f64.sqrt()))?;
    let p_big = HermitianOperator::new((&raise - &lower) * C64::new(0.0, hbar / (x0 * 2f64.sqrt())))?;
    let h_big = &p_big.powi(2).scaled(0.5 / mass) + &potential.eval_operator(&q_big);
    let keep = |op: &HermitianOperator| {
        HermitianOperator::new(op.matrix().view((0, 0), (basis_dim, basis_dim)).into_owned())
    };
    let q = keep(&q_big)?.with_units(Units::Length);
    let p = keep(&p_big)?.with_units(Units::Momentum);
    let h = keep(&h_big)?.with_units(Units::Energy);
    Ok(ParticleModel {
        mass,
        basis_omega,
        potential,
        constants,
        q,
        p,
        h,
    })
}

/// Caldeira–Leggett dictionary: friction `ζ = 2γm` for damping rate `γ`.
pub fn caldeira_leggett_friction(gamma: f64, mass: f64) -> f64 {
    2.0 * gamma * mass
}

impl ParticleModel {
    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn basis_omega(&self) -> f64 {
        self.basis_omega
    }

    pub fn basis_dim(&self) -> usize {
        self.h.dim()
    }

    pub fn potential(&self) -> &Potential {
        &self.potential
    }

    pub fn constants(&self) -> &PhysicalConstants {
        &self.constants
    }

    pub fn q(&self) -> &HermitianOperator {
        &self.q
    }

    pub fn p(&self) -> &HermitianOperator {
        &self.p
    }

    pub fn hamiltonian(&self) -> &HermitianOperator {
        &self.h
    }

    /// `V′(Q)`.
    pub fn force_operator(&self) -> HermitianOperator {
        self.potential.derivative().eval_operator(&self.q)
    }

    /// `{Q, P}`, the identity except at the truncation edge.
    pub fn canonical_bracket(&self) -> HermitianOperator {
        crate::operator::quantum_poisson(&self.q, &self.p, &self.constants)
            .expect("Q and P share a dimension")
    }

    /// Position coupling: friction acts on the momentum only.
    pub fn channel(&self, zeta: f64) -> Result<CouplingChannel> {
        Ok(CouplingChannel::new(self.q.clone(), zeta)?.with_label("Q"))
    }

    pub fn system_spec(&self, zeta: f64, bath: BathModel) -> Result<SystemSpec> {
        SystemSpec::new(self.h.clone(), vec![self.channel(zeta)?], bath, self.constants)
    }

    /// Named moment operators: `Q`, `P`, `QQ`, `PP`, `PQ+QP`, `H`.
    pub fn observable(&self, name: &str) -> Option<HermitianOperator> {
        Some(match name {
            "Q" => self.q.clone(),
            "P" => self.p.clone(),
            "QQ" => self.q.powi(2),
            "PP" => self.p.powi(2),
            "PQ+QP" => self.q.symmetric_product(&self.p).ok()?.scaled(2.0),
            "H" => self.h.clone(),
            _ => return None,
        })
    }

    /// `D ρ D†` with `D = exp(−(i/ħ)(q₀P − p₀Q))`, shifting ⟨Q⟩ by `q0` and
    /// ⟨P⟩ by `p0` for states away from the truncation edge.
    pub fn displaced(&self, rho: &DensityMatrix, q0: f64, p0: f64) -> Result<DensityMatrix> {
        let gen = &self.p.scaled(q0) - &self.q.scaled(p0);
        let spec = eigh(&gen)?;
        let hbar = self.constants.hbar();
        let u = spec.eigenvectors();
        let phases = DVector::from_iterator(
            spec.dim(),
            spec.eigenvalues()
                .iter()
                .map(|l| C64::from_polar(1.0, -l / hbar)),
        );
        let d = u * CMatrix::from_diagonal(&phases) * u.adjoint();
        let out = &d * rho.matrix() * d.adjoint();
        DensityMatrix::new(crate::operator::hermitian_part(&out))
    }
}

/// Two-level atom `H = ½ħωσ₃` relaxing through couplings σ₁ and σ₂.
#[derive(Debug, Clone)]
pub struct TwoLevelModel {
    omega: f64,
    gamma0: f64,
    temperature: f64,
    constants: PhysicalConstants,
    h: HermitianOperator,
    channels: Vec<CouplingChannel>,
}

/// Both channels share `ζ = ħγ₀/(4ω)`, so that `ℰ_HH = T_e ħγ₀/(4ω)`.
pub fn build_two_level(
    omega: f64,
    gamma0: f64,
    temperature: f64,
    constants: PhysicalConstants,
) -> Result<TwoLevelModel> {
    if !(omega > 0.0 && omega.is_finite()) {
        return Err(Error::invalid("omega", format!("must be positive, got {omega}")));
    }
    if !(gamma0 >= 0.0 && gamma0.is_finite()) {
        return Err(Error::invalid(
            "gamma0",
            format!("must be non-negative, got {gamma0}"),
        ));
    }
    if !(temperature > 0.0 && temperature.is_finite()) {
        return Err(Error::invalid(
            "temperature",
            format!("must be positive, got {temperature}"),
        ));
    }
    let [s1, s2, s3] = pauli();
    let h = s3.scaled(0.5 * constants.hbar() * omega).with_units(Units::Energy);
    let zeta = two_level_friction(omega, gamma0, &constants);
    let channels = vec![
        CouplingChannel::new(s1, zeta)?.with_label("sigma1"),
        CouplingChannel::new(s2, zeta)?.with_label("sigma2"),
    ];
    Ok(TwoLevelModel {
        omega,
        gamma0,
        temperature,
        constants,
        h,
        channels,
    })
}

/// `ζ = ħγ₀/(4ω)`.
pub fn two_level_friction(omega: f64, gamma0: f64, c: &PhysicalConstants) -> f64 {
    c.hbar() * gamma0 / (4.0 * omega)
}

impl TwoLevelModel {
    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn gamma0(&self) -> f64 {
        self.gamma0
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    pub fn hamiltonian(&self) -> &HermitianOperator {
        &self.h
    }

    pub fn channels(&self) -> &[CouplingChannel] {
        &self.channels
    }

    pub fn zeta(&self) -> f64 {
        self.channels[0].zeta()
    }

    /// `ℰ^Q_{H_e,H_e} = T_e ħγ₀/(4ω)` at the model temperature.
    pub fn bracket_hh(&self) -> f64 {
        self.temperature * self.zeta()
    }

    /// `γ = 2γ₀ k_B T_e/(ħω)`.
    pub fn relaxation_rate(&self) -> f64 {
        2.0 * self.gamma0 * self.constants.k_b() * self.temperature
            / (self.constants.hbar() * self.omega)
    }

    /// System coupled to an infinite-capacity bath at the model temperature.
    pub fn system_spec(&self) -> Result<SystemSpec> {
        self.system_spec_with(BathModel::constant_temperature(self.temperature)?)
    }

    pub fn system_spec_with(&self, bath: BathModel) -> Result<SystemSpec> {
        SystemSpec::new(self.h.clone(), self.channels.clone(), bath, self.constants)
    }

    pub fn gibbs(&self) -> Result<DensityMatrix> {
        gibbs_state(&self.h, self.temperature, &self.constants)
    }

    /// Named observables: `sigma1`, `sigma2`, `sigma3`, `H`, `excited`.
    pub fn observable(&self, name: &str) -> Option<HermitianOperator> {
        let [s1, s2, s3] = pauli();
        Some(match name {
            "sigma1" => s1,
            "sigma2" => s2,
            "sigma3" => s3,
            "H" => self.h.clone(),
            "excited" => HermitianOperator::diagonal(&[1.0, 0.0]),
            _ => return None,
        })
    }
}
