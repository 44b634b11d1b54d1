//! Right-hand sides of the coupled quantum/environment dynamics.
//!
//! The quantum state evolves by the nonlinear master equation
//!
//! ```text
//! dρ/dt = −{ρ,H} + Σ_Q [ ℰ_HS {Q, ({Q,H})_ρ} + k_B ℰ_HH {Q,{Q,ρ}} ]
//! ```
//!
//! and the bath energy absorbs exactly what the quantum side loses. Every
//! quantity here is evaluated from a [`Snapshot`], which owns the single
//! eigendecomposition of ρ used for the mollifier, `ln ρ` and correlations.

use crate::correlation::{LogMeanKernel, SpectralContext};
use crate::environment::{
    bracket_coefficients, BathModel, BathState, BracketCoefficients, CouplingChannel,
    EnvObservable, Environment,
};
use crate::error::{Error, Result};
use crate::operator::{
    bracket, hermitian_part, re, trace_product, CMatrix, DensityMatrix, HermitianOperator,
    PhysicalConstants,
};

/// The dual state `(ρ, x)`: density matrix and classical bath state.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledState {
    pub rho: DensityMatrix,
    pub bath: BathState,
}

impl CoupledState {
    pub fn new(rho: DensityMatrix, bath: BathState) -> Self {
        Self { rho, bath }
    }
}

#[derive(Debug, Clone)]
struct ChannelCache {
    /// `{Q, H}`
    qh: CMatrix,
    /// `{Q, {Q, H}}`
    qqh: CMatrix,
}

/// Hamiltonian, coupling channels, environment and constants.
#[derive(Debug, Clone)]
pub struct SystemSpec<E: Environment = BathModel> {
    hamiltonian: HermitianOperator,
    channels: Vec<CouplingChannel>,
    environment: E,
    constants: PhysicalConstants,
    kernel: LogMeanKernel,
    cache: Vec<ChannelCache>,
}

impl<E: Environment> SystemSpec<E> {
    pub fn new(
        hamiltonian: HermitianOperator,
        channels: Vec<CouplingChannel>,
        environment: E,
        constants: PhysicalConstants,
    ) -> Result<Self> {
        let dim = hamiltonian.dim();
        for ch in &channels {
            if ch.q().dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: ch.q().dim(),
                });
            }
        }
        let hbar = constants.hbar();
        let cache = channels
            .iter()
            .map(|ch| {
                let qh = bracket(ch.q().matrix(), hamiltonian.matrix(), hbar);
                let qqh = bracket(ch.q().matrix(), &qh, hbar);
                ChannelCache {
                    qh: hermitian_part(&qh),
                    qqh: hermitian_part(&qqh),
                }
            })
            .collect();
        Ok(Self {
            hamiltonian,
            channels,
            environment,
            constants,
            kernel: LogMeanKernel::default(),
            cache,
        })
    }

    pub fn with_kernel(mut self, kernel: LogMeanKernel) -> Self {
        self.kernel = kernel;
        self
    }

    pub fn dim(&self) -> usize {
        self.hamiltonian.dim()
    }

    pub fn hamiltonian(&self) -> &HermitianOperator {
        &self.hamiltonian
    }

    pub fn channels(&self) -> &[CouplingChannel] {
        &self.channels
    }

    pub fn environment(&self) -> &E {
        &self.environment
    }

    pub fn constants(&self) -> &PhysicalConstants {
        &self.constants
    }

    pub fn kernel(&self) -> &LogMeanKernel {
        &self.kernel
    }

    /// Same system restricted to one channel (for additivity checks).
    pub fn single_channel(&self, index: usize) -> Self
    where
        E: Clone,
    {
        Self {
            hamiltonian: self.hamiltonian.clone(),
            channels: vec![self.channels[index].clone()],
            environment: self.environment.clone(),
            constants: self.constants,
            kernel: self.kernel,
            cache: vec![self.cache[index].clone()],
        }
    }

    pub(crate) fn qh(&self, channel: usize) -> &CMatrix {
        &self.cache[channel].qh
    }

    pub(crate) fn check_state(&self, state: &CoupledState) -> Result<()> {
        if state.rho.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: state.rho.dim(),
            });
        }
        Ok(())
    }
}

/// Quantum half of a joint observable `Ã = (A, A_e)`.
#[derive(Debug, Clone, PartialEq)]
pub enum QuantumPart {
    None,
    /// The system Hamiltonian `H`.
    Hamiltonian,
    /// The entropy operator `S = −k_B ln ρ` of the current state.
    Entropy,
    Operator(HermitianOperator),
}

/// Joint observable `Ã = (A, A_e)` with average `⟨A⟩ + A_{e,x}`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointObservable {
    pub quantum: QuantumPart,
    pub classical: EnvObservable,
}

impl JointObservable {
    /// Total energy `H̃ = (H, H_e)`.
    pub fn energy() -> Self {
        Self {
            quantum: QuantumPart::Hamiltonian,
            classical: EnvObservable::Energy,
        }
    }

    /// Total entropy `S̃ = (−k_B ln ρ, S_e)`.
    pub fn entropy() -> Self {
        Self {
            quantum: QuantumPart::Entropy,
            classical: EnvObservable::Entropy,
        }
    }

    pub fn quantum(op: HermitianOperator) -> Self {
        Self {
            quantum: QuantumPart::Operator(op),
            classical: EnvObservable::Zero,
        }
    }

    pub fn classical(obs: EnvObservable) -> Self {
        Self {
            quantum: QuantumPart::None,
            classical: obs,
        }
    }
}

/// Everything needed to evaluate rates at one coupled state, built from a
/// single eigendecomposition of ρ.
pub struct Snapshot<'a, E: Environment> {
    spec: &'a SystemSpec<E>,
    state: &'a CoupledState,
    ctx: SpectralContext<'a>,
    coeffs: Vec<BracketCoefficients>,
    temperature: f64,
}

impl<'a, E: Environment> Snapshot<'a, E> {
    pub fn new(state: &'a CoupledState, spec: &'a SystemSpec<E>) -> Result<Self> {
        spec.check_state(state)?;
        let ctx = SpectralContext::new(&state.rho, &spec.kernel)?;
        let temperature = spec.environment.temperature(&state.bath)?;
        let coeffs = spec
            .channels
            .iter()
            .map(|ch| bracket_coefficients(ch, &spec.environment, &state.bath))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            spec,
            state,
            ctx,
            coeffs,
            temperature,
        })
    }

    fn hbar(&self) -> f64 {
        self.spec.constants.hbar()
    }

    fn k_b(&self) -> f64 {
        self.spec.constants.k_b()
    }

    fn rho(&self) -> &CMatrix {
        self.state.rho.matrix()
    }

    fn expect(&self, a: &CMatrix) -> f64 {
        trace_product(a, self.rho()).re
    }

    pub fn bath_temperature(&self) -> f64 {
        self.temperature
    }

    pub fn coefficients(&self) -> &[BracketCoefficients] {
        &self.coeffs
    }

    pub fn context(&self) -> &SpectralContext<'a> {
        &self.ctx
    }

    /// Reversible part `−{ρ, H}`.
    pub fn reversible_rhs(&self) -> CMatrix {
        -bracket(self.rho(), self.spec.hamiltonian.matrix(), self.hbar())
    }

    /// Dissipative contribution of one channel to `dρ/dt`.
    pub fn channel_rhs(&self, index: usize) -> CMatrix {
        let hbar = self.hbar();
        let q = self.spec.channels[index].q().matrix();
        let c = &self.coeffs[index];
        let drift = bracket(q, &self.ctx.mollify(self.spec.qh(index)), hbar) * re(c.e_hs);
        let diffusion =
            bracket(q, &bracket(q, self.rho(), hbar), hbar) * re(self.k_b() * c.e_hh);
        drift + diffusion
    }

    /// `dρ/dt`, Hermitian and traceless.
    pub fn master_rhs(&self) -> CMatrix {
        let mut out = self.reversible_rhs();
        for k in 0..self.spec.channels.len() {
            out += self.channel_rhs(k);
        }
        hermitian_part(&out)
    }

    /// `dA_e/dt` for a classical observable of the environment.
    pub fn environment_rate(&self, obs: EnvObservable) -> Result<f64> {
        use EnvObservable::{Energy, Entropy};
        let env = &self.spec.environment;
        let bath = &self.state.bath;
        let mut rate = env.poisson_bracket(obs, Energy, bath) + env.dissipative_bracket(obs, Entropy, bath);
        for (k, ch) in self.spec.channels.iter().enumerate() {
            let cache = &self.spec.cache[k];
            let z = ch.zeta();
            rate -= self.k_b() * env.coupling_bracket(z, obs, Energy, bath)? * self.expect(&cache.qqh);
            rate += env.coupling_bracket(z, obs, Entropy, bath)? * self.ctx.quadratic(&cache.qh);
        }
        Ok(rate)
    }

    /// `dH_e/dt`.
    pub fn classical_rhs(&self) -> f64 {
        self.environment_rate(EnvObservable::Energy)
            .expect("bracket coefficients already evaluated at this state")
    }

    /// `d⟨A⟩/dt` from the average equation (no reference to `dρ/dt`).
    pub fn average_rhs(&self, a: &CMatrix) -> f64 {
        let hbar = self.hbar();
        let h = self.spec.hamiltonian.matrix();
        let mut rate = self.expect(&bracket(a, h, hbar));
        for (k, ch) in self.spec.channels.iter().enumerate() {
            let q = ch.q().matrix();
            let c = &self.coeffs[k];
            let aq = bracket(a, q, hbar);
            // {H, Q} = −{Q, H}
            rate += c.e_hs * self.ctx.correlation(&aq, self.spec.qh(k));
            rate -= self.k_b() * c.e_hh * self.expect(&bracket(q, &aq, hbar));
        }
        rate
    }

    /// Dissipative part of `average_rhs`, channel by channel.
    pub fn average_dissipation(&self, a: &CMatrix) -> Vec<f64> {
        let hbar = self.hbar();
        self.spec
            .channels
            .iter()
            .enumerate()
            .map(|(k, ch)| {
                let q = ch.q().matrix();
                let c = &self.coeffs[k];
                let aq = bracket(a, q, hbar);
                c.e_hs * self.ctx.correlation(&aq, self.spec.qh(k))
                    - self.k_b() * c.e_hh * self.expect(&bracket(q, &aq, hbar))
            })
            .collect()
    }

    /// `−k_B ln ρ`.
    pub fn entropy_operator(&self) -> CMatrix {
        self.ctx.log_rho() * re(-self.k_b())
    }

    fn resolve(&self, part: &QuantumPart) -> Option<CMatrix> {
        match part {
            QuantumPart::None => None,
            QuantumPart::Hamiltonian => Some(self.spec.hamiltonian.matrix().clone()),
            QuantumPart::Entropy => Some(self.entropy_operator()),
            QuantumPart::Operator(op) => Some(op.matrix().clone()),
        }
    }

    /// `Ā = ⟨A⟩ + A_{e,x}`.
    pub fn total(&self, obs: &JointObservable) -> Result<f64> {
        let q = self.resolve(&obs.quantum).map_or(0.0, |a| self.expect(&a));
        Ok(q + self.spec.environment.value(obs.classical, &self.state.bath)?)
    }

    /// `𝒫(Ã, B̃) = ⟦A_e, B_e⟧_x + ⟨{A, B}⟩`.
    pub fn poisson_contribution(&self, a: &JointObservable, b: &JointObservable) -> f64 {
        let classical = self
            .spec
            .environment
            .poisson_bracket(a.classical, b.classical, &self.state.bath);
        let quantum = match (self.resolve(&a.quantum), self.resolve(&b.quantum)) {
            (Some(x), Some(y)) => self.expect(&bracket(&x, &y, self.hbar())),
            _ => 0.0,
        };
        classical + quantum
    }

    /// Four-term dissipative bracket `𝒟(Ã, B̃)` summed over channels.
    pub fn dissipative_contribution(
        &self,
        a: &JointObservable,
        b: &JointObservable,
    ) -> Result<f64> {
        use EnvObservable::Energy;
        let env = &self.spec.environment;
        let bath = &self.state.bath;
        let hbar = self.hbar();
        let qa = self.resolve(&a.quantum);
        let qb = self.resolve(&b.quantum);
        let mut total = env.dissipative_bracket(a.classical, b.classical, bath);
        for (k, ch) in self.spec.channels.iter().enumerate() {
            let q = ch.q().matrix();
            let z = ch.zeta();
            let hq = self.spec.qh(k) * re(-1.0);
            let aq = qa.as_ref().map(|m| bracket(m, q, hbar));
            let bq = qb.as_ref().map(|m| bracket(m, q, hbar));
            let corr = |x: &Option<CMatrix>, y: &Option<CMatrix>| match (x, y) {
                (Some(x), Some(y)) => self.ctx.correlation(x, y),
                _ => 0.0,
            };
            let hq = Some(hq);
            total += env.coupling_bracket(z, Energy, Energy, bath)? * corr(&aq, &bq);
            total -= env.coupling_bracket(z, a.classical, Energy, bath)? * corr(&hq, &bq);
            total -= env.coupling_bracket(z, Energy, b.classical, bath)? * corr(&aq, &hq);
            total += env.coupling_bracket(z, a.classical, b.classical, bath)? * corr(&hq, &hq);
        }
        Ok(total)
    }

    /// `dS̄/dt = 𝒟(S̃, S̃)`, evaluated as a sum of manifestly non-negative
    /// quadratic forms (the 2×2 coefficient matrix is diagonalized per channel).
    pub fn entropy_production(&self) -> f64 {
        let hbar = self.hbar();
        let s = self.entropy_operator();
        let env = &self.spec.environment;
        let mut total = env.dissipative_bracket(EnvObservable::Entropy, EnvObservable::Entropy, &self.state.bath);
        for (k, ch) in self.spec.channels.iter().enumerate() {
            let c = &self.coeffs[k];
            if c.e_hh == 0.0 && c.e_ss == 0.0 {
                continue;
            }
            let x = bracket(&s, ch.q().matrix(), hbar);
            let y = self.spec.qh(k) * re(-1.0);
            // D = e_hh⟪X;X⟫ − 2e_hs⟪X;Y⟫ + e_ss⟪Y;Y⟫ = Σ μ ⟪v₁X + v₂Y; v₁X + v₂Y⟫
            let (a, b, d) = (c.e_hh, -c.e_hs, c.e_ss);
            let mean = 0.5 * (a + d);
            let r = (0.5 * (a - d)).hypot(b);
            for mu in [mean + r, mean - r] {
                if mu == 0.0 {
                    continue;
                }
                let (v1, v2) = if b.abs() > 0.0 {
                    (b, mu - a)
                } else if (mu - a).abs() <= (mu - d).abs() {
                    (1.0, 0.0)
                } else {
                    (0.0, 1.0)
                };
                let norm = v1.hypot(v2);
                let combo = &x * re(v1 / norm) + &y * re(v2 / norm);
                total += mu * self.ctx.quadratic(&combo);
            }
        }
        total
    }

    /// `S̄ = −k_B tr(ρ ln ρ) + S_e(H_e)`.
    pub fn total_entropy(&self) -> Result<f64> {
        Ok(self.state.rho.von_neumann_entropy(&self.spec.constants)
            + self.spec.environment.entropy(&self.state.bath)?)
    }

    /// `Ē = ⟨H⟩ + H_e`.
    pub fn total_energy(&self) -> f64 {
        self.expect(self.spec.hamiltonian.matrix()) + self.state.bath.energy
    }
}

/// `dρ/dt` of the nonlinear master equation.
pub fn master_rhs<E: Environment>(state: &CoupledState, spec: &SystemSpec<E>) -> Result<CMatrix> {
    Ok(Snapshot::new(state, spec)?.master_rhs())
}

/// `dH_e/dt` of the heat bath.
pub fn classical_rhs<E: Environment>(state: &CoupledState, spec: &SystemSpec<E>) -> Result<f64> {
    Snapshot::new(state, spec)?.environment_rate(EnvObservable::Energy)
}

/// `d⟨A⟩/dt` from the average equation.
pub fn average_rhs<E: Environment>(
    a: &HermitianOperator,
    state: &CoupledState,
    spec: &SystemSpec<E>,
) -> Result<f64> {
    if a.dim() != spec.dim() {
        return Err(Error::DimensionMismatch {
            expected: spec.dim(),
            found: a.dim(),
        });
    }
    Ok(Snapshot::new(state, spec)?.average_rhs(a.matrix()))
}

pub fn poisson_contribution<E: Environment>(
    a: &JointObservable,
    b: &JointObservable,
    state: &CoupledState,
    spec: &SystemSpec<E>,
) -> Result<f64> {
    for part in [&a.quantum, &b.quantum] {
        if let QuantumPart::Operator(op) = part {
            if op.dim() != spec.dim() {
                return Err(Error::DimensionMismatch {
                    expected: spec.dim(),
                    found: op.dim(),
                });
            }
        }
    }
    Ok(Snapshot::new(state, spec)?.poisson_contribution(a, b))
}

pub fn dissipative_contribution<E: Environment>(
    a: &JointObservable,
    b: &JointObservable,
    state: &CoupledState,
    spec: &SystemSpec<E>,
) -> Result<f64> {
    for part in [&a.quantum, &b.quantum] {
        if let QuantumPart::Operator(op) = part {
            if op.dim() != spec.dim() {
                return Err(Error::DimensionMismatch {
                    expected: spec.dim(),
                    found: op.dim(),
                });
            }
        }
    }
    Snapshot::new(state, spec)?.dissipative_contribution(a, b)
}

/// Total entropy production `𝒟(S̃, S̃) ≥ 0`.
pub fn entropy_production<E: Environment>(
    state: &CoupledState,
    spec: &SystemSpec<E>,
) -> Result<f64> {
    Ok(Snapshot::new(state, spec)?.entropy_production())
}
