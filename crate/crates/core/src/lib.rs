//! Dissipative quantum mechanics of a quantum subsystem weakly coupled to a
//! classical environment, in the two-generator (energy + entropy) form.
//!
//! * [`operator`]: dense Hermitian operators, density matrices, brackets.
//! * [`correlation`]: mollified product `A_ρ` and canonical correlation.
//! * [`environment`]: heat-bath models and coupling-bracket coefficients.
//! * [`dynamics`]: the nonlinear master equation and its companions.
//! * [`models`]: particle in a potential, two-level atom, Gibbs states.
//! * [`integrator`]: RK4 / adaptive RK45 with positivity projection and monitors.
//! * [`comparator`]: linearized (Lindblad-form) dynamics and comparisons.

pub mod comparator;
pub mod correlation;
pub mod dynamics;
pub mod environment;
pub mod error;
pub mod integrator;
pub mod models;
pub mod operator;

pub use correlation::{
    canonical_correlation, log_mean, mollified_product, verify_double_commutator_identity,
    verify_ln_lemma, IdentityResidual, LogMeanKernel, SpectralContext, DEFAULT_P_FLOOR,
};
pub use dynamics::{
    average_rhs, classical_rhs, dissipative_contribution, entropy_production, master_rhs,
    poisson_contribution, CoupledState, JointObservable, QuantumPart, Snapshot, SystemSpec,
};
pub use environment::{
    bracket_coefficients, temperature, BathModel, BathState, BracketCoefficients,
    CouplingChannel, EntropyCurve, EnvObservable, Environment, TabulatedCurve,
};
pub use error::{Error, Result};
pub use operator::{
    anticommutator, average, commutator, eigh, entropy_operator, quantum_poisson, CMatrix,
    DensityMatrix, EigenDecomposition, HermitianOperator, PhysicalConstants, Units, C64,
};
pub use comparator::{
    build_generator, compare_trajectories, linearized_rates, linearized_rhs, population_block,
    relaxation_rate,
    trace_distance_matrices, ComparisonReport, GeneratorMode, ObservableComparison, Superoperator,
};
pub use integrator::{
    integrate, project, Flow, IntegrationFailure, IntegratorConfig, Method, MonitorRecord,
    Trajectory,
};
pub use models::{
    build_particle, build_two_level, caldeira_leggett_friction, gibbs_state, two_level_friction,
    ParticleModel, Potential, TwoLevelModel,
};
