use dqm_core::{
    average_rhs, build_particle, build_two_level, caldeira_leggett_friction, gibbs_state,
    master_rhs, BathModel, BathState, CoupledState, DensityMatrix, PhysicalConstants, Potential,
    Snapshot,
};
use dqm_testkit as tk;
use rand::Rng;

/// Random state supported on the lowest `k` levels of an `n`-level space.
fn low_state(rng: &mut impl Rng, n: usize, k: usize) -> DensityMatrix {
    let small = tk::random_density(rng, k, 1e-3);
    let mut full = tk::CMatrix::zeros(n, n);
    full.view_mut((0, 0), (k, k)).copy_from(&small);
    DensityMatrix::new(full).unwrap().mixed_with_identity(1e-9).unwrap()
}

#[test]
fn first_moments_close_for_harmonic_particle() {
    let c = PhysicalConstants::new(0.8, 1.2).unwrap();
    let (m, omega, gamma) = (1.7, 0.9, 0.15);
    let zeta = caldeira_leggett_friction(gamma, m);
    let model = build_particle(m, Potential::harmonic(m, omega), 16, omega, c).unwrap();
    let spec = model
        .system_spec(zeta, BathModel::constant_temperature(0.4).unwrap())
        .unwrap();
    let mut rng = tk::rng(41);
    let (q, p) = (model.q(), model.p());
    for _ in 0..20 {
        let state = CoupledState::new(low_state(&mut rng, 16, 8), BathState::new(0.0));
        let avg = |a: &dqm_core::HermitianOperator| (a.matrix() * state.rho.matrix()).trace().re;
        let dq = average_rhs(q, &state, &spec).unwrap();
        let dp = average_rhs(p, &state, &spec).unwrap();
        assert!((dq - avg(p) / m).abs() <= 1e-10);
        let expected = -m * omega * omega * avg(q) - zeta / m * avg(p);
        assert!((dp - expected).abs() <= 1e-10, "{dp} vs {expected}");
    }
}

#[test]
fn momentum_variance_friction_uses_canonical_correlation() {
    let c = PhysicalConstants::default();
    let (m, omega, gamma, temp) = (1.0, 1.0, 0.1, 0.5);
    let zeta = caldeira_leggett_friction(gamma, m);
    let model = build_particle(m, Potential::harmonic(m, omega), 16, omega, c).unwrap();
    let spec = model
        .system_spec(zeta, BathModel::constant_temperature(temp).unwrap())
        .unwrap();
    let mut rng = tk::rng(42);
    let pp = model.observable("PP").unwrap();
    let pq = model.observable("PQ+QP").unwrap();
    for _ in 0..10 {
        let state = CoupledState::new(low_state(&mut rng, 16, 6), BathState::new(0.0));
        let snap = Snapshot::new(&state, &spec).unwrap();
        let avg = |a: &dqm_core::HermitianOperator| (a.matrix() * state.rho.matrix()).trace().re;
        let kubo = snap.context().correlation(model.p().matrix(), model.p().matrix());
        let rate = average_rhs(&pp, &state, &spec).unwrap();
        let expected = -m * omega * omega * avg(&pq) - 2.0 * zeta / m * kubo + 2.0 * zeta * temp;
        // the 1e-9 identity admixture reaches the truncation edge
        assert!((rate - expected).abs() <= 1e-8, "{rate} vs {expected}");
    }
}

#[test]
fn gibbs_state_is_stationary_for_two_level_atom() {
    for temp in [0.2, 1.0, 5.0] {
        let model = build_two_level(1.0, 0.1, temp, PhysicalConstants::default()).unwrap();
        let spec = model.system_spec().unwrap();
        let state = CoupledState::new(model.gibbs().unwrap(), BathState::new(0.0));
        assert!(tk::max_abs(&master_rhs(&state, &spec).unwrap()) <= 1e-12);
    }
}

#[test]
fn gibbs_state_is_stationary_for_anharmonic_particle() {
    let c = PhysicalConstants::default();
    let potential = Potential::new(vec![0.0, 0.0, 0.5, 0.0, 0.05]).unwrap();
    let model = build_particle(1.0, potential, 12, 1.0, c).unwrap();
    let spec = model
        .system_spec(0.2, BathModel::constant_temperature(3.0).unwrap())
        .unwrap();
    let rho = gibbs_state(model.hamiltonian(), 3.0, &c).unwrap();
    assert!(rho.min_eigenvalue() > 1e-12);
    let state = CoupledState::new(rho, BathState::new(0.0));
    let rhs = master_rhs(&state, &spec).unwrap();
    assert!(tk::max_abs(&rhs) <= 1e-10, "{:e}", tk::max_abs(&rhs));
}
