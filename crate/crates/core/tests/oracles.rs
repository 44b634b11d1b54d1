//! Spectral kernels against independent quadrature and trace oracles.

use dqm_core::{
    mollified_product, verify_double_commutator_identity, verify_ln_lemma, DensityMatrix,
    HermitianOperator, LogMeanKernel, PhysicalConstants,
};
use dqm_testkit as tk;
use rand::Rng;

fn h(m: tk::CMatrix) -> HermitianOperator {
    HermitianOperator::new(m).unwrap()
}

#[test]
fn mollifier_matches_gauss_legendre_quadrature() {
    let mut rng = tk::rng(11);
    let kernel = LogMeanKernel::default();
    let mut worst = 0.0_f64;
    for _ in 0..120 {
        let dim = rng.random_range(2..=16);
        let rho = tk::random_density(&mut rng, dim, 1e-6);
        let a = tk::random_hermitian(&mut rng, dim, 1.0);
        let fast = mollified_product(&h(a.clone()), &DensityMatrix::new(rho.clone()).unwrap(), &kernel)
            .unwrap();
        let slow = tk::quadrature_mollifier(&a, &rho, 64);
        let rel = tk::max_abs(&(fast.matrix() - &slow)) / tk::max_abs(&slow);
        worst = worst.max(rel);
    }
    assert!(worst <= 1e-8, "worst relative error {worst:e}");
}

#[test]
fn near_degenerate_spectrum_matches_quadrature() {
    // eigenvalues split by less than the degeneracy threshold and just above it
    let mut rng = tk::rng(5);
    let u = tk::random_unitary(&mut rng, 3);
    for split in [1e-12, 5e-9, 2e-8, 1e-6] {
        let p = [0.3, 0.3 + split, 0.4 - split];
        let d = tk::CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            3,
            p.iter().map(|&x| tk::C64::new(x, 0.0)),
        ));
        let rho = &u * d * u.adjoint();
        let rho = (&rho + rho.adjoint()) * tk::C64::new(0.5, 0.0);
        let a = tk::random_hermitian(&mut rng, 3, 1.0);
        let fast = mollified_product(
            &h(a.clone()),
            &DensityMatrix::new(rho.clone()).unwrap(),
            &LogMeanKernel::default(),
        )
        .unwrap();
        let slow = tk::quadrature_mollifier(&a, &rho, 64);
        assert!(tk::max_abs(&(fast.matrix() - &slow)) <= 1e-10, "split {split:e}");
    }
}

#[test]
fn ln_lemma_holds_on_random_states() {
    let mut rng = tk::rng(12);
    let c = PhysicalConstants::new(0.7, 1.3).unwrap();
    for _ in 0..100 {
        let dim = rng.random_range(2..=16);
        let rho = DensityMatrix::new(tk::random_density(&mut rng, dim, 1e-6)).unwrap();
        let a = h(tk::random_hermitian(&mut rng, dim, 2.0));
        let r = verify_ln_lemma(&a, &rho, &LogMeanKernel::default(), &c).unwrap();
        assert!(r <= 1e-10 * a.max_norm(), "dim {dim}: {r:e}");
    }
}

#[test]
fn double_commutator_identity_holds_on_random_states() {
    let mut rng = tk::rng(13);
    let c = PhysicalConstants::new(1.1, 0.9).unwrap();
    for _ in 0..100 {
        let dim = rng.random_range(2..=16);
        let rho = DensityMatrix::new(tk::random_density(&mut rng, dim, 1e-6)).unwrap();
        let a = h(tk::random_hermitian(&mut rng, dim, 1.0));
        let q = h(tk::random_hermitian(&mut rng, dim, 1.0));
        let r = verify_double_commutator_identity(&a, &q, &rho, &LogMeanKernel::default(), &c)
            .unwrap();
        assert!(r.relative() <= 1e-10, "dim {dim}: {:e}", r.relative());
    }
}
