use hdbell::bellbasis::{bell_state_minus, BellIndex};
use hdbell::certify::fidelity;
use hdbell::measurement::{joint_settings, simulate_counts};
use hdbell::tomography::{chi_square, reconstruct, reconstruct_observed, SolverOptions, TomographyProblem};
use hdbell::{DensityMatrix, C64};
use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn noisy_problem(m: usize, n: usize, seed: u64) -> TomographyProblem {
    let rho = DensityMatrix::from_pure(&bell_state_minus(BellIndex::new(4, m, n).unwrap()));
    let settings = joint_settings(4).unwrap();
    let counts = simulate_counts(&rho, &settings, 4, 10_000, seed).unwrap();
    TomographyProblem::from_counts(4, &counts).unwrap()
}

#[test]
fn every_iterate_is_a_density_matrix() {
    let problem = noisy_problem(1, 2, 3);
    let mut seen = 0;
    let mut worst_eig: f64 = 0.0;
    let mut worst_trace: f64 = 0.0;
    let mut worst_herm: f64 = 0.0;
    reconstruct_observed(&problem, &SolverOptions::default(), |x: &DMatrix<C64>| {
        seen += 1;
        worst_herm = worst_herm.max(hdbell::hilbert::hermitian_defect(x));
        let rho = DensityMatrix::new(x.clone()).unwrap();
        worst_eig = worst_eig.min(rho.eigenvalues().unwrap().into_iter().fold(f64::INFINITY, f64::min));
        worst_trace = worst_trace.max((rho.trace().re - 1.0).abs());
    })
    .unwrap();
    assert!(seen > 0);
    assert!(worst_eig >= -1e-9, "eigenvalue {worst_eig}");
    assert!(worst_trace <= 1e-9, "trace defect {worst_trace}");
    assert!(worst_herm <= 1e-12, "hermiticity defect {worst_herm}");
}

#[test]
fn chi_square_never_exceeds_start() {
    for (m, n, seed) in [(0, 0, 1), (2, 3, 2), (3, 1, 9)] {
        let problem = noisy_problem(m, n, seed);
        let r = reconstruct(&problem, &SolverOptions::default()).unwrap();
        let d = &r.diagnostics;
        assert!(
            d.chi_square <= d.initial_chi_square,
            "{} > {}",
            d.chi_square,
            d.initial_chi_square
        );
        let recomputed = chi_square(&r.rho, &problem, d.floor).unwrap();
        assert!((recomputed - d.chi_square).abs() <= 1e-9 * d.chi_square.max(1.0));
    }
}

#[test]
fn setting_order_does_not_change_the_estimate() {
    let target = bell_state_minus(BellIndex::new(4, 2, 1).unwrap());
    let rho = DensityMatrix::from_pure(&target);
    let settings = joint_settings(4).unwrap();
    let counts = simulate_counts(&rho, &settings, 4, 10_000, 11).unwrap();
    let base = reconstruct(
        &TomographyProblem::from_counts(4, &counts).unwrap(),
        &SolverOptions::default(),
    )
    .unwrap();
    let f0 = fidelity(&base.rho, &target).unwrap();

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..3 {
        let mut shuffled = counts.clone();
        shuffled.shuffle(&mut rng);
        let r = reconstruct(
            &TomographyProblem::from_counts(4, &shuffled).unwrap(),
            &SolverOptions::default(),
        )
        .unwrap();
        let f = fidelity(&r.rho, &target).unwrap();
        assert!((f - f0).abs() <= 1e-8, "fidelity moved by {}", (f - f0).abs());
    }
}
