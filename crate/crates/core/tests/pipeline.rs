use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use qnet_core::dynamics::{exact_gram, propagate, sample_trajectory, DensityOperator, Propagator};
use qnet_core::identify::{
    build_p_trapezoid, build_q, identify_topology, relative_error, solve_commutator, IdentifyConfig, Outcome,
    SolveOptions,
};
use qnet_core::io::{trajectory_from_csv, trajectory_to_csv};
use qnet_core::linalg::{commutator, spectral_norm, Admissible, CMatrix, Hermitian, C64};
use qnet_core::netmodel::{basis_density, erdos_renyi};
use qnet_core::partialinfo::{physical_decomposition, recombine};
use qnet_core::SeededRng;

fn random_hermitian(d: usize, rng: &mut ChaCha8Rng) -> Hermitian {
    let m = CMatrix::from_fn(d, d, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    Hermitian::new((&m + m.adjoint()) * C64::new(0.5, 0.0)).unwrap()
}

fn random_density(d: usize, rng: &mut ChaCha8Rng) -> DensityOperator {
    let g = CMatrix::from_fn(d, d, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    let p = &g * g.adjoint();
    let tr = p.trace();
    DensityOperator::new(p / tr).unwrap()
}

#[test]
fn exact_gram_satisfies_commutator_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..100 {
        let d = rng.random_range(2..=6);
        let h = random_hermitian(d, &mut rng);
        let rho = random_density(d, &mut rng);
        let tau = rng.random_range(0.1..4.0);
        let p = exact_gram(&h, &rho, tau, 1.0).unwrap();
        let q = build_q(&rho, &propagate(&h, &rho, tau, 1.0).unwrap(), 1.0, None, None).unwrap();
        let lhs = commutator(h.matrix(), p.matrix());
        assert!(spectral_norm(&(lhs - &q)) <= 1e-9 * spectral_norm(&q).max(1e-300));
    }
}

#[test]
fn known_local_part_is_subtracted() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let d = 4;
    let h0 = Hermitian::diagonal(&[0.3, -0.7, 1.1, 0.2]);
    let upper: Vec<C64> = (0..6).map(|_| C64::new(rng.random_range(-1.0..1.0), 0.0)).collect();
    let hint = Admissible::from_upper(d, &upper).unwrap();
    let h = &h0 + hint.as_hermitian();
    let rho = basis_density(d, 1).unwrap();
    let traj = sample_trajectory(&h, &rho, 3.0, 0.001, 1.0).unwrap();
    let r = identify_topology(&traj, &IdentifyConfig::default(), Some(&h0), Some(&hint)).unwrap();
    assert_eq!(r.outcome, Outcome::Unique);
    assert!(r.epsilon.unwrap() < 1e-3, "{:?}", r.epsilon);
}

#[test]
fn coarser_quadrature_does_not_reduce_error() {
    let d = 5;
    let mut coarse = Vec::new();
    let mut fine = Vec::new();
    for seed in 0..50u64 {
        let mut rng = SeededRng::new(seed).next_rng();
        let graph = erdos_renyi(d, 0.5, &mut rng).unwrap();
        if graph.edge_count() == 0 {
            continue;
        }
        let rho = basis_density(d, rng.random_range(0..d)).unwrap();
        let traj = sample_trajectory(&graph.to_hamiltonian(), &rho, 2.0, 0.01, 1.0).unwrap();
        let q = build_q(traj.initial(), traj.last(), 1.0, None, None).unwrap();
        let opts = SolveOptions::rank_only(1e-9);
        let solve = |div| {
            let p = build_p_trapezoid(&traj, div).unwrap();
            solve_commutator(&p, &q, &opts).unwrap()
        };
        let (rc, rf) = (solve(20), solve(1));
        if rc.outcome == Outcome::Unique && rf.outcome == Outcome::Unique {
            coarse.push(relative_error(&rc.estimate, &graph.to_admissible()).unwrap());
            fine.push(relative_error(&rf.estimate, &graph.to_admissible()).unwrap());
        }
    }
    assert!(coarse.len() >= 5, "only {} solvable instances", coarse.len());
    let median = |v: &mut Vec<f64>| {
        v.sort_by(f64::total_cmp);
        v[v.len() / 2]
    };
    assert!(median(&mut coarse) >= median(&mut fine));
}

#[test]
fn trajectory_file_round_trip_preserves_identification() {
    let mut rng = SeededRng::new(3).next_rng();
    let graph = erdos_renyi(4, 0.5, &mut rng).unwrap();
    let rho = basis_density(4, 0).unwrap();
    let traj = sample_trajectory(&graph.to_hamiltonian(), &rho, 3.0, 0.01, 1.0).unwrap();
    let back = trajectory_from_csv(&trajectory_to_csv(&traj)).unwrap();
    let cfg = IdentifyConfig::default();
    let a = identify_topology(&traj, &cfg, None, None).unwrap();
    let b = identify_topology(&back, &cfg, None, None).unwrap();
    assert_eq!(a.outcome, b.outcome);
    assert_eq!(a.estimate.matrix(), b.estimate.matrix());
}

#[test]
fn decomposition_terms_propagate_linearly() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for d in 2..=4 {
        let h = random_hermitian(d, &mut rng);
        let prop = Propagator::new(&h, 1.0).unwrap();
        for k in 0..d {
            for j in 0..d {
                let terms = physical_decomposition(d, k, j).unwrap();
                let mut target = CMatrix::zeros(d, d);
                target[(k, j)] = C64::new(1.0, 0.0);
                assert!((recombine(&terms).unwrap() - &target).norm() <= 1e-14);
                let direct = prop.evolve_matrix(&target, 0.7);
                let combined = terms
                    .iter()
                    .fold(CMatrix::zeros(d, d), |acc, (s, c)| acc + prop.evolve(s, 0.7).matrix() * *c);
                assert!(spectral_norm(&(direct - combined)) <= 1e-10);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn unique_estimates_are_admissible_and_consistent(seed in any::<u64>(), d in 2usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = random_hermitian(d, &mut rng);
        let rho = random_density(d, &mut rng);
        let p = exact_gram(&h, &rho, 1.0, 1.0).unwrap();
        let q = build_q(&rho, &propagate(&h, &rho, 1.0, 1.0).unwrap(), 1.0, None, None).unwrap();
        let r = solve_commutator(&p, &q, &SolveOptions::default()).unwrap();
        let m = r.estimate.matrix();
        prop_assert_eq!(m, &m.adjoint());
        prop_assert!((0..d).all(|i| m[(i, i)] == C64::new(0.0, 0.0)));
        if r.outcome == Outcome::Unique {
            prop_assert!(r.residual <= 1e-6);
            prop_assert!(!r.commutes_with_gram || m.norm() == 0.0);
        }
    }
}
