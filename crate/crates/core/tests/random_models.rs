//! Randomized cross-module sweeps: every identity and bound the
//! construction promises, checked over arbitrary small models.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use quanneal_core::anneal::commutator_residual;
use quanneal_core::qmap::annihilation_residual;
use quanneal_core::spectral::dense_spectrum;
use quanneal_core::{
    brute_thermal, build_eqa_hamiltonian, build_sa_hamiltonian, compute_map_params,
    flip_identity_residual, gap_bound_qa, gap_bound_sa, gibbs_vector, ground_expectation,
    recover_markov_matrix, ClassicalModel, CouplingTerm, DiagonalObservable, EnergyKind, Spin,
    ThermalPoint,
};

/// Random spin-1/2 model with up to arity-3 terms and coefficients in
/// [-1, 1].
fn random_model(rng: &mut ChaCha12Rng, max_sites: usize) -> ClassicalModel {
    let n = rng.random_range(2..=max_sites);
    let n_terms = rng.random_range(1..=2 * n);
    let mut terms = Vec::new();
    for _ in 0..n_terms {
        let arity = rng.random_range(1..=3.min(n));
        let mut sites: Vec<usize> = Vec::new();
        while sites.len() < arity {
            let s = rng.random_range(0..n);
            if !sites.contains(&s) {
                sites.push(s);
            }
        }
        sites.sort_unstable();
        terms.push(CouplingTerm::new(sites, rng.random_range(-1.0..1.0)));
    }
    ClassicalModel::new(n, Spin::HALF, terms, EnergyKind::Multilinear).unwrap()
}

#[test]
fn flip_identity_on_random_models() {
    let mut rng = ChaCha12Rng::seed_from_u64(101);
    for _ in 0..50 {
        let m = random_model(&mut rng, 6);
        let point = ThermalPoint::from_beta(rng.random_range(0.1..3.0)).unwrap();
        assert!(flip_identity_residual(&m, point).unwrap() <= 1e-12);
    }
}

#[test]
fn gibbs_annihilation_on_random_models() {
    let mut rng = ChaCha12Rng::seed_from_u64(202);
    for trial in 0..50 {
        let m = random_model(&mut rng, 6);
        let point = ThermalPoint::from_beta(rng.random_range(0.1..3.0)).unwrap();
        let h = build_sa_hamiltonian(&m, point).unwrap();
        let psi = gibbs_vector(&m, point, false).unwrap();
        let r = annihilation_residual(&h, &psi).unwrap();
        assert!(r <= 1e-10, "trial {trial}: residual {r}");
    }
}

#[test]
fn gap_bounds_hold_on_random_models() {
    let mut rng = ChaCha12Rng::seed_from_u64(303);
    for trial in 0..30 {
        let m = random_model(&mut rng, 5);
        let beta = *[0.2, 1.0, 3.0]
            .get(rng.random_range(0..3))
            .unwrap();
        let point = ThermalPoint::from_beta(beta).unwrap();
        let params = compute_map_params(&m, point).unwrap();

        let h = build_sa_hamiltonian(&m, point).unwrap();
        let sol = dense_spectrum(&h).unwrap();
        let bound = gap_bound_sa(m.n_sites(), beta, params.p).value;
        assert!(
            sol.gap() >= bound,
            "trial {trial}: SA gap {} < bound {bound}",
            sol.gap()
        );

        // EQA family over a field grid with c at the grid start
        let c = (2.0 * params.chi).max(0.2);
        for k in 1..=6 {
            let gamma = c * k as f64 / 7.0;
            let hg = build_eqa_hamiltonian(&m, point, gamma).unwrap();
            let gap = dense_spectrum(&hg).unwrap().gap();
            let b = gap_bound_qa(m.n_sites(), c, gamma).unwrap().value;
            assert!(
                gap >= b,
                "trial {trial}: EQA gap {gap} < bound {b} at gamma {gamma}"
            );
        }
    }
}

#[test]
fn ground_state_thermal_equivalence_on_random_models() {
    let mut rng = ChaCha12Rng::seed_from_u64(404);
    for _ in 0..25 {
        let m = random_model(&mut rng, 5);
        let point = ThermalPoint::from_beta(rng.random_range(0.2..2.0)).unwrap();
        let h = build_sa_hamiltonian(&m, point).unwrap();
        let sol = dense_spectrum(&h).unwrap();
        let v0 = &sol.states[0];

        let mut observables = vec![DiagonalObservable::Energy, DiagonalObservable::Magnetization];
        for i in 0..m.n_sites() {
            for j in (i + 1)..m.n_sites() {
                observables.push(DiagonalObservable::PairCorrelator(i, j));
            }
        }
        for obs in &observables {
            let (_, exact) = brute_thermal(&m, point, obs).unwrap();
            let table = obs.table(&m).unwrap();
            let through_ground = ground_expectation(v0, &table).unwrap();
            assert!(
                (through_ground - exact).abs() <= 1e-9,
                "observable mismatch: {through_ground} vs {exact}"
            );
        }
    }
}

#[test]
fn markov_recovery_on_random_models() {
    let mut rng = ChaCha12Rng::seed_from_u64(505);
    for _ in 0..30 {
        let m = random_model(&mut rng, 5);
        let point = ThermalPoint::from_beta(rng.random_range(0.2..2.0)).unwrap();
        let (_, rep) = recover_markov_matrix(&m, point).unwrap();
        assert!(rep.max_row_sum_deviation <= 1e-10);
        assert!(rep.min_off_diagonal >= 0.0);
        assert!(rep.detailed_balance_residual <= 1e-10);
    }
}

#[test]
fn commutator_and_matrix_element_bound_on_random_models() {
    let mut rng = ChaCha12Rng::seed_from_u64(606);
    for _ in 0..20 {
        let m = random_model(&mut rng, 5);
        let point = ThermalPoint::from_beta(rng.random_range(0.2..2.0)).unwrap();
        let r = commutator_residual(&m, point).unwrap();
        assert!(r.commutator_residual <= 1e-9);
        assert!(r.eq5_max_deviation <= 1e-8 * r.h_norm.max(1.0));
        assert!(r.max_matrix_element <= r.matrix_element_bound * (1.0 + 1e-10));
    }
}

#[test]
fn ground_state_positivity_and_uniqueness() {
    let mut rng = ChaCha12Rng::seed_from_u64(707);
    for _ in 0..20 {
        let m = random_model(&mut rng, 5);
        let point = ThermalPoint::from_beta(rng.random_range(0.2..2.0)).unwrap();
        let h = build_sa_hamiltonian(&m, point).unwrap();
        let sol = dense_spectrum(&h).unwrap();
        assert!(sol.gap() > 0.0);
        // sign-fix and check strict entrywise positivity
        let v0 = &sol.states[0];
        let total: f64 = v0.amplitudes().iter().map(|a| a.re).sum();
        let sign = if total >= 0.0 { 1.0 } else { -1.0 };
        for a in v0.amplitudes() {
            assert!(sign * a.re >= 1e-300);
        }
    }
}
