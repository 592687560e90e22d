//! Property tests for the structural invariants.

use proptest::prelude::*;

use quanneal_core::operator::{ising_decompose, ising_recompose, DiagonalOperator};
use quanneal_core::{ClassicalModel, Spin, SpinConfig, ThermalPoint};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rank_values_bijection(n in 1usize..6, two_s in 1u8..4, seed in any::<u64>()) {
        let spin = Spin(two_s);
        let q = spin.levels();
        let dim = q.pow(n as u32);
        let rank = (seed as usize) % dim;
        let c = SpinConfig::from_rank(rank, n, spin);
        prop_assert_eq!(c.levels.len(), n);
        prop_assert!(c.levels.iter().all(|&l| (l as usize) < q));
        prop_assert_eq!(c.rank(spin), rank);
    }

    #[test]
    fn walsh_hadamard_roundtrip(n in 1usize..7, values in proptest::collection::vec(-5.0f64..5.0, 64)) {
        let dim = 1usize << n;
        let table: Vec<f64> = (0..dim).map(|i| values[i % values.len()]).collect();
        let d = DiagonalOperator::new(table.clone()).unwrap();
        let poly = ising_decompose(&d, n).unwrap();
        let back = ising_recompose(&poly, n);
        for (a, b) in table.iter().zip(back.entries()) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn partition_function_decreases_with_beta_after_shift(
        beta1 in 0.1f64..2.0,
        delta in 0.05f64..1.0,
        j in -1.5f64..1.5,
    ) {
        // with min E shifted to zero, Z is non-increasing in beta
        let m = ClassicalModel::ising_ring(4, j).unwrap();
        let energy = m.energy_table().unwrap();
        let emin = energy.iter().cloned().fold(f64::INFINITY, f64::min);
        let z = |beta: f64| -> f64 {
            energy.iter().map(|e| (-(beta) * (e - emin)).exp()).sum()
        };
        let beta2 = beta1 + delta;
        prop_assert!(z(beta2) <= z(beta1) + 1e-12);
    }

    #[test]
    fn gibbs_vector_normalization(beta in 0.1f64..3.0, j in -1.5f64..1.5) {
        let m = ClassicalModel::ising_chain(4, j).unwrap();
        let p = ThermalPoint::from_beta(beta).unwrap();
        let v = quanneal_core::gibbs_vector(&m, p, true).unwrap();
        prop_assert!((v.norm() - 1.0).abs() <= 1e-12);
        prop_assert!(v.amplitudes().iter().all(|a| a.re > 0.0));
    }
}
