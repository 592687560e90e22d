//! Classical spin models on finite graphs and their exhaustive-enumeration
//! oracles.
//!
//! Everything downstream is validated against the quantities computed here:
//! the partition function, thermal expectations, the Gibbs amplitude vector
//! and the per-site local Hamiltonians, all obtained by direct summation
//! over the full configuration basis.
//!
//! Basis convention: configurations are ranked with site 0 as the least
//! significant digit and (2s+1) levels per site. For spin-1/2 the level
//! values are {+1, -1} in level order (level 0 is "up"), matching the usual
//! bit-to-spin identification; for s >= 1 the values run ascending from -s
//! to +s.

use crate::error::{Error, Result};
use crate::operator::{DiagonalOperator, StateVector};

/// Hard cap on enumerated diagonal tables. Larger bases fail loudly instead
/// of being silently subsampled.
pub const ENUMERATION_CAP: usize = 1 << 24;

/// Spin magnitude stored as 2s, so spin-1/2 is `Spin(1)` and spin-1 is
/// `Spin(2)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Spin(pub u8);

impl Spin {
    pub const HALF: Spin = Spin(1);
    pub const ONE: Spin = Spin(2);

    /// Number of levels per site, 2s+1.
    pub fn levels(self) -> usize {
        self.0 as usize + 1
    }

    /// Spin value carried by a level index.
    pub fn value(self, level: u8) -> f64 {
        if self.0 == 1 {
            // Ising convention: sigma = +/-1, level 0 = +1.
            1.0 - 2.0 * level as f64
        } else {
            // sigma in {-s, ..., +s}, levels ascending.
            (2.0 * level as f64 - self.0 as f64) / 2.0
        }
    }

    /// Level index of the reflected value sigma -> -sigma.
    pub fn reflect(self, level: u8) -> u8 {
        self.0 - level
    }

    pub fn as_f64(self) -> f64 {
        self.0 as f64 / 2.0
    }
}

/// One spin configuration: per-site level indices plus its canonical rank.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpinConfig {
    pub levels: Vec<u8>,
}

impl SpinConfig {
    pub fn new(levels: Vec<u8>) -> Self {
        SpinConfig { levels }
    }

    /// Canonical rank: mixed-radix with site 0 least significant.
    pub fn rank(&self, spin: Spin) -> usize {
        let q = spin.levels();
        self.levels
            .iter()
            .rev()
            .fold(0usize, |acc, &l| acc * q + l as usize)
    }

    pub fn from_rank(mut rank: usize, n_sites: usize, spin: Spin) -> Self {
        let q = spin.levels();
        let mut levels = Vec::with_capacity(n_sites);
        for _ in 0..n_sites {
            levels.push((rank % q) as u8);
            rank /= q;
        }
        SpinConfig { levels }
    }
}

/// A single interaction term: coefficient times a product (or Potts bond)
/// over an ordered tuple of distinct sites.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingTerm {
    pub sites: Vec<usize>,
    pub coeff: f64,
}

impl CouplingTerm {
    pub fn new(sites: Vec<usize>, coeff: f64) -> Self {
        CouplingTerm { sites, coeff }
    }
}

/// How the energy functional combines a term with the configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnergyKind {
    /// coeff times the product of site values.
    Multilinear,
    /// Potts bond energy: coeff times delta(sigma_i, sigma_j); arity-2 only.
    KroneckerDelta,
}

/// A classical spin model: site count, spin magnitude, interaction terms.
#[derive(Debug, Clone)]
pub struct ClassicalModel {
    n_sites: usize,
    spin: Spin,
    terms: Vec<CouplingTerm>,
    kind: EnergyKind,
}

impl ClassicalModel {
    pub fn new(
        n_sites: usize,
        spin: Spin,
        terms: Vec<CouplingTerm>,
        kind: EnergyKind,
    ) -> Result<Self> {
        if n_sites == 0 {
            return Err(Error::invalid("model needs at least one site"));
        }
        for t in &terms {
            if t.sites.is_empty() {
                return Err(Error::invalid("coupling term with no sites"));
            }
            if !t.sites.windows(2).all(|w| w[0] < w[1]) {
                return Err(Error::invalid(format!(
                    "term sites {:?} must be strictly increasing",
                    t.sites
                )));
            }
            if *t.sites.last().unwrap() >= n_sites {
                return Err(Error::invalid(format!(
                    "term site {} out of range for {} sites",
                    t.sites.last().unwrap(),
                    n_sites
                )));
            }
            if !t.coeff.is_finite() {
                return Err(Error::invalid("non-finite coupling coefficient"));
            }
            if kind == EnergyKind::KroneckerDelta && t.sites.len() != 2 {
                return Err(Error::invalid(
                    "Kronecker-delta energies require arity-2 terms",
                ));
            }
        }
        Ok(ClassicalModel {
            n_sites,
            spin,
            terms,
            kind,
        })
    }

    /// Spin-1/2 Ising model from explicit (i, j, J) bonds.
    pub fn ising(n_sites: usize, bonds: &[(usize, usize, f64)]) -> Result<Self> {
        let terms = bonds
            .iter()
            .map(|&(i, j, coeff)| {
                let (a, b) = if i < j { (i, j) } else { (j, i) };
                CouplingTerm::new(vec![a, b], coeff)
            })
            .collect();
        ClassicalModel::new(n_sites, Spin::HALF, terms, EnergyKind::Multilinear)
    }

    /// Homogeneous nearest-neighbor Ising ring.
    pub fn ising_ring(n_sites: usize, coupling: f64) -> Result<Self> {
        let bonds: Vec<_> = (0..n_sites)
            .map(|j| (j, (j + 1) % n_sites, coupling))
            .collect();
        ClassicalModel::ising(n_sites, &bonds)
    }

    /// Homogeneous open Ising chain.
    pub fn ising_chain(n_sites: usize, coupling: f64) -> Result<Self> {
        let bonds: Vec<_> = (0..n_sites.saturating_sub(1))
            .map(|j| (j, j + 1, coupling))
            .collect();
        ClassicalModel::ising(n_sites, &bonds)
    }

    /// Potts chain with bond energy J delta(sigma_j, sigma_{j+1}).
    pub fn potts_chain(n_sites: usize, spin: Spin, coupling: f64) -> Result<Self> {
        let terms = (0..n_sites.saturating_sub(1))
            .map(|j| CouplingTerm::new(vec![j, j + 1], coupling))
            .collect();
        ClassicalModel::new(n_sites, spin, terms, EnergyKind::KroneckerDelta)
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn spin(&self) -> Spin {
        self.spin
    }

    pub fn terms(&self) -> &[CouplingTerm] {
        &self.terms
    }

    pub fn kind(&self) -> EnergyKind {
        self.kind
    }

    /// Basis dimension (2s+1)^N, checked against the enumeration cap.
    pub fn dim(&self) -> Result<usize> {
        let q = self.spin.levels() as u128;
        let mut d: u128 = 1;
        for _ in 0..self.n_sites {
            d = d.saturating_mul(q);
            if d > ENUMERATION_CAP as u128 {
                return Err(Error::Capacity {
                    dim: d,
                    cap: ENUMERATION_CAP,
                });
            }
        }
        Ok(d as usize)
    }

    /// Energy of one configuration.
    pub fn evaluate_energy(&self, config: &SpinConfig) -> Result<f64> {
        if config.levels.len() != self.n_sites {
            return Err(Error::DimensionMismatch {
                context: "configuration length",
                expected: self.n_sites,
                actual: config.levels.len(),
            });
        }
        Ok(self.energy_of_levels(&config.levels))
    }

    fn energy_of_levels(&self, levels: &[u8]) -> f64 {
        match self.kind {
            EnergyKind::Multilinear => self
                .terms
                .iter()
                .map(|t| {
                    t.coeff
                        * t.sites
                            .iter()
                            .map(|&s| self.spin.value(levels[s]))
                            .product::<f64>()
                })
                .sum(),
            EnergyKind::KroneckerDelta => self
                .terms
                .iter()
                .map(|t| {
                    if levels[t.sites[0]] == levels[t.sites[1]] {
                        t.coeff
                    } else {
                        0.0
                    }
                })
                .sum(),
        }
    }

    /// Full energy table E[sigma] in rank order.
    pub fn energy_table(&self) -> Result<Vec<f64>> {
        let dim = self.dim()?;
        let q = self.spin.levels();
        let mut levels = vec![0u8; self.n_sites];
        let mut table = Vec::with_capacity(dim);
        for _ in 0..dim {
            table.push(self.energy_of_levels(&levels));
            // increment mixed-radix counter, site 0 least significant
            for l in levels.iter_mut() {
                *l += 1;
                if (*l as usize) < q {
                    break;
                }
                *l = 0;
            }
        }
        Ok(table)
    }

    /// Rank obtained by reflecting site j (sigma_j -> -sigma_j) of `rank`.
    pub fn reflect_rank(&self, rank: usize, j: usize) -> usize {
        let q = self.spin.levels();
        let step = q.pow(j as u32);
        let level = (rank / step) % q;
        let reflected = self.spin.reflect(level as u8) as usize;
        rank - level * step + reflected * step
    }
}

/// Inverse temperature and temperature, k_B = 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThermalPoint {
    pub beta: f64,
    pub temperature: f64,
}

impl ThermalPoint {
    pub fn from_temperature(temperature: f64) -> Result<Self> {
        if !(temperature > 0.0 && temperature.is_finite()) {
            return Err(Error::domain(format!(
                "temperature must be positive and finite, got {temperature}"
            )));
        }
        Ok(ThermalPoint {
            beta: 1.0 / temperature,
            temperature,
        })
    }

    pub fn from_beta(beta: f64) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::domain(format!(
                "beta must be positive and finite, got {beta}"
            )));
        }
        Ok(ThermalPoint {
            beta,
            temperature: 1.0 / beta,
        })
    }
}

/// Diagonal observable over the configuration basis.
#[derive(Debug, Clone)]
pub enum DiagonalObservable {
    Energy,
    /// Sum of site values.
    Magnetization,
    /// Product of the two site values.
    PairCorrelator(usize, usize),
    /// Explicit per-configuration table.
    Custom(Vec<f64>),
}

impl DiagonalObservable {
    /// Materialize the observable as a per-rank table for `model`.
    pub fn table(&self, model: &ClassicalModel) -> Result<Vec<f64>> {
        let dim = model.dim()?;
        let spin = model.spin();
        let q = spin.levels();
        match self {
            DiagonalObservable::Energy => model.energy_table(),
            DiagonalObservable::Magnetization => {
                let mut t = vec![0.0; dim];
                for (r, v) in t.iter_mut().enumerate() {
                    let mut x = r;
                    for _ in 0..model.n_sites() {
                        *v += spin.value((x % q) as u8);
                        x /= q;
                    }
                }
                Ok(t)
            }
            DiagonalObservable::PairCorrelator(i, j) => {
                if *i >= model.n_sites() || *j >= model.n_sites() {
                    return Err(Error::invalid(format!(
                        "pair correlator sites ({i},{j}) out of range"
                    )));
                }
                let (si, sj) = (q.pow(*i as u32), q.pow(*j as u32));
                let mut t = vec![0.0; dim];
                for (r, v) in t.iter_mut().enumerate() {
                    let li = (r / si) % q;
                    let lj = (r / sj) % q;
                    *v = spin.value(li as u8) * spin.value(lj as u8);
                }
                Ok(t)
            }
            DiagonalObservable::Custom(t) => {
                if t.len() != dim {
                    return Err(Error::DimensionMismatch {
                        context: "custom observable table",
                        expected: dim,
                        actual: t.len(),
                    });
                }
                Ok(t.clone())
            }
        }
    }
}

/// Local Hamiltonian H_j[sigma] = (E[sigma] - E[R_j sigma]) / 2, where R_j
/// reflects site j.
///
/// Defined operationally through the reflection rather than by term
/// inspection; this generalizes uniformly to spin-s and makes the spin-flip
/// conjugation identity hold by construction. For multilinear spin-1/2
/// models it coincides with the sum of terms containing site j.
pub fn local_hamiltonian(model: &ClassicalModel, j: usize) -> Result<DiagonalOperator> {
    if j >= model.n_sites() {
        return Err(Error::invalid(format!(
            "site {j} out of range for {} sites",
            model.n_sites()
        )));
    }
    let energy = model.energy_table()?;
    local_hamiltonian_from_table(model, &energy, j)
}

/// Same as [`local_hamiltonian`] but reusing a precomputed energy table.
pub fn local_hamiltonian_from_table(
    model: &ClassicalModel,
    energy: &[f64],
    j: usize,
) -> Result<DiagonalOperator> {
    let entries: Vec<f64> = (0..energy.len())
        .map(|r| (energy[r] - energy[model.reflect_rank(r, j)]) / 2.0)
        .collect();
    DiagonalOperator::new(entries)
}

/// Partition function and thermal expectation by brute-force enumeration.
///
/// Summation runs in ascending rank order so results are bit-reproducible.
pub fn brute_thermal(
    model: &ClassicalModel,
    point: ThermalPoint,
    obs: &DiagonalObservable,
) -> Result<(f64, f64)> {
    let energy = model.energy_table()?;
    let table = obs.table(model)?;
    let mut z = 0.0;
    let mut acc = 0.0;
    for (e, a) in energy.iter().zip(table.iter()) {
        let w = (-point.beta * e).exp();
        z += w;
        acc += w * a;
    }
    if !z.is_finite() || z <= 0.0 {
        return Err(Error::numerical(format!(
            "partition function not finite/positive: {z}"
        )));
    }
    Ok((z, acc / z))
}

/// Gibbs amplitude vector with entries e^{-beta E[sigma] / 2}.
pub fn gibbs_vector(
    model: &ClassicalModel,
    point: ThermalPoint,
    normalized: bool,
) -> Result<StateVector> {
    let energy = model.energy_table()?;
    let amps: Vec<f64> = energy.iter().map(|e| (-point.beta * e / 2.0).exp()).collect();
    let mut v = StateVector::from_real(&amps);
    if normalized {
        let n = v.norm();
        if n == 0.0 || !n.is_finite() {
            return Err(Error::numerical("Gibbs vector norm not finite"));
        }
        v.scale(1.0 / n);
    }
    Ok(v)
}

/// Scalar residual of the spin-flip conjugation identity:
/// max over j and sigma of |E[R_j sigma] - (E[sigma] - 2 H_j[sigma])|.
///
/// Algebraically zero given the reflection definition of H_j; anything above
/// rounding noise indicates a construction bug.
pub fn flip_identity_residual(model: &ClassicalModel, _point: ThermalPoint) -> Result<f64> {
    let energy = model.energy_table()?;
    let mut worst = 0.0f64;
    for j in 0..model.n_sites() {
        let hj = local_hamiltonian_from_table(model, &energy, j)?;
        for (r, e) in energy.iter().enumerate() {
            let lhs = energy[model.reflect_rank(r, j)];
            let rhs = e - 2.0 * hj.entries()[r];
            worst = worst.max((lhs - rhs).abs());
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_site_ising() -> ClassicalModel {
        ClassicalModel::ising(2, &[(0, 1, 1.0)]).unwrap()
    }

    #[test]
    fn energy_single_term_products() {
        let m = two_site_ising();
        assert_eq!(
            m.evaluate_energy(&SpinConfig::new(vec![0, 0])).unwrap(),
            1.0
        );
        // (+1, -1)
        assert_eq!(
            m.evaluate_energy(&SpinConfig::new(vec![0, 1])).unwrap(),
            -1.0
        );
    }

    #[test]
    fn energy_potts_delta() {
        let m = ClassicalModel::potts_chain(2, Spin::ONE, 1.0).unwrap();
        assert_eq!(
            m.evaluate_energy(&SpinConfig::new(vec![0, 0])).unwrap(),
            1.0
        );
        assert_eq!(
            m.evaluate_energy(&SpinConfig::new(vec![1, 0])).unwrap(),
            0.0
        );
    }

    #[test]
    fn energy_dimension_mismatch_rejected() {
        let m = two_site_ising();
        assert!(m.evaluate_energy(&SpinConfig::new(vec![0])).is_err());
    }

    #[test]
    fn rank_roundtrip_small() {
        for spin in [Spin::HALF, Spin::ONE] {
            let n = 4;
            let q = spin.levels();
            for r in 0..q.pow(n as u32) {
                let c = SpinConfig::from_rank(r, n, spin);
                assert_eq!(c.rank(spin), r);
            }
        }
    }

    #[test]
    fn local_hamiltonian_two_site() {
        let m = two_site_ising();
        let h1 = local_hamiltonian(&m, 1).unwrap();
        // H_1[(+,+)] = (1 - (-1))/2 = 1
        assert_eq!(h1.entries()[0], 1.0);
        assert_eq!(h1.entries()[1], -1.0);
    }

    #[test]
    fn local_hamiltonian_untouched_site_is_zero() {
        let m = ClassicalModel::ising(3, &[(0, 1, 0.7)]).unwrap();
        let h2 = local_hamiltonian(&m, 2).unwrap();
        assert!(h2.entries().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn local_hamiltonian_ring_bound() {
        // 1D ring: |H_j| <= 2|J| with the max attained.
        let m = ClassicalModel::ising_ring(4, -1.5).unwrap();
        let h = local_hamiltonian(&m, 2).unwrap();
        let max = h.entries().iter().fold(0.0f64, |a, &x| a.max(x.abs()));
        assert!((max - 3.0).abs() < 1e-14);
    }

    #[test]
    fn brute_thermal_free_model() {
        let m = ClassicalModel::new(1, Spin::HALF, vec![], EnergyKind::Multilinear).unwrap();
        let p = ThermalPoint::from_beta(2.3).unwrap();
        let (z, a) = brute_thermal(&m, p, &DiagonalObservable::Custom(vec![4.5, 4.5])).unwrap();
        assert!((z - 2.0).abs() < 1e-15);
        assert!((a - 4.5).abs() < 1e-15);
    }

    #[test]
    fn brute_thermal_two_site_closed_forms() {
        let m = two_site_ising();
        for beta in [0.2, 1.0, 3.0] {
            let p = ThermalPoint::from_beta(beta).unwrap();
            let (z, corr) =
                brute_thermal(&m, p, &DiagonalObservable::PairCorrelator(0, 1)).unwrap();
            let z_exact = 2.0 * (-beta).exp() + 2.0 * beta.exp();
            assert!((z - z_exact).abs() < 1e-12 * z_exact);
            assert!((corr + beta.tanh()).abs() < 1e-13);
        }
    }

    #[test]
    fn gibbs_vector_rank_order_and_norm() {
        let m = two_site_ising();
        let p = ThermalPoint::from_beta(1.0).unwrap();
        let v = gibbs_vector(&m, p, false).unwrap();
        let expect = [(-0.5f64).exp(), 0.5f64.exp(), 0.5f64.exp(), (-0.5f64).exp()];
        for (a, e) in v.amplitudes().iter().zip(expect.iter()) {
            assert!((a.re - e).abs() < 1e-15 && a.im == 0.0);
        }
        // squared norm of the unnormalized vector equals Z
        let (z, _) = brute_thermal(&m, p, &DiagonalObservable::Energy).unwrap();
        assert!((v.norm_sqr() - z).abs() < 1e-12);

        let vn = gibbs_vector(&m, p, true).unwrap();
        assert!((vn.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gibbs_vector_uniform_for_free_spin() {
        let m = ClassicalModel::new(1, Spin::HALF, vec![], EnergyKind::Multilinear).unwrap();
        let p = ThermalPoint::from_temperature(1.0).unwrap();
        let v = gibbs_vector(&m, p, true).unwrap();
        let s = 0.5f64.sqrt();
        assert!(v.amplitudes().iter().all(|a| (a.re - s).abs() < 1e-15));
    }

    #[test]
    fn flip_identity_exact() {
        let p = ThermalPoint::from_beta(1.0).unwrap();
        assert_eq!(flip_identity_residual(&two_site_ising(), p).unwrap(), 0.0);

        let free = ClassicalModel::new(3, Spin::HALF, vec![], EnergyKind::Multilinear).unwrap();
        assert_eq!(flip_identity_residual(&free, p).unwrap(), 0.0);

        let potts = ClassicalModel::potts_chain(3, Spin::ONE, 1.0).unwrap();
        assert!(flip_identity_residual(&potts, p).unwrap() <= 1e-12);
    }

    #[test]
    fn energy_derivative_of_log_z() {
        // <E> = -d ln Z / d beta, central difference at h = 1e-4.
        let m = ClassicalModel::ising(4, &[(0, 1, 0.8), (1, 2, -0.6), (0, 3, 0.3)]).unwrap();
        let beta = 0.9;
        let h = 1e-4;
        let z_at = |b: f64| {
            let p = ThermalPoint::from_beta(b).unwrap();
            brute_thermal(&m, p, &DiagonalObservable::Energy)
                .unwrap()
                .0
        };
        let (_, e_mean) = brute_thermal(
            &m,
            ThermalPoint::from_beta(beta).unwrap(),
            &DiagonalObservable::Energy,
        )
        .unwrap();
        let deriv = -(z_at(beta + h).ln() - z_at(beta - h).ln()) / (2.0 * h);
        assert!(
            (deriv - e_mean).abs() < 1e-6,
            "finite difference {deriv} vs <E> {e_mean}"
        );
    }

    #[test]
    fn capacity_error_beyond_cap() {
        let m = ClassicalModel::new(25, Spin::HALF, vec![], EnergyKind::Multilinear).unwrap();
        assert!(matches!(m.dim(), Err(Error::Capacity { .. })));
    }

    #[test]
    fn invalid_terms_rejected() {
        assert!(ClassicalModel::new(
            2,
            Spin::HALF,
            vec![CouplingTerm::new(vec![1, 0], 1.0)],
            EnergyKind::Multilinear
        )
        .is_err());
        assert!(ClassicalModel::new(
            2,
            Spin::HALF,
            vec![CouplingTerm::new(vec![0, 2], 1.0)],
            EnergyKind::Multilinear
        )
        .is_err());
        assert!(ClassicalModel::new(
            3,
            Spin::ONE,
            vec![CouplingTerm::new(vec![0], 1.0)],
            EnergyKind::KroneckerDelta
        )
        .is_err());
    }

    #[test]
    fn thermal_point_validation() {
        assert!(ThermalPoint::from_temperature(-1.0).is_err());
        assert!(ThermalPoint::from_beta(0.0).is_err());
        let p = ThermalPoint::from_temperature(2.0).unwrap();
        assert_eq!(p.beta, 0.5);
    }
}
