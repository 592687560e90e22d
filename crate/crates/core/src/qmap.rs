//! Construction of the quantum Hamiltonian families whose ground state is
//! the Gibbs state of a classical model.
//!
//! For a classical energy E with per-site local Hamiltonians H_j, the
//! simulated-annealing family is
//!
//! ```text
//! H_q(T) = chi * sum_j ( diag(e^{beta H_j}) - sigma_x^j ),   chi = e^{-beta p},
//! ```
//!
//! which annihilates the Gibbs amplitude vector e^{-beta E / 2} and is of
//! Perron-Frobenius form (non-positive off-diagonal entries), so that state
//! is its unique ground state for T > 0. The extended-quantum-annealing
//! family keeps the diagonal fixed and drives the transverse field:
//! `H~_q(gamma) = chi sum_j e^{beta H_j} - gamma sum_j X_j`, reducing to
//! H_q(T) at gamma = chi. For spin s > 1/2, X_j is the anti-diagonal-ones
//! reflection operator; at the center level X_j contributes on the diagonal.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{
    local_hamiltonian_from_table, ClassicalModel, EnergyKind, Spin, SpinConfig, ThermalPoint,
};
use crate::operator::{ising_decompose, SparseBuilder, SparseOperator, StateVector};

/// How the normalization exponent p was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PMethod {
    /// Exact enumeration of max_j max_sigma |H_j[sigma]|.
    Enumeration,
    /// Certified upper bound from coupling magnitudes (used above the cap).
    CouplingBound,
}

/// Normalization parameters of the mapping: p and chi = e^{-beta p}.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct MapParams {
    pub p: f64,
    pub chi: f64,
    pub beta: f64,
    pub method: PMethod,
}

/// Compute p = max_j max_sigma |H_j[sigma]| and chi = e^{-beta p}.
///
/// Falls back to the coupling-sum upper bound when the basis exceeds the
/// enumeration cap; a larger p only shrinks chi (slower schedules), never
/// breaking correctness.
pub fn compute_map_params(model: &ClassicalModel, point: ThermalPoint) -> Result<MapParams> {
    let (p, method) = match model.energy_table() {
        Ok(energy) => {
            let mut p = 0.0f64;
            for j in 0..model.n_sites() {
                let hj = local_hamiltonian_from_table(model, &energy, j)?;
                p = hj.entries().iter().fold(p, |a, &x| a.max(x.abs()));
            }
            (p, PMethod::Enumeration)
        }
        Err(Error::Capacity { .. }) => (coupling_bound_p(model), PMethod::CouplingBound),
        Err(e) => return Err(e),
    };
    Ok(MapParams {
        p,
        chi: (-point.beta * p).exp(),
        beta: point.beta,
        method,
    })
}

fn coupling_bound_p(model: &ClassicalModel) -> f64 {
    let vmax = match model.kind() {
        EnergyKind::Multilinear => {
            if model.spin() == Spin::HALF {
                1.0
            } else {
                model.spin().as_f64()
            }
        }
        EnergyKind::KroneckerDelta => 1.0,
    };
    let mut p = 0.0f64;
    for j in 0..model.n_sites() {
        let mut s = 0.0;
        for t in model.terms() {
            if t.sites.contains(&j) {
                s += match model.kind() {
                    EnergyKind::Multilinear => t.coeff.abs() * vmax.powi(t.sites.len() as i32),
                    // |delta(a,b) - delta(a,-b)| <= 1, halved by the H_j definition
                    EnergyKind::KroneckerDelta => t.coeff.abs() / 2.0,
                };
            }
        }
        p = p.max(s);
    }
    p
}

/// Precomputed tables for building the quantum families at one thermal point.
pub struct QuantumMap {
    pub params: MapParams,
    /// chi * sum_j e^{beta H_j[sigma]} per rank.
    pub diag: Vec<f64>,
    pub energy: Vec<f64>,
    pub n_sites: usize,
}

impl QuantumMap {
    pub fn new(model: &ClassicalModel, point: ThermalPoint) -> Result<Self> {
        let params = compute_map_params(model, point)?;
        let energy = model.energy_table()?;
        let dim = energy.len();
        let mut diag = vec![0.0; dim];
        for j in 0..model.n_sites() {
            let hj = local_hamiltonian_from_table(model, &energy, j)?;
            for (d, &h) in diag.iter_mut().zip(hj.entries()) {
                let v = params.chi * (point.beta * h).exp();
                if !v.is_finite() {
                    return Err(Error::numerical(format!(
                        "Boltzmann factor overflow in site-{j} table"
                    )));
                }
                *d += v;
            }
        }
        Ok(QuantumMap {
            params,
            diag,
            energy,
            n_sites: model.n_sites(),
        })
    }
}

/// Assemble chi-weighted diagonal plus transverse reflections into a sparse
/// symmetric operator: diag(d) - gamma * sum_j X_j.
pub(crate) fn assemble_transverse(
    model: &ClassicalModel,
    diag: &[f64],
    gamma: f64,
) -> SparseOperator {
    let dim = diag.len();
    let n = model.n_sites();
    let mut b = SparseBuilder::new(dim);
    let mut row: Vec<(usize, f64)> = Vec::with_capacity(n + 1);
    for r in 0..dim {
        row.clear();
        row.push((r, diag[r]));
        for j in 0..n {
            // X_j maps the center level to itself, landing on the diagonal.
            row.push((model.reflect_rank(r, j), -gamma));
        }
        b.push_row(row.iter().copied());
    }
    b.finish(true)
}

/// The SA-family Hamiltonian H_q(T) = chi sum_j (e^{beta H_j} - sigma_x^j).
///
/// Spin-1/2 only; ground energy is exactly zero with the Gibbs vector as the
/// unique ground state (no energy shift is applied).
pub fn build_sa_hamiltonian(model: &ClassicalModel, point: ThermalPoint) -> Result<SparseOperator> {
    if model.spin() != Spin::HALF {
        return Err(Error::unsupported(
            "SA family is defined for spin-1/2; use the EQA family for spin-s",
        ));
    }
    let map = QuantumMap::new(model, point)?;
    Ok(assemble_transverse(model, &map.diag, map.params.chi))
}

/// The EQA-family Hamiltonian H~_q(gamma) = chi sum_j e^{beta H_j}
/// - gamma sum_j X_j, valid for any spin; X_j = sigma_x^j at spin-1/2.
pub fn build_eqa_hamiltonian(
    model: &ClassicalModel,
    point: ThermalPoint,
    gamma: f64,
) -> Result<SparseOperator> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::domain(format!(
            "transverse field must be positive, got {gamma}"
        )));
    }
    let map = QuantumMap::new(model, point)?;
    Ok(assemble_transverse(model, &map.diag, gamma))
}

/// Conventional quantum annealing: H'_q(gamma) = H - gamma sum_j sigma_x^j,
/// with the classical energy itself on the diagonal.
pub fn build_plain_qa(model: &ClassicalModel, gamma: f64) -> Result<SparseOperator> {
    if model.spin() != Spin::HALF {
        return Err(Error::unsupported("plain QA requires spin 1/2"));
    }
    if !(gamma >= 0.0 && gamma.is_finite()) {
        return Err(Error::domain(format!(
            "transverse field must be non-negative, got {gamma}"
        )));
    }
    let energy = model.energy_table()?;
    Ok(assemble_transverse(model, &energy, gamma))
}

/// Which gap-bound family a value belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum GapFamily {
    Sa,
    Qa,
}

/// A certified lower bound on the spectral gap.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct GapBound {
    pub value: f64,
    pub family: GapFamily,
    pub n_sites: usize,
    /// (beta, p) for SA; (c, gamma) for QA.
    pub inputs: (f64, f64),
}

/// Worst-case SA gap bound 2 sqrt(2 pi N) e^{-(beta p + 1) N}.
pub fn gap_bound_sa(n_sites: usize, beta: f64, p: f64) -> GapBound {
    GapBound {
        value: sa_bound_value(n_sites, beta, p),
        family: GapFamily::Sa,
        n_sites,
        inputs: (beta, p),
    }
}

pub fn sa_bound_value(n_sites: usize, beta: f64, p: f64) -> f64 {
    let n = n_sites as f64;
    2.0 * (2.0 * std::f64::consts::PI * n).sqrt() * (-(beta * p + 1.0) * n).exp()
}

/// Worst-case EQA gap bound 2 sqrt(2 pi N) e^{-N} (1+c)^{-N} gamma^N,
/// valid for 0 < gamma < c.
pub fn gap_bound_qa(n_sites: usize, c: f64, gamma: f64) -> Result<GapBound> {
    if !(gamma > 0.0 && gamma < c) {
        return Err(Error::domain(format!(
            "QA gap bound requires 0 < gamma < c, got gamma={gamma}, c={c}"
        )));
    }
    Ok(GapBound {
        value: qa_bound_value(n_sites, c, gamma),
        family: GapFamily::Qa,
        n_sites,
        inputs: (c, gamma),
    })
}

pub fn qa_bound_value(n_sites: usize, c: f64, gamma: f64) -> f64 {
    let n = n_sites as f64;
    2.0 * (2.0 * std::f64::consts::PI * n).sqrt()
        * (-n).exp()
        * (1.0 + c).powf(-n)
        * gamma.powf(n)
}

/// Result of checking the 1D-ring closed form for e^{beta H_j}.
#[derive(Debug, Clone, Serialize)]
pub struct ClosedFormReport {
    pub n_sites: usize,
    pub beta: f64,
    pub coupling: f64,
    /// cosh(beta J) and sinh(beta J).
    pub x: f64,
    pub y: f64,
    pub max_deviation: f64,
    pub passed: bool,
}

/// Decompose e^{beta H_j} for one interior site of a homogeneous Ising ring
/// and compare against the closed form
/// x^2 + xy (sigma_{j-1} sigma_j + sigma_j sigma_{j+1}) + y^2
/// sigma_{j-1} sigma_{j+1}, x = cosh(beta J), y = sinh(beta J).
///
/// A failed comparison is reported, not raised.
pub fn ising_closed_form_check(beta: f64, coupling: f64, n_sites: usize) -> Result<ClosedFormReport> {
    if n_sites < 4 {
        return Err(Error::invalid(
            "closed-form check needs N >= 4 so NN and NNN pairs are distinct",
        ));
    }
    let model = ClassicalModel::ising_ring(n_sites, coupling)?;
    let point = ThermalPoint::from_beta(beta)?;
    let energy = model.energy_table()?;
    let j = 1usize;
    let hj = local_hamiltonian_from_table(&model, &energy, j)?;
    let table = hj.exp_scaled(point.beta)?;
    let poly = ising_decompose(&table, n_sites)?;

    let x = (beta * coupling).cosh();
    let y = (beta * coupling).sinh();
    let pair = |a: usize, b: usize| -> f64 {
        poly.pair_terms
            .get(&(a as u32, b as u32))
            .copied()
            .unwrap_or(0.0)
    };
    let mut dev = (poly.constant - x * x).abs();
    dev = dev.max((pair(0, 1) - x * y).abs());
    dev = dev.max((pair(1, 2) - x * y).abs());
    dev = dev.max((pair(0, 2) - y * y).abs());
    // nothing else may appear
    for (&(a, b), &v) in &poly.pair_terms {
        if !matches!((a, b), (0, 1) | (1, 2) | (0, 2)) {
            dev = dev.max(v.abs());
        }
    }
    for (_, &v) in &poly.higher_terms {
        dev = dev.max(v.abs());
    }
    Ok(ClosedFormReport {
        n_sites,
        beta,
        coupling,
        x,
        y,
        max_deviation: dev,
        passed: dev <= 1e-12,
    })
}

/// Diagnostics from recovering the Markov transition matrix.
#[derive(Debug, Clone, Serialize)]
pub struct MarkovReport {
    /// max_sigma |row sum - 1|; the all-ones vector is a right fixed point.
    pub max_row_sum_deviation: f64,
    pub min_off_diagonal: f64,
    /// May be negative; reported without assertion.
    pub min_diagonal: f64,
    /// max |pi_i M[i,j] - pi_j M[j,i]| over the Gibbs distribution pi.
    pub detailed_balance_residual: f64,
}

/// Recover M_q from H_q(T) = 1 - e^{-beta H/2} M_q e^{beta H/2} by diagonal
/// conjugation: M_q = e^{+beta H/2} (1 - H_q) e^{-beta H/2}.
pub fn recover_markov_matrix(
    model: &ClassicalModel,
    point: ThermalPoint,
) -> Result<(SparseOperator, MarkovReport)> {
    let map = QuantumMap::new(model, point)?;
    let hq = assemble_transverse(model, &map.diag, map.params.chi);
    let dim = hq.dim();
    let energy = &map.energy;

    let mut b = SparseBuilder::new(dim);
    let mut row: Vec<(usize, f64)> = Vec::new();
    for i in 0..dim {
        row.clear();
        row.push((i, 1.0 - map.diag[i]));
        for (jcol, v) in hq.row(i) {
            if jcol != i {
                let conj = (point.beta * (energy[i] - energy[jcol]) / 2.0).exp();
                row.push((jcol, -v * conj));
            }
        }
        b.push_row(row.iter().copied());
    }
    let mq = b.finish(false);

    // stationary weights pi ~ e^{-beta E}, normalized in fixed rank order
    let z: f64 = energy.iter().map(|&e| (-point.beta * e).exp()).sum();
    let pi: Vec<f64> = energy
        .iter()
        .map(|&e| (-point.beta * e).exp() / z)
        .collect();

    let mut max_row_dev = 0.0f64;
    let mut min_off = f64::INFINITY;
    let mut min_diag = f64::INFINITY;
    let mut db = 0.0f64;
    for i in 0..dim {
        let mut sum = 0.0;
        for (j, v) in mq.row(i) {
            sum += v;
            if j == i {
                min_diag = min_diag.min(v);
            } else {
                min_off = min_off.min(v);
                if j > i {
                    let vt = mq.row(j).find(|&(c, _)| c == i).map(|(_, x)| x).unwrap_or(0.0);
                    db = db.max((pi[i] * v - pi[j] * vt).abs());
                }
            }
        }
        max_row_dev = max_row_dev.max((sum - 1.0).abs());
    }
    if !min_off.is_finite() {
        min_off = 0.0;
    }
    Ok((
        mq,
        MarkovReport {
            max_row_sum_deviation: max_row_dev,
            min_off_diagonal: min_off,
            min_diagonal: min_diag,
            detailed_balance_residual: db,
        },
    ))
}

/// Relative annihilation residual ||Op psi|| / ||psi||.
pub fn annihilation_residual(op: &SparseOperator, psi: &StateVector) -> Result<f64> {
    let out = op.apply(psi)?;
    Ok(out.norm() / psi.norm())
}

/// Discrepancy report between the Potts Kronecker-delta energy and the
/// spin-1 polynomial form
/// H = J/2 { S_z S_z' (1 + S_z S_z') - 2 (S_z^2 + S_z'^2) } per bond.
///
/// The delta form is the ground truth used everywhere; the polynomial is
/// evaluated here only to quantify how far it deviates after removing the
/// best additive constant.
#[derive(Debug, Clone, Serialize)]
pub struct PottsPolynomialReport {
    pub max_abs_discrepancy: f64,
    pub constant_shift: f64,
}

pub fn potts_polynomial_discrepancy(model: &ClassicalModel) -> Result<PottsPolynomialReport> {
    if model.kind() != EnergyKind::KroneckerDelta || model.spin() != Spin::ONE {
        return Err(Error::unsupported(
            "polynomial diagnostic is defined for the spin-1 Potts model",
        ));
    }
    let dim = model.dim()?;
    let spin = model.spin();
    let mut diffs = Vec::with_capacity(dim);
    for r in 0..dim {
        let config = SpinConfig::from_rank(r, model.n_sites(), spin);
        let delta_energy = model.evaluate_energy(&config)?;
        let mut poly_energy = 0.0;
        for t in model.terms() {
            let a = spin.value(config.levels[t.sites[0]]);
            let b = spin.value(config.levels[t.sites[1]]);
            poly_energy += t.coeff / 2.0 * (a * b * (1.0 + a * b) - 2.0 * (a * a + b * b));
        }
        diffs.push(delta_energy - poly_energy);
    }
    let shift = diffs.iter().sum::<f64>() / dim as f64;
    let max_abs = diffs
        .iter()
        .fold(0.0f64, |acc, &d| acc.max((d - shift).abs()));
    Ok(PottsPolynomialReport {
        max_abs_discrepancy: max_abs,
        constant_shift: shift,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{gibbs_vector, DiagonalObservable};
    use crate::operator::{embed_site_operator, SiteOperatorKind};

    fn ising2() -> ClassicalModel {
        ClassicalModel::ising(2, &[(0, 1, 1.0)]).unwrap()
    }

    #[test]
    fn map_params_examples() {
        let free = ClassicalModel::new(2, Spin::HALF, vec![], EnergyKind::Multilinear).unwrap();
        let p = compute_map_params(&free, ThermalPoint::from_beta(1.3).unwrap()).unwrap();
        assert_eq!(p.p, 0.0);
        assert_eq!(p.chi, 1.0);

        let m = ising2();
        for beta in [0.4, 1.0, 2.5] {
            let mp = compute_map_params(&m, ThermalPoint::from_beta(beta).unwrap()).unwrap();
            assert_eq!(mp.p, 1.0);
            assert!((mp.chi - (-beta).exp()).abs() < 1e-15);
            assert_eq!(mp.method, PMethod::Enumeration);
        }

        let ring = ClassicalModel::ising_ring(4, 1.0).unwrap();
        let mp = compute_map_params(&ring, ThermalPoint::from_beta(1.0).unwrap()).unwrap();
        assert_eq!(mp.p, 2.0);
        assert!((mp.chi - (-2.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn map_params_boundedness_invariant() {
        // chi * e^{beta * max H_j} <= 1 by construction of p
        let m = ClassicalModel::ising(3, &[(0, 1, 0.8), (1, 2, -1.3), (0, 2, 0.4)]).unwrap();
        let point = ThermalPoint::from_beta(2.0).unwrap();
        let mp = compute_map_params(&m, point).unwrap();
        let energy = m.energy_table().unwrap();
        let mut hmax = 0.0f64;
        for j in 0..3 {
            let hj = local_hamiltonian_from_table(&m, &energy, j).unwrap();
            hmax = hj.entries().iter().fold(hmax, |a, &x| a.max(x));
        }
        assert!(mp.chi * (point.beta * hmax).exp() <= 1.0 + 1e-12);
    }

    #[test]
    fn sa_hamiltonian_free_spin() {
        let free = ClassicalModel::new(1, Spin::HALF, vec![], EnergyKind::Multilinear).unwrap();
        let h = build_sa_hamiltonian(&free, ThermalPoint::from_beta(1.0).unwrap()).unwrap();
        let d = h.to_dense();
        // 1 - sigma_x
        assert_eq!(d[(0, 0)], 1.0);
        assert_eq!(d[(0, 1)], -1.0);
        let eig = nalgebra::SymmetricEigen::new(d);
        let mut ev: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        assert!(ev[0].abs() < 1e-14 && (ev[1] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn sa_hamiltonian_two_site_spectrum_and_annihilation() {
        let m = ising2();
        let point = ThermalPoint::from_beta(1.0).unwrap();
        let h = build_sa_hamiltonian(&m, point).unwrap();
        assert!(h.symmetry_defect() == 0.0);

        // all off-diagonal entries equal -chi
        let chi = (-1.0f64).exp();
        for i in 0..4 {
            for (j, v) in h.row(i) {
                if j != i {
                    assert!((v + chi).abs() < 1e-15);
                }
            }
        }

        let eig = nalgebra::SymmetricEigen::new(h.to_dense());
        let mut ev: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        let e2 = (-2.0f64).exp();
        let expect = [0.0, 2.0 * e2, 2.0, 2.0 + 2.0 * e2];
        for (a, b) in ev.iter().zip(expect.iter()) {
            assert!((a - b).abs() < 1e-12, "{ev:?}");
        }

        let psi = gibbs_vector(&m, point, false).unwrap();
        assert!(annihilation_residual(&h, &psi).unwrap() <= 1e-12);
    }

    #[test]
    fn sa_hamiltonian_high_temperature_limit() {
        // T -> infinity: H_q approx N - sum_j sigma_x^j elementwise
        let m = ClassicalModel::ising_ring(3, 1.0).unwrap();
        let h = build_sa_hamiltonian(&m, ThermalPoint::from_beta(1e-8).unwrap()).unwrap();
        let mut expect = nalgebra::DMatrix::<f64>::identity(8, 8) * 3.0;
        for j in 0..3 {
            expect -= embed_site_operator(SiteOperatorKind::SigmaX, j, 3, Spin::HALF)
                .unwrap()
                .to_dense();
        }
        assert!((h.to_dense() - expect).abs().max() < 1e-6);
    }

    #[test]
    fn sa_hamiltonian_low_temperature_form() {
        // beta p >= 30: off-diagonal part is exactly -chi per entry, so
        // || H_q - chi sum_j diag(e^{beta H_j}) ||_max <= chi * N -> 0.
        let m = ising2();
        let point = ThermalPoint::from_beta(30.0).unwrap();
        let map = QuantumMap::new(&m, point).unwrap();
        let h = build_sa_hamiltonian(&m, point).unwrap();
        let chi = map.params.chi;
        let mut offmax = 0.0f64;
        for i in 0..h.dim() {
            for (j, v) in h.row(i) {
                if j != i {
                    offmax = offmax.max(v.abs());
                }
            }
        }
        assert!(offmax <= chi + 1e-18);
        assert!(chi * m.n_sites() as f64 <= 1e-11);
        for (i, &d) in map.diag.iter().enumerate() {
            let hd: f64 = h.row(i).find(|&(c, _)| c == i).unwrap().1;
            assert_eq!(hd, d);
        }
    }

    #[test]
    fn eqa_reduces_to_sa_at_gamma_chi() {
        let m = ising2();
        let point = ThermalPoint::from_beta(0.7).unwrap();
        let chi = compute_map_params(&m, point).unwrap().chi;
        let sa = build_sa_hamiltonian(&m, point).unwrap().to_dense();
        let eqa = build_eqa_hamiltonian(&m, point, chi).unwrap().to_dense();
        assert!((sa - eqa).abs().max() == 0.0);
    }

    #[test]
    fn eqa_strong_field_ground_state_is_uniform() {
        let m = ising2();
        let point = ThermalPoint::from_beta(1.0).unwrap();
        let h = build_eqa_hamiltonian(&m, point, 1e3).unwrap();
        let eig = nalgebra::SymmetricEigen::new(h.to_dense());
        let mut idx: Vec<usize> = (0..4).collect();
        idx.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let v0 = eig.eigenvectors.column(idx[0]);
        let overlap: f64 = v0.iter().sum::<f64>().abs() / 2.0;
        assert!(1.0 - overlap * overlap <= 1e-3);
    }

    #[test]
    fn plain_qa_examples() {
        let m = ising2();
        // gamma = 0: diagonal is the classical energy, two-fold ground at -1
        let h0 = build_plain_qa(&m, 0.0).unwrap();
        let d = h0.to_dense();
        let mut ev: Vec<f64> = nalgebra::SymmetricEigen::new(d)
            .eigenvalues
            .iter()
            .copied()
            .collect();
        ev.sort_by(f64::total_cmp);
        assert!((ev[0] + 1.0).abs() < 1e-14 && (ev[1] + 1.0).abs() < 1e-14);

        // single site in a field: ground energy -sqrt(h^2 + gamma^2)
        let m1 = ClassicalModel::new(
            1,
            Spin::HALF,
            vec![crate::model::CouplingTerm::new(vec![0], 0.8)],
            EnergyKind::Multilinear,
        )
        .unwrap();
        let h = build_plain_qa(&m1, 0.6).unwrap();
        let mut ev: Vec<f64> = nalgebra::SymmetricEigen::new(h.to_dense())
            .eigenvalues
            .iter()
            .copied()
            .collect();
        ev.sort_by(f64::total_cmp);
        assert!((ev[0] + (0.8f64 * 0.8 + 0.6 * 0.6).sqrt()).abs() < 1e-14);
    }

    #[test]
    fn gap_bound_sa_values() {
        let b = gap_bound_sa(2, 1.0, 1.0);
        assert!((b.value - 0.12985449872052687).abs() < 1e-12);
        let b = gap_bound_sa(1, 1e-12, 5.0);
        assert!((b.value - 2.0 * (2.0 * std::f64::consts::PI).sqrt() * (-1.0f64).exp()).abs() < 1e-9);
        // measured N=2 gap dominates the bound
        assert!(2.0 * (-2.0f64).exp() >= gap_bound_sa(2, 1.0, 1.0).value);
    }

    #[test]
    fn gap_bound_qa_values() {
        let b = gap_bound_qa(1, 1.0, 0.5).unwrap();
        let expect = 2.0 * (2.0 * std::f64::consts::PI).sqrt() * (-1.0f64).exp() * 0.5 * 0.5;
        assert!((b.value - expect).abs() < 1e-12);
        assert!(gap_bound_qa(3, 1.0, 1.0).is_err());
        assert!(gap_bound_qa(3, 1.0, 0.0).is_err());
        // monotone increasing in gamma on (0, c)
        let mut last = 0.0;
        for k in 1..10 {
            let g = 0.1 * k as f64 * 0.9;
            let v = gap_bound_qa(4, 0.9, g.min(0.89)).unwrap().value;
            assert!(v >= last);
            last = v;
        }
    }

    #[test]
    fn closed_form_check_grid() {
        for (beta, j) in [(1.0, 1.0), (0.3, -2.0), (2.0, -1.0)] {
            for n in [4, 6] {
                let r = ising_closed_form_check(beta, j, n).unwrap();
                assert!(r.passed, "beta={beta} J={j} N={n}: dev={}", r.max_deviation);
            }
        }
        // J = 0: x = 1, y = 0, so e^{beta H_j} = 1 and H_q^j = sigma_x - 1
        let r = ising_closed_form_check(1.0, 0.0, 4).unwrap();
        assert!(r.passed && (r.x - 1.0).abs() < 1e-15 && r.y == 0.0);
    }

    #[test]
    fn markov_recovery_free_spin_is_sigma_x() {
        let free = ClassicalModel::new(1, Spin::HALF, vec![], EnergyKind::Multilinear).unwrap();
        let (mq, rep) = recover_markov_matrix(&free, ThermalPoint::from_beta(1.0).unwrap()).unwrap();
        let d = mq.to_dense();
        assert!((d[(0, 1)] - 1.0).abs() < 1e-15 && (d[(1, 0)] - 1.0).abs() < 1e-15);
        assert!(d[(0, 0)].abs() < 1e-15);
        assert!(rep.max_row_sum_deviation <= 1e-12);
        assert!(rep.min_off_diagonal >= 0.0);
    }

    #[test]
    fn markov_recovery_two_site() {
        let m = ising2();
        let point = ThermalPoint::from_beta(1.0).unwrap();
        let (mq, rep) = recover_markov_matrix(&m, point).unwrap();
        assert!(rep.max_row_sum_deviation <= 1e-12);
        assert!(rep.min_off_diagonal >= 0.0);
        assert!(rep.detailed_balance_residual <= 1e-12);

        // off-diagonals are chi e^{-beta (E' - E)/2} on single-flip pairs
        let chi = (-1.0f64).exp();
        let energy = m.energy_table().unwrap();
        for i in 0..4 {
            for (j, v) in mq.row(i) {
                if j != i {
                    let expect = chi * (-point.beta * (energy[j] - energy[i]) / 2.0).exp();
                    assert!((v - expect).abs() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn potts_polynomial_is_inconsistent_with_delta_energy() {
        let m = ClassicalModel::potts_chain(2, Spin::ONE, 1.0).unwrap();
        let rep = potts_polynomial_discrepancy(&m).unwrap();
        // per-bond values {-J, -J, -2J, 0, ...} cannot be shifted onto
        // {J, 0, 0, J, ...}; the residual is order J
        assert!(rep.max_abs_discrepancy > 0.5);
    }

    #[test]
    fn eqa_potts_gibbs_annihilation() {
        let m = ClassicalModel::potts_chain(3, Spin::ONE, 1.0).unwrap();
        let point = ThermalPoint::from_beta(1.0).unwrap();
        let chi = compute_map_params(&m, point).unwrap().chi;
        let h = build_eqa_hamiltonian(&m, point, chi).unwrap();
        let psi = gibbs_vector(&m, point, true).unwrap();
        assert!(annihilation_residual(&h, &psi).unwrap() <= 1e-12);
    }

    #[test]
    fn brute_thermal_energy_matches_ground_expectation_direction() {
        // smoke-level coupling between modules; the full sweep lives in the
        // spectral tests
        let m = ising2();
        let point = ThermalPoint::from_beta(1.0).unwrap();
        let (_, e) = crate::model::brute_thermal(&m, point, &DiagonalObservable::Energy).unwrap();
        assert!((e + 1.0f64.tanh()).abs() < 1e-12);
    }
}
