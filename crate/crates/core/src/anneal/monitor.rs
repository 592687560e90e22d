//! Adiabatic-condition monitor and the commutator identity checks.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::Result;
use crate::model::{ClassicalModel, ThermalPoint};
use crate::operator::StateVector;
use crate::spectral::{dense_spectrum, EigenSolution};

use super::driven::{DrivenFamily, DrivenHamiltonian};

/// Left-hand side of the adiabatic condition at one control point:
/// max_m |<psi_m| dH/dlambda |psi_0>| / Delta_m^2 * |dlambda/dt|.
///
/// For the SA family the reference state is the unnormalized Gibbs vector
/// divided by sqrt(Z), exactly as the condition is written; for the field
/// families it is the normalized instantaneous ground state.
pub fn adiabatic_monitor(
    driven: &DrivenHamiltonian,
    control: f64,
    dcontrol_dt: f64,
) -> Result<f64> {
    let sol = dense_spectrum(&driven.build_sparse(control))?;
    monitor_with_spectrum(driven, control, dcontrol_dt, &sol)
}

/// Monitor evaluation reusing an existing spectrum of H(control).
pub fn monitor_with_spectrum(
    driven: &DrivenHamiltonian,
    control: f64,
    dcontrol_dt: f64,
    sol: &EigenSolution,
) -> Result<f64> {
    if dcontrol_dt == 0.0 {
        return Ok(0.0);
    }
    let psi0 = reference_state(driven, control, sol);
    let dparts = driven.dparts_at(control);
    let mut dh_psi = vec![Complex64::new(0.0, 0.0); driven.dim()];
    driven.apply_parts(&dparts, &psi0, &mut dh_psi);

    let e0 = sol.energies[0];
    let mut worst = 0.0f64;
    for m in 1..sol.energies.len() {
        let gap_m = sol.energies[m] - e0;
        if gap_m <= 0.0 {
            continue;
        }
        let num: f64 = sol.states[m]
            .amplitudes()
            .iter()
            .zip(&dh_psi)
            .map(|(a, b)| a.re * b.re)
            .sum();
        worst = worst.max(num.abs() / (gap_m * gap_m));
    }
    Ok(worst * dcontrol_dt.abs())
}

fn reference_state(
    driven: &DrivenHamiltonian,
    control: f64,
    sol: &EigenSolution,
) -> Vec<Complex64> {
    match driven.family() {
        DrivenFamily::SaTemperature => {
            let beta = 1.0 / control;
            let mut psi: Vec<f64> = driven
                .energy()
                .iter()
                .map(|&e| (-beta * e / 2.0).exp())
                .collect();
            let norm = psi.iter().map(|x| x * x).sum::<f64>().sqrt();
            for x in &mut psi {
                *x /= norm;
            }
            psi.into_iter().map(|x| Complex64::new(x, 0.0)).collect()
        }
        _ => sol.states[0].amplitudes().to_vec(),
    }
}

/// Diagnostics of the commutator identity and its matrix-element corollary.
#[derive(Debug, Clone, Serialize)]
pub struct CommutatorReport {
    /// || dH_q/dT psi - [d(-beta H/2)/dT, H_q] psi || / ||psi||.
    pub commutator_residual: f64,
    /// max_m | |<m|dH_q/dT|psi>| / Delta_m - |<m|H|psi>| / (2 T^2) |.
    pub eq5_max_deviation: f64,
    /// max_m |<m|H|psi>|.
    pub max_matrix_element: f64,
    /// p N sqrt(Z), the worst-case matrix-element bound.
    pub matrix_element_bound: f64,
    /// Operator norm of H (max |E|), the deviation scale.
    pub h_norm: f64,
}

/// Evaluate the translation/commutator identity for the SA family at one
/// thermal point, together with the per-excited-state equality
/// |<m|dH_q/dT|psi>| / Delta_m = |<m|H|psi>| / (2 T^2) and the bound
/// |<m|H|psi>| <= p N sqrt(Z).
pub fn commutator_residual(model: &ClassicalModel, point: ThermalPoint) -> Result<CommutatorReport> {
    let driven = DrivenHamiltonian::sa(model, point)?;
    let temp = point.temperature;
    let dim = driven.dim();

    // unnormalized Gibbs vector
    let psi: Vec<Complex64> = driven
        .energy()
        .iter()
        .map(|&e| Complex64::new((-point.beta * e / 2.0).exp(), 0.0))
        .collect();
    let psi_norm = psi.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();

    let parts = driven.parts_at(temp);
    let dparts = driven.dparts_at(temp);

    // lhs: dH psi
    let mut lhs = vec![Complex64::new(0.0, 0.0); dim];
    driven.apply_parts(&dparts, &psi, &mut lhs);

    // rhs: [G, H_q] psi with G = diag(E) / (2 T^2)
    let gdiag: Vec<f64> = driven.energy().iter().map(|&e| e / (2.0 * temp * temp)).collect();
    let mut hq_psi = vec![Complex64::new(0.0, 0.0); dim];
    driven.apply_parts(&parts, &psi, &mut hq_psi);
    let mut g_hq_psi: Vec<Complex64> = hq_psi
        .iter()
        .zip(&gdiag)
        .map(|(a, &g)| a * g)
        .collect();
    let g_psi: Vec<Complex64> = psi.iter().zip(&gdiag).map(|(a, &g)| a * g).collect();
    let mut hq_g_psi = vec![Complex64::new(0.0, 0.0); dim];
    driven.apply_parts(&parts, &g_psi, &mut hq_g_psi);
    for (a, b) in g_hq_psi.iter_mut().zip(&hq_g_psi) {
        *a -= b;
    }

    let residual = lhs
        .iter()
        .zip(&g_hq_psi)
        .map(|(a, b)| (a - b).norm_sqr())
        .sum::<f64>()
        .sqrt()
        / psi_norm;

    // spectral cross-checks
    let sol = dense_spectrum(&driven.build_sparse(temp))?;
    let e0 = sol.energies[0];
    let mut eq5_dev = 0.0f64;
    let mut max_me = 0.0f64;
    for m in 1..dim {
        let gap_m = sol.energies[m] - e0;
        if gap_m <= 0.0 {
            continue;
        }
        let vm = &sol.states[m];
        let num_dh: f64 = vm
            .amplitudes()
            .iter()
            .zip(&lhs)
            .map(|(a, b)| a.re * b.re)
            .sum();
        let num_h: f64 = vm
            .amplitudes()
            .iter()
            .zip(&psi)
            .zip(driven.energy())
            .map(|((a, b), &e)| a.re * b.re * e)
            .sum();
        eq5_dev = eq5_dev.max((num_dh.abs() / gap_m - num_h.abs() / (2.0 * temp * temp)).abs());
        max_me = max_me.max(num_h.abs());
    }
    let h_norm = driven.energy().iter().fold(0.0f64, |a, &e| a.max(e.abs()));
    Ok(CommutatorReport {
        commutator_residual: residual,
        eq5_max_deviation: eq5_dev,
        max_matrix_element: max_me,
        matrix_element_bound: driven.p() * driven.n_sites() as f64 * psi_norm,
        h_norm,
    })
}

/// Projection of a (real, normalized) vector onto the ground space of a
/// spectrum: sum of squared overlaps with all states within `window` of the
/// lowest energy. Handles exact ground degeneracy.
pub fn ground_space_overlap(sol: &EigenSolution, v: &StateVector, window: f64) -> f64 {
    let e0 = sol.energies[0];
    let mut acc = 0.0;
    for (m, &e) in sol.energies.iter().enumerate() {
        if e - e0 > window {
            break;
        }
        let o = sol.states[m].inner(v).norm();
        acc += o * o;
    }
    acc / v.norm_sqr()
}
