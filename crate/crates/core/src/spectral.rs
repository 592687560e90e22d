//! Eigensolvers and ground-state verification.
//!
//! Two routes: full dense diagonalization for small bases (the oracle), and
//! an iterative Krylov scheme with full reorthogonalization for the lowest
//! two eigenpairs of larger sparse operators. The iterative start vector is
//! the normalized all-ones vector, which has guaranteed positive overlap
//! with the Perron-Frobenius ground state of the Hamiltonians built here,
//! so it can never start orthogonal to the target.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{gibbs_vector, ClassicalModel, ThermalPoint};
use crate::operator::{SparseOperator, StateVector};
use crate::qmap::build_sa_hamiltonian;

/// Dense-diagonalization cap.
pub const DENSE_CAP: usize = 4096;

/// Full spectrum of a symmetric operator.
#[derive(Debug, Clone)]
pub struct EigenSolution {
    /// Ascending eigenvalues.
    pub energies: Vec<f64>,
    /// Matching orthonormal eigenvectors (real, stored as state vectors).
    pub states: Vec<StateVector>,
    /// Per-pair ||H v - E v||.
    pub residuals: Vec<f64>,
}

impl EigenSolution {
    pub fn gap(&self) -> f64 {
        if self.energies.len() > 1 {
            self.energies[1] - self.energies[0]
        } else {
            0.0
        }
    }
}

/// Dense real-symmetric spectrum, ascending, with residual checks.
pub fn dense_spectrum(op: &SparseOperator) -> Result<EigenSolution> {
    if op.dim() > DENSE_CAP {
        return Err(Error::Capacity {
            dim: op.dim() as u128,
            cap: DENSE_CAP,
        });
    }
    if !op.is_symmetric() {
        return Err(Error::invalid("dense_spectrum requires a symmetric operator"));
    }
    if op.dim() <= 512 {
        let scale = op_scale(op).max(1e-300);
        let defect = op.symmetry_defect();
        if defect > 1e-12 * scale {
            return Err(Error::invalid(format!(
                "operator flagged symmetric but has symmetry defect {defect:.3e}"
            )));
        }
    }
    let dense = op.to_dense();
    let eig = nalgebra::SymmetricEigen::new(dense);
    let dim = op.dim();
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));

    let mut energies = Vec::with_capacity(dim);
    let mut states = Vec::with_capacity(dim);
    let mut residuals = Vec::with_capacity(dim);
    for &k in &order {
        let e = eig.eigenvalues[k];
        let v: Vec<f64> = eig.eigenvectors.column(k).iter().copied().collect();
        let hv = op.apply_real(&v)?;
        let res = hv
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - e * b).powi(2))
            .sum::<f64>()
            .sqrt();
        energies.push(e);
        states.push(StateVector::from_real(&v));
        residuals.push(res);
    }
    Ok(EigenSolution {
        energies,
        states,
        residuals,
    })
}

fn op_scale(op: &SparseOperator) -> f64 {
    // infinity norm, a cheap spectral bound
    (0..op.dim())
        .map(|i| op.row(i).map(|(_, v)| v.abs()).sum::<f64>())
        .fold(0.0f64, f64::max)
}

/// Lowest two eigenpairs of a symmetric operator.
#[derive(Debug, Clone)]
pub struct ExtremalPair {
    pub e0: f64,
    pub e1: f64,
    pub v0: Vec<f64>,
    pub v1: Vec<f64>,
    pub residuals: (f64, f64),
    /// Set when e1 - e0 <= 10 * tol.
    pub degenerate: bool,
}

/// Iterative extremal eigensolver: Krylov subspace grown from the all-ones
/// vector with full reorthogonalization, restarted by keeping the lowest
/// Ritz vectors when the basis fills up.
///
/// Residuals of both returned pairs are at most `tol`; non-convergence is a
/// hard error carrying the best residual reached.
pub fn extremal_pair(op: &SparseOperator, tol: f64) -> Result<ExtremalPair> {
    if !op.is_symmetric() {
        return Err(Error::invalid("extremal_pair requires a symmetric operator"));
    }
    let dim = op.dim();
    if dim < 2 {
        return Err(Error::invalid("extremal_pair needs dimension >= 2"));
    }
    let basis_cap = dim.min(96);
    let keep = 8.min(dim);
    let max_applies = 20_000usize;

    // basis vectors and their images under the operator
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(basis_cap);
    let mut images: Vec<Vec<f64>> = Vec::with_capacity(basis_cap);
    // projected matrix, row-major (small, dense, symmetric)
    let mut proj: Vec<f64> = Vec::new();

    let start = vec![1.0 / (dim as f64).sqrt(); dim];
    push_vector(op, &mut basis, &mut images, &mut proj, start)?;

    // Second deterministic direction without any lattice symmetry, so the
    // search space is never confined to the symmetry sector of the all-ones
    // vector (whose orthogonal complement can contain the first excited
    // state).
    let mut generic: Vec<f64> = (0..dim)
        .map(|i| ((i as f64 + 1.0) * 0.618_033_988_749_895).fract() - 0.5)
        .collect();
    if orthonormalize_into(&basis, &mut generic) {
        push_vector(op, &mut basis, &mut images, &mut proj, generic)?;
    }

    let mut applies = 2usize;
    let mut best_res = f64::INFINITY;
    let mut fallback_dir = 0usize;

    loop {
        let m = basis.len();
        let (theta, u) = small_symmetric_eig(&proj, m);

        // assemble the two lowest Ritz pairs and their true residuals
        let mut pairs: Vec<(f64, Vec<f64>, f64)> = Vec::with_capacity(2);
        for k in 0..2.min(m) {
            let y = combine(&basis, &u[k]);
            let hy = combine(&images, &u[k]);
            let res = hy
                .iter()
                .zip(&y)
                .map(|(a, b)| (a - theta[k] * b).powi(2))
                .sum::<f64>()
                .sqrt();
            pairs.push((theta[k], y, res));
        }
        if pairs.len() == 2 {
            let worst = pairs[0].2.max(pairs[1].2);
            best_res = best_res.min(worst);
            if worst <= tol {
                let (e0, v0, r0) = pairs.remove(0);
                let (e1, v1, r1) = pairs.remove(0);
                return Ok(ExtremalPair {
                    e0,
                    e1,
                    v0,
                    v1,
                    residuals: (r0, r1),
                    degenerate: (e1 - e0) <= 10.0 * tol,
                });
            }
        }
        if applies >= max_applies {
            return Err(Error::numerical(format!(
                "extremal_pair did not converge: best residual {best_res:.3e} > tol {tol:.3e}"
            )));
        }

        if m == basis_cap {
            // thick restart: keep the lowest Ritz vectors as the new basis
            let kept: Vec<Vec<f64>> = (0..keep).map(|k| combine(&basis, &u[k])).collect();
            let kept_images: Vec<Vec<f64>> = (0..keep).map(|k| combine(&images, &u[k])).collect();
            basis = kept;
            images = kept_images;
            proj = vec![0.0; keep * keep];
            for i in 0..keep {
                proj[i * keep + i] = theta[i];
            }
        }

        // next direction: residual of the lowest unconverged Ritz pair,
        // orthogonalized against the basis; fall back to coordinate vectors
        // if it vanishes (invariant subspace hit)
        let seed_pair = pairs
            .iter()
            .find(|p| p.2 > tol)
            .unwrap_or_else(|| pairs.last().unwrap());
        let mut w: Vec<f64> = {
            let y = &seed_pair.1;
            let hy_minus: Vec<f64> = {
                let hy = op.apply_real(y)?;
                applies += 1;
                hy.iter()
                    .zip(y)
                    .map(|(a, b)| a - seed_pair.0 * b)
                    .collect()
            };
            hy_minus
        };
        if !orthonormalize_into(&basis, &mut w) {
            let mut found = false;
            while fallback_dir < dim {
                let mut e = vec![0.0; dim];
                e[fallback_dir] = 1.0;
                fallback_dir += 1;
                if orthonormalize_into(&basis, &mut e) {
                    w = e;
                    found = true;
                    break;
                }
            }
            if !found {
                // full space spanned: the Ritz pairs are exact
                continue;
            }
        }
        push_vector(op, &mut basis, &mut images, &mut proj, w)?;
        applies += 1;
    }
}

/// Append a (already normalized, orthogonal) vector: compute its image and
/// extend the projected matrix by one row/column.
fn push_vector(
    op: &SparseOperator,
    basis: &mut Vec<Vec<f64>>,
    images: &mut Vec<Vec<f64>>,
    proj: &mut Vec<f64>,
    v: Vec<f64>,
) -> Result<()> {
    let z = op.apply_real(&v)?;
    let m = basis.len();
    let mut grown = vec![0.0; (m + 1) * (m + 1)];
    for i in 0..m {
        for j in 0..m {
            grown[i * (m + 1) + j] = proj[i * m + j];
        }
    }
    for (i, b) in basis.iter().enumerate() {
        let s = dot(b, &z);
        grown[i * (m + 1) + m] = s;
        grown[m * (m + 1) + i] = s;
    }
    grown[m * (m + 1) + m] = dot(&v, &z);
    *proj = grown;
    basis.push(v);
    images.push(z);
    Ok(())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn combine(vectors: &[Vec<f64>], weights: &[f64]) -> Vec<f64> {
    let dim = vectors[0].len();
    let mut out = vec![0.0; dim];
    for (v, &w) in vectors.iter().zip(weights) {
        if w != 0.0 {
            for (o, x) in out.iter_mut().zip(v) {
                *o += w * x;
            }
        }
    }
    out
}

/// Two-pass Gram-Schmidt; returns false when the remainder is numerically
/// zero (vector lies in the span).
fn orthonormalize_into(basis: &[Vec<f64>], w: &mut Vec<f64>) -> bool {
    let initial = dot(w, w).sqrt();
    if initial == 0.0 {
        return false;
    }
    for _ in 0..2 {
        for b in basis {
            let c = dot(b, w);
            for (x, y) in w.iter_mut().zip(b) {
                *x -= c * y;
            }
        }
    }
    let n = dot(w, w).sqrt();
    if n <= 1e-10 * initial.max(1.0) {
        return false;
    }
    for x in w.iter_mut() {
        *x /= n;
    }
    true
}

/// Dense symmetric eigensolve of the small projected matrix; returns
/// ascending eigenvalues and matching eigenvector columns.
fn small_symmetric_eig(proj: &[f64], m: usize) -> (Vec<f64>, Vec<Vec<f64>>) {
    let a = nalgebra::DMatrix::from_fn(m, m, |i, j| proj[i * m + j]);
    let eig = nalgebra::SymmetricEigen::new(a);
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&x, &y| eig.eigenvalues[x].total_cmp(&eig.eigenvalues[y]));
    let theta: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let u: Vec<Vec<f64>> = order
        .iter()
        .map(|&k| eig.eigenvectors.column(k).iter().copied().collect())
        .collect();
    (theta, u)
}

/// Ground-state verification summary for the SA family.
#[derive(Debug, Clone, Serialize)]
pub struct GroundStateReport {
    pub ground_energy: f64,
    pub gap: f64,
    pub overlap_with_gibbs: f64,
    /// Minimum entry of the sign-fixed ground vector; strict positivity is
    /// the Perron-Frobenius signature.
    pub positivity_min_entry: f64,
    pub degenerate_flag: bool,
}

/// Build the SA Hamiltonian, solve for the extremal pair, and compare the
/// ground state against the normalized Gibbs vector.
pub fn verify_gibbs_ground(model: &ClassicalModel, point: ThermalPoint) -> Result<GroundStateReport> {
    let h = build_sa_hamiltonian(model, point)?;
    let tol = 1e-11 * op_scale(&h).max(1.0);
    let pair = extremal_pair(&h, tol)?;
    let gibbs = gibbs_vector(model, point, true)?;
    let overlap = {
        let dotp: f64 = pair
            .v0
            .iter()
            .zip(gibbs.amplitudes())
            .map(|(a, b)| a * b.re)
            .sum();
        dotp * dotp / dot(&pair.v0, &pair.v0)
    };
    // global sign fix: align with the (positive) Gibbs vector
    let sign = {
        let s: f64 = pair.v0.iter().sum();
        if s >= 0.0 {
            1.0
        } else {
            -1.0
        }
    };
    let min_entry = pair
        .v0
        .iter()
        .map(|&x| sign * x)
        .fold(f64::INFINITY, f64::min);
    Ok(GroundStateReport {
        ground_energy: pair.e0,
        gap: pair.e1 - pair.e0,
        overlap_with_gibbs: overlap,
        positivity_min_entry: min_entry,
        degenerate_flag: pair.degenerate,
    })
}

/// <v|A|v> / <v|v> for a diagonal observable table.
pub fn ground_expectation(state: &StateVector, table: &[f64]) -> Result<f64> {
    if state.dim() != table.len() {
        return Err(Error::DimensionMismatch {
            context: "ground expectation",
            expected: table.len(),
            actual: state.dim(),
        });
    }
    let norm_sqr = state.norm_sqr();
    if norm_sqr <= 0.0 || !norm_sqr.is_finite() {
        return Err(Error::numerical("zero-norm state"));
    }
    let acc: f64 = state
        .amplitudes()
        .iter()
        .zip(table)
        .map(|(a, &t)| a.norm_sqr() * t)
        .sum();
    Ok(acc / norm_sqr)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{brute_thermal, DiagonalObservable, Spin};
    use crate::operator::{embed_site_operator, SiteOperatorKind, SparseBuilder};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn diag_op(entries: &[f64]) -> SparseOperator {
        let mut b = SparseBuilder::new(entries.len());
        for (i, &e) in entries.iter().enumerate() {
            b.push_row([(i, e)]);
        }
        b.finish(true)
    }

    #[test]
    fn dense_one_minus_sigma_x() {
        let sx = embed_site_operator(SiteOperatorKind::SigmaX, 0, 1, Spin::HALF).unwrap();
        let mut b = SparseBuilder::new(2);
        for i in 0..2 {
            let mut row: Vec<(usize, f64)> = vec![(i, 1.0)];
            row.extend(sx.row(i).map(|(j, v)| (j, -v)));
            b.push_row(row);
        }
        let op = b.finish(true);
        let sol = dense_spectrum(&op).unwrap();
        assert!(sol.energies[0].abs() < 1e-14);
        assert!((sol.energies[1] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn dense_two_site_sa_spectrum_and_trace() {
        let m = ClassicalModel::ising(2, &[(0, 1, 1.0)]).unwrap();
        let op = build_sa_hamiltonian(&m, ThermalPoint::from_beta(1.0).unwrap()).unwrap();
        let sol = dense_spectrum(&op).unwrap();
        let e2 = (-2.0f64).exp();
        for (a, b) in sol.energies.iter().zip([0.0, 2.0 * e2, 2.0, 2.0 + 2.0 * e2]) {
            assert!((a - b).abs() < 1e-12);
        }
        let trace: f64 = op.diagonal().iter().sum();
        let esum: f64 = sol.energies.iter().sum();
        assert!((trace - esum).abs() < 1e-9);
        for r in &sol.residuals {
            assert!(*r <= 1e-10 * 6.0);
        }
        // orthonormality
        for i in 0..4 {
            for j in 0..i {
                let o = sol.states[i].inner(&sol.states[j]).norm();
                assert!(o <= 1e-10);
            }
        }
    }

    #[test]
    fn dense_rejects_capacity_and_asymmetry() {
        let mut b = SparseBuilder::new(2);
        b.push_row([(0, 1.0), (1, 2.0)]);
        b.push_row([(1, 1.0)]);
        let op = b.finish(true); // flagged symmetric but is not
        assert!(dense_spectrum(&op).is_err());
    }

    #[test]
    fn extremal_matches_dense_on_random_models() {
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        for trial in 0..12 {
            let n = 2 + (trial % 4);
            let mut bonds = Vec::new();
            for i in 0..n {
                for j in (i + 1)..n {
                    if rng.random::<f64>() < 0.7 {
                        bonds.push((i, j, rng.random_range(-1.0..1.0)));
                    }
                }
            }
            let m = ClassicalModel::ising(n, &bonds).unwrap();
            let point = ThermalPoint::from_beta(rng.random_range(0.2..2.0)).unwrap();
            let op = build_sa_hamiltonian(&m, point).unwrap();
            let sol = dense_spectrum(&op).unwrap();
            let pair = extremal_pair(&op, 1e-11).unwrap();
            assert!(
                (pair.e0 - sol.energies[0]).abs() <= 1e-9,
                "trial {trial}: {} vs {}",
                pair.e0,
                sol.energies[0]
            );
            assert!((pair.e1 - sol.energies[1]).abs() <= 1e-9);
            let ov: f64 = pair
                .v0
                .iter()
                .zip(sol.states[0].amplitudes())
                .map(|(a, b)| a * b.re)
                .sum();
            assert!(1.0 - ov * ov <= 1e-10);
        }
    }

    #[test]
    fn extremal_on_diagonal_operator() {
        let op = diag_op(&[5.0, -3.0, 7.0, 0.5, -3.0 + 1e-3]);
        let pair = extremal_pair(&op, 1e-12).unwrap();
        assert!((pair.e0 + 3.0).abs() < 1e-10);
        assert!((pair.e1 + 3.0 - 1e-3).abs() < 1e-10);
    }

    #[test]
    fn extremal_ground_energy_zero_for_larger_models() {
        // N = 12 ring keeps the runtime modest while exercising the sparse path
        let m = ClassicalModel::ising_ring(12, 1.0).unwrap();
        let point = ThermalPoint::from_beta(0.5).unwrap();
        let op = build_sa_hamiltonian(&m, point).unwrap();
        let pair = extremal_pair(&op, 1e-9).unwrap();
        assert!(pair.e0.abs() <= 1e-9);
        assert!(!pair.degenerate);
    }

    #[test]
    fn verify_gibbs_ground_examples() {
        let free = ClassicalModel::new(
            1,
            Spin::HALF,
            vec![],
            crate::model::EnergyKind::Multilinear,
        )
        .unwrap();
        let r = verify_gibbs_ground(&free, ThermalPoint::from_beta(1.0).unwrap()).unwrap();
        assert!(1.0 - r.overlap_with_gibbs <= 1e-12);
        assert!((r.gap - 2.0).abs() < 1e-10);

        let m = ClassicalModel::ising(2, &[(0, 1, 1.0)]).unwrap();
        let r = verify_gibbs_ground(&m, ThermalPoint::from_beta(1.0).unwrap()).unwrap();
        assert!(1.0 - r.overlap_with_gibbs <= 1e-10);
        assert!((r.gap - 2.0 * (-2.0f64).exp()).abs() < 1e-10);
        assert!(r.ground_energy.abs() <= 1e-10);
        assert!(r.positivity_min_entry > 0.0);
        assert!(!r.degenerate_flag);
    }

    #[test]
    fn ground_expectation_examples() {
        let m = ClassicalModel::ising(2, &[(0, 1, 1.0)]).unwrap();
        let point = ThermalPoint::from_beta(1.0).unwrap();
        let v = crate::model::gibbs_vector(&m, point, true).unwrap();

        let c = ground_expectation(&v, &[3.25; 4]).unwrap();
        assert!((c - 3.25).abs() < 1e-14);

        let corr = DiagonalObservable::PairCorrelator(0, 1).table(&m).unwrap();
        let g = ground_expectation(&v, &corr).unwrap();
        let (_, exact) = brute_thermal(&m, point, &DiagonalObservable::PairCorrelator(0, 1)).unwrap();
        assert!((g - exact).abs() < 1e-12);
        assert!((g + 1.0f64.tanh()).abs() < 1e-10);

        let etab = DiagonalObservable::Energy.table(&m).unwrap();
        let ge = ground_expectation(&v, &etab).unwrap();
        let (_, ee) = brute_thermal(&m, point, &DiagonalObservable::Energy).unwrap();
        assert!((ge - ee).abs() < 1e-10);
    }

    #[test]
    fn zero_norm_state_rejected() {
        let v = StateVector::from_real(&[0.0, 0.0]);
        assert!(ground_expectation(&v, &[1.0, 1.0]).is_err());
    }
}
