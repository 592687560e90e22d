//! Control-parameterized Hamiltonian families for annealing paths.
//!
//! All three families share the structure H(lambda) = diag(d(lambda))
//! + c(lambda) * F, where F is the sum of single-site reflection operators
//! (sigma_x at spin-1/2). Keeping (d, c) separate from F lets the
//! propagator apply H, its control derivative, and finite differences of H
//! without assembling matrices.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::{local_hamiltonian_from_table, ClassicalModel, Spin, ThermalPoint};
use crate::operator::{SparseBuilder, SparseOperator};
use crate::qmap::compute_map_params;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DrivenFamily {
    /// H_q(T): both the diagonal and the field magnitude follow chi(T).
    SaTemperature,
    /// H~_q(gamma): fixed thermal diagonal, driven transverse field.
    EqaField,
    /// H'_q(gamma): classical energy diagonal, driven transverse field.
    QaField,
}

/// Hamiltonian family with precomputed model tables.
pub struct DrivenHamiltonian {
    family: DrivenFamily,
    dim: usize,
    n_sites: usize,
    /// Per-site reflection targets, reflect[j][r].
    reflect: Vec<Vec<u32>>,
    /// Classical energies (SA analytic derivative, QA diagonal, monitors).
    energy: Vec<f64>,
    /// H_j tables (SA family only).
    hj: Vec<Vec<f64>>,
    /// Normalization exponent p (SA family).
    p: f64,
    /// Fixed diagonal for the EQA family: chi sum_j e^{beta H_j}.
    base_diag: Vec<f64>,
    beta: f64,
}

/// Plain (diagonal + field * reflections) pair; what a control value turns
/// the family into.
#[derive(Debug, Clone)]
pub struct HamiltonianParts {
    pub diag: Vec<f64>,
    /// Off-diagonal coefficient multiplying each reflection entry.
    pub coeff: f64,
}

impl DrivenHamiltonian {
    pub fn sa(model: &ClassicalModel, point: ThermalPoint) -> Result<Self> {
        if model.spin() != Spin::HALF {
            return Err(Error::unsupported("SA family requires spin 1/2"));
        }
        let params = compute_map_params(model, point)?;
        let energy = model.energy_table()?;
        let hj = hj_tables(model, &energy)?;
        Ok(DrivenHamiltonian {
            family: DrivenFamily::SaTemperature,
            dim: energy.len(),
            n_sites: model.n_sites(),
            reflect: reflect_tables(model, energy.len()),
            energy,
            hj,
            p: params.p,
            base_diag: Vec::new(),
            beta: point.beta,
        })
    }

    pub fn eqa(model: &ClassicalModel, point: ThermalPoint) -> Result<Self> {
        let params = compute_map_params(model, point)?;
        let energy = model.energy_table()?;
        let hj = hj_tables(model, &energy)?;
        let mut base = vec![0.0; energy.len()];
        for t in &hj {
            for (b, &h) in base.iter_mut().zip(t) {
                *b += params.chi * (point.beta * h).exp();
            }
        }
        Ok(DrivenHamiltonian {
            family: DrivenFamily::EqaField,
            dim: energy.len(),
            n_sites: model.n_sites(),
            reflect: reflect_tables(model, energy.len()),
            energy,
            hj,
            p: params.p,
            base_diag: base,
            beta: point.beta,
        })
    }

    pub fn qa(model: &ClassicalModel) -> Result<Self> {
        if model.spin() != Spin::HALF {
            return Err(Error::unsupported("plain QA requires spin 1/2"));
        }
        let energy = model.energy_table()?;
        Ok(DrivenHamiltonian {
            family: DrivenFamily::QaField,
            dim: energy.len(),
            n_sites: model.n_sites(),
            reflect: reflect_tables(model, energy.len()),
            base_diag: energy.clone(),
            energy,
            hj: Vec::new(),
            p: 0.0,
            beta: 0.0,
        })
    }

    pub fn family(&self) -> DrivenFamily {
        self.family
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn energy(&self) -> &[f64] {
        &self.energy
    }

    /// chi(T) for the SA family.
    fn chi_at(&self, temperature: f64) -> f64 {
        (-self.p / temperature).exp()
    }

    /// (diagonal, field coefficient) at a control value.
    pub fn parts_at(&self, control: f64) -> HamiltonianParts {
        match self.family {
            DrivenFamily::SaTemperature => {
                let chi = self.chi_at(control);
                let beta = 1.0 / control;
                let mut diag = vec![0.0; self.dim];
                for t in &self.hj {
                    for (d, &h) in diag.iter_mut().zip(t) {
                        *d += chi * (beta * h).exp();
                    }
                }
                HamiltonianParts { diag, coeff: -chi }
            }
            DrivenFamily::EqaField => HamiltonianParts {
                diag: self.base_diag.clone(),
                coeff: -control,
            },
            DrivenFamily::QaField => HamiltonianParts {
                diag: self.base_diag.clone(),
                coeff: -control,
            },
        }
    }

    /// Analytic d/d(control) of the parts.
    pub fn dparts_at(&self, control: f64) -> HamiltonianParts {
        match self.family {
            DrivenFamily::SaTemperature => {
                let t2 = control * control;
                let chi = self.chi_at(control);
                let beta = 1.0 / control;
                let mut diag = vec![0.0; self.dim];
                for t in &self.hj {
                    for (d, &h) in diag.iter_mut().zip(t) {
                        *d += -(chi / t2) * (h - self.p) * (beta * h).exp();
                    }
                }
                HamiltonianParts {
                    diag,
                    coeff: -self.p * chi / t2,
                }
            }
            DrivenFamily::EqaField | DrivenFamily::QaField => HamiltonianParts {
                diag: vec![0.0; self.dim],
                coeff: -1.0,
            },
        }
    }

    /// Apply diag(d) + c * F to a complex vector.
    pub fn apply_parts(&self, parts: &HamiltonianParts, v: &[Complex64], out: &mut [Complex64]) {
        for ((o, &d), &a) in out.iter_mut().zip(&parts.diag).zip(v) {
            *o = a * d;
        }
        if parts.coeff != 0.0 {
            for refl in &self.reflect {
                for (r, o) in out.iter_mut().enumerate() {
                    *o += v[refl[r] as usize] * parts.coeff;
                }
            }
        }
    }

    /// Assemble a sparse symmetric operator at a control value.
    pub fn build_sparse(&self, control: f64) -> SparseOperator {
        let parts = self.parts_at(control);
        let mut b = SparseBuilder::new(self.dim);
        let mut row: Vec<(usize, f64)> = Vec::with_capacity(self.n_sites + 1);
        for r in 0..self.dim {
            row.clear();
            row.push((r, parts.diag[r]));
            for refl in &self.reflect {
                row.push((refl[r] as usize, parts.coeff));
            }
            b.push_row(row.iter().copied());
        }
        b.finish(true)
    }

    /// Dense assembly for the exponential stepper.
    pub fn build_dense(&self, parts: &HamiltonianParts) -> nalgebra::DMatrix<f64> {
        let mut m = nalgebra::DMatrix::zeros(self.dim, self.dim);
        for (r, &d) in parts.diag.iter().enumerate() {
            m[(r, r)] += d;
        }
        for refl in &self.reflect {
            for r in 0..self.dim {
                m[(r, refl[r] as usize)] += parts.coeff;
            }
        }
        m
    }
}

fn hj_tables(model: &ClassicalModel, energy: &[f64]) -> Result<Vec<Vec<f64>>> {
    (0..model.n_sites())
        .map(|j| Ok(local_hamiltonian_from_table(model, energy, j)?.entries().to_vec()))
        .collect()
}

fn reflect_tables(model: &ClassicalModel, dim: usize) -> Vec<Vec<u32>> {
    (0..model.n_sites())
        .map(|j| {
            (0..dim)
                .map(|r| model.reflect_rank(r, j) as u32)
                .collect()
        })
        .collect()
}
