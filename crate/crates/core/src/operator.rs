//! Sparse and diagonal operator algebra over the configuration basis.
//!
//! Operators are stored row-sparse (CSR); the quantum Hamiltonians built in
//! this crate have at most N off-diagonal entries per row, so sparse storage
//! is mandatory above N of roughly 12. State vectors carry complex
//! amplitudes even though all constructed ground states are real, because
//! real-time propagation needs the phases.

use std::collections::BTreeMap;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::Spin;

/// Real diagonal operator: one entry per configuration rank.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalOperator {
    entries: Vec<f64>,
}

impl DiagonalOperator {
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        if let Some(bad) = entries.iter().position(|x| !x.is_finite()) {
            return Err(Error::numerical(format!(
                "non-finite diagonal entry at rank {bad}"
            )));
        }
        Ok(DiagonalOperator { entries })
    }

    pub fn zeros(dim: usize) -> Self {
        DiagonalOperator {
            entries: vec![0.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn entries_mut(&mut self) -> &mut [f64] {
        &mut self.entries
    }

    /// Entrywise exponential e^{scale * d}.
    ///
    /// Overflow is a hard error reporting the offending entry, since a
    /// saturated Boltzmann factor silently corrupts everything downstream.
    pub fn exp_scaled(&self, scale: f64) -> Result<DiagonalOperator> {
        let mut out = Vec::with_capacity(self.entries.len());
        for (r, &d) in self.entries.iter().enumerate() {
            let v = (scale * d).exp();
            if !v.is_finite() {
                return Err(Error::numerical(format!(
                    "exp overflow at rank {r}: exp({} * {d})",
                    scale
                )));
            }
            out.push(v);
        }
        Ok(DiagonalOperator { entries: out })
    }

    pub fn apply(&self, v: &StateVector) -> Result<StateVector> {
        if v.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                context: "diagonal apply",
                expected: self.dim(),
                actual: v.dim(),
            });
        }
        let amps = self
            .entries
            .iter()
            .zip(v.amplitudes())
            .map(|(&d, a)| a * d)
            .collect();
        Ok(StateVector { amps })
    }
}

/// Entrywise exponential, free-function form used by the operator layer.
pub fn diag_exp(d: &DiagonalOperator, scale: f64) -> Result<DiagonalOperator> {
    d.exp_scaled(scale)
}

/// Row-sparse real matrix (CSR).
#[derive(Debug, Clone)]
pub struct SparseOperator {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<f64>,
    symmetric: bool,
}

impl SparseOperator {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let lo = self.row_ptr[i];
        let hi = self.row_ptr[i + 1];
        self.cols[lo..hi]
            .iter()
            .zip(&self.vals[lo..hi])
            .map(|(&c, &v)| (c as usize, v))
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim)
            .map(|i| {
                self.row(i)
                    .find(|&(c, _)| c == i)
                    .map(|(_, v)| v)
                    .unwrap_or(0.0)
            })
            .collect()
    }

    /// Matrix-vector product on real input.
    pub fn apply_real(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.dim {
            return Err(Error::DimensionMismatch {
                context: "sparse apply",
                expected: self.dim,
                actual: v.len(),
            });
        }
        let mut out = vec![0.0; self.dim];
        for (i, o) in out.iter_mut().enumerate() {
            let lo = self.row_ptr[i];
            let hi = self.row_ptr[i + 1];
            let mut acc = 0.0;
            for k in lo..hi {
                acc += self.vals[k] * v[self.cols[k] as usize];
            }
            *o = acc;
        }
        Ok(out)
    }

    pub fn apply(&self, v: &StateVector) -> Result<StateVector> {
        if v.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                context: "sparse apply",
                expected: self.dim,
                actual: v.dim(),
            });
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); self.dim];
        for (i, o) in amps.iter_mut().enumerate() {
            let lo = self.row_ptr[i];
            let hi = self.row_ptr[i + 1];
            let mut acc = Complex64::new(0.0, 0.0);
            for k in lo..hi {
                acc += v.amps[self.cols[k] as usize] * self.vals[k];
            }
            *o = acc;
        }
        Ok(StateVector { amps })
    }

    /// Dense copy, for the dense eigensolver path.
    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut m = nalgebra::DMatrix::zeros(self.dim, self.dim);
        for i in 0..self.dim {
            for (j, v) in self.row(i) {
                m[(i, j)] += v;
            }
        }
        m
    }

    /// Largest absolute deviation from symmetry, for contract checks.
    pub fn symmetry_defect(&self) -> f64 {
        let mut map: BTreeMap<(u32, u32), f64> = BTreeMap::new();
        for i in 0..self.dim {
            for (j, v) in self.row(i) {
                map.insert((i as u32, j as u32), v);
            }
        }
        let mut worst = 0.0f64;
        for (&(i, j), &v) in &map {
            let vt = map.get(&(j, i)).copied().unwrap_or(0.0);
            worst = worst.max((v - vt).abs());
        }
        worst
    }
}

/// Incremental CSR builder; rows must be pushed in order.
pub struct SparseBuilder {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<f64>,
    scratch: Vec<(u32, f64)>,
}

impl SparseBuilder {
    pub fn new(dim: usize) -> Self {
        SparseBuilder {
            dim,
            row_ptr: vec![0],
            cols: Vec::new(),
            vals: Vec::new(),
            scratch: Vec::new(),
        }
    }

    /// Push the next row as (column, value) pairs in any order; duplicate
    /// columns are merged.
    pub fn push_row(&mut self, entries: impl IntoIterator<Item = (usize, f64)>) {
        self.scratch.clear();
        for (c, v) in entries {
            debug_assert!(c < self.dim);
            self.scratch.push((c as u32, v));
        }
        self.scratch.sort_unstable_by_key(|&(c, _)| c);
        let mut k = 0;
        while k < self.scratch.len() {
            let (c, mut v) = self.scratch[k];
            let mut m = k + 1;
            while m < self.scratch.len() && self.scratch[m].0 == c {
                v += self.scratch[m].1;
                m += 1;
            }
            if v != 0.0 {
                self.cols.push(c);
                self.vals.push(v);
            }
            k = m;
        }
        self.row_ptr.push(self.cols.len());
    }

    pub fn finish(self, symmetric: bool) -> SparseOperator {
        assert_eq!(self.row_ptr.len(), self.dim + 1, "not all rows pushed");
        SparseOperator {
            dim: self.dim,
            row_ptr: self.row_ptr,
            cols: self.cols,
            vals: self.vals,
            symmetric,
        }
    }
}

/// Amplitude vector over the configuration basis.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    amps: Vec<Complex64>,
}

impl StateVector {
    pub fn new(amps: Vec<Complex64>) -> Self {
        StateVector { amps }
    }

    pub fn from_real(values: &[f64]) -> Self {
        StateVector {
            amps: values.iter().map(|&x| Complex64::new(x, 0.0)).collect(),
        }
    }

    pub fn basis_state(dim: usize, rank: usize) -> Self {
        let mut amps = vec![Complex64::new(0.0, 0.0); dim];
        amps[rank] = Complex64::new(1.0, 0.0);
        StateVector { amps }
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn scale(&mut self, s: f64) {
        for a in &mut self.amps {
            *a *= s;
        }
    }

    /// <self|other> with conjugation on self.
    pub fn inner(&self, other: &StateVector) -> Complex64 {
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    pub fn real_parts(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.re).collect()
    }
}

/// Site-operator kinds available for embedding.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SiteOperatorKind {
    SigmaX,
    SigmaZ,
    /// Angular momentum along z, diag(s, s-1, ..., -s) in descending-m
    /// order for spin-1/2 and ascending-value basis order otherwise; in
    /// terms of the level values used here, S_z is diag of the site values.
    Sz,
    /// Anti-diagonal ones: level l -> 2s - l.
    X,
}

/// Embed a single-site operator at site j into the N-site basis.
pub fn embed_site_operator(
    kind: SiteOperatorKind,
    j: usize,
    n_sites: usize,
    spin: Spin,
) -> Result<SparseOperator> {
    if j >= n_sites {
        return Err(Error::invalid(format!(
            "site {j} out of range for {n_sites} sites"
        )));
    }
    if matches!(kind, SiteOperatorKind::SigmaX | SiteOperatorKind::SigmaZ) && spin != Spin::HALF {
        return Err(Error::invalid(
            "sigma_x / sigma_z require spin 1/2; use X / S_z for spin-s",
        ));
    }
    let q = spin.levels();
    let mut dim: usize = 1;
    for _ in 0..n_sites {
        dim = dim
            .checked_mul(q)
            .filter(|&d| d <= crate::model::ENUMERATION_CAP)
            .ok_or(Error::Capacity {
                dim: (q as u128).pow(n_sites as u32),
                cap: crate::model::ENUMERATION_CAP,
            })?;
    }
    let step = q.pow(j as u32);
    let mut b = SparseBuilder::new(dim);
    for r in 0..dim {
        let level = ((r / step) % q) as u8;
        match kind {
            SiteOperatorKind::SigmaX | SiteOperatorKind::X => {
                let flipped = spin.reflect(level) as usize;
                let target = r - (level as usize) * step + flipped * step;
                b.push_row([(target, 1.0)]);
            }
            SiteOperatorKind::SigmaZ => {
                b.push_row([(r, spin.value(level))]);
            }
            SiteOperatorKind::Sz => {
                // S_z eigenvalue is the site value (for spin-1/2 that is
                // +/-1 by the Ising convention used throughout).
                b.push_row([(r, spin.value(level))]);
            }
        }
    }
    Ok(b.finish(true))
}

/// Diagonal operator decomposed over products of sigma_z factors.
///
/// `constant` is the identity coefficient; `pair_terms` hold the arity-2
/// coefficients keyed by site pair; everything else (arity 1 and >= 3)
/// lands in `higher_terms`.
#[derive(Debug, Clone, PartialEq)]
pub struct IsingPolynomial {
    pub constant: f64,
    pub pair_terms: BTreeMap<(u32, u32), f64>,
    pub higher_terms: BTreeMap<Vec<u32>, f64>,
}

impl IsingPolynomial {
    /// Largest pair coefficient magnitude, handy for reports.
    pub fn max_pair_coeff(&self) -> f64 {
        self.pair_terms
            .values()
            .fold(0.0f64, |a, &v| a.max(v.abs()))
    }
}

/// Exact sigma_z-product decomposition of a spin-1/2 diagonal operator via
/// the fast Walsh-Hadamard transform.
///
/// The coefficient of subset S is 2^{-N} sum_sigma d[sigma] prod_{i in S}
/// sigma_i, with the level convention sigma = +1 for level 0. Coefficients
/// below 1e-14 times the largest table magnitude are dropped.
pub fn ising_decompose(d: &DiagonalOperator, n_sites: usize) -> Result<IsingPolynomial> {
    let dim = d.dim();
    if dim != 1usize << n_sites {
        return Err(Error::DimensionMismatch {
            context: "ising_decompose needs a 2^N table",
            expected: 1usize << n_sites,
            actual: dim,
        });
    }
    let mut work = d.entries().to_vec();
    walsh_hadamard_in_place(&mut work);
    let scale = 1.0 / dim as f64;
    let magnitude = d.entries().iter().fold(0.0f64, |a, &x| a.max(x.abs()));
    let cutoff = 1e-14 * magnitude.max(1.0);

    let mut poly = IsingPolynomial {
        constant: work[0] * scale,
        pair_terms: BTreeMap::new(),
        higher_terms: BTreeMap::new(),
    };
    for (mask, &w) in work.iter().enumerate().skip(1) {
        let coeff = w * scale;
        if coeff.abs() <= cutoff {
            continue;
        }
        let sites: Vec<u32> = (0..n_sites as u32)
            .filter(|&b| mask & (1usize << b) != 0)
            .collect();
        if sites.len() == 2 {
            poly.pair_terms.insert((sites[0], sites[1]), coeff);
        } else {
            poly.higher_terms.insert(sites, coeff);
        }
    }
    Ok(poly)
}

/// Rebuild the diagonal table from a polynomial; inverse of
/// [`ising_decompose`] up to the drop cutoff.
pub fn ising_recompose(poly: &IsingPolynomial, n_sites: usize) -> DiagonalOperator {
    let dim = 1usize << n_sites;
    let mut work = vec![0.0; dim];
    work[0] = poly.constant;
    for (&(i, j), &c) in &poly.pair_terms {
        work[(1usize << i) | (1usize << j)] = c;
    }
    for (sites, &c) in &poly.higher_terms {
        let mask = sites.iter().fold(0usize, |m, &b| m | (1usize << b));
        work[mask] = c;
    }
    // The WHT is its own inverse up to 1/dim, already folded in here.
    walsh_hadamard_in_place(&mut work);
    DiagonalOperator { entries: work }
}

/// In-place Walsh-Hadamard butterfly, O(N * 2^N).
///
/// Computes out[S] = sum_r in[r] * (-1)^{popcount(r & S)}, which is the
/// sigma-product character sum under the level-0 = +1 convention.
fn walsh_hadamard_in_place(data: &mut [f64]) {
    let n = data.len();
    debug_assert!(n.is_power_of_two());
    let mut half = 1;
    while half < n {
        let mut start = 0;
        while start < n {
            for i in start..start + half {
                let a = data[i];
                let b = data[i + half];
                data[i] = a + b;
                data[i + half] = a - b;
            }
            start += 2 * half;
        }
        half *= 2;
    }
}
