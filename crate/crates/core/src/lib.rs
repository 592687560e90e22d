//! Finite-temperature properties of classical spin models through quantum
//! ground states.
//!
//! The crate builds quantum Hamiltonians whose ground state encodes the
//! Gibbs distribution of a classical spin model, verifies the construction
//! spectrally, derives provably convergent annealing schedules from the
//! adiabatic condition, and realizes the anneal both as Schrodinger
//! evolution and as path-integral Monte Carlo sampling.

pub mod anneal;
pub mod error;
pub mod model;
pub mod operator;
pub mod pimc;
pub mod qmap;
pub mod spectral;

pub use error::{Error, Result};
pub use model::{
    brute_thermal, flip_identity_residual, gibbs_vector, local_hamiltonian, ClassicalModel,
    CouplingTerm, DiagonalObservable, EnergyKind, Spin, SpinConfig, ThermalPoint,
};
pub use operator::{
    diag_exp, embed_site_operator, ising_decompose, ising_recompose, DiagonalOperator,
    IsingPolynomial, SiteOperatorKind, SparseOperator, StateVector,
};
pub use qmap::{
    build_eqa_hamiltonian, build_plain_qa, build_sa_hamiltonian, compute_map_params, gap_bound_qa,
    gap_bound_sa, ising_closed_form_check, recover_markov_matrix, GapBound, MapParams,
};
pub use spectral::{dense_spectrum, extremal_pair, ground_expectation, verify_gibbs_ground};
