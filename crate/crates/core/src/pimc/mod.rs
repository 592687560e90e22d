//! Path-integral Monte Carlo backend for 1D nearest-neighbor Ising models.

mod checkpoint;
mod engine;
mod stats;

pub use checkpoint::{read_checkpoint, write_checkpoint, Checkpoint};
pub use engine::{
    effective_couplings, metropolis_sweep, run_pimc, slice_energy, xi_coupling, EffectiveCouplings,
    FieldMode, PimcLattice, PimcParams, PimcRun, XiConvention,
};
pub use stats::SampleStats;
