//! Annealing engine: certified schedules, real-time propagation, and the
//! adiabatic-condition diagnostics.

mod driven;
mod monitor;
mod propagate;
mod schedule;

pub use driven::{DrivenFamily, DrivenHamiltonian, HamiltonianParts};
pub use monitor::{
    adiabatic_monitor, commutator_residual, ground_space_overlap, monitor_with_spectrum,
    CommutatorReport,
};
pub use propagate::{propagate, AnnealTrace, IntegratorConfig, TraceSample};
pub use schedule::{
    default_t_max_cap, make_eqa_schedule, make_poly_schedule, make_qa_schedule, make_sa_schedule,
    reintegrate_max_rel_err, Schedule, ScheduleFamily,
};
