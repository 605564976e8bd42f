//! Orchestration of experiments: configuration, refinement schedules,
//! reference solutions, sweeps, CSV output and the invariant suite.

pub mod checks;
mod config;
mod output;
mod schedule;
mod sweep;

pub use config::{Experiment, NewtonConfig, ReferenceConfig, RunConfig, Schedule, SweepConfig};
pub use output::{emit_csv, emit_sweep_csv, write_sweep, write_trace, SweepRow, SWEEP_HEADER, TRACE_HEADER};
pub use schedule::{
    compute_reference, make_solver, run_schedule, run_schedule_with, Carry, CompanionSolver, LevelSolver,
    LinearSolver, NewtonSolver, ReferenceSolution, RunOutcome,
};
pub use sweep::{k_sweep, smallest_eigenvalue};

/// Lowest free-space band `min_n |k + 2 pi n|^2` over `n` in `{-3..3}^2`.
pub fn free_space_band(k: crate::assembly::BlochVector) -> f64 {
    let tau = 2.0 * std::f64::consts::PI;
    let mut best = f64::INFINITY;
    for nx in -3..=3 {
        for ny in -3..=3 {
            let (a, b) = (k.kx + tau * nx as f64, k.ky + tau * ny as f64);
            best = best.min(a * a + b * b);
        }
    }
    best
}
