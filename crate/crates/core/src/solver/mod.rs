//! Proximal ADMM for the TC-U1 and TC-SL completion models.

mod config;
mod diagnostics;
mod mask;
mod padmm;

pub use config::{update_penalties, LearnableInit, Model, PenaltyScale, SolverConfig};
pub use diagnostics::{Diagnostics, IterationRecord, Status};
pub use mask::{psi_project, Mask};
pub use padmm::{
    apply_factors, initial_factors, p_hat, procrustes_objective, reconstruct, solve, solve_with, update_e, update_u,
    update_y, update_z, Factors, SolveOutput, SolverState, UStep, ZStep, IMAG_REL_TOL, STATE_UNITARY_TOL,
};
