//! Finite element machinery for parabolic obstacle problems.
//!
//! The crate solves the backward Euler discretization of an obstacle
//! problem with a primal-dual active set method, reconstructs the discrete
//! Lagrange multiplier, and evaluates residual-type a posteriori error
//! estimators together with the complementarity and dual-norm terms that
//! enter the final error bound.
//!
//! The crate is `no_std` (with `alloc`); everything that touches files,
//! clocks or configuration lives in the companion `virecon` crate.

#![no_std]
#![deny(unsafe_code)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod assemble;
pub mod csr;
pub mod error;
pub mod estimator;
mod math;
pub mod mesh;
pub mod multiplier;
pub mod prolong;
pub mod quadrature;
pub mod solve;
pub mod space;
pub mod stepper;

pub use assemble::{
    assemble_load, assemble_mass, assemble_mass_lumped, assemble_stiffness, interpolate, l2_error,
    lumped_mass, norm, Field, NormKind,
};
pub use csr::CsrMatrix;
pub use error::{Error, Result};
pub use estimator::{
    assess_trajectory, complementarity_terms, eta0, eta1, eta_energy, jump_residual, total_bound,
    AssessOptions, BoundComponents, EdgeJumps, EstimatorBreakdown, EtaResult, ResidualForm,
    RunningIntegral, StepEstimates, TrajectoryAssessment,
};
pub use mesh::{mesh_metrics, Marks, Mesh, Rect};
pub use multiplier::{
    compute_sigma, dual_norm, reconstruct_reference, verify_trajectory, MassMode,
    ReconstructionContext, ReconstructionData, SigmaContext, SigmaRecord, VerificationRun,
};
pub use prolong::{prolong, Prolongation};
pub use solve::solve_spd;
pub use space::{FeFunction, Space};
pub use stepper::{
    kkt_report, pdas_solve, run_heat_trajectory, run_trajectory, step, KktReport, PdasResult,
    ProblemSpec, StepContext, StepState, Trajectory,
};
