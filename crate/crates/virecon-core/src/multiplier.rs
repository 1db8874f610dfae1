//! Discrete Lagrange multipliers, dual norms, and the reference elliptic
//! reconstruction on a nested fine mesh.
//!
//! The multiplier is defined by testing the step residual against the
//! discrete space: `(sigma, v) = (wdot, v) + a(w, v) - (f, v)` for all
//! discrete `v`. Solving with the lumped mass keeps the KKT sign dof-wise;
//! the consistent mass makes the identity exact against every test
//! function, which is what the reconstruction's orthogonality needs.
//!
//! The reconstruction solves `a(W, v) = (f + sigma - wdot, v)` on a fine
//! nested space. In verification mode the `f`-functional on the coarse side
//! is the fine-mesh load restricted through the prolongation, so both sides
//! integrate `f` identically and the orthogonality defect reduces to solver
//! tolerances.

use alloc::vec;
use alloc::vec::Vec;

use crate::assemble::{
    assemble_load, assemble_mass, assemble_stiffness, norm_with, FieldRef,
};
use crate::csr::CsrMatrix;
use crate::error::{invalid, Result};
use crate::math;
use crate::mesh::Marks;
use crate::prolong::Prolongation;
use crate::solve::{cg_masked, DEFAULT_REL_TOL};
use crate::space::{FeFunction, Space};
use crate::stepper::{ProblemSpec, Trajectory};

/// Mass treatment when solving for the multiplier.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MassMode {
    Lumped,
    Consistent,
}

/// Multiplier of one step with its sign split and the backward difference
/// it was built from.
#[derive(Debug, Clone)]
pub struct SigmaRecord {
    pub sigma: FeFunction,
    pub sigma_plus: FeFunction,
    pub sigma_minus: FeFunction,
    pub wdot: FeFunction,
    pub mode: MassMode,
}

impl SigmaRecord {
    /// Assemble a record from given coefficient data (sign split computed
    /// coefficient-wise).
    pub fn from_parts(sigma: FeFunction, wdot: FeFunction, mode: MassMode) -> SigmaRecord {
        let plus: Vec<f64> = sigma.coeffs.iter().map(|&s| s.max(0.0)).collect();
        let minus: Vec<f64> = sigma.coeffs.iter().map(|&s| (-s).max(0.0)).collect();
        SigmaRecord {
            sigma,
            sigma_plus: FeFunction::from_coeffs(plus),
            sigma_minus: FeFunction::from_coeffs(minus),
            wdot,
            mode,
        }
    }
}

/// Matrices shared by multiplier and dual-norm solves on one space.
pub struct SigmaContext {
    pub mass: CsrMatrix,
    pub lumped: Vec<f64>,
    pub stiffness: CsrMatrix,
    pub free: Vec<bool>,
}

impl SigmaContext {
    pub fn new(space: &Space) -> SigmaContext {
        SigmaContext {
            mass: assemble_mass(space),
            lumped: crate::assemble::lumped_mass(space),
            stiffness: assemble_stiffness(space),
            free: space.free_mask(),
        }
    }
}

/// Multiplier from the step residual `M wdot + K w - load`, solved against
/// the selected mass.
pub fn compute_sigma(
    space: &Space,
    w_curr: &FeFunction,
    w_prev: &FeFunction,
    tau: f64,
    f: FieldRef<'_>,
    t: f64,
    mode: MassMode,
) -> Result<SigmaRecord> {
    let ctx = SigmaContext::new(space);
    let load = assemble_load(space, f, t)?;
    compute_sigma_with(&ctx, w_curr, w_prev, tau, &load, mode)
}

/// `compute_sigma` against prebuilt matrices and an explicit load vector.
pub fn compute_sigma_with(
    ctx: &SigmaContext,
    w_curr: &FeFunction,
    w_prev: &FeFunction,
    tau: f64,
    load: &[f64],
    mode: MassMode,
) -> Result<SigmaRecord> {
    if !(tau > 0.0) {
        return Err(invalid("time step must be positive"));
    }
    if w_curr.len() != w_prev.len() {
        return Err(invalid("w_curr and w_prev live on different spaces"));
    }
    let n = w_curr.len();
    let wdot = w_curr.axpy(-1.0, w_prev).scaled(1.0 / tau);
    let m_wdot = ctx.mass.apply(&wdot.coeffs);
    let k_w = ctx.stiffness.apply(&w_curr.coeffs);
    let mut r = vec![0.0; n];
    for i in 0..n {
        if ctx.free[i] {
            r[i] = m_wdot[i] + k_w[i] - load[i];
        }
    }
    let sigma = match mode {
        MassMode::Lumped => {
            let coeffs: Vec<f64> = (0..n)
                .map(|i| if ctx.free[i] { r[i] / ctx.lumped[i] } else { 0.0 })
                .collect();
            FeFunction::from_coeffs(coeffs)
        }
        MassMode::Consistent => {
            let x0 = vec![0.0; n];
            FeFunction::from_coeffs(cg_masked(&ctx.mass, &r, &ctx.free, &x0, DEFAULT_REL_TOL)?)
        }
    };
    Ok(SigmaRecord::from_parts(sigma, wdot, mode))
}

/// Discrete dual norm: Riesz representative `z` of `g` in the discrete
/// space (`a(z, v) = (g, v)` on free dofs, zero on the boundary), returning
/// `sqrt(z' M g) = ||z||_V`.
pub fn dual_norm(space: &Space, g: &FeFunction) -> Result<f64> {
    let ctx = SigmaContext::new(space);
    dual_norm_with(&ctx, g)
}

pub fn dual_norm_with(ctx: &SigmaContext, g: &FeFunction) -> Result<f64> {
    let mut rhs = ctx.mass.apply(&g.coeffs);
    for i in 0..rhs.len() {
        if !ctx.free[i] {
            rhs[i] = 0.0;
        }
    }
    if rhs.iter().all(|&v| v == 0.0) {
        return Ok(0.0);
    }
    let x0 = vec![0.0; rhs.len()];
    let z = cg_masked(&ctx.stiffness, &rhs, &ctx.free, &x0, DEFAULT_REL_TOL)?;
    let val: f64 = z.iter().zip(&rhs).map(|(a, b)| a * b).sum();
    Ok(math::sqrt(val.max(0.0)))
}

/// Ingredients of the reconstruction right-hand side
/// `v -> (f(t), v) + (sigma, v) - (wdot, v)`.
pub struct ReconstructionData<'a> {
    pub source: FieldRef<'a>,
    pub sigma: &'a FeFunction,
    pub wdot: &'a FeFunction,
    pub t: f64,
}

/// Fine-space operators for repeated reconstructions.
pub struct ReconstructionContext {
    pub fine: Space,
    pub prolongation: Prolongation,
    pub stiffness_fine: CsrMatrix,
    pub mass_fine: CsrMatrix,
    pub free_fine: Vec<bool>,
}

impl ReconstructionContext {
    /// Fine space obtained from `depth` uniform halvings of the coarse mesh
    /// (two bisection passes each).
    pub fn new(coarse: &Space, depth: usize) -> Result<ReconstructionContext> {
        if depth == 0 {
            return Err(invalid("fine-mesh depth must be at least 1"));
        }
        let mut mesh = coarse.mesh().clone();
        for _ in 0..2 * depth {
            mesh = mesh.refine(Marks::All)?;
        }
        let fine = Space::new(mesh, coarse.degree())?;
        ReconstructionContext::from_spaces(coarse, fine)
    }

    pub fn from_spaces(coarse: &Space, fine: Space) -> Result<ReconstructionContext> {
        let prolongation = Prolongation::new(coarse, &fine)?;
        let stiffness_fine = assemble_stiffness(&fine);
        let mass_fine = assemble_mass(&fine);
        let free_fine = fine.free_mask();
        Ok(ReconstructionContext {
            fine,
            prolongation,
            stiffness_fine,
            mass_fine,
            free_fine,
        })
    }

    /// Poisson solve on the fine space with the reconstruction data.
    pub fn reconstruct(&self, data: &ReconstructionData<'_>) -> Result<FeFunction> {
        let mut rhs = assemble_load(&self.fine, data.source, data.t)?;
        let lifted = self
            .prolongation
            .apply(&data.sigma.axpy(-1.0, data.wdot));
        let m_lift = self.mass_fine.apply(&lifted.coeffs);
        for i in 0..rhs.len() {
            rhs[i] += m_lift[i];
            if !self.free_fine[i] {
                rhs[i] = 0.0;
            }
        }
        let x0 = vec![0.0; rhs.len()];
        let w = cg_masked(
            &self.stiffness_fine,
            &rhs,
            &self.free_fine,
            &x0,
            DEFAULT_REL_TOL,
        )?;
        Ok(FeFunction::from_coeffs(w))
    }

    /// Maximum over interior coarse basis functions of
    /// `|a(w_ref - prolong(w_h), phi_i)|`.
    pub fn orthogonality_defect(
        &self,
        coarse: &Space,
        w_ref: &FeFunction,
        w_h: &FeFunction,
    ) -> f64 {
        let lifted = self.prolongation.apply(w_h);
        let diff = w_ref.axpy(-1.0, &lifted);
        let g = self.stiffness_fine.apply(&diff.coeffs);
        let restricted = self.prolongation.apply_transpose(&g);
        let mut worst = 0.0f64;
        for i in 0..coarse.n_dofs() {
            if !coarse.is_boundary_dof(i) {
                worst = worst.max(math::abs(restricted[i]));
            }
        }
        worst
    }
}

/// One-shot reconstruction on a caller-provided nested fine space.
pub fn reconstruct_reference(
    coarse: &Space,
    fine: Space,
    data: &ReconstructionData<'_>,
) -> Result<FeFunction> {
    ReconstructionContext::from_spaces(coarse, fine)?.reconstruct(data)
}

/// Per-step output of the verification pass over a trajectory.
pub struct VerificationRun {
    pub ctx: ReconstructionContext,
    /// Consistent-mode multiplier per step, built against the fine-mesh
    /// restricted load.
    pub sigma: Vec<SigmaRecord>,
    pub w_refs: Vec<FeFunction>,
    /// Raw orthogonality defect per step.
    pub ortho: Vec<f64>,
    /// Max over steps of defect / (1 + ||w_h||_V).
    pub ortho_scaled_max: f64,
}

/// Reconstruct every step of a trajectory on a `depth`-times-halved fine
/// mesh and measure the orthogonality defect.
pub fn verify_trajectory(
    space: &Space,
    problem: &ProblemSpec,
    traj: &Trajectory,
    depth: usize,
    mode: MassMode,
) -> Result<VerificationRun> {
    let ctx = ReconstructionContext::new(space, depth)?;
    let sctx = SigmaContext::new(space);
    let mut sigma = Vec::new();
    let mut w_refs = Vec::new();
    let mut ortho = Vec::new();
    let mut scaled_max = 0.0f64;
    for k in 1..=traj.n_steps() {
        let state = &traj.states[k];
        let prev = &traj.states[k - 1];
        let fine_load = assemble_load(&ctx.fine, problem.source.as_ref(), state.t)?;
        let coarse_load = ctx.prolongation.apply_transpose(&fine_load);
        let rec = compute_sigma_with(&sctx, &state.w, &prev.w, traj.tau, &coarse_load, mode)?;
        let w_ref = {
            let lifted = ctx.prolongation.apply(&rec.sigma.axpy(-1.0, &rec.wdot));
            let m_lift = ctx.mass_fine.apply(&lifted.coeffs);
            let mut rhs = fine_load.clone();
            for i in 0..rhs.len() {
                rhs[i] += m_lift[i];
                if !ctx.free_fine[i] {
                    rhs[i] = 0.0;
                }
            }
            let x0 = vec![0.0; rhs.len()];
            FeFunction::from_coeffs(cg_masked(
                &ctx.stiffness_fine,
                &rhs,
                &ctx.free_fine,
                &x0,
                DEFAULT_REL_TOL,
            )?)
        };
        let defect = ctx.orthogonality_defect(space, &w_ref, &state.w);
        let w_norm = norm_with(&sctx.stiffness, &state.w);
        scaled_max = scaled_max.max(defect / (1.0 + w_norm));
        ortho.push(defect);
        sigma.push(rec);
        w_refs.push(w_ref);
    }
    Ok(VerificationRun {
        ctx,
        sigma,
        w_refs,
        ortho,
        ortho_scaled_max: scaled_max,
    })
}
