//! Backward Euler time stepping of the discrete obstacle problem.
//!
//! Each step solves the complementarity system
//!
//! ```text
//! w >= chi,   A w - b >= 0,   (A w - b)_i (w - chi)_i = 0,   A = M/tau + K
//! ```
//!
//! with a primal-dual active set iteration: dofs clamped to the obstacle
//! form the active set, the remaining dofs satisfy the linear equation, and
//! the partition is updated from the multiplier estimate until it repeats.
//! If the active set cycles or the iteration cap (one per dof) is reached,
//! a projected Gauss-Seidel sweep takes over and the state is flagged.

use alloc::boxed::Box;
use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::assemble::{assemble_load, assemble_mass, assemble_stiffness, interpolate, Field};
use crate::csr::CsrMatrix;
use crate::error::{invalid, Error, Result};
use crate::math;
use crate::mesh::Rect;
use crate::solve::{cg_masked, DEFAULT_REL_TOL};
use crate::space::{FeFunction, Space};

/// Data of a parabolic obstacle problem on a rectangle with homogeneous
/// Dirichlet conditions.
pub struct ProblemSpec {
    pub name: String,
    pub domain: Rect,
    /// Right-hand side f(x, y, t).
    pub source: Box<Field>,
    /// Analytic time derivative of the source, when available.
    pub source_dt: Option<Box<Field>>,
    /// Obstacle chi(x, y, t); must be <= 0 on the boundary.
    pub obstacle: Box<Field>,
    /// Initial data w0(x, y); the time argument is ignored.
    pub initial: Box<Field>,
    pub final_time: f64,
    pub exact_solution: Option<Box<Field>>,
    pub exact_multiplier: Option<Box<Field>>,
}

/// One accepted time level.
#[derive(Debug, Clone)]
pub struct StepState {
    pub t: f64,
    pub w: FeFunction,
    /// KKT multiplier of the step system; zero off the active set.
    pub lambda: Vec<f64>,
    pub active: Vec<bool>,
    /// Max norm of the step right-hand side, the scale for multiplier
    /// tolerances.
    pub b_inf: f64,
    /// True when the Gauss-Seidel fallback produced this state.
    pub fallback: bool,
}

/// Uniform-step record of states from t = 0 to t = T.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub tau: f64,
    pub states: Vec<StepState>,
}

impl Trajectory {
    /// Number of steps (states minus the initial one).
    pub fn n_steps(&self) -> usize {
        self.states.len() - 1
    }

    pub fn final_state(&self) -> &StepState {
        self.states.last().unwrap()
    }
}

/// Result of one complementarity solve.
#[derive(Debug, Clone)]
pub struct PdasResult {
    pub w: Vec<f64>,
    pub lambda: Vec<f64>,
    pub active: Vec<bool>,
    pub iterations: usize,
    pub fallback: bool,
}

/// Solve `A w = b` subject to `w >= chi` on non-Dirichlet dofs, `w = 0` on
/// Dirichlet dofs. `a` must already have its Dirichlet rows and columns
/// eliminated symmetrically.
pub fn pdas_solve(
    a: &CsrMatrix,
    b: &[f64],
    chi: &[f64],
    dirichlet: &[bool],
    init_active: &[bool],
) -> Result<PdasResult> {
    pdas_solve_from(a, b, chi, dirichlet, init_active, None)
}

/// `pdas_solve` with a warm-start iterate for the inner CG solves.
pub fn pdas_solve_from(
    a: &CsrMatrix,
    b: &[f64],
    chi: &[f64],
    dirichlet: &[bool],
    init_active: &[bool],
    warm: Option<&[f64]>,
) -> Result<PdasResult> {
    let n = a.dim();
    let diag = a.diagonal();
    let mut active: Vec<bool> = (0..n).map(|i| init_active[i] && !dirichlet[i]).collect();
    let mut x = warm.map_or_else(|| vec![0.0; n], <[f64]>::to_vec);
    let mut history: BTreeSet<Vec<bool>> = BTreeSet::new();
    let cap = n.max(8);

    for iter in 1..=cap {
        let free: Vec<bool> = (0..n).map(|i| !dirichlet[i] && !active[i]).collect();
        for i in 0..n {
            if dirichlet[i] {
                x[i] = 0.0;
            } else if active[i] {
                x[i] = chi[i];
            }
        }
        x = cg_masked(a, b, &free, &x, DEFAULT_REL_TOL)?;

        let ax = a.apply(&x);
        let mut lambda = vec![0.0; n];
        for i in 0..n {
            if active[i] {
                lambda[i] = ax[i] - b[i];
            }
        }
        // Reclassify: an active dof stays active while its multiplier is
        // positive; an inactive dof activates when it violates the bound.
        // The diagonal scaling makes the comparison dimensionless, and a dof
        // sitting exactly on the obstacle with zero multiplier goes inactive.
        let new_active: Vec<bool> = (0..n)
            .map(|i| !dirichlet[i] && lambda[i] - diag[i] * (x[i] - chi[i]) > 0.0)
            .collect();
        if new_active == active {
            return Ok(PdasResult {
                w: x,
                lambda,
                active,
                iterations: iter,
                fallback: false,
            });
        }
        if history.contains(&new_active) {
            break; // cycle detected
        }
        history.insert(core::mem::replace(&mut active, new_active));
    }

    projected_gauss_seidel(a, b, chi, dirichlet, &x)
}

/// Fallback solver: projected Gauss-Seidel to 1e-12 on the increment.
fn projected_gauss_seidel(
    a: &CsrMatrix,
    b: &[f64],
    chi: &[f64],
    dirichlet: &[bool],
    warm: &[f64],
) -> Result<PdasResult> {
    let n = a.dim();
    let mut x: Vec<f64> = (0..n)
        .map(|i| {
            if dirichlet[i] {
                0.0
            } else {
                warm[i].max(chi[i])
            }
        })
        .collect();
    let tol = 1e-12;
    let max_sweeps = 100 * n.max(64);
    let mut sweeps = 0;
    loop {
        sweeps += 1;
        let mut delta = 0.0f64;
        for i in 0..n {
            if dirichlet[i] {
                continue;
            }
            let mut off = 0.0;
            let mut aii = 0.0;
            for (j, v) in a.row(i) {
                if j == i {
                    aii = v;
                } else {
                    off += v * x[j];
                }
            }
            if aii <= 0.0 {
                return Err(Error::ConvergenceFailure {
                    iterations: sweeps,
                    residual: f64::INFINITY,
                });
            }
            let new = ((b[i] - off) / aii).max(chi[i]);
            delta = delta.max(math::abs(new - x[i]));
            x[i] = new;
        }
        let scale = 1.0 + x.iter().fold(0.0f64, |m, v| m.max(math::abs(*v)));
        if delta <= tol * scale {
            break;
        }
        if sweeps >= max_sweeps {
            return Err(Error::ConvergenceFailure {
                iterations: sweeps,
                residual: delta,
            });
        }
    }
    let ax = a.apply(&x);
    let mut lambda = vec![0.0; n];
    let mut active = vec![false; n];
    for i in 0..n {
        if dirichlet[i] {
            continue;
        }
        if x[i] - chi[i] <= 1e-12 * (1.0 + math::abs(chi[i])) {
            active[i] = true;
            lambda[i] = ax[i] - b[i];
        }
    }
    Ok(PdasResult {
        w: x,
        lambda,
        active,
        iterations: sweeps,
        fallback: true,
    })
}

/// Matrices of the backward Euler step system, built once per (space, tau).
pub struct StepContext {
    pub mass: CsrMatrix,
    pub stiffness: CsrMatrix,
    /// `M/tau + K` with Dirichlet elimination applied.
    pub system: CsrMatrix,
    pub dirichlet: Vec<bool>,
    pub tau: f64,
}

impl StepContext {
    pub fn new(space: &Space, tau: f64) -> Result<StepContext> {
        if !(tau > 0.0) {
            return Err(invalid("time step must be positive"));
        }
        let mass = assemble_mass(space);
        let stiffness = assemble_stiffness(space);
        let dirichlet: Vec<bool> = (0..space.n_dofs())
            .map(|i| space.is_boundary_dof(i))
            .collect();
        let system = mass
            .add_scaled(1.0 / tau, &stiffness, 1.0)
            .eliminate(&dirichlet);
        Ok(StepContext {
            mass,
            stiffness,
            system,
            dirichlet,
            tau,
        })
    }

    fn step_rhs(&self, space: &Space, prev_w: &FeFunction, problem: &ProblemSpec, t_next: f64) -> Result<Vec<f64>> {
        let mut b = assemble_load(space, problem.source.as_ref(), t_next)?;
        let m_prev = self.mass.apply(&prev_w.coeffs);
        for i in 0..b.len() {
            b[i] += m_prev[i] / self.tau;
            if self.dirichlet[i] {
                b[i] = 0.0;
            }
        }
        Ok(b)
    }
}

/// Advance one backward Euler step of the obstacle problem.
pub fn step(
    ctx: &StepContext,
    space: &Space,
    prev: &StepState,
    problem: &ProblemSpec,
    t_next: f64,
) -> Result<StepState> {
    let chi = interpolate(space, problem.obstacle.as_ref(), t_next)?;
    for i in 0..space.n_dofs() {
        if ctx.dirichlet[i] && chi.coeffs[i] > 1e-12 {
            return Err(invalid(format!(
                "obstacle positive on the boundary at t = {t_next}"
            )));
        }
    }
    let b = ctx.step_rhs(space, &prev.w, problem, t_next)?;
    let b_inf = b.iter().fold(0.0f64, |m, v| m.max(math::abs(*v)));
    let res = pdas_solve_from(
        &ctx.system,
        &b,
        &chi.coeffs,
        &ctx.dirichlet,
        &prev.active,
        Some(&prev.w.coeffs),
    )?;
    Ok(StepState {
        t: t_next,
        w: FeFunction::from_coeffs(res.w),
        lambda: res.lambda,
        active: res.active,
        b_inf,
        fallback: res.fallback,
    })
}

/// Advance one unconstrained backward Euler heat step; the reference path
/// for obstacle-free reductions.
pub fn step_unconstrained(
    ctx: &StepContext,
    space: &Space,
    prev: &StepState,
    problem: &ProblemSpec,
    t_next: f64,
) -> Result<StepState> {
    let b = ctx.step_rhs(space, &prev.w, problem, t_next)?;
    let b_inf = b.iter().fold(0.0f64, |m, v| m.max(math::abs(*v)));
    let free: Vec<bool> = ctx.dirichlet.iter().map(|&d| !d).collect();
    let mut x0 = prev.w.coeffs.clone();
    for i in 0..x0.len() {
        if ctx.dirichlet[i] {
            x0[i] = 0.0;
        }
    }
    let w = cg_masked(&ctx.system, &b, &free, &x0, DEFAULT_REL_TOL)?;
    Ok(StepState {
        t: t_next,
        w: FeFunction::from_coeffs(w),
        lambda: vec![0.0; space.n_dofs()],
        active: vec![false; space.n_dofs()],
        b_inf,
        fallback: false,
    })
}

fn step_count(tau: f64, t_final: f64) -> Result<usize> {
    if !(tau > 0.0) || !(t_final > 0.0) {
        return Err(invalid("tau and T must be positive"));
    }
    let ratio = t_final / tau;
    let n = libm::round(ratio) as usize;
    if n == 0 || math::abs(ratio - n as f64) > 1e-9 * ratio.max(1.0) {
        return Err(invalid(format!("T/tau = {ratio} is not an integer")));
    }
    Ok(n)
}

fn initial_state(space: &Space, problem: &ProblemSpec) -> Result<StepState> {
    let chi0 = interpolate(space, problem.obstacle.as_ref(), 0.0)?;
    let raw = interpolate(space, problem.initial.as_ref(), 0.0)?;
    let n = space.n_dofs();
    let mut w = Vec::with_capacity(n);
    let mut active = vec![false; n];
    for i in 0..n {
        if space.is_boundary_dof(i) {
            w.push(0.0);
        } else if raw.coeffs[i] < chi0.coeffs[i] {
            w.push(chi0.coeffs[i]);
            active[i] = true;
        } else {
            w.push(raw.coeffs[i]);
        }
    }
    Ok(StepState {
        t: 0.0,
        w: FeFunction::from_coeffs(w),
        lambda: vec![0.0; n],
        active,
        b_inf: 0.0,
        fallback: false,
    })
}

/// Run the obstacle trajectory on `[0, T]` with uniform step `tau`.
/// The initial state is the dof-wise maximum of the interpolated initial
/// data and the obstacle.
pub fn run_trajectory(
    problem: &ProblemSpec,
    space: &Space,
    tau: f64,
    t_final: f64,
) -> Result<Trajectory> {
    let n_steps = step_count(tau, t_final)?;
    let ctx = StepContext::new(space, tau)?;
    let mut states = Vec::with_capacity(n_steps + 1);
    states.push(initial_state(space, problem)?);
    for k in 1..=n_steps {
        let t_next = k as f64 * tau;
        let next = step(&ctx, space, states.last().unwrap(), problem, t_next)?;
        states.push(next);
    }
    Ok(Trajectory { tau, states })
}

/// Run the unconstrained heat trajectory with the same stepping (the
/// obstacle is ignored; the initial interpolant is not clipped).
pub fn run_heat_trajectory(
    problem: &ProblemSpec,
    space: &Space,
    tau: f64,
    t_final: f64,
) -> Result<Trajectory> {
    let n_steps = step_count(tau, t_final)?;
    let ctx = StepContext::new(space, tau)?;
    let raw = interpolate(space, problem.initial.as_ref(), 0.0)?;
    let mut w0 = raw.coeffs;
    for i in 0..space.n_dofs() {
        if space.is_boundary_dof(i) {
            w0[i] = 0.0;
        }
    }
    let mut states = Vec::with_capacity(n_steps + 1);
    states.push(StepState {
        t: 0.0,
        w: FeFunction::from_coeffs(w0),
        lambda: vec![0.0; space.n_dofs()],
        active: vec![false; space.n_dofs()],
        b_inf: 0.0,
        fallback: false,
    });
    for k in 1..=n_steps {
        let t_next = k as f64 * tau;
        let next = step_unconstrained(&ctx, space, states.last().unwrap(), problem, t_next)?;
        states.push(next);
    }
    Ok(Trajectory { tau, states })
}

/// Worst-case discrete KKT measures over a trajectory, each normalized by
/// its tolerance scale.
#[derive(Debug, Clone, Copy)]
pub struct KktReport {
    /// min over steps and dofs of (w - chi) / (1 + ||chi||_inf); feasible
    /// trajectories keep this above -1e-10.
    pub feasibility: f64,
    /// min over steps and dofs of lambda / ||b||_inf; stays above -1e-9.
    pub multiplier_sign: f64,
    /// max over steps of |lambda' (w - chi)| / (||lambda||_inf ||w - chi||_inf).
    pub complementarity: f64,
    pub any_fallback: bool,
}

pub fn kkt_report(space: &Space, problem: &ProblemSpec, traj: &Trajectory) -> Result<KktReport> {
    let mut feasibility = f64::INFINITY;
    let mut multiplier_sign = f64::INFINITY;
    let mut complementarity = 0.0f64;
    let mut any_fallback = false;
    for state in &traj.states {
        let chi = interpolate(space, problem.obstacle.as_ref(), state.t)?;
        let chi_inf = chi.max_abs();
        let mut comp = 0.0;
        let mut gap_inf = 0.0f64;
        let lam_inf = state.lambda.iter().fold(0.0f64, |m, v| m.max(math::abs(*v)));
        for i in 0..space.n_dofs() {
            let gap = state.w.coeffs[i] - chi.coeffs[i];
            feasibility = feasibility.min(gap / (1.0 + chi_inf));
            comp += state.lambda[i] * gap;
            gap_inf = gap_inf.max(math::abs(gap));
            if state.b_inf > 0.0 {
                multiplier_sign = multiplier_sign.min(state.lambda[i] / state.b_inf);
            }
        }
        if lam_inf > 0.0 && gap_inf > 0.0 {
            complementarity = complementarity.max(math::abs(comp) / (lam_inf * gap_inf));
        }
        any_fallback |= state.fallback;
    }
    Ok(KktReport {
        feasibility,
        multiplier_sign: if multiplier_sign.is_finite() {
            multiplier_sign
        } else {
            0.0
        },
        complementarity,
        any_fallback,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assemble::{l2_error, norm, NormKind};
    use crate::mesh::{Mesh, Rect};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn boxed(f: impl Fn(f64, f64, f64) -> f64 + Send + Sync + 'static) -> Box<Field> {
        Box::new(f)
    }

    /// Smooth decaying problem with an obstacle far below the solution.
    fn smooth_problem() -> ProblemSpec {
        let pi = core::f64::consts::PI;
        let w = move |x: f64, y: f64, t: f64| (-t).exp() * (pi * x).sin() * (pi * y).sin();
        ProblemSpec {
            name: String::from("smooth"),
            domain: Rect::UNIT,
            source: boxed(move |x, y, t| (2.0 * pi * pi - 1.0) * w(x, y, t)),
            source_dt: None,
            obstacle: boxed(|_, _, _| -10.0),
            initial: boxed(move |x, y, _| w(x, y, 0.0)),
            final_time: 0.5,
            exact_solution: Some(boxed(w)),
            exact_multiplier: None,
        }
    }

    #[test]
    fn pdas_inactive_constraint_matches_unconstrained() {
        let mesh = Mesh::structured(4, Rect::UNIT).unwrap();
        let space = Space::new(mesh, 1).unwrap();
        let ctx = StepContext::new(&space, 0.1).unwrap();
        let b: Vec<f64> = (0..space.n_dofs())
            .map(|i| {
                if space.is_boundary_dof(i) {
                    0.0
                } else {
                    (i % 5) as f64 * 0.1
                }
            })
            .collect();
        let chi = vec![-1e6; space.n_dofs()];
        let init = vec![false; space.n_dofs()];
        let res = pdas_solve(&ctx.system, &b, &chi, &ctx.dirichlet, &init).unwrap();
        assert!(res.active.iter().all(|&a| !a));
        assert!(res.lambda.iter().all(|&l| l == 0.0));
        let free: Vec<bool> = ctx.dirichlet.iter().map(|&d| !d).collect();
        let x0 = vec![0.0; space.n_dofs()];
        let direct = cg_masked(&ctx.system, &b, &free, &x0, 1e-12).unwrap();
        for i in 0..space.n_dofs() {
            assert!((res.w[i] - direct[i]).abs() <= 1e-12);
        }
    }

    #[test]
    fn pdas_one_dof_clamped() {
        let a = CsrMatrix::from_dense(&[vec![2.0]]);
        let res = pdas_solve(&a, &[-1.0], &[0.0], &[false], &[false]).unwrap();
        assert_eq!(res.w[0], 0.0);
        assert!((res.lambda[0] - 1.0).abs() < 1e-14);
        assert!(res.active[0]);
        assert!(!res.fallback);
    }

    #[test]
    fn pdas_matches_projected_gradient_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 20;
        for _ in 0..3 {
            let b_mat: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())
                .collect();
            let mut dense = vec![vec![0.0; n]; n];
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        dense[i][j] += b_mat[k][i] * b_mat[k][j];
                    }
                }
                dense[i][i] += n as f64 / 2.0;
            }
            let rhs: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let chi: Vec<f64> = (0..n).map(|_| rng.gen_range(-0.5..0.2)).collect();

            // Projected gradient oracle with a conservative step size.
            let row_sum_max = dense
                .iter()
                .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
                .fold(0.0f64, f64::max);
            let alpha = 1.0 / row_sum_max;
            let mut x = vec![0.0; n];
            loop {
                let mut delta = 0.0f64;
                for i in 0..n {
                    let g: f64 = dense[i].iter().zip(&x).map(|(a, v)| a * v).sum::<f64>() - rhs[i];
                    let new = (x[i] - alpha * g).max(chi[i]);
                    delta = delta.max((new - x[i]).abs());
                    x[i] = new;
                }
                if delta < 1e-14 {
                    break;
                }
            }

            let a = CsrMatrix::from_dense(&dense);
            let res = pdas_solve(&a, &rhs, &chi, &vec![false; n], &vec![false; n]).unwrap();
            for i in 0..n {
                assert!(
                    (res.w[i] - x[i]).abs() <= 1e-8,
                    "dof {i}: pdas {} vs oracle {}",
                    res.w[i],
                    x[i]
                );
            }
        }
    }

    #[test]
    fn step_with_inactive_obstacle_equals_heat_step() {
        let problem = smooth_problem();
        let mesh = Mesh::structured(4, Rect::UNIT).unwrap();
        let space = Space::new(mesh, 1).unwrap();
        let tau = 0.125;
        let ctx = StepContext::new(&space, tau).unwrap();
        let init = initial_state(&space, &problem).unwrap();
        let constrained = step(&ctx, &space, &init, &problem, tau).unwrap();
        let free = step_unconstrained(&ctx, &space, &init, &problem, tau).unwrap();
        for i in 0..space.n_dofs() {
            assert!((constrained.w.coeffs[i] - free.w.coeffs[i]).abs() <= 1e-10);
        }
    }

    #[test]
    fn step_pressed_onto_obstacle() {
        // chi = 0, f = -1, w_prev = 0: the solution stays clamped at zero
        // and the multiplier equals the load of +1 (the lumped mass diagonal).
        let problem = ProblemSpec {
            name: String::from("pressed"),
            domain: Rect::UNIT,
            source: boxed(|_, _, _| -1.0),
            source_dt: None,
            obstacle: boxed(|_, _, _| 0.0),
            initial: boxed(|_, _, _| 0.0),
            final_time: 0.1,
            exact_solution: None,
            exact_multiplier: None,
        };
        let mesh = Mesh::structured(4, Rect::UNIT).unwrap();
        let space = Space::new(mesh, 1).unwrap();
        let ctx = StepContext::new(&space, 0.1).unwrap();
        let init = initial_state(&space, &problem).unwrap();
        let state = step(&ctx, &space, &init, &problem, 0.1).unwrap();
        let lumped = crate::assemble::lumped_mass(&space);
        for i in 0..space.n_dofs() {
            assert!(state.w.coeffs[i].abs() <= 1e-12);
            if !space.is_boundary_dof(i) {
                assert!(state.active[i]);
                assert!((state.lambda[i] - lumped[i]).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn backward_euler_first_order_in_time() {
        let problem = smooth_problem();
        let mesh = Mesh::structured(8, Rect::UNIT).unwrap();
        let space = Space::new(mesh, 1).unwrap();
        let t_final = 0.25;
        let runs: Vec<FeFunction> = [0.0625, 0.03125, 0.015625]
            .iter()
            .map(|&tau| {
                run_trajectory(&problem, &space, tau, t_final)
                    .unwrap()
                    .final_state()
                    .w
                    .clone()
            })
            .collect();
        let d1 = norm(
            &space,
            &runs[0].axpy(-1.0, &runs[1]),
            NormKind::L2,
        );
        let d2 = norm(
            &space,
            &runs[1].axpy(-1.0, &runs[2]),
            NormKind::L2,
        );
        let ratio = d1 / d2;
        assert!(
            (1.7..=2.3).contains(&ratio),
            "self-convergence ratio {ratio}"
        );
    }

    #[test]
    fn trajectory_shapes_and_clipping() {
        // Obstacle strictly above the initial data in the interior, zero on
        // the boundary: the initial state is clipped onto the obstacle.
        let chi = |x: f64, y: f64, _: f64| 4.0 * x * (1.0 - x) * y * (1.0 - y);
        let problem = ProblemSpec {
            name: String::from("clip"),
            domain: Rect::UNIT,
            source: boxed(|_, _, _| 0.0),
            source_dt: None,
            obstacle: boxed(chi),
            initial: boxed(|_, _, _| 0.0),
            final_time: 0.1,
            exact_solution: None,
            exact_multiplier: None,
        };
        let mesh = Mesh::structured(4, Rect::UNIT).unwrap();
        let space = Space::new(mesh, 1).unwrap();
        let traj = run_trajectory(&problem, &space, 0.1, 0.1).unwrap();
        assert_eq!(traj.states.len(), 2);
        for i in 0..space.n_dofs() {
            if !space.is_boundary_dof(i) {
                let [x, y] = space.dof_coord(i);
                assert_eq!(traj.states[0].w.coeffs[i], chi(x, y, 0.0));
                assert!(traj.states[0].active[i]);
            }
        }
    }

    #[test]
    fn non_integral_step_count_rejected() {
        let problem = smooth_problem();
        let mesh = Mesh::structured(2, Rect::UNIT).unwrap();
        let space = Space::new(mesh, 1).unwrap();
        assert!(run_trajectory(&problem, &space, 0.3, 0.5).is_err());
    }

    #[test]
    fn smooth_trajectory_kkt_clean() {
        let problem = smooth_problem();
        let mesh = Mesh::structured(4, Rect::UNIT).unwrap();
        let space = Space::new(mesh, 1).unwrap();
        let traj = run_trajectory(&problem, &space, 0.125, 0.5).unwrap();
        let report = kkt_report(&space, &problem, &traj).unwrap();
        assert!(report.feasibility >= -1e-10);
        assert!(report.multiplier_sign >= -1e-9);
        assert!(report.complementarity <= 1e-9);
        assert!(!report.any_fallback);
    }

    #[test]
    fn heat_reduction_is_exact() {
        let problem = smooth_problem();
        let mesh = Mesh::structured(4, Rect::UNIT).unwrap();
        let space = Space::new(mesh, 1).unwrap();
        let vi = run_trajectory(&problem, &space, 0.125, 0.5).unwrap();
        let heat = run_heat_trajectory(&problem, &space, 0.125, 0.5).unwrap();
        for (a, b) in vi.states.iter().zip(&heat.states) {
            for i in 0..space.n_dofs() {
                assert!((a.w.coeffs[i] - b.w.coeffs[i]).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn smooth_benchmark_second_order_in_space() {
        let problem = smooth_problem();
        let exact = problem.exact_solution.as_ref().unwrap();
        let mut errors = Vec::new();
        for n in [4usize, 8, 16] {
            let mesh = Mesh::structured(n, Rect::UNIT).unwrap();
            let space = Space::new(mesh, 1).unwrap();
            let h = space.mesh().max_h();
            let tau = h * h;
            let n_steps = libm::round(0.5 / tau);
            let tau = 0.5 / n_steps;
            let traj = run_trajectory(&problem, &space, tau, 0.5).unwrap();
            errors.push(l2_error(
                &space,
                &traj.final_state().w,
                exact.as_ref(),
                0.5,
            ));
        }
        for pair in errors.windows(2) {
            let ratio = pair[0] / pair[1];
            assert!((3.4..=4.6).contains(&ratio), "ratio {ratio}");
        }
    }
}
