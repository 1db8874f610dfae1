//! Convergence and adaptivity studies over the benchmark problems.
//!
//! Uniform mode rebuilds the structured mesh at doubled resolution per
//! level; adaptive mode refines by Dörfler marking on the per-element
//! squared `eta0` contributions of the final time until a dof budget is
//! reached. Each level runs a full trajectory, assesses the estimator
//! terms, and records errors against the exact solution when one exists.

use std::time::Instant;

use virecon_core::{
    assess_trajectory, interpolate, kkt_report, l2_error, run_trajectory, verify_trajectory,
    AssessOptions, EstimatorBreakdown, FeFunction, KktReport, Marks, Mesh, ProblemSpec, Space,
    StepEstimates, VerificationRun,
};

use crate::benchmarks::benchmark;
use crate::config::{ExperimentConfig, TauRule};
use crate::output;
use crate::HarnessError;

/// Everything recorded about one refinement level.
pub struct LevelOutcome {
    pub level: usize,
    pub max_h: f64,
    pub n_dofs: usize,
    pub n_steps: usize,
    pub tau: f64,
    /// max over time levels of the L2 error against the exact solution.
    pub err_linf_l2: Option<f64>,
    /// L2 error at the final time.
    pub err_final: Option<f64>,
    /// L2 distance of the final multiplier to the exact one.
    pub sigma_err_final: Option<f64>,
    pub breakdown: EstimatorBreakdown,
    pub steps: Vec<StepEstimates>,
    pub effectivity: Option<f64>,
    /// Max over steps of the orthogonality defect scaled by 1 + ||w||_V
    /// (verification mode only).
    pub ortho_resid: Option<f64>,
    /// Share of the squared eta0 total carried by the largest tenth of
    /// elements.
    pub localization_top_decile: f64,
    pub kkt: KktReport,
    pub seconds: f64,
    pub space: Space,
    pub final_w: FeFunction,
    pub final_sigma: FeFunction,
    pub final_chi: FeFunction,
}

pub struct ConvergenceReport {
    pub problem: String,
    pub adaptive: bool,
    pub rows: Vec<LevelOutcome>,
}

/// Pick the time step for a mesh: `tau ~ max_h^2` rounded so that `T/tau`
/// is an integer, or the fixed value (which must divide `T`).
pub fn choose_tau(rule: TauRule, max_h: f64, t_final: f64) -> Result<(f64, usize), HarnessError> {
    match rule {
        TauRule::HSquared => {
            let target = max_h * max_h;
            let n = (t_final / target).round().max(1.0);
            Ok((t_final / n, n as usize))
        }
        TauRule::Fixed(tau) => {
            let n = (t_final / tau).round();
            if n < 1.0 || (n * tau - t_final).abs() > 1e-9 * t_final.max(1.0) {
                return Err(HarnessError::Run(format!(
                    "fixed tau {tau} does not divide T = {t_final}"
                )));
            }
            Ok((tau, n as usize))
        }
    }
}

/// Smallest set of elements carrying at least `theta` of the squared total,
/// largest contributions first (ties broken by element id).
pub fn dorfler_marks(per_element_sq: &[f64], theta: f64) -> Vec<usize> {
    let total: f64 = per_element_sq.iter().sum();
    let mut order: Vec<usize> = (0..per_element_sq.len()).collect();
    order.sort_by(|&a, &b| {
        per_element_sq[b]
            .total_cmp(&per_element_sq[a])
            .then(a.cmp(&b))
    });
    let mut marks = Vec::new();
    let mut acc = 0.0;
    for t in order {
        marks.push(t);
        acc += per_element_sq[t];
        if acc >= theta * total {
            break;
        }
    }
    marks
}

fn top_decile_share(per_element_sq: &[f64]) -> f64 {
    let total: f64 = per_element_sq.iter().sum();
    if total <= 0.0 {
        return 0.0;
    }
    let mut sorted: Vec<f64> = per_element_sq.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let count = sorted.len().div_ceil(10);
    sorted[..count].iter().sum::<f64>() / total
}

/// Run one mesh level: trajectory, estimator assessment, errors.
pub fn run_level(
    problem: &ProblemSpec,
    space: Space,
    cfg: &ExperimentConfig,
    level: usize,
) -> Result<LevelOutcome, HarnessError> {
    let started = Instant::now();
    let context = |err: virecon_core::Error| HarnessError::Run(format!("level {level}: {err}"));

    let max_h = space.mesh().max_h();
    let (tau, n_steps) = choose_tau(cfg.tau_rule, max_h, cfg.final_time)?;
    let traj = run_trajectory(problem, &space, tau, cfg.final_time).map_err(context)?;

    let verification: Option<VerificationRun> = if cfg.verification {
        Some(
            verify_trajectory(&space, problem, &traj, cfg.fine_depth, cfg.sigma_mode)
                .map_err(context)?,
        )
    } else {
        None
    };

    let opts = AssessOptions {
        sigma_mode: cfg.sigma_mode,
        residual_form: cfg.residual_form,
        verification: verification.as_ref(),
    };
    let assessment = assess_trajectory(&space, problem, &traj, &opts).map_err(context)?;

    let (err_linf_l2, err_final) = match &problem.exact_solution {
        Some(exact) => {
            let mut worst = 0.0f64;
            for state in &traj.states {
                worst = worst.max(l2_error(&space, &state.w, exact.as_ref(), state.t));
            }
            let last = traj.final_state();
            (
                Some(worst),
                Some(l2_error(&space, &last.w, exact.as_ref(), last.t)),
            )
        }
        None => (None, None),
    };
    let sigma_err_final = problem.exact_multiplier.as_ref().map(|exact| {
        let last = assessment.sigma.last().unwrap();
        l2_error(&space, &last.sigma, exact.as_ref(), traj.final_state().t)
    });
    let effectivity = err_linf_l2.and_then(|err| {
        if err > 0.0 {
            Some(assessment.breakdown.total / (0.5 * err))
        } else {
            None
        }
    });

    let kkt = kkt_report(&space, problem, &traj).map_err(context)?;
    let localization = top_decile_share(&assessment.breakdown.per_element_eta0_sq);
    let final_chi = interpolate(&space, problem.obstacle.as_ref(), traj.final_state().t)
        .map_err(context)?;

    Ok(LevelOutcome {
        level,
        max_h,
        n_dofs: space.n_dofs(),
        n_steps,
        tau,
        err_linf_l2,
        err_final,
        sigma_err_final,
        effectivity,
        ortho_resid: verification.as_ref().map(|v| v.ortho_scaled_max),
        localization_top_decile: localization,
        kkt,
        seconds: started.elapsed().as_secs_f64(),
        final_w: traj.final_state().w.clone(),
        final_sigma: assessment.sigma.last().unwrap().sigma.clone(),
        final_chi,
        steps: assessment.steps,
        breakdown: assessment.breakdown,
        space,
    })
}

/// Run the configured experiment and write `convergence.csv` plus one VTK
/// file per level into the output directory.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ConvergenceReport, HarnessError> {
    let problem = benchmark(&cfg.problem)?;
    let mut rows = Vec::new();

    if cfg.adaptive {
        let mut mesh = Mesh::structured(cfg.initial_n, problem.domain)
            .map_err(|e| HarnessError::Run(e.to_string()))?;
        let mut level = 0;
        loop {
            let space = Space::new(mesh.clone(), cfg.degree)
                .map_err(|e| HarnessError::Run(e.to_string()))?;
            let outcome = run_level(&problem, space, cfg, level)?;
            let budget_reached = outcome.n_dofs >= cfg.dof_budget;
            let marks = dorfler_marks(&outcome.breakdown.per_element_eta0_sq, cfg.theta);
            rows.push(outcome);
            if budget_reached {
                break;
            }
            mesh = mesh
                .refine(Marks::Elements(&marks))
                .map_err(|e| HarnessError::Run(format!("level {level}: {e}")))?;
            level += 1;
        }
    } else {
        for level in 0..cfg.levels {
            let n = cfg.initial_n << level;
            let mesh = Mesh::structured(n, problem.domain)
                .map_err(|e| HarnessError::Run(format!("level {level}: {e}")))?;
            let space =
                Space::new(mesh, cfg.degree).map_err(|e| HarnessError::Run(e.to_string()))?;
            rows.push(run_level(&problem, space, cfg, level)?);
        }
    }

    let report = ConvergenceReport {
        problem: cfg.problem.clone(),
        adaptive: cfg.adaptive,
        rows,
    };
    output::write_outputs(&report, &cfg.outdir)?;
    Ok(report)
}

impl ConvergenceReport {
    /// Human-readable summary (the CSV is the machine-readable artifact).
    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "problem {} ({} mode), {} level(s)\n",
            self.problem,
            if self.adaptive { "adaptive" } else { "uniform" },
            self.rows.len()
        ));
        out.push_str(
            "level     h_max    ndofs  nsteps   err_LinfL2       eta0_T    eta_total  effectivity  top10%  seconds\n",
        );
        for row in &self.rows {
            let err = row
                .err_linf_l2
                .map_or_else(|| "-".to_string(), |v| format!("{v:.4e}"));
            let eff = row
                .effectivity
                .map_or_else(|| "-".to_string(), |v| format!("{v:.3e}"));
            out.push_str(&format!(
                "{:5} {:9.4} {:8} {:7} {:>12} {:12.4e} {:12.4e} {:>12} {:6.1}% {:8.2}\n",
                row.level,
                row.max_h,
                row.n_dofs,
                row.n_steps,
                err,
                row.breakdown.eta0_final,
                row.breakdown.total,
                eff,
                100.0 * row.localization_top_decile,
                row.seconds,
            ));
        }
        for row in &self.rows {
            if let Some(ortho) = row.ortho_resid {
                out.push_str(&format!(
                    "level {}: orthogonality defect (scaled) {ortho:.3e}\n",
                    row.level
                ));
            }
            if row.kkt.any_fallback {
                out.push_str(&format!(
                    "level {}: projected Gauss-Seidel fallback engaged\n",
                    row.level
                ));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dorfler_takes_largest_first() {
        let marks = dorfler_marks(&[0.1, 4.0, 0.2, 3.0, 0.7], 0.5);
        assert_eq!(marks, vec![1]);
        let marks = dorfler_marks(&[0.1, 4.0, 0.2, 3.0, 0.7], 0.9);
        assert_eq!(marks, vec![1, 3, 4]);
    }

    #[test]
    fn dorfler_theta_one_marks_everything() {
        let marks = dorfler_marks(&[1.0, 1.0, 1.0], 1.0);
        assert_eq!(marks.len(), 3);
    }

    #[test]
    fn tau_rule_produces_integral_step_counts() {
        let (tau, n) = choose_tau(TauRule::HSquared, 2.0f64.sqrt() / 4.0, 0.5).unwrap();
        assert_eq!(n, 4);
        assert!((tau * n as f64 - 0.5).abs() < 1e-15);
        assert!(choose_tau(TauRule::Fixed(0.3), 1.0, 0.5).is_err());
        let (tau, n) = choose_tau(TauRule::Fixed(0.125), 1.0, 0.5).unwrap();
        assert_eq!((tau, n), (0.125, 4));
    }

    #[test]
    fn top_decile_share_of_concentrated_mass() {
        let mut v = vec![0.01; 100];
        v[17] = 10.0;
        assert!(top_decile_share(&v) > 0.9);
        assert_eq!(top_decile_share(&[0.0, 0.0]), 0.0);
    }
}
