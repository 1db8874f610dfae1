//! Built-in invariant suite behind `virecon selftest`.
//!
//! A condensed version of the library's structural checks, runnable in the
//! field without the test harness: mesh conformity under random marking,
//! hand-computed estimator values, discrete KKT conditions, the lumped
//! sign property, the reconstruction orthogonality, and CSV determinism.

use std::io::Write;

use virecon_core::{
    assess_trajectory, eta0, eta1, eta_energy, kkt_report, run_trajectory, verify_trajectory,
    AssessOptions, FeFunction, Marks, MassMode, Mesh, Rect, ResidualForm, RunningIntegral, Space,
};

use crate::benchmarks::benchmark;
use crate::config::load_config;
use crate::experiment::run_experiment;
use crate::output::render_csv;
use crate::HarnessError;

struct Suite<'a, W: Write> {
    out: &'a mut W,
    failures: usize,
}

impl<W: Write> Suite<'_, W> {
    fn check(&mut self, name: &str, result: Result<bool, HarnessError>) {
        let line = match result {
            Ok(true) => format!("PASS  {name}"),
            Ok(false) => {
                self.failures += 1;
                format!("FAIL  {name}")
            }
            Err(err) => {
                self.failures += 1;
                format!("FAIL  {name}: {err}")
            }
        };
        let _ = writeln!(self.out, "{line}");
    }
}

/// Run the suite; returns Ok(true) when every check passed.
pub fn run<W: Write>(out: &mut W) -> Result<bool, HarnessError> {
    let mut suite = Suite { out, failures: 0 };

    suite.check("mesh conformity under random marking", mesh_conformity());
    suite.check("hand-computed estimator values", estimator_hand_values());
    suite.check("time accumulator arithmetic", accumulator_values());
    suite.check("discrete KKT on manufactured obstacle", kkt_invariants());
    suite.check("lumped multiplier sign", lumped_sign());
    suite.check("reconstruction orthogonality", orthogonality());
    suite.check("CSV determinism", csv_determinism());

    let ok = suite.failures == 0;
    let _ = writeln!(
        suite.out,
        "{} check(s) failed",
        suite.failures
    );
    Ok(ok)
}

fn mesh_conformity() -> Result<bool, HarnessError> {
    let mut mesh = Mesh::structured(3, Rect::new(-1.0, -1.0, 1.0, 1.0))
        .map_err(|e| HarnessError::Run(e.to_string()))?;
    // Deterministic pseudo-random marks.
    let mut state = 0x243f6a88u64;
    for _ in 0..6 {
        let n = mesh.n_elements();
        let mut marks = Vec::new();
        for _ in 0..(n / 3).max(1) {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            marks.push((state >> 33) as usize % n);
        }
        mesh = mesh
            .refine(Marks::Elements(&marks))
            .map_err(|e| HarnessError::Run(e.to_string()))?;
        mesh.validate_conforming()
            .map_err(|e| HarnessError::Run(e.to_string()))?;
    }
    Ok(true)
}

fn estimator_hand_values() -> Result<bool, HarnessError> {
    let mesh = Mesh::structured(1, Rect::UNIT).map_err(|e| HarnessError::Run(e.to_string()))?;
    let p1 = Space::new(mesh.clone(), 1).map_err(|e| HarnessError::Run(e.to_string()))?;
    let p2 = Space::new(mesh, 2).map_err(|e| HarnessError::Run(e.to_string()))?;
    let zero1 = FeFunction::zeros(p1.n_dofs());
    let zero2 = FeFunction::zeros(p2.n_dofs());
    let one = |_: f64, _: f64, _: f64| 1.0;
    let e0 = eta0(&p1, &zero1, &zero1, &zero1, &one, 0.0, ResidualForm::ProofConsistent)
        .map_err(|e| HarnessError::Run(e.to_string()))?;
    let e1 = eta1(&p2, &zero2, &zero2, &zero2, &one, 0.0, ResidualForm::ProofConsistent)
        .map_err(|e| HarnessError::Run(e.to_string()))?;
    let ev = eta_energy(&p1, &zero1, &zero1, &zero1, &one, 0.0)
        .map_err(|e| HarnessError::Run(e.to_string()))?;
    Ok((e0.total * e0.total - 4.0).abs() <= 1e-12
        && (e1.total * e1.total - 8.0).abs() <= 1e-12
        && (ev * ev - 2.0).abs() <= 1e-12)
}

fn accumulator_values() -> Result<bool, HarnessError> {
    let mut acc = RunningIntegral::new();
    for k in 1..=10 {
        acc.push(k as f64 * 0.1, 0.1);
    }
    Ok((acc.value() - 0.55).abs() < 1e-13)
}

fn kkt_invariants() -> Result<bool, HarnessError> {
    let problem = benchmark("manufactured_obstacle")?;
    let mesh = Mesh::structured(4, problem.domain).map_err(|e| HarnessError::Run(e.to_string()))?;
    let space = Space::new(mesh, 1).map_err(|e| HarnessError::Run(e.to_string()))?;
    let traj = run_trajectory(&problem, &space, 0.125, 0.5)
        .map_err(|e| HarnessError::Run(e.to_string()))?;
    let report = kkt_report(&space, &problem, &traj).map_err(|e| HarnessError::Run(e.to_string()))?;
    Ok(report.feasibility >= -1e-10
        && report.multiplier_sign >= -1e-9
        && report.complementarity <= 1e-9)
}

fn lumped_sign() -> Result<bool, HarnessError> {
    let problem = benchmark("manufactured_obstacle")?;
    let mesh = Mesh::structured(4, problem.domain).map_err(|e| HarnessError::Run(e.to_string()))?;
    let space = Space::new(mesh, 1).map_err(|e| HarnessError::Run(e.to_string()))?;
    let traj = run_trajectory(&problem, &space, 0.125, 0.5)
        .map_err(|e| HarnessError::Run(e.to_string()))?;
    let assessment = assess_trajectory(&space, &problem, &traj, &AssessOptions::default())
        .map_err(|e| HarnessError::Run(e.to_string()))?;
    Ok(assessment.breakdown.int_signeg_dual_sq <= 1e-8)
}

fn orthogonality() -> Result<bool, HarnessError> {
    let problem = benchmark("manufactured_obstacle")?;
    let mesh = Mesh::structured(4, problem.domain).map_err(|e| HarnessError::Run(e.to_string()))?;
    let space = Space::new(mesh, 1).map_err(|e| HarnessError::Run(e.to_string()))?;
    let traj = run_trajectory(&problem, &space, 0.125, 0.25)
        .map_err(|e| HarnessError::Run(e.to_string()))?;
    let run = verify_trajectory(&space, &problem, &traj, 1, MassMode::Consistent)
        .map_err(|e| HarnessError::Run(e.to_string()))?;
    Ok(run.ortho_scaled_max <= 1e-9)
}

fn csv_determinism() -> Result<bool, HarnessError> {
    let dir = std::env::temp_dir().join("virecon-selftest");
    let cfg_text = format!(
        "problem=heat_smooth\nk=1\nn=4\nlevels=1\noutdir={}\n",
        dir.display()
    );
    let cfg = load_config(&cfg_text)?;
    let a = render_csv(&run_experiment(&cfg)?);
    let b = render_csv(&run_experiment(&cfg)?);
    Ok(a == b && !a.is_empty())
}
