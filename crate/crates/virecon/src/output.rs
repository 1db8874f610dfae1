//! CSV and legacy-ASCII VTK writers.
//!
//! `convergence.csv` carries one row per level with 17 significant digits
//! per float, so re-parsing reproduces the values exactly. Unavailable
//! fields (no exact solution, verification off) stay empty. The wall-clock
//! column is also written empty: timing goes to standard output, keeping
//! the CSV byte-identical between repeated runs of the same config.

use std::fs;
use std::io::Write;
use std::path::Path;

use virecon_core::{FeFunction, Space};

use crate::experiment::ConvergenceReport;
use crate::HarnessError;

pub const CSV_HEADER: &str = "level,h_max,ndofs,nsteps,err_LinfL2,eta0_T,eta_total,term_signeg,term_comp,term_dual,effectivity,ortho_resid,seconds";

fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt).unwrap_or_default()
}

/// Render the per-level table as CSV text.
pub fn render_csv(report: &ConvergenceReport) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for row in &report.rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},\n",
            row.level,
            fmt(row.max_h),
            row.n_dofs,
            row.n_steps,
            fmt_opt(row.err_linf_l2),
            fmt(row.breakdown.eta0_final),
            fmt(row.breakdown.total),
            fmt(row.breakdown.term_signeg),
            fmt(row.breakdown.term_comp),
            fmt(row.breakdown.term_dual),
            fmt_opt(row.effectivity),
            fmt_opt(row.ortho_resid),
        ));
    }
    out
}

/// Legacy ASCII VTK unstructured grid with point fields `w`, `sigma`, `chi`
/// and the cell field `eta0_sq`. For degree 2 the vertex values are written
/// (dofs are ordered vertices-first).
pub fn write_vtk(
    path: &Path,
    space: &Space,
    w: &FeFunction,
    sigma: &FeFunction,
    chi: &FeFunction,
    eta0_sq: &[f64],
) -> Result<(), HarnessError> {
    let mesh = space.mesh();
    let mut out = String::new();
    out.push_str("# vtk DataFile Version 3.0\n");
    out.push_str("virecon solution snapshot\n");
    out.push_str("ASCII\nDATASET UNSTRUCTURED_GRID\n");
    out.push_str(&format!("POINTS {} double\n", mesh.n_vertices()));
    for v in 0..mesh.n_vertices() {
        let [x, y] = mesh.vertex(v);
        out.push_str(&format!("{x:.17e} {y:.17e} 0\n"));
    }
    out.push_str(&format!(
        "CELLS {} {}\n",
        mesh.n_elements(),
        4 * mesh.n_elements()
    ));
    for t in 0..mesh.n_elements() {
        let [a, b, c] = mesh.triangle(t);
        out.push_str(&format!("3 {a} {b} {c}\n"));
    }
    out.push_str(&format!("CELL_TYPES {}\n", mesh.n_elements()));
    for _ in 0..mesh.n_elements() {
        out.push_str("5\n");
    }
    out.push_str(&format!("POINT_DATA {}\n", mesh.n_vertices()));
    for (name, field) in [("w", w), ("sigma", sigma), ("chi", chi)] {
        out.push_str(&format!("SCALARS {name} double 1\nLOOKUP_TABLE default\n"));
        for v in 0..mesh.n_vertices() {
            out.push_str(&format!("{:.17e}\n", field.coeffs[v]));
        }
    }
    out.push_str(&format!("CELL_DATA {}\n", mesh.n_elements()));
    out.push_str("SCALARS eta0_sq double 1\nLOOKUP_TABLE default\n");
    for t in 0..mesh.n_elements() {
        out.push_str(&format!("{:.17e}\n", eta0_sq[t]));
    }
    fs::write(path, out)?;
    Ok(())
}

/// Write `convergence.csv` and one `solution_level<k>.vtk` per level.
pub fn write_outputs(report: &ConvergenceReport, dir: &Path) -> Result<(), HarnessError> {
    fs::create_dir_all(dir)?;
    let mut csv = fs::File::create(dir.join("convergence.csv"))?;
    csv.write_all(render_csv(report).as_bytes())?;
    for row in &report.rows {
        write_vtk(
            &dir.join(format!("solution_level{}.vtk", row.level)),
            &row.space,
            &row.final_w,
            &row.final_sigma,
            &row.final_chi,
            &row.breakdown.per_element_eta0_sq,
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format_round_trips() {
        for v in [0.1, 1.0 / 3.0, 2.0f64.sqrt(), 1e-300, 12345.6789] {
            let parsed: f64 = fmt(v).parse().unwrap();
            assert_eq!(parsed, v);
        }
    }
}
