//! Exact transfer between nested spaces.
//!
//! Bisection keeps the coarse piecewise polynomial space inside the fine
//! one, so a coarse function is represented exactly on the fine mesh by
//! evaluating it at the fine dof coordinates. The evaluation goes through
//! the refinement ancestry: every fine element knows its coarse ancestor,
//! and the coarse polynomial piece is evaluated there directly, with no
//! point search.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{invalid, Result};
use crate::space::{FeFunction, Space};

/// Sparse interpolation operator from a coarse space into a nested fine one.
#[derive(Debug, Clone)]
pub struct Prolongation {
    n_coarse: usize,
    n_fine: usize,
    /// Per fine dof: (coarse dof, basis value) pairs.
    rows: Vec<Vec<(usize, f64)>>,
}

impl Prolongation {
    pub fn new(coarse: &Space, fine: &Space) -> Result<Prolongation> {
        if coarse.degree() != fine.degree() {
            return Err(invalid("prolongation needs equal polynomial degrees"));
        }
        let ancestors = fine
            .mesh()
            .ancestors_in(coarse.mesh().uid())
            .ok_or_else(|| invalid("fine mesh does not descend from the coarse mesh"))?;

        // First fine element owning each fine dof, in element order.
        let mut owner = vec![usize::MAX; fine.n_dofs()];
        for t in 0..fine.mesh().n_elements() {
            for &d in fine.element_dofs(t) {
                if owner[d] == usize::MAX {
                    owner[d] = t;
                }
            }
        }

        let mut rows = Vec::with_capacity(fine.n_dofs());
        for d in 0..fine.n_dofs() {
            let t_fine = owner[d];
            let t_coarse = ancestors[t_fine];
            let lam = coarse.barycentric_of(t_coarse, fine.dof_coord(d));
            let phi = coarse.basis_values(lam);
            let mut row = Vec::new();
            for (i, &cd) in coarse.element_dofs(t_coarse).iter().enumerate() {
                if phi[i] != 0.0 {
                    row.push((cd, phi[i]));
                }
            }
            rows.push(row);
        }
        Ok(Prolongation {
            n_coarse: coarse.n_dofs(),
            n_fine: fine.n_dofs(),
            rows,
        })
    }

    pub fn apply(&self, u: &FeFunction) -> FeFunction {
        debug_assert_eq!(u.len(), self.n_coarse);
        let mut out = vec![0.0; self.n_fine];
        for (d, row) in self.rows.iter().enumerate() {
            out[d] = row.iter().map(|&(c, w)| w * u.coeffs[c]).sum();
        }
        FeFunction::from_coeffs(out)
    }

    /// Adjoint map: restricts a fine functional (e.g. a load vector) to the
    /// coarse test space.
    pub fn apply_transpose(&self, v: &[f64]) -> Vec<f64> {
        debug_assert_eq!(v.len(), self.n_fine);
        let mut out = vec![0.0; self.n_coarse];
        for (d, row) in self.rows.iter().enumerate() {
            for &(c, w) in row {
                out[c] += w * v[d];
            }
        }
        out
    }
}

/// Represent a coarse function exactly on a nested fine space.
pub fn prolong(coarse: &Space, u: &FeFunction, fine: &Space) -> Result<FeFunction> {
    Ok(Prolongation::new(coarse, fine)?.apply(u))
}
