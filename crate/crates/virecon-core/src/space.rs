//! Lagrange finite element spaces of degree 1 and 2 on triangulations.
//!
//! Dofs are vertex values for degree 1, plus one edge-midpoint value per
//! edge for degree 2. Two elements sharing an edge share the midpoint dof
//! by construction because edges are deduplicated in the mesh.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{invalid, Result};
use crate::mesh::Mesh;

/// Maximum local dofs per element (P2).
pub const MAX_LOCAL_DOFS: usize = 6;

#[derive(Debug, Clone)]
pub struct Space {
    mesh: Mesh,
    degree: usize,
    n_dofs: usize,
    dof_coords: Vec<[f64; 2]>,
    element_dofs: Vec<[usize; MAX_LOCAL_DOFS]>,
    boundary_dof: Vec<bool>,
}

/// Coefficient vector over the dofs of a space.
#[derive(Debug, Clone, PartialEq)]
pub struct FeFunction {
    pub coeffs: Vec<f64>,
}

impl FeFunction {
    pub fn zeros(n: usize) -> FeFunction {
        FeFunction {
            coeffs: vec![0.0; n],
        }
    }

    pub fn from_coeffs(coeffs: Vec<f64>) -> FeFunction {
        FeFunction { coeffs }
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Coefficient-wise `self + alpha * other`.
    pub fn axpy(&self, alpha: f64, other: &FeFunction) -> FeFunction {
        debug_assert_eq!(self.len(), other.len());
        FeFunction {
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| a + alpha * b)
                .collect(),
        }
    }

    pub fn scaled(&self, alpha: f64) -> FeFunction {
        FeFunction {
            coeffs: self.coeffs.iter().map(|c| alpha * c).collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs()))
    }
}

impl Space {
    pub fn new(mesh: Mesh, degree: usize) -> Result<Space> {
        if degree != 1 && degree != 2 {
            return Err(invalid("only degrees 1 and 2 are supported"));
        }
        let nv = mesh.n_vertices();
        let ne = mesh.n_edges();
        let n_dofs = if degree == 1 { nv } else { nv + ne };

        let mut dof_coords = Vec::with_capacity(n_dofs);
        for v in 0..nv {
            dof_coords.push(mesh.vertex(v));
        }
        if degree == 2 {
            for e in 0..ne {
                let [a, b] = mesh.edge(e);
                let pa = mesh.vertex(a);
                let pb = mesh.vertex(b);
                dof_coords.push([0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])]);
            }
        }

        let mut element_dofs = Vec::with_capacity(mesh.n_elements());
        for t in 0..mesh.n_elements() {
            let tri = mesh.triangle(t);
            let mut dofs = [usize::MAX; MAX_LOCAL_DOFS];
            dofs[..3].copy_from_slice(&tri);
            if degree == 2 {
                let edges = mesh.element_edges(t);
                for i in 0..3 {
                    dofs[3 + i] = nv + edges[i];
                }
            }
            element_dofs.push(dofs);
        }

        let mut boundary_dof = vec![false; n_dofs];
        for v in 0..nv {
            boundary_dof[v] = mesh.is_boundary_vertex(v);
        }
        if degree == 2 {
            for e in 0..ne {
                boundary_dof[nv + e] = mesh.is_boundary_edge(e);
            }
        }

        Ok(Space {
            mesh,
            degree,
            n_dofs,
            dof_coords,
            element_dofs,
            boundary_dof,
        })
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn n_dofs(&self) -> usize {
        self.n_dofs
    }

    pub fn local_dofs(&self) -> usize {
        if self.degree == 1 {
            3
        } else {
            6
        }
    }

    pub fn dof_coord(&self, i: usize) -> [f64; 2] {
        self.dof_coords[i]
    }

    pub fn element_dofs(&self, t: usize) -> &[usize] {
        &self.element_dofs[t][..self.local_dofs()]
    }

    pub fn is_boundary_dof(&self, i: usize) -> bool {
        self.boundary_dof[i]
    }

    pub fn n_boundary_dofs(&self) -> usize {
        self.boundary_dof.iter().filter(|&&b| b).count()
    }

    /// Mask of dofs not on the Dirichlet boundary.
    pub fn free_mask(&self) -> Vec<bool> {
        self.boundary_dof.iter().map(|&b| !b).collect()
    }

    /// Barycentric gradients `grad lambda_i` of element `t` (constant over
    /// the element).
    pub fn barycentric_gradients(&self, t: usize) -> [[f64; 2]; 3] {
        let [p0, p1, p2] = self.mesh.element_vertices(t);
        let two_a = (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p1[1] - p0[1]) * (p2[0] - p0[0]);
        [
            [(p1[1] - p2[1]) / two_a, (p2[0] - p1[0]) / two_a],
            [(p2[1] - p0[1]) / two_a, (p0[0] - p2[0]) / two_a],
            [(p0[1] - p1[1]) / two_a, (p1[0] - p0[0]) / two_a],
        ]
    }

    /// Values of the local basis at a barycentric point.
    pub fn basis_values(&self, lambda: [f64; 3]) -> [f64; MAX_LOCAL_DOFS] {
        let mut phi = [0.0; MAX_LOCAL_DOFS];
        if self.degree == 1 {
            phi[..3].copy_from_slice(&lambda);
        } else {
            for i in 0..3 {
                phi[i] = lambda[i] * (2.0 * lambda[i] - 1.0);
            }
            for i in 0..3 {
                // Edge dof i sits opposite vertex i.
                phi[3 + i] = 4.0 * lambda[(i + 1) % 3] * lambda[(i + 2) % 3];
            }
        }
        phi
    }

    /// Gradients of the local basis at a barycentric point.
    pub fn basis_gradients(&self, t: usize, lambda: [f64; 3]) -> [[f64; 2]; MAX_LOCAL_DOFS] {
        let g = self.barycentric_gradients(t);
        let mut grad = [[0.0; 2]; MAX_LOCAL_DOFS];
        if self.degree == 1 {
            grad[..3].copy_from_slice(&g);
        } else {
            for i in 0..3 {
                let s = 4.0 * lambda[i] - 1.0;
                grad[i] = [s * g[i][0], s * g[i][1]];
            }
            for i in 0..3 {
                let j = (i + 1) % 3;
                let k = (i + 2) % 3;
                grad[3 + i] = [
                    4.0 * (lambda[j] * g[k][0] + lambda[k] * g[j][0]),
                    4.0 * (lambda[j] * g[k][1] + lambda[k] * g[j][1]),
                ];
            }
        }
        grad
    }

    /// Physical coordinates of a barycentric point of element `t`.
    pub fn point_in_element(&self, t: usize, lambda: [f64; 3]) -> [f64; 2] {
        let [p0, p1, p2] = self.mesh.element_vertices(t);
        [
            lambda[0] * p0[0] + lambda[1] * p1[0] + lambda[2] * p2[0],
            lambda[0] * p0[1] + lambda[1] * p1[1] + lambda[2] * p2[1],
        ]
    }

    /// Barycentric coordinates of a physical point with respect to element `t`.
    pub fn barycentric_of(&self, t: usize, x: [f64; 2]) -> [f64; 3] {
        let [p0, p1, p2] = self.mesh.element_vertices(t);
        let two_a = (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p1[1] - p0[1]) * (p2[0] - p0[0]);
        let l1 = ((x[0] - p0[0]) * (p2[1] - p0[1]) - (x[1] - p0[1]) * (p2[0] - p0[0])) / two_a;
        let l2 = ((p1[0] - p0[0]) * (x[1] - p0[1]) - (p1[1] - p0[1]) * (x[0] - p0[0])) / two_a;
        [1.0 - l1 - l2, l1, l2]
    }

    /// Value of `u` at a barycentric point of element `t`.
    pub fn eval(&self, u: &FeFunction, t: usize, lambda: [f64; 3]) -> f64 {
        let phi = self.basis_values(lambda);
        self.element_dofs(t)
            .iter()
            .enumerate()
            .map(|(i, &d)| u.coeffs[d] * phi[i])
            .sum()
    }

    /// Gradient of `u` at a barycentric point of element `t`.
    pub fn eval_gradient(&self, u: &FeFunction, t: usize, lambda: [f64; 3]) -> [f64; 2] {
        let grad = self.basis_gradients(t, lambda);
        let mut out = [0.0; 2];
        for (i, &d) in self.element_dofs(t).iter().enumerate() {
            out[0] += u.coeffs[d] * grad[i][0];
            out[1] += u.coeffs[d] * grad[i][1];
        }
        out
    }

    /// Laplacian of `u` on element `t`: zero for degree 1, the constant
    /// second-derivative trace for degree 2.
    pub fn element_laplacian(&self, u: &FeFunction, t: usize) -> f64 {
        if self.degree == 1 {
            return 0.0;
        }
        let g = self.barycentric_gradients(t);
        let dofs = self.element_dofs(t);
        let mut lap = 0.0;
        for i in 0..3 {
            let gi = g[i];
            lap += u.coeffs[dofs[i]] * 4.0 * (gi[0] * gi[0] + gi[1] * gi[1]);
            let j = (i + 1) % 3;
            let k = (i + 2) % 3;
            lap += u.coeffs[dofs[3 + i]] * 8.0 * (g[j][0] * g[k][0] + g[j][1] * g[k][1]);
        }
        lap
    }
}
