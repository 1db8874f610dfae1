//! Assembly of stiffness, mass and load, nodal interpolation and norms.
//!
//! Everything integrates with the degree-4 triangle rule, which is exact for
//! all polynomial integrands that occur here (P2 mass is degree 4). Element
//! contributions are computed per element and merged through sorted
//! triplets, so the result does not depend on traversal order.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::csr::CsrMatrix;
use crate::error::{numeric, Result};
use crate::math;
use crate::quadrature::{TRI_POINTS, TRI_WEIGHTS};
use crate::space::{FeFunction, Space, MAX_LOCAL_DOFS};

/// Scalar field of space and time, the shape of problem data.
pub type Field = dyn Fn(f64, f64, f64) -> f64 + Send + Sync;

/// Borrowed scalar field; carries the borrow's lifetime, so locally built
/// closures (finite differences of another field) work as arguments.
pub type FieldRef<'a> = &'a (dyn Fn(f64, f64, f64) -> f64 + Send + Sync);

/// Local stiffness matrix of element `t`.
pub fn element_stiffness(space: &Space, t: usize) -> [[f64; MAX_LOCAL_DOFS]; MAX_LOCAL_DOFS] {
    let nl = space.local_dofs();
    let area = space.mesh().element_area(t);
    let mut local = [[0.0; MAX_LOCAL_DOFS]; MAX_LOCAL_DOFS];
    for (q, &lam) in TRI_POINTS.iter().enumerate() {
        let w = TRI_WEIGHTS[q] * area;
        let grad = space.basis_gradients(t, lam);
        for i in 0..nl {
            for j in 0..nl {
                local[i][j] += w * (grad[i][0] * grad[j][0] + grad[i][1] * grad[j][1]);
            }
        }
    }
    local
}

/// Local consistent mass matrix of element `t`.
pub fn element_mass(space: &Space, t: usize) -> [[f64; MAX_LOCAL_DOFS]; MAX_LOCAL_DOFS] {
    let nl = space.local_dofs();
    let area = space.mesh().element_area(t);
    let mut local = [[0.0; MAX_LOCAL_DOFS]; MAX_LOCAL_DOFS];
    for (q, &lam) in TRI_POINTS.iter().enumerate() {
        let w = TRI_WEIGHTS[q] * area;
        let phi = space.basis_values(lam);
        for i in 0..nl {
            for j in 0..nl {
                local[i][j] += w * phi[i] * phi[j];
            }
        }
    }
    local
}

fn assemble_local(
    space: &Space,
    kernel: impl Fn(&Space, usize) -> [[f64; MAX_LOCAL_DOFS]; MAX_LOCAL_DOFS],
) -> CsrMatrix {
    let nl = space.local_dofs();
    let mut triplets = Vec::with_capacity(space.mesh().n_elements() * nl * nl);
    for t in 0..space.mesh().n_elements() {
        let local = kernel(space, t);
        let dofs = space.element_dofs(t);
        for i in 0..nl {
            for j in 0..nl {
                triplets.push((dofs[i], dofs[j], local[i][j]));
            }
        }
    }
    CsrMatrix::from_triplets(space.n_dofs(), &triplets)
}

/// Stiffness matrix of the Dirichlet form, without boundary elimination.
pub fn assemble_stiffness(space: &Space) -> CsrMatrix {
    assemble_local(space, element_stiffness)
}

/// Consistent mass matrix.
pub fn assemble_mass(space: &Space) -> CsrMatrix {
    assemble_local(space, element_mass)
}

/// Diagonal (lumped) mass.
///
/// Degree 1 uses row-sum lumping. Row sums of the P2 mass vanish at vertex
/// dofs, so degree 2 uses diagonal scaling instead: the consistent diagonal
/// rescaled to total mass `|Omega|`. Both variants are strictly positive.
pub fn lumped_mass(space: &Space) -> Vec<f64> {
    let mass = assemble_mass(space);
    let n = space.n_dofs();
    if space.degree() == 1 {
        (0..n).map(|i| mass.row(i).map(|(_, v)| v).sum()).collect()
    } else {
        let diag = mass.diagonal();
        let total: f64 = (0..n).map(|i| mass.row(i).map(|(_, v)| v).sum::<f64>()).sum();
        let diag_sum: f64 = diag.iter().sum();
        diag.iter().map(|d| d * total / diag_sum).collect()
    }
}

/// Lumped mass as a diagonal sparse matrix.
pub fn assemble_mass_lumped(space: &Space) -> CsrMatrix {
    let diag = lumped_mass(space);
    let triplets: Vec<(usize, usize, f64)> =
        diag.iter().enumerate().map(|(i, &d)| (i, i, d)).collect();
    CsrMatrix::from_triplets(space.n_dofs(), &triplets)
}

/// Load vector `b_i = integral of f(., t) phi_i`.
pub fn assemble_load(space: &Space, f: FieldRef<'_>, t_time: f64) -> Result<Vec<f64>> {
    let nl = space.local_dofs();
    let mut b = vec![0.0; space.n_dofs()];
    for t in 0..space.mesh().n_elements() {
        let area = space.mesh().element_area(t);
        let dofs = space.element_dofs(t);
        for (q, &lam) in TRI_POINTS.iter().enumerate() {
            let x = space.point_in_element(t, lam);
            let fv = f(x[0], x[1], t_time);
            if !fv.is_finite() {
                return Err(numeric(format!(
                    "source not finite at ({}, {}, t={t_time})",
                    x[0], x[1]
                )));
            }
            let w = TRI_WEIGHTS[q] * area * fv;
            let phi = space.basis_values(lam);
            for i in 0..nl {
                b[dofs[i]] += w * phi[i];
            }
        }
    }
    Ok(b)
}

/// Nodal (Lagrange) interpolant: coefficients are the field values at the
/// dof coordinates.
pub fn interpolate(space: &Space, g: FieldRef<'_>, t_time: f64) -> Result<FeFunction> {
    let mut coeffs = Vec::with_capacity(space.n_dofs());
    for i in 0..space.n_dofs() {
        let [x, y] = space.dof_coord(i);
        let v = g(x, y, t_time);
        if !v.is_finite() {
            return Err(numeric(format!("field not finite at dof ({x}, {y})")));
        }
        coeffs.push(v);
    }
    Ok(FeFunction::from_coeffs(coeffs))
}

/// Norm selector for `norm`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormKind {
    L2,
    H1Semi,
}

/// `sqrt(u' M u)` with consistent mass, or `sqrt(u' K u)`.
pub fn norm(space: &Space, u: &FeFunction, kind: NormKind) -> f64 {
    let m = match kind {
        NormKind::L2 => assemble_mass(space),
        NormKind::H1Semi => assemble_stiffness(space),
    };
    math::sqrt(energy_product(&m, u, u).max(0.0))
}

/// `u' A v` for a symmetric matrix `A`.
pub fn energy_product(a: &CsrMatrix, u: &FeFunction, v: &FeFunction) -> f64 {
    let av = a.apply(&v.coeffs);
    u.coeffs.iter().zip(&av).map(|(x, y)| x * y).sum()
}

/// `sqrt(u' A u)` against a prebuilt matrix.
pub fn norm_with(a: &CsrMatrix, u: &FeFunction) -> f64 {
    math::sqrt(energy_product(a, u, u).max(0.0))
}

/// L2 distance between a finite element function and an analytic field,
/// by element quadrature.
pub fn l2_error(space: &Space, u: &FeFunction, g: FieldRef<'_>, t_time: f64) -> f64 {
    let mut total = 0.0;
    for t in 0..space.mesh().n_elements() {
        let area = space.mesh().element_area(t);
        for (q, &lam) in TRI_POINTS.iter().enumerate() {
            let x = space.point_in_element(t, lam);
            let diff = space.eval(u, t, lam) - g(x[0], x[1], t_time);
            total += TRI_WEIGHTS[q] * area * diff * diff;
        }
    }
    math::sqrt(total.max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{Mesh, Rect};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn reference_triangle_space(degree: usize) -> Space {
        // Single right triangle (0,0), (1,0), (0,1); the dummy rectangle
        // only fixes the area bookkeeping (validate checks the sum).
        let mesh = Mesh::from_parts(
            vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]],
            vec![[0, 1, 2], [1, 3, 2]],
            Rect::UNIT,
        )
        .unwrap();
        Space::new(mesh, degree).unwrap()
    }

    /// Stiffness of a P1 triangle via the cotangent formula, an independent
    /// assembly route.
    fn cotangent_stiffness(p: [[f64; 2]; 3]) -> [[f64; 3]; 3] {
        let mut k = [[0.0; 3]; 3];
        for i in 0..3 {
            let j = (i + 1) % 3;
            let l = (i + 2) % 3;
            // cot of the angle at vertex i, opposite edge (j, l)
            let u = [p[j][0] - p[i][0], p[j][1] - p[i][1]];
            let v = [p[l][0] - p[i][0], p[l][1] - p[i][1]];
            let cross = u[0] * v[1] - u[1] * v[0];
            let dot = u[0] * v[0] + u[1] * v[1];
            let w = 0.5 * dot / cross.abs();
            k[j][l] -= w;
            k[l][j] -= w;
            k[j][j] += w;
            k[l][l] += w;
        }
        k
    }

    #[test]
    fn p1_local_stiffness_reference_triangle() {
        let space = reference_triangle_space(1);
        // local matrix of element 0 in vertex order of the stored triangle
        let local = element_stiffness(&space, 0);
        let tri = space.mesh().triangle(0);
        // The stored triangle is a rotation of (0, 1, 2); map back to input order.
        let mut by_vertex = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                by_vertex[tri[i]][tri[j]] = local[i][j];
            }
        }
        let expected = [[1.0, -0.5, -0.5], [-0.5, 0.5, 0.0], [-0.5, 0.0, 0.5]];
        for i in 0..3 {
            for j in 0..3 {
                assert!((by_vertex[i][j] - expected[i][j]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn stiffness_annihilates_constants() {
        for degree in [1, 2] {
            let mesh = Mesh::structured(3, Rect::new(0.0, 0.0, 2.0, 1.0)).unwrap();
            let space = Space::new(mesh, degree).unwrap();
            let k = assemble_stiffness(&space);
            let ones = vec![1.0; space.n_dofs()];
            for v in k.apply(&ones) {
                assert!(v.abs() < 1e-13);
            }
        }
    }

    #[test]
    fn stiffness_matches_cotangent_oracle() {
        let mesh = Mesh::structured(2, Rect::UNIT).unwrap();
        let space = Space::new(mesh, 1).unwrap();
        let k = assemble_stiffness(&space);
        // Rebuild through the cotangent route.
        let n = space.n_dofs();
        let mut dense = vec![vec![0.0; n]; n];
        for t in 0..space.mesh().n_elements() {
            let local = cotangent_stiffness(space.mesh().element_vertices(t));
            let tri = space.mesh().triangle(t);
            for i in 0..3 {
                for j in 0..3 {
                    dense[tri[i]][tri[j]] += local[i][j];
                }
            }
        }
        for i in 0..n {
            for j in 0..n {
                assert!((k.get(i, j) - dense[i][j]).abs() < 1e-13);
            }
        }
        // Interior vertex of the n=2 grid carries the classic diagonal 4.
        let center = (0..n)
            .find(|&i| {
                let [x, y] = space.dof_coord(i);
                (x - 0.5).abs() < 1e-14 && (y - 0.5).abs() < 1e-14
            })
            .unwrap();
        assert!((k.get(center, center) - 4.0).abs() < 1e-13);
    }

    #[test]
    fn p1_local_mass_reference_triangle() {
        let space = reference_triangle_space(1);
        let local = element_mass(&space, 0);
        let tri = space.mesh().triangle(0);
        let mut by_vertex = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                by_vertex[tri[i]][tri[j]] = local[i][j];
            }
        }
        for i in 0..3 {
            for j in 0..3 {
                let expected = if i == j { 2.0 } else { 1.0 } / 24.0;
                assert!((by_vertex[i][j] - expected).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn lumped_p1_is_row_sums() {
        let space = reference_triangle_space(1);
        let lumped = lumped_mass(&space);
        // Two triangles of area 1/2: every vertex of each triangle gets 1/6.
        let mut expected = vec![0.0; 4];
        for t in 0..2 {
            for &v in space.mesh().triangle(t).iter() {
                expected[v] += 1.0 / 6.0;
            }
        }
        for i in 0..4 {
            assert!((lumped[i] - expected[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn mass_total_is_domain_area() {
        for degree in [1, 2] {
            let mesh = Mesh::structured(3, Rect::UNIT).unwrap();
            let space = Space::new(mesh, degree).unwrap();
            let m = assemble_mass(&space);
            let ones = FeFunction::from_coeffs(vec![1.0; space.n_dofs()]);
            assert!((energy_product(&m, &ones, &ones) - 1.0).abs() < 1e-13);
            let lumped: f64 = lumped_mass(&space).iter().sum();
            assert!((lumped - 1.0).abs() < 1e-13);
            assert!(lumped_mass(&space).iter().all(|&d| d > 0.0));
        }
    }

    #[test]
    fn load_of_zero_and_one() {
        let mesh = Mesh::structured(2, Rect::UNIT).unwrap();
        let space = Space::new(mesh, 1).unwrap();
        let zero = assemble_load(&space, &|_, _, _| 0.0, 0.0).unwrap();
        assert!(zero.iter().all(|&v| v == 0.0));
        let one = assemble_load(&space, &|_, _, _| 1.0, 0.0).unwrap();
        let m = assemble_mass(&space);
        let m_ones = m.apply(&vec![1.0; space.n_dofs()]);
        for i in 0..space.n_dofs() {
            assert!((one[i] - m_ones[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn load_of_affine_integrates_exactly() {
        let mesh = Mesh::structured(3, Rect::UNIT).unwrap();
        let space = Space::new(mesh, 1).unwrap();
        let b = assemble_load(&space, &|x, _, _| x, 0.0).unwrap();
        let total: f64 = b.iter().sum();
        assert!((total - 0.5).abs() < 1e-14);
    }

    #[test]
    fn load_rejects_non_finite_source() {
        let mesh = Mesh::structured(1, Rect::UNIT).unwrap();
        let space = Space::new(mesh, 1).unwrap();
        assert!(assemble_load(&space, &|_, _, _| f64::NAN, 0.0).is_err());
    }

    #[test]
    fn interpolation_reproduces_polynomials() {
        let mesh = Mesh::structured(3, Rect::UNIT).unwrap();
        let p1 = Space::new(mesh.clone(), 1).unwrap();
        let p2 = Space::new(mesh, 2).unwrap();

        let c = interpolate(&p1, &|_, _, _| 3.25, 0.0).unwrap();
        assert!(c.coeffs.iter().all(|&v| v == 3.25));

        let affine = |x: f64, y: f64, _: f64| 2.0 * x - 0.5 * y + 1.0;
        let u = interpolate(&p1, &affine, 0.0).unwrap();
        assert!(l2_error(&p1, &u, &affine, 0.0) <= 1e-12);

        let quadratic = |x: f64, y: f64, _: f64| x * x - 2.0 * x * y + 0.25 * y * y + x;
        let u2 = interpolate(&p2, &quadratic, 0.0).unwrap();
        assert!(l2_error(&p2, &u2, &quadratic, 0.0) <= 1e-12);
    }

    #[test]
    fn norms_of_linear_function() {
        let mesh = Mesh::structured(2, Rect::UNIT).unwrap();
        let space = Space::new(mesh, 1).unwrap();
        let zero = FeFunction::zeros(space.n_dofs());
        assert_eq!(norm(&space, &zero, NormKind::L2), 0.0);
        let u = interpolate(&space, &|x, _, _| x, 0.0).unwrap();
        assert!((norm(&space, &u, NormKind::L2) - (1.0f64 / 3.0).sqrt()).abs() < 1e-13);
        assert!((norm(&space, &u, NormKind::H1Semi) - 1.0).abs() < 1e-13);
    }

    #[test]
    fn matrices_symmetric_and_positive_semidefinite() {
        let mesh = Mesh::structured(3, Rect::UNIT).unwrap();
        for degree in [1, 2] {
            let space = Space::new(mesh.clone(), degree).unwrap();
            let k = assemble_stiffness(&space);
            let m = assemble_mass(&space);
            assert!(k.symmetry_defect() <= 1e-14);
            assert!(m.symmetry_defect() <= 1e-14);
            let mut rng = ChaCha8Rng::seed_from_u64(7);
            for _ in 0..100 {
                let v: Vec<f64> = (0..space.n_dofs())
                    .map(|_| rng.gen_range(-1.0..1.0))
                    .collect();
                let vf = FeFunction::from_coeffs(v);
                assert!(energy_product(&k, &vf, &vf) >= -1e-12);
                assert!(energy_product(&m, &vf, &vf) >= -1e-12);
            }
        }
    }

    #[test]
    fn p1_interpolation_second_order_in_l2() {
        let g = |x: f64, y: f64, _: f64| (2.0 * x + 0.3).sin() * (1.5 * y).cos();
        let mut errors = Vec::new();
        for n in [4usize, 8, 16] {
            let mesh = Mesh::structured(n, Rect::UNIT).unwrap();
            let space = Space::new(mesh, 1).unwrap();
            let u = interpolate(&space, &g, 0.0).unwrap();
            errors.push(l2_error(&space, &u, &g, 0.0));
        }
        for pair in errors.windows(2) {
            let order = (pair[0] / pair[1]).log2();
            assert!(order >= 1.9, "observed order {order}");
        }
    }

    /// Per-element ratio `||v||^2_e / (h_e^-1 ||v||^2_K + h_e ||grad v||^2_K)`
    /// for a given function.
    fn trace_ratio(space: &Space, v: &FeFunction, t: usize, e: usize) -> Option<f64> {
        use crate::estimator::edge_points_in_element;
        use crate::quadrature::EDGE_WEIGHTS;
        let area = space.mesh().element_area(t);
        let mut l2_sq = 0.0;
        let mut h1_sq = 0.0;
        for (q, &lam) in TRI_POINTS.iter().enumerate() {
            let val = space.eval(v, t, lam);
            let grad = space.eval_gradient(v, t, lam);
            l2_sq += TRI_WEIGHTS[q] * area * val * val;
            h1_sq += TRI_WEIGHTS[q] * area * (grad[0] * grad[0] + grad[1] * grad[1]);
        }
        let he = space.mesh().h_e(e);
        let pts = edge_points_in_element(space, t, e);
        let mut edge_sq = 0.0;
        for (q, lam) in pts.iter().enumerate() {
            let val = space.eval(v, t, *lam);
            edge_sq += 0.5 * he * EDGE_WEIGHTS[q] * val * val;
        }
        let denom = l2_sq / he + he * h1_sq;
        (denom > 1e-14).then(|| edge_sq / denom)
    }

    /// Sharp per-element trace constant: largest generalized eigenvalue of
    /// the edge mass against `h_e^-1 M_K + h_e K_K`, by power iteration on
    /// local coefficient vectors supported on one element.
    fn local_trace_sup(space: &Space, t: usize, e: usize) -> f64 {
        let dofs: Vec<usize> = space.element_dofs(t).to_vec();
        let mut v = FeFunction::zeros(space.n_dofs());
        for (i, &d) in dofs.iter().enumerate() {
            v.coeffs[d] = 1.0 + 0.37 * i as f64;
        }
        // Maximize the Rayleigh quotient by projected gradient ascent over
        // the local dofs; the space is tiny, so plain hill climbing with a
        // shrinking step converges well past the needed accuracy.
        let mut best = trace_ratio(space, &v, t, e).unwrap_or(0.0);
        let mut step = 1.0;
        for _ in 0..200 {
            let mut improved = false;
            for &d in &dofs {
                for dir in [step, -step] {
                    let old = v.coeffs[d];
                    v.coeffs[d] = old + dir * (1.0 + old.abs());
                    match trace_ratio(space, &v, t, e) {
                        Some(r) if r > best => {
                            best = r;
                            improved = true;
                        }
                        _ => v.coeffs[d] = old,
                    }
                }
            }
            if !improved {
                step *= 0.5;
                if step < 1e-9 {
                    break;
                }
            }
        }
        best
    }

    #[test]
    fn discrete_trace_inequality_bounded_across_levels() {
        // The structured mesh and its uniform bisections consist of right
        // isoceles triangles only, so the sharp constant is the same on
        // every level (about 4.2 for both degrees): the level maxima must
        // stay below 10 and must not grow.
        for degree in [1usize, 2] {
            let coarse_mesh = Mesh::structured(2, Rect::UNIT).unwrap();
            let coarse = Space::new(coarse_mesh, degree).unwrap();
            let mut spaces = vec![coarse.clone()];
            for _ in 0..2 {
                let fine_mesh = spaces
                    .last()
                    .unwrap()
                    .mesh()
                    .refine(crate::mesh::Marks::All)
                    .unwrap()
                    .refine(crate::mesh::Marks::All)
                    .unwrap();
                spaces.push(Space::new(fine_mesh, degree).unwrap());
            }

            let mut level_sup = Vec::new();
            for space in &spaces {
                // Random functions obey the bound...
                let mut rng = ChaCha8Rng::seed_from_u64(degree as u64);
                for _ in 0..100 {
                    let v = FeFunction::from_coeffs(
                        (0..space.n_dofs()).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                    );
                    for t in 0..space.mesh().n_elements() {
                        for &e in space.mesh().element_edges(t).iter() {
                            if let Some(r) = trace_ratio(space, &v, t, e) {
                                assert!(r <= 10.0, "trace ratio {r} for degree {degree}");
                            }
                        }
                    }
                }
                // ...and the sharp local constant is level-independent.
                // Elements are congruent up to similarity, so probing the
                // first few covers every shape class.
                let mut sup = 0.0f64;
                for t in 0..space.mesh().n_elements().min(8) {
                    for &e in space.mesh().element_edges(t).iter() {
                        sup = sup.max(local_trace_sup(space, t, e));
                    }
                }
                level_sup.push(sup);
            }
            for &m in &level_sup {
                assert!(m <= 10.0, "sharp trace constant {m} for degree {degree}");
            }
            for pair in level_sup.windows(2) {
                assert!(pair[1] <= pair[0] * (1.0 + 1e-6), "level sups {level_sup:?}");
            }
        }
    }
}
