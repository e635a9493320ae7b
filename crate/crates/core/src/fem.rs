//! Linear elastostatics on the tetrahedral mesh: stiffness assembly from
//! per-element orthotropic properties, boundary-condition application, the
//! sparse SPD solve and strain/stress/energy recovery.
//!
//! Constant-strain tetrahedra keep every per-element quantity a closed-form
//! expression at the single integration point; the quadrature loops retain
//! the multi-point structure so richer elements could slot in.

use nalgebra::{Matrix3, SMatrix, SVector, Vector3};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::material::{reduced_shear, OrthotropicProps};
use crate::mesh::{Face, Mesh};
use crate::solver::{pcg_jacobi, CsrMatrix, SkylineCholesky};

/// Strain-displacement operator of a 4-node tetrahedron (6x12) and the
/// element stiffness are dense fixed-size matrices.
pub type BMatrix = SMatrix<f64, 6, 12>;
pub type ElementMatrix = SMatrix<f64, 12, 12>;

/// Dirichlet and Neumann data for one load case. Displacements are in mm,
/// forces in N; a Dirichlet entry prescribes all three components of a node.
#[derive(Debug, Clone, Default)]
pub struct BoundarySpec {
    pub dirichlet: Vec<(usize, Vector3<f64>)>,
    pub neumann: Vec<(usize, Vector3<f64>)>,
}

impl BoundarySpec {
    pub fn validate(&self, n_nodes: usize) -> Result<()> {
        let mut seen = vec![false; n_nodes];
        for &(node, _) in &self.dirichlet {
            if node >= n_nodes {
                return Err(Error::InvalidConfig(format!(
                    "Dirichlet node {node} out of range"
                )));
            }
            if seen[node] {
                return Err(Error::InvalidConfig(format!(
                    "node {node} appears twice in the Dirichlet list"
                )));
            }
            seen[node] = true;
        }
        for &(node, _) in &self.neumann {
            if node >= n_nodes {
                return Err(Error::InvalidConfig(format!(
                    "Neumann node {node} out of range"
                )));
            }
            if seen[node] {
                return Err(Error::InvalidConfig(format!(
                    "node {node} carries both a prescribed displacement and a force"
                )));
            }
        }
        Ok(())
    }

    /// Resultant of all applied nodal forces.
    pub fn total_force(&self) -> Vector3<f64> {
        self.neumann.iter().map(|&(_, f)| f).sum()
    }
}

/// Solver backend for the constrained system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SolverKind {
    /// Skyline Cholesky factorization (default).
    DirectCholesky,
    /// Jacobi-preconditioned conjugate gradients on the true residual.
    JacobiPcg { tol: f64, max_iters: usize },
}

impl Default for SolverKind {
    fn default() -> Self {
        SolverKind::DirectCholesky
    }
}

/// Nodal displacements plus per-element strain and stress blocks at the
/// integration point: `eps = (ε1, ε2, ε3)`, `gamma = (γ12, γ13, γ23)`,
/// `sigma = D^v eps`, `tau = D^d gamma`.
#[derive(Debug, Clone)]
pub struct SolutionField {
    /// Flat nodal displacements, 3 per node, in mm.
    pub u: Vec<f64>,
    pub eps: Vec<Vector3<f64>>,
    pub gamma: Vec<Vector3<f64>>,
    pub sigma: Vec<Vector3<f64>>,
    pub tau: Vec<Vector3<f64>>,
}

impl SolutionField {
    pub fn node_displacement(&self, node: usize) -> Vector3<f64> {
        Vector3::new(self.u[3 * node], self.u[3 * node + 1], self.u[3 * node + 2])
    }
}

/// Shape-function gradients and volume of element `e`.
fn tet_gradients(mesh: &Mesh, e: usize) -> ([Vector3<f64>; 4], f64) {
    let [a, b, c, d] = mesh.elements[e];
    let pa = mesh.nodes[a];
    let jac = Matrix3::from_columns(&[
        mesh.nodes[b] - pa,
        mesh.nodes[c] - pa,
        mesh.nodes[d] - pa,
    ]);
    let vol = jac.determinant() / 6.0;
    let inv_t = jac
        .try_inverse()
        .expect("positive-volume element has invertible Jacobian")
        .transpose();
    let gb = inv_t.column(0).into_owned();
    let gc = inv_t.column(1).into_owned();
    let gd = inv_t.column(2).into_owned();
    let ga = -(gb + gc + gd);
    ([ga, gb, gc, gd], vol)
}

/// Strain-displacement matrix `B` and volume of element `e`; row order is
/// `(ε1, ε2, ε3, γ12, γ13, γ23)`.
pub fn strain_displacement(mesh: &Mesh, e: usize) -> (BMatrix, f64) {
    let (grads, vol) = tet_gradients(mesh, e);
    let mut b = BMatrix::zeros();
    for (n, g) in grads.iter().enumerate() {
        let col = 3 * n;
        b[(0, col)] = g.x;
        b[(1, col + 1)] = g.y;
        b[(2, col + 2)] = g.z;
        b[(3, col)] = g.y;
        b[(3, col + 1)] = g.x;
        b[(4, col)] = g.z;
        b[(4, col + 2)] = g.x;
        b[(5, col + 1)] = g.z;
        b[(5, col + 2)] = g.y;
    }
    (b, vol)
}

/// 12x12 stiffness `B^T D B Ω_e` of element `e`.
pub fn element_stiffness(
    mesh: &Mesh,
    e: usize,
    props: &OrthotropicProps,
) -> Result<ElementMatrix> {
    let (b, vol) = strain_displacement(mesh, e);
    let dv = props.volumetric_stiffness()?;
    let dd = props.shear_stiffness();
    let mut d = SMatrix::<f64, 6, 6>::zeros();
    d.fixed_view_mut::<3, 3>(0, 0).copy_from(&dv);
    d.fixed_view_mut::<3, 3>(3, 3).copy_from(&dd);
    Ok(b.transpose() * d * b * vol)
}

/// Reusable assembly context: the sparsity pattern and the element-entry
/// scatter map only depend on the mesh, so iterating optimizers pay the
/// symbolic cost once.
pub struct Assembler {
    n_dofs: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    /// CSR slot of each element entry in canonical `(e, a, b, ca, cb)` order.
    scatter: Vec<u32>,
}

impl Assembler {
    pub fn new(mesh: &Mesh) -> Self {
        let n_dofs = 3 * mesh.n_nodes();
        let mut pairs: Vec<(u32, u32)> = Vec::with_capacity(mesh.n_elements() * 144);
        for tet in &mesh.elements {
            for &na in tet {
                for &nb in tet {
                    for ca in 0..3u32 {
                        for cb in 0..3u32 {
                            pairs.push((3 * na as u32 + ca, 3 * nb as u32 + cb));
                        }
                    }
                }
            }
        }
        let mut unique = pairs.clone();
        unique.sort_unstable();
        unique.dedup();

        let mut row_ptr = vec![0usize; n_dofs + 1];
        for &(r, _) in &unique {
            row_ptr[r as usize + 1] += 1;
        }
        for i in 0..n_dofs {
            row_ptr[i + 1] += row_ptr[i];
        }
        let col_idx: Vec<usize> = unique.iter().map(|&(_, c)| c as usize).collect();

        let scatter = pairs
            .iter()
            .map(|&(r, c)| {
                let span = row_ptr[r as usize]..row_ptr[r as usize + 1];
                let k = col_idx[span.clone()]
                    .binary_search(&(c as usize))
                    .expect("pattern contains every element entry");
                (span.start + k) as u32
            })
            .collect();

        Assembler {
            n_dofs,
            row_ptr,
            col_idx,
            scatter,
        }
    }

    /// Assemble the unconstrained global stiffness for the given per-element
    /// properties. Element matrices are computed in parallel; the scatter is
    /// a fixed-order sequential reduction, so the result is bit-reproducible
    /// at any thread count.
    pub fn assemble(&self, mesh: &Mesh, props: &[OrthotropicProps]) -> Result<CsrMatrix> {
        assert_eq!(props.len(), mesh.n_elements());
        let element_matrices: Vec<ElementMatrix> = (0..mesh.n_elements())
            .into_par_iter()
            .map(|e| element_stiffness(mesh, e, &props[e]))
            .collect::<Result<_>>()?;

        let mut values = vec![0.0f64; self.col_idx.len()];
        let mut slots = self.scatter.iter();
        for ke in &element_matrices {
            for a in 0..4 {
                for b in 0..4 {
                    for ca in 0..3 {
                        for cb in 0..3 {
                            let slot = *slots.next().unwrap() as usize;
                            values[slot] += ke[(3 * a + ca, 3 * b + cb)];
                        }
                    }
                }
            }
        }

        Ok(CsrMatrix {
            n: self.n_dofs,
            row_ptr: self.row_ptr.clone(),
            col_idx: self.col_idx.clone(),
            values,
        })
    }
}

/// One-shot assembly of the unconstrained global stiffness.
pub fn assemble(mesh: &Mesh, props: &[OrthotropicProps]) -> Result<CsrMatrix> {
    Assembler::new(mesh).assemble(mesh, props)
}

/// Solve the constrained equilibrium system and recover element strains and
/// stresses. `k` is the unconstrained stiffness from [`assemble`].
pub fn solve(
    mesh: &Mesh,
    k: &CsrMatrix,
    props: &[OrthotropicProps],
    bc: &BoundarySpec,
    method: SolverKind,
) -> Result<SolutionField> {
    bc.validate(mesh.n_nodes())?;
    if bc.dirichlet.is_empty() {
        return Err(Error::SingularSystem(
            "no Dirichlet constraints; rigid-body motion is unconstrained".into(),
        ));
    }
    let n_dofs = 3 * mesh.n_nodes();

    let mut prescribed: Vec<Option<f64>> = vec![None; n_dofs];
    for &(node, u) in &bc.dirichlet {
        for c in 0..3 {
            prescribed[3 * node + c] = Some(u[c]);
        }
    }

    let mut free_index = vec![usize::MAX; n_dofs];
    let mut free_dofs = Vec::with_capacity(n_dofs);
    for dof in 0..n_dofs {
        if prescribed[dof].is_none() {
            free_index[dof] = free_dofs.len();
            free_dofs.push(dof);
        }
    }
    let n_free = free_dofs.len();

    // Right-hand side: applied forces minus the prescribed-displacement
    // coupling K_fp u_p.
    let mut rhs = vec![0.0f64; n_free];
    for &(node, f) in &bc.neumann {
        for c in 0..3 {
            rhs[free_index[3 * node + c]] += f[c];
        }
    }
    let has_nonzero_prescribed = prescribed
        .iter()
        .any(|p| matches!(p, Some(v) if *v != 0.0));
    if has_nonzero_prescribed {
        for (fi, &dof) in free_dofs.iter().enumerate() {
            let (cols, vals) = k.row(dof);
            for (&c, &v) in cols.iter().zip(vals) {
                if let Some(up) = prescribed[c] {
                    if up != 0.0 {
                        rhs[fi] -= v * up;
                    }
                }
            }
        }
    }

    // Reduced stiffness on the free DOFs; renumbering preserves column order.
    let mut row_ptr = Vec::with_capacity(n_free + 1);
    row_ptr.push(0usize);
    let mut col_idx = Vec::new();
    let mut values = Vec::new();
    for &dof in &free_dofs {
        let (cols, vals) = k.row(dof);
        for (&c, &v) in cols.iter().zip(vals) {
            if prescribed[c].is_none() {
                col_idx.push(free_index[c]);
                values.push(v);
            }
        }
        row_ptr.push(col_idx.len());
    }
    let k_ff = CsrMatrix {
        n: n_free,
        row_ptr,
        col_idx,
        values,
    };

    let u_free = match method {
        SolverKind::DirectCholesky => SkylineCholesky::factorize(&k_ff)?.solve(&rhs),
        SolverKind::JacobiPcg { tol, max_iters } => pcg_jacobi(&k_ff, &rhs, tol, max_iters)?.0,
    };

    let mut u = vec![0.0f64; n_dofs];
    for (fi, &dof) in free_dofs.iter().enumerate() {
        u[dof] = u_free[fi];
    }
    for (dof, p) in prescribed.iter().enumerate() {
        if let Some(v) = p {
            u[dof] = *v;
        }
    }

    recover(mesh, props, u)
}

/// Strain and stress recovery at the element integration points.
fn recover(mesh: &Mesh, props: &[OrthotropicProps], u: Vec<f64>) -> Result<SolutionField> {
    let per_element: Vec<(Vector3<f64>, Vector3<f64>, Vector3<f64>, Vector3<f64>)> = (0..mesh
        .n_elements())
        .into_par_iter()
        .map(|e| {
            let (b, _) = strain_displacement(mesh, e);
            let mut ue = SVector::<f64, 12>::zeros();
            for (n, &node) in mesh.elements[e].iter().enumerate() {
                for c in 0..3 {
                    ue[3 * n + c] = u[3 * node + c];
                }
            }
            let strain = b * ue;
            let eps = Vector3::new(strain[0], strain[1], strain[2]);
            let gamma = Vector3::new(strain[3], strain[4], strain[5]);
            let sigma = props[e].volumetric_stiffness()? * eps;
            let tau = props[e].shear_stiffness() * gamma;
            Ok((eps, gamma, sigma, tau))
        })
        .collect::<Result<_>>()?;

    let mut eps = Vec::with_capacity(per_element.len());
    let mut gamma = Vec::with_capacity(per_element.len());
    let mut sigma = Vec::with_capacity(per_element.len());
    let mut tau = Vec::with_capacity(per_element.len());
    for (e, g, s, t) in per_element {
        eps.push(e);
        gamma.push(g);
        sigma.push(s);
        tau.push(t);
    }
    Ok(SolutionField {
        u,
        eps,
        gamma,
        sigma,
        tau,
    })
}

/// External work of the applied loads, `C = Σ f_k · u_k` over the Neumann
/// nodes, in N·mm. Equals twice the strain energy when all prescribed
/// displacements are zero.
pub fn compliance(bc: &BoundarySpec, sol: &SolutionField) -> f64 {
    bc.neumann
        .iter()
        .map(|&(node, f)| f.dot(&sol.node_displacement(node)))
        .sum()
}

/// The six decomposed energy contributions of element `e` in N·mm: three
/// volumetric terms (one per material direction) and three shear terms.
/// Their sum is the element strain energy.
pub fn element_energy(
    mesh: &Mesh,
    e: usize,
    sol: &SolutionField,
    props: &OrthotropicProps,
) -> Result<([f64; 3], [f64; 3])> {
    let eps = sol.eps[e];
    let gamma = sol.gamma[e];
    let mut vol = [0.0; 3];
    let mut dev = [0.0; 3];
    for &(_, w) in &mesh.integration_data(e) {
        for i in 0..3 {
            let dh = props.reduced_volumetric_direct(i)?;
            vol[i] += 0.5 * props.e[i] * eps.dot(&(dh * eps)) * w;
        }
        for p in 0..3 {
            dev[p] += 0.5 * props.g[p] * gamma.dot(&(reduced_shear(p) * gamma)) * w;
        }
    }
    Ok((vol, dev))
}

/// Volume-averaged elastic energy density per element, in N·mm/mm³.
pub fn energy_density(
    mesh: &Mesh,
    sol: &SolutionField,
    props: &[OrthotropicProps],
) -> Result<Vec<f64>> {
    (0..mesh.n_elements())
        .into_par_iter()
        .map(|e| {
            let (vol, dev) = element_energy(mesh, e, sol, &props[e])?;
            let w: f64 = vol.iter().sum::<f64>() + dev.iter().sum::<f64>();
            Ok(w / mesh.element_volume[e])
        })
        .collect()
}

/// Consistent nodal forces equivalent to a uniform traction on a cube face:
/// each boundary triangle spreads `traction * area / 3` to its nodes.
pub fn face_traction(
    mesh: &Mesh,
    face: Face,
    traction: Vector3<f64>,
) -> Result<Vec<(usize, Vector3<f64>)>> {
    let region = crate::mesh::Region::full_face(face);
    let face_nodes = mesh.select_nodes(&region)?;
    let on_face = {
        let mut flag = vec![false; mesh.n_nodes()];
        for &n in &face_nodes {
            flag[n] = true;
        }
        flag
    };

    let mut seen = std::collections::HashSet::new();
    let mut force: Vec<Vector3<f64>> = vec![Vector3::zeros(); mesh.n_nodes()];
    for tet in &mesh.elements {
        for f in [[0, 1, 2], [0, 1, 3], [0, 2, 3], [1, 2, 3]] {
            let tri = [tet[f[0]], tet[f[1]], tet[f[2]]];
            if !tri.iter().all(|&n| on_face[n]) {
                continue;
            }
            let mut key = tri;
            key.sort_unstable();
            if !seen.insert(key) {
                continue;
            }
            let area = 0.5
                * (mesh.nodes[tri[1]] - mesh.nodes[tri[0]])
                    .cross(&(mesh.nodes[tri[2]] - mesh.nodes[tri[0]]))
                    .norm();
            for &n in &tri {
                force[n] += traction * (area / 3.0);
            }
        }
    }

    Ok(face_nodes
        .into_iter()
        .map(|n| (n, force[n]))
        .collect())
}
