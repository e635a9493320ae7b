//! The four benchmark load cases: tube, elbow, chair and torsion.
//!
//! Every case applies a total force of 10 kN spread equally over the loaded
//! nodes and fully fixes its support nodes. Region sizes are fractions of
//! the cube edge and can be overridden through [`CaseGeometry`].

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::BoundarySpec;
use crate::mesh::{Face, Mesh, Region};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CaseName {
    Tube,
    Elbow,
    Chair,
    Torsion,
}

impl std::fmt::Display for CaseName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            CaseName::Tube => "tube",
            CaseName::Elbow => "elbow",
            CaseName::Chair => "chair",
            CaseName::Torsion => "torsion",
        };
        f.write_str(s)
    }
}

/// Region sizes as fractions of the cube edge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CaseGeometry {
    /// Inner radius of the tube/torsion crowns.
    pub crown_r_inner: f64,
    /// Outer radius of the tube/torsion crowns.
    pub crown_r_outer: f64,
    /// Radius of the elbow circles and the chair seat circle.
    pub circle_r: f64,
    /// Radius of the four chair leg disks.
    pub leg_r: f64,
    /// In-face offset of the chair leg centers from the nearest corner.
    pub leg_center: f64,
}

impl Default for CaseGeometry {
    fn default() -> Self {
        CaseGeometry {
            crown_r_inner: 0.25,
            crown_r_outer: 0.45,
            circle_r: 0.20,
            leg_r: 0.10,
            leg_center: 0.20,
        }
    }
}

/// One benchmark definition: geometry, total force and the per-case default
/// update parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CaseSpec {
    pub name: CaseName,
    pub geometry: CaseGeometry,
    /// Total applied force magnitude in N.
    pub total_force: f64,
    /// Default update parameters `k` for this case.
    pub k: [f64; 6],
}

impl CaseSpec {
    pub fn new(name: CaseName) -> Self {
        let k = match name {
            CaseName::Tube => 15.0,
            CaseName::Elbow => 20.0,
            CaseName::Chair => 30.0,
            CaseName::Torsion => 20.0,
        };
        CaseSpec {
            name,
            geometry: CaseGeometry::default(),
            total_force: 10_000.0,
            k: [k; 6],
        }
    }

    pub fn boundary_spec(&self, mesh: &Mesh) -> Result<BoundarySpec> {
        match self.name {
            CaseName::Tube => self.tube(mesh),
            CaseName::Elbow => self.elbow(mesh),
            CaseName::Chair => self.chair(mesh),
            CaseName::Torsion => self.torsion(mesh),
        }
    }

    fn center(&self, mesh: &Mesh) -> [f64; 2] {
        [mesh.side_length / 2.0, mesh.side_length / 2.0]
    }

    fn crown(&self, mesh: &Mesh, face: Face) -> Region {
        let l = mesh.side_length;
        Region::annulus(
            face,
            self.center(mesh),
            self.geometry.crown_r_inner * l,
            self.geometry.crown_r_outer * l,
        )
    }

    /// Tension between two crowns: the bottom crown is fully fixed, the top
    /// crown shares the total force in +z.
    fn tube(&self, mesh: &Mesh) -> Result<BoundarySpec> {
        let fixed = mesh.select_nodes(&self.crown(mesh, Face::ZMinus))?;
        let loaded = mesh.select_nodes(&self.crown(mesh, Face::ZPlus))?;
        Ok(build_spec(
            fixed,
            equal_split(&loaded, Vector3::new(0.0, 0.0, self.total_force)),
        ))
    }

    /// Bending bracket: a circle on the x = 0 face is fixed, a circle on the
    /// top face presses down.
    fn elbow(&self, mesh: &Mesh) -> Result<BoundarySpec> {
        let l = mesh.side_length;
        let r = self.geometry.circle_r * l;
        let fixed = mesh.select_nodes(&Region::disk(Face::XMinus, self.center(mesh), r))?;
        let loaded = mesh.select_nodes(&Region::disk(Face::ZPlus, self.center(mesh), r))?;
        Ok(build_spec(
            fixed,
            equal_split(&loaded, Vector3::new(0.0, 0.0, -self.total_force)),
        ))
    }

    /// Stool: four leg disks on the bottom face are fixed, a central circle
    /// on the top face presses down.
    fn chair(&self, mesh: &Mesh) -> Result<BoundarySpec> {
        let l = mesh.side_length;
        let c = self.geometry.leg_center * l;
        let r = self.geometry.leg_r * l;
        let mut fixed = Vec::new();
        for center in [[c, c], [l - c, c], [c, l - c], [l - c, l - c]] {
            fixed.extend(mesh.select_nodes(&Region::disk(Face::ZMinus, center, r))?);
        }
        fixed.sort_unstable();
        fixed.dedup();
        let loaded = mesh.select_nodes(&Region::disk(
            Face::ZPlus,
            self.center(mesh),
            self.geometry.circle_r * l,
        ))?;
        Ok(build_spec(
            fixed,
            equal_split(&loaded, Vector3::new(0.0, 0.0, -self.total_force)),
        ))
    }

    /// Twist between two crowns: the bottom crown is fixed; every top-crown
    /// node carries a force of equal magnitude, perpendicular to its radius
    /// vector from the face center, with positive torque about z.
    fn torsion(&self, mesh: &Mesh) -> Result<BoundarySpec> {
        let fixed = mesh.select_nodes(&self.crown(mesh, Face::ZMinus))?;
        let loaded = mesh.select_nodes(&self.crown(mesh, Face::ZPlus))?;
        let center = self.center(mesh);
        let tol = 1e-6 * mesh.side_length;
        let magnitude = self.total_force / loaded.len() as f64;

        let mut neumann = Vec::with_capacity(loaded.len());
        for &n in &loaded {
            let p = mesh.nodes[n];
            let r = Vector3::new(p.x - center[0], p.y - center[1], 0.0);
            let len = r.norm();
            if len <= tol {
                return Err(Error::DegenerateRadius { node: n });
            }
            // ẑ × r̂ gives (r × f)·ẑ > 0.
            let tangent = Vector3::new(-r.y, r.x, 0.0) / len;
            neumann.push((n, tangent * magnitude));
        }
        Ok(build_spec(fixed, neumann))
    }
}

fn build_spec(fixed: Vec<usize>, neumann: Vec<(usize, Vector3<f64>)>) -> BoundarySpec {
    BoundarySpec {
        dirichlet: fixed.into_iter().map(|n| (n, Vector3::zeros())).collect(),
        neumann,
    }
}

fn equal_split(nodes: &[usize], total: Vector3<f64>) -> Vec<(usize, Vector3<f64>)> {
    let per_node = total / nodes.len() as f64;
    nodes.iter().map(|&n| (n, per_node)).collect()
}

/// Tube case with default geometry and force.
pub fn tube(mesh: &Mesh) -> Result<BoundarySpec> {
    CaseSpec::new(CaseName::Tube).boundary_spec(mesh)
}

/// Elbow case with default geometry and force.
pub fn elbow(mesh: &Mesh) -> Result<BoundarySpec> {
    CaseSpec::new(CaseName::Elbow).boundary_spec(mesh)
}

/// Chair case with default geometry and force.
pub fn chair(mesh: &Mesh) -> Result<BoundarySpec> {
    CaseSpec::new(CaseName::Chair).boundary_spec(mesh)
}

/// Torsion case with default geometry and force.
pub fn torsion(mesh: &Mesh) -> Result<BoundarySpec> {
    CaseSpec::new(CaseName::Torsion).boundary_spec(mesh)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_structured_tet_mesh;
    use approx::assert_relative_eq;

    fn mesh12() -> Mesh {
        build_structured_tet_mesh(12, 100.0)
    }

    #[test]
    fn tube_force_sum_and_supports() {
        let mesh = mesh12();
        let bc = tube(&mesh).unwrap();
        assert!(!bc.dirichlet.is_empty() && !bc.neumann.is_empty());
        let total = bc.total_force();
        assert_relative_eq!(total.z, 10_000.0, max_relative = 1e-12);
        assert!(total.x.abs() < 1e-9 && total.y.abs() < 1e-9);
        // Every support node is fully fixed at zero.
        assert!(bc.dirichlet.iter().all(|&(_, u)| u == Vector3::zeros()));
        assert_eq!(CaseSpec::new(CaseName::Tube).k, [15.0; 6]);
    }

    #[test]
    fn elbow_force_along_z() {
        let mesh = mesh12();
        let bc = elbow(&mesh).unwrap();
        let total = bc.total_force();
        assert_relative_eq!(total.norm(), 10_000.0, max_relative = 1e-12);
        assert_relative_eq!(total.z.abs(), 10_000.0, max_relative = 1e-12);
        assert_eq!(CaseSpec::new(CaseName::Elbow).k, [20.0; 6]);
        // Fixed circle sits on the x = 0 face.
        for &(n, _) in &bc.dirichlet {
            assert_eq!(mesh.nodes[n].x, 0.0);
        }
        bc.validate(mesh.n_nodes()).unwrap();
    }

    #[test]
    fn chair_has_four_disjoint_leg_disks() {
        let mesh = mesh12();
        let spec = CaseSpec::new(CaseName::Chair);
        let bc = spec.boundary_spec(&mesh).unwrap();
        assert_eq!(spec.k, [30.0; 6]);
        let total = bc.total_force();
        assert_relative_eq!(total.z.abs(), 10_000.0, max_relative = 1e-12);

        // Every support node lies in exactly one leg disk and all four disks
        // are occupied.
        let l = mesh.side_length;
        let c = spec.geometry.leg_center * l;
        let centers = [[c, c], [l - c, c], [c, l - c], [l - c, l - c]];
        let mut counts = [0usize; 4];
        for &(n, _) in &bc.dirichlet {
            let p = mesh.nodes[n];
            let mut hits = 0;
            for (i, ctr) in centers.iter().enumerate() {
                let d = (p.x - ctr[0]).hypot(p.y - ctr[1]);
                if d <= spec.geometry.leg_r * l + 1e-9 {
                    counts[i] += 1;
                    hits += 1;
                }
            }
            assert_eq!(hits, 1, "leg disks overlap or node outside every disk");
        }
        assert!(counts.iter().all(|&c| c > 0));
    }

    #[test]
    fn torsion_forces_are_tangential() {
        let mesh = mesh12();
        let bc = torsion(&mesh).unwrap();
        assert_eq!(CaseSpec::new(CaseName::Torsion).k, [20.0; 6]);

        // Symmetric crown: zero net force, positive net torque, and the sum
        // of magnitudes is the configured total.
        let total = bc.total_force();
        assert!(total.norm() < 1e-6);
        let center = Vector3::new(50.0, 50.0, 100.0);
        let torque: f64 = bc
            .neumann
            .iter()
            .map(|&(n, f)| {
                let r = Vector3::new(mesh.nodes[n].x, mesh.nodes[n].y, mesh.nodes[n].z) - center;
                r.cross(&f).z
            })
            .sum();
        assert!(torque > 0.0);
        let magnitude_sum: f64 = bc.neumann.iter().map(|&(_, f)| f.norm()).sum();
        assert_relative_eq!(magnitude_sum, 10_000.0, max_relative = 1e-12);

        // Per-node magnitudes are equal.
        let m0 = bc.neumann[0].1.norm();
        assert!(bc.neumann.iter().all(|&(_, f)| (f.norm() - m0).abs() < 1e-9));

        // Node at (100, 50) on the top face: radius along +x, force along +y.
        let node = bc
            .neumann
            .iter()
            .find(|&&(n, _)| {
                let p = mesh.nodes[n];
                (p.x - 100.0).abs() < 1e-9 && (p.y - 50.0).abs() < 1e-9
            })
            .expect("crown contains the (100, 50) node");
        let dir = node.1 / node.1.norm();
        assert_relative_eq!(dir, Vector3::new(0.0, 1.0, 0.0), epsilon = 1e-12);
    }

    #[test]
    fn per_node_force_is_total_over_count() {
        let mesh = mesh12();
        for name in [CaseName::Tube, CaseName::Elbow, CaseName::Chair] {
            let bc = CaseSpec::new(name).boundary_spec(&mesh).unwrap();
            let expected = 10_000.0 / bc.neumann.len() as f64;
            for &(_, f) in &bc.neumann {
                assert_relative_eq!(f.norm(), expected, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn degenerate_geometry_reports_empty_region() {
        let mesh = build_structured_tet_mesh(2, 100.0);
        let mut spec = CaseSpec::new(CaseName::Tube);
        // A sliver annulus between grid rings selects nothing.
        spec.geometry.crown_r_inner = 0.30;
        spec.geometry.crown_r_outer = 0.32;
        assert!(matches!(
            spec.boundary_spec(&mesh),
            Err(Error::EmptyRegion(_))
        ));
    }

    #[test]
    fn cases_constrain_rigid_motion() {
        let mesh = mesh12();
        for name in [
            CaseName::Tube,
            CaseName::Elbow,
            CaseName::Chair,
            CaseName::Torsion,
        ] {
            let bc = CaseSpec::new(name).boundary_spec(&mesh).unwrap();
            assert!(bc.dirichlet.len() >= 3, "{name}: too few supports");
            bc.validate(mesh.n_nodes()).unwrap();
        }
    }
}
