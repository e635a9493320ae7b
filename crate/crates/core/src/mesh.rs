//! Structured tetrahedral meshing of the design cube and node-set selection.
//!
//! The cube is split into `n_div^3` hexahedral cells; each cell is split into
//! five tetrahedra. The split orientation alternates with cell parity so that
//! faces of neighbouring cells carry matching diagonals and the mesh conforms.

use nalgebra::Point3;

use crate::error::{Error, Result};

/// Conforming tetrahedral mesh of a cube. Nodes are ordered x-fastest, then
/// y, then z; elements are positively oriented.
#[derive(Debug, Clone)]
pub struct Mesh {
    pub nodes: Vec<Point3<f64>>,
    /// 4-node tetrahedra as node indices.
    pub elements: Vec<[usize; 4]>,
    /// Element volumes `Ω_e` in mm³.
    pub element_volume: Vec<f64>,
    /// Edge length of the cube in mm.
    pub side_length: f64,
    /// Subdivisions per side.
    pub n_div: usize,
}

/// Cube face identifiers for boundary regions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Face {
    XMinus,
    XPlus,
    YMinus,
    YPlus,
    ZMinus,
    ZPlus,
}

impl Face {
    /// Axis normal to the face (0 = x, 1 = y, 2 = z) and the two in-face axes.
    fn axes(self) -> (usize, [usize; 2]) {
        match self {
            Face::XMinus | Face::XPlus => (0, [1, 2]),
            Face::YMinus | Face::YPlus => (1, [0, 2]),
            Face::ZMinus | Face::ZPlus => (2, [0, 1]),
        }
    }

    fn plane_coordinate(self, side_length: f64) -> f64 {
        match self {
            Face::XMinus | Face::YMinus | Face::ZMinus => 0.0,
            Face::XPlus | Face::YPlus | Face::ZPlus => side_length,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum RegionKind {
    Disk,
    Annulus,
    FullFace,
}

/// A node-selection region on one cube face: a disk, an annulus or the whole
/// face. Distances are measured in the face plane from `center`, given in
/// in-face coordinates (the two non-normal axes, in ascending axis order).
#[derive(Debug, Clone, Copy)]
pub struct Region {
    kind: RegionKind,
    pub face: Face,
    pub center: [f64; 2],
    pub r_inner: f64,
    pub r_outer: f64,
    /// Membership tolerance in mm; defaults to `1e-6 * side_length`.
    pub tol: Option<f64>,
}

impl Region {
    /// Disk of radius `r` (a zero radius selects only nodes at the center).
    pub fn disk(face: Face, center: [f64; 2], r: f64) -> Self {
        assert!(r >= 0.0, "disk radius must be non-negative");
        Region {
            kind: RegionKind::Disk,
            face,
            center,
            r_inner: 0.0,
            r_outer: r,
            tol: None,
        }
    }

    pub fn annulus(face: Face, center: [f64; 2], r_inner: f64, r_outer: f64) -> Self {
        assert!(
            0.0 <= r_inner && r_inner < r_outer,
            "annulus radii must satisfy 0 <= r_inner < r_outer"
        );
        Region {
            kind: RegionKind::Annulus,
            face,
            center,
            r_inner,
            r_outer,
            tol: None,
        }
    }

    pub fn full_face(face: Face) -> Self {
        Region {
            kind: RegionKind::FullFace,
            face,
            center: [0.0, 0.0],
            r_inner: 0.0,
            r_outer: f64::INFINITY,
            tol: None,
        }
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        assert!(tol > 0.0, "tolerance must be positive");
        self.tol = Some(tol);
        self
    }
}

/// Build the structured tetrahedral mesh of a cube.
///
/// Each hexahedral cell is split into five tetrahedra: four corner tets and
/// one central tet spanning alternating cube corners. The corner set flips
/// with `(i + j + k)` parity so shared faces conform.
pub fn build_structured_tet_mesh(n_div: usize, side_length: f64) -> Mesh {
    assert!(n_div >= 1, "n_div must be at least 1");
    assert!(side_length > 0.0, "side_length must be positive");

    let np = n_div + 1;
    let h = side_length / n_div as f64;

    let mut nodes = Vec::with_capacity(np * np * np);
    for k in 0..np {
        for j in 0..np {
            for i in 0..np {
                nodes.push(Point3::new(i as f64 * h, j as f64 * h, k as f64 * h));
            }
        }
    }

    let node_id = |i: usize, j: usize, k: usize| i + np * (j + np * k);

    let mut elements = Vec::with_capacity(5 * n_div * n_div * n_div);
    for k in 0..n_div {
        for j in 0..n_div {
            for i in 0..n_div {
                // Cell corners on the unit-cube numbering.
                let v0 = node_id(i, j, k);
                let v1 = node_id(i + 1, j, k);
                let v2 = node_id(i + 1, j + 1, k);
                let v3 = node_id(i, j + 1, k);
                let v4 = node_id(i, j, k + 1);
                let v5 = node_id(i + 1, j, k + 1);
                let v6 = node_id(i + 1, j + 1, k + 1);
                let v7 = node_id(i, j + 1, k + 1);

                let tets: [[usize; 4]; 5] = if (i + j + k) % 2 == 0 {
                    // Central tet on corners {v0, v2, v5, v7}.
                    [
                        [v0, v1, v2, v5],
                        [v0, v2, v3, v7],
                        [v0, v5, v4, v7],
                        [v2, v6, v5, v7],
                        [v0, v2, v5, v7],
                    ]
                } else {
                    // Mirrored split, central tet on {v1, v3, v4, v6}.
                    [
                        [v0, v1, v3, v4],
                        [v2, v1, v3, v6],
                        [v5, v1, v4, v6],
                        [v7, v3, v4, v6],
                        [v1, v3, v4, v6],
                    ]
                };
                elements.extend_from_slice(&tets);
            }
        }
    }

    // Enforce positive orientation and collect volumes.
    let mut element_volume = Vec::with_capacity(elements.len());
    for tet in &mut elements {
        let mut v = signed_volume(&nodes, *tet);
        if v < 0.0 {
            tet.swap(2, 3);
            v = -v;
        }
        element_volume.push(v);
    }

    Mesh {
        nodes,
        elements,
        element_volume,
        side_length,
        n_div,
    }
}

fn signed_volume(nodes: &[Point3<f64>], tet: [usize; 4]) -> f64 {
    let a = nodes[tet[0]];
    let e1 = nodes[tet[1]] - a;
    let e2 = nodes[tet[2]] - a;
    let e3 = nodes[tet[3]] - a;
    e1.cross(&e2).dot(&e3) / 6.0
}

impl Mesh {
    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_elements(&self) -> usize {
        self.elements.len()
    }

    /// Nodes contained in `region`, in ascending index order.
    pub fn select_nodes(&self, region: &Region) -> Result<Vec<usize>> {
        let tol = region.tol.unwrap_or(1e-6 * self.side_length);
        let (normal, in_face) = region.face.axes();
        let plane = region.face.plane_coordinate(self.side_length);

        let mut selected = Vec::new();
        for (idx, p) in self.nodes.iter().enumerate() {
            if (p[normal] - plane).abs() > tol {
                continue;
            }
            let inside = match region.kind {
                RegionKind::FullFace => true,
                RegionKind::Disk | RegionKind::Annulus => {
                    let du = p[in_face[0]] - region.center[0];
                    let dv = p[in_face[1]] - region.center[1];
                    let d = du.hypot(dv);
                    d >= region.r_inner - tol && d <= region.r_outer + tol
                }
            };
            if inside {
                selected.push(idx);
            }
        }

        if selected.is_empty() {
            return Err(Error::EmptyRegion(format!(
                "{:?} on {:?} (r_inner = {}, r_outer = {})",
                region.kind, region.face, region.r_inner, region.r_outer
            )));
        }
        Ok(selected)
    }

    /// Quadrature rule of element `e` as `(point, J_p * w_p)` pairs.
    ///
    /// Linear tetrahedra use the one-point rule at the centroid; the weights
    /// sum to the element volume.
    pub fn integration_data(&self, e: usize) -> Vec<(Point3<f64>, f64)> {
        let tet = self.elements[e];
        let centroid = Point3::from(
            (self.nodes[tet[0]].coords
                + self.nodes[tet[1]].coords
                + self.nodes[tet[2]].coords
                + self.nodes[tet[3]].coords)
                / 4.0,
        );
        vec![(centroid, self.element_volume[e])]
    }
}
