//! Stiffness-based topology optimization for linear orthotropic solids.
//!
//! The engine discretizes a cube into linear tetrahedra, solves linear
//! elastostatics, and iteratively updates six elastic moduli per element
//! (three Young, three shear) to homogenize per-element strain-energy
//! variables. Two update rules are available: a strain-based one that
//! multiplies moduli by `1 + α` and a stress-based one that divides by
//! `1 - α`. Four benchmark load cases (tube, elbow, chair, torsion) ship as
//! ready-made boundary conditions.
//!
//! Internal units are mm, N, MPa and N·mm.

pub mod cases;
pub mod config;
pub mod energy;
pub mod error;
pub mod export;
pub mod fem;
pub mod material;
pub mod mesh;
pub mod optimizer;
pub mod solver;

pub use cases::{CaseGeometry, CaseName, CaseSpec};
pub use config::{parse_config, RunConfig};
pub use energy::{HField, HFlavor, HStats};
pub use error::{Error, Result};
pub use fem::{BoundarySpec, SolutionField, SolverKind};
pub use material::{OrthotropicProps, PoissonMode, PropertyBounds};
pub use mesh::{build_structured_tet_mesh, Face, Mesh, Region};
pub use optimizer::{
    run, run_observed, Approach, FreezeMask, IterationRecord, MaterialMode, OptimConfig,
    RunResult,
};
