//! Run configuration: a JSON document covering every knob of a run, with
//! defaults matching the reference benchmark setup.
//!
//! Moduli are given in GPa at this boundary and converted to the internal
//! MPa on the way in.

use serde::{Deserialize, Serialize};
use std::path::PathBuf;

use crate::cases::{CaseGeometry, CaseName, CaseSpec};
use crate::error::{Error, Result};
use crate::fem::SolverKind;
use crate::material::{OrthotropicProps, PoissonMode, PropertyBounds};
use crate::mesh::{build_structured_tet_mesh, Mesh};
use crate::optimizer::{Approach, MaterialMode, OptimConfig};

const GPA_TO_MPA: f64 = 1e3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MaterialModeConfig {
    #[serde(rename = "isotropic", alias = "iso")]
    Isotropic,
    #[serde(rename = "orthotropic", alias = "ortho")]
    Orthotropic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ApproachConfig {
    Direct,
    Complementary,
}

/// Poisson completion selector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum PoissonModeConfig {
    Symmetry,
    KappaSum { kappa: f64 },
}

/// Linear solver selector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SolverConfig {
    Direct,
    Pcg {
        #[serde(default = "default_pcg_tol")]
        tol: f64,
        #[serde(default = "default_pcg_iters")]
        max_iters: usize,
    },
}

fn default_pcg_tol() -> f64 {
    1e-10
}

fn default_pcg_iters() -> usize {
    20_000
}

/// Full description of one run. Every field has a default; an empty JSON
/// document is the reference orthotropic-complementary tube run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub case: CaseName,
    pub material: MaterialModeConfig,
    pub approach: ApproachConfig,
    pub n_div: usize,
    /// Cube edge in mm.
    pub side_length: f64,
    /// Initial Young modulus, GPa.
    pub e0_gpa: f64,
    /// Initial shear modulus, GPa (orthotropic runs only; isotropic runs
    /// derive G from E and ν).
    pub g0_gpa: f64,
    /// Independent Poisson ratios at the start.
    pub nu0: f64,
    pub e_min_gpa: f64,
    pub e_max_gpa: f64,
    pub g_min_gpa: f64,
    pub g_max_gpa: f64,
    /// Update parameters; `null` takes the per-case default.
    pub k: Option<[f64; 6]>,
    pub epsilon: f64,
    pub max_iters: usize,
    pub poisson: PoissonModeConfig,
    pub high_energy_factor: f64,
    /// Total applied force, N.
    pub total_force: f64,
    pub geometry: CaseGeometry,
    pub solver: SolverConfig,
    pub output_dir: PathBuf,
    /// Write a field snapshot every this many iterations (0 = final only).
    pub export_every: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            case: CaseName::Tube,
            material: MaterialModeConfig::Orthotropic,
            approach: ApproachConfig::Complementary,
            n_div: 12,
            side_length: 100.0,
            e0_gpa: 200.0,
            g0_gpa: 75.19,
            nu0: 0.33,
            e_min_gpa: 50.0,
            e_max_gpa: 500.0,
            g_min_gpa: 7.519,
            g_max_gpa: 75.19,
            k: None,
            epsilon: 0.01,
            max_iters: 100,
            poisson: PoissonModeConfig::Symmetry,
            high_energy_factor: 1.0,
            total_force: 10_000.0,
            geometry: CaseGeometry::default(),
            solver: SolverConfig::Direct,
            output_dir: PathBuf::from("out"),
            export_every: 0,
        }
    }
}

/// Parse a JSON configuration; an empty or whitespace-only document yields
/// the defaults. Unknown keys and malformed values are rejected with the
/// offending field named.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let cfg: RunConfig = if text.trim().is_empty() {
        RunConfig::default()
    } else {
        serde_json::from_str(text)
            .map_err(|e| Error::InvalidConfig(format!("JSON parse error: {e}")))?
    };
    cfg.validate()?;
    Ok(cfg)
}

impl RunConfig {
    /// Validate every field, collecting all offending ones into one error.
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.n_div < 1 {
            problems.push("n_div: must be at least 1".to_string());
        }
        if !(self.side_length > 0.0) {
            problems.push(format!("side_length: must be positive, got {}", self.side_length));
        }
        if !(self.e0_gpa > 0.0) {
            problems.push(format!("e0_gpa: must be positive, got {}", self.e0_gpa));
        }
        if !(self.g0_gpa > 0.0) {
            problems.push(format!("g0_gpa: must be positive, got {}", self.g0_gpa));
        }
        if !(0.0 < self.e_min_gpa && self.e_min_gpa < self.e_max_gpa) {
            problems.push(format!(
                "e_min_gpa/e_max_gpa: need 0 < min < max, got [{}, {}]",
                self.e_min_gpa, self.e_max_gpa
            ));
        }
        if !(0.0 < self.g_min_gpa && self.g_min_gpa < self.g_max_gpa) {
            problems.push(format!(
                "g_min_gpa/g_max_gpa: need 0 < min < max, got [{}, {}]",
                self.g_min_gpa, self.g_max_gpa
            ));
        }
        if let Some(k) = self.k {
            if k.iter().any(|&v| !(v > 0.0)) {
                problems.push(format!("k: every entry must be positive, got {k:?}"));
            }
        }
        if !(self.epsilon > 0.0) {
            problems.push(format!("epsilon: must be positive, got {}", self.epsilon));
        }
        if self.max_iters < 1 {
            problems.push("max_iters: must be at least 1".to_string());
        }
        if !(self.high_energy_factor >= 0.0) {
            problems.push(format!(
                "high_energy_factor: must be non-negative, got {}",
                self.high_energy_factor
            ));
        }
        if !(self.total_force > 0.0) {
            problems.push(format!(
                "total_force: must be positive, got {}",
                self.total_force
            ));
        }
        if let PoissonModeConfig::KappaSum { kappa } = self.poisson {
            if kappa.abs() >= 2.0 {
                problems.push(format!("poisson.kappa: |kappa| must be < 2, got {kappa}"));
            }
        }
        if let SolverConfig::Pcg { tol, max_iters } = self.solver {
            if !(tol > 0.0) {
                problems.push(format!("solver.tol: must be positive, got {tol}"));
            }
            if max_iters < 1 {
                problems.push("solver.max_iters: must be at least 1".to_string());
            }
        }
        let g = &self.geometry;
        if !(0.0 <= g.crown_r_inner && g.crown_r_inner < g.crown_r_outer && g.crown_r_outer <= 0.5)
        {
            problems.push(format!(
                "geometry.crown radii: need 0 <= inner < outer <= 0.5, got [{}, {}]",
                g.crown_r_inner, g.crown_r_outer
            ));
        }
        if !(g.circle_r > 0.0 && g.leg_r > 0.0 && g.leg_center > 0.0) {
            problems.push("geometry: circle_r, leg_r and leg_center must be positive".to_string());
        }

        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(problems.join("\n")))
        }
    }

    pub fn mesh(&self) -> Mesh {
        build_structured_tet_mesh(self.n_div, self.side_length)
    }

    pub fn material_mode(&self) -> MaterialMode {
        match self.material {
            MaterialModeConfig::Isotropic => MaterialMode::Isotropic,
            MaterialModeConfig::Orthotropic => MaterialMode::Orthotropic,
        }
    }

    pub fn approach(&self) -> Approach {
        match self.approach {
            ApproachConfig::Direct => Approach::Direct,
            ApproachConfig::Complementary => Approach::Complementary,
        }
    }

    pub fn poisson_mode(&self) -> PoissonMode {
        match self.poisson {
            PoissonModeConfig::Symmetry => PoissonMode::Symmetry,
            PoissonModeConfig::KappaSum { kappa } => PoissonMode::KappaSum { kappa },
        }
    }

    pub fn solver_kind(&self) -> SolverKind {
        match self.solver {
            SolverConfig::Direct => SolverKind::DirectCholesky,
            SolverConfig::Pcg { tol, max_iters } => SolverKind::JacobiPcg { tol, max_iters },
        }
    }

    pub fn bounds(&self) -> PropertyBounds {
        PropertyBounds {
            e_min: self.e_min_gpa * GPA_TO_MPA,
            e_max: self.e_max_gpa * GPA_TO_MPA,
            g_min: self.g_min_gpa * GPA_TO_MPA,
            g_max: self.g_max_gpa * GPA_TO_MPA,
        }
    }

    /// Initial per-element state in MPa.
    pub fn initial_props(&self) -> Result<OrthotropicProps> {
        match self.material {
            MaterialModeConfig::Isotropic => {
                Ok(OrthotropicProps::isotropic(self.e0_gpa * GPA_TO_MPA, self.nu0))
            }
            MaterialModeConfig::Orthotropic => OrthotropicProps::new(
                [self.e0_gpa * GPA_TO_MPA; 3],
                [self.g0_gpa * GPA_TO_MPA; 3],
                [self.nu0; 3],
                self.poisson_mode(),
            ),
        }
    }

    /// Case definition with geometry/force overrides and the resolved `k`.
    pub fn case_spec(&self) -> CaseSpec {
        let mut spec = CaseSpec::new(self.case);
        spec.geometry = self.geometry;
        spec.total_force = self.total_force;
        if let Some(k) = self.k {
            spec.k = k;
        }
        spec
    }

    pub fn optim_config(&self) -> OptimConfig {
        OptimConfig {
            approach: self.approach(),
            material_mode: self.material_mode(),
            k: self.case_spec().k,
            bounds: self.bounds(),
            poisson: self.poisson_mode(),
            epsilon: self.epsilon,
            max_iters: self.max_iters,
            high_energy_factor: self.high_energy_factor,
            solver: self.solver_kind(),
        }
    }
}
