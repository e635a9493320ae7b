//! Orthotropic linear-elastic constitutive model.
//!
//! Stress and strain are handled in two 3-blocks: the volumetric block
//! couples the longitudinal components `(1, 2, 3)` through the Young moduli
//! and Poisson ratios, the deviatoric block is diagonal in the shear moduli
//! with pair ordering `(12, 13, 23)`. Internal units are MPa throughout.

use nalgebra::Matrix3;

use crate::error::{Error, Result};

/// Shear-pair ordering used everywhere: `(1,2)`, `(1,3)`, `(2,3)`.
pub const SHEAR_PAIRS: [(usize, usize); 3] = [(0, 1), (0, 2), (1, 2)];

/// Per-element elastic state of an orthotropic material.
///
/// `nu` holds the three independent ratios `(ν12, ν13, ν23)`; `nu_t` holds
/// the derived ones `(ν21, ν31, ν32)`, kept consistent by
/// [`OrthotropicProps::complete_poisson`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrthotropicProps {
    /// Young moduli `(E1, E2, E3)` in MPa.
    pub e: [f64; 3],
    /// Shear moduli `(G12, G13, G23)` in MPa.
    pub g: [f64; 3],
    /// Independent Poisson ratios `(ν12, ν13, ν23)`.
    pub nu: [f64; 3],
    /// Derived Poisson ratios `(ν21, ν31, ν32)`.
    pub nu_t: [f64; 3],
}

/// Admissible modulus ranges for the optimization, in MPa.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PropertyBounds {
    pub e_min: f64,
    pub e_max: f64,
    pub g_min: f64,
    pub g_max: f64,
}

impl PropertyBounds {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.e_min && self.e_min < self.e_max) {
            return Err(Error::InvalidConfig(format!(
                "Young modulus bounds must satisfy 0 < min < max, got [{}, {}]",
                self.e_min, self.e_max
            )));
        }
        if !(0.0 < self.g_min && self.g_min < self.g_max) {
            return Err(Error::InvalidConfig(format!(
                "shear modulus bounds must satisfy 0 < min < max, got [{}, {}]",
                self.g_min, self.g_max
            )));
        }
        Ok(())
    }
}

/// How the derived Poisson ratios follow from the independent ones.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PoissonMode {
    /// `ν12, ν13, ν23` stay fixed; `ν_ji = ν_ij E_j / E_i`.
    Symmetry,
    /// All six ratios are recomputed from the moduli so that
    /// `ν_ij + ν_ik = kappa` for every direction `i`, consistent with the
    /// symmetry relation. Requires `|kappa| < 2`.
    KappaSum { kappa: f64 },
}

impl OrthotropicProps {
    /// Orthotropic state with all directions equal, `G = E / (2 (1 + ν))`.
    pub fn isotropic(e: f64, nu: f64) -> Self {
        let g = e / (2.0 * (1.0 + nu));
        OrthotropicProps {
            e: [e; 3],
            g: [g; 3],
            nu: [nu; 3],
            nu_t: [nu; 3],
        }
    }

    /// Build a state from moduli and independent ratios, completing the
    /// derived ratios according to `mode`.
    pub fn new(e: [f64; 3], g: [f64; 3], nu: [f64; 3], mode: PoissonMode) -> Result<Self> {
        let mut p = OrthotropicProps {
            e,
            g,
            nu,
            nu_t: [0.0; 3],
        };
        p.complete_poisson(mode)?;
        Ok(p)
    }

    /// Modulus by optimization slot: `0..3` are `E1, E2, E3`, `3..6` are
    /// `G12, G13, G23`.
    pub fn slot(&self, s: usize) -> f64 {
        if s < 3 {
            self.e[s]
        } else {
            self.g[s - 3]
        }
    }

    pub fn set_slot(&mut self, s: usize, value: f64) {
        if s < 3 {
            self.e[s] = value;
        } else {
            self.g[s - 3] = value;
        }
    }

    /// Volumetric compliance block `(D^v)^{-1}` in 1/MPa:
    ///
    /// ```text
    /// [  1/E1   -ν21/E2  -ν31/E3 ]
    /// [ -ν12/E1   1/E2   -ν32/E3 ]
    /// [ -ν13/E1  -ν23/E2   1/E3  ]
    /// ```
    pub fn volumetric_compliance(&self) -> Matrix3<f64> {
        let [e1, e2, e3] = self.e;
        let [nu12, nu13, nu23] = self.nu;
        let [nu21, nu31, nu32] = self.nu_t;
        Matrix3::new(
            1.0 / e1,
            -nu21 / e2,
            -nu31 / e3,
            -nu12 / e1,
            1.0 / e2,
            -nu32 / e3,
            -nu13 / e1,
            -nu23 / e2,
            1.0 / e3,
        )
    }

    /// Volumetric stiffness block `D^v` in MPa, computed as the inverse of
    /// the compliance block so that both are always mutually consistent.
    pub fn volumetric_stiffness(&self) -> Result<Matrix3<f64>> {
        let c = self.volumetric_compliance();
        let inv = c.try_inverse().ok_or(Error::NearSingular { cond: f64::INFINITY })?;
        let cond = norm_inf(&c) * norm_inf(&inv) * self.e.iter().cloned().fold(1.0, f64::max)
            / self.e.iter().cloned().fold(f64::INFINITY, f64::min);
        // Scale-aware condition estimate of the compliance block.
        let cond = cond.max(norm_inf(&c) * norm_inf(&inv));
        if cond > 1e12 {
            return Err(Error::NearSingular { cond });
        }
        Ok(inv)
    }

    /// Deviatoric stiffness `D^d = diag(G12, G13, G23)` in MPa.
    pub fn shear_stiffness(&self) -> Matrix3<f64> {
        Matrix3::from_diagonal(&self.g.into())
    }

    /// Strain-side reduced volumetric matrix `D̂^v_i = D^v / (3 E_i)`.
    ///
    /// The three matrices reconstruct the stiffness block exactly:
    /// `Σ_i E_i D̂^v_i = D^v`.
    pub fn reduced_volumetric_direct(&self, i: usize) -> Result<Matrix3<f64>> {
        Ok(self.volumetric_stiffness()? / (3.0 * self.e[i]))
    }

    /// Stress-side reduced volumetric matrix: the single-column matrix with
    /// `(1, -ν_ij, -ν_ik)` in column `i`. Entries contain no `E_i`, and
    /// `Σ_i M_i / E_i` reconstructs the compliance block.
    pub fn reduced_volumetric_complementary(&self, i: usize) -> Matrix3<f64> {
        let [nu12, nu13, nu23] = self.nu;
        let [nu21, nu31, nu32] = self.nu_t;
        let mut m = Matrix3::zeros();
        match i {
            0 => {
                m[(0, 0)] = 1.0;
                m[(1, 0)] = -nu12;
                m[(2, 0)] = -nu13;
            }
            1 => {
                m[(0, 1)] = -nu21;
                m[(1, 1)] = 1.0;
                m[(2, 1)] = -nu23;
            }
            2 => {
                m[(0, 2)] = -nu31;
                m[(1, 2)] = -nu32;
                m[(2, 2)] = 1.0;
            }
            _ => panic!("direction index out of range"),
        }
        m
    }

    /// Recompute the derived Poisson ratios (and, in kappa mode, the
    /// independent ones) from the current Young moduli.
    pub fn complete_poisson(&mut self, mode: PoissonMode) -> Result<()> {
        if let PoissonMode::KappaSum { kappa } = mode {
            if kappa.abs() >= 2.0 {
                return Err(Error::KappaOutOfRange(kappa));
            }
            let [e1, e2, e3] = self.e;
            // Unique solution of ν_ij + ν_ik = κ under the symmetry relation:
            // ν_ij = κ/2 (1 + E_i/E_j - E_i/E_k).
            self.nu = [
                0.5 * kappa * (1.0 + e1 / e2 - e1 / e3),
                0.5 * kappa * (1.0 + e1 / e3 - e1 / e2),
                0.5 * kappa * (1.0 + e2 / e3 - e2 / e1),
            ];
        }
        self.nu_t = [
            self.nu[0] * self.e[1] / self.e[0],
            self.nu[1] * self.e[2] / self.e[0],
            self.nu[2] * self.e[2] / self.e[1],
        ];
        Ok(())
    }

    /// Evaluate the thermodynamic admissibility clauses.
    pub fn check_constraints(&self) -> ConstraintReport {
        let mut violations = Vec::new();
        for (i, &e) in self.e.iter().enumerate() {
            if e < 0.0 {
                violations.push(Violation::NegativeYoung { direction: i });
            }
        }
        for (p, &g) in self.g.iter().enumerate() {
            if g < 0.0 {
                violations.push(Violation::NegativeShear { pair: p });
            }
        }
        for (p, &(i, j)) in SHEAR_PAIRS.iter().enumerate() {
            let bound = (self.e[i] / self.e[j]).sqrt();
            if self.nu[p].abs() >= bound {
                violations.push(Violation::PoissonPairBound {
                    pair: p,
                    value: self.nu[p],
                    bound,
                });
            }
        }
        let [nu12, nu13, nu23] = self.nu;
        let [nu21, nu31, nu32] = self.nu_t;
        let lhs = nu12 * nu23 * nu31;
        let rhs = 0.5 * (1.0 - nu12 * nu21 - nu13 * nu31 - nu23 * nu32);
        if lhs >= rhs {
            violations.push(Violation::TripleProduct { lhs, rhs });
        }
        ConstraintReport { violations }
    }
}

/// One violated admissibility clause.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Violation {
    NegativeYoung { direction: usize },
    NegativeShear { pair: usize },
    /// `|ν_ij| >= sqrt(E_i / E_j)` for pair index `pair` in [`SHEAR_PAIRS`].
    PoissonPairBound { pair: usize, value: f64, bound: f64 },
    /// `ν12 ν23 ν31 >= (1 - ν12 ν21 - ν13 ν31 - ν23 ν32) / 2`.
    TripleProduct { lhs: f64, rhs: f64 },
}

/// Outcome of [`OrthotropicProps::check_constraints`].
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintReport {
    pub violations: Vec<Violation>,
}

impl ConstraintReport {
    pub fn satisfied(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Strain-side reduced shear matrix for pair index `p` (`0 => 12`,
/// `1 => 13`, `2 => 23`): the elementary matrix with a single unit entry on
/// the diagonal. The stress-side reduced matrices are identical.
pub fn reduced_shear(p: usize) -> Matrix3<f64> {
    let mut m = Matrix3::zeros();
    m[(p, p)] = 1.0;
    m
}

fn norm_inf(m: &Matrix3<f64>) -> f64 {
    (0..3)
        .map(|r| (0..3).map(|c| m[(r, c)].abs()).sum::<f64>())
        .fold(0.0, f64::max)
}
