//! Per-element energy variables: the six H values in strain and stress
//! flavor, their statistics over the active elements, and energy totals.
//!
//! Slot convention everywhere: `0..3` are the volumetric slots `(1, 2, 3)`,
//! `3..6` the shear slots `(12, 13, 23)`.

use rayon::prelude::*;

use crate::error::Result;
use crate::fem::SolutionField;
use crate::material::{reduced_shear, OrthotropicProps};
use crate::mesh::Mesh;

/// Which energy the H values were built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HFlavor {
    /// Strain-based: `Ψ̄_i = E_i H_i`, `Ψ̄_ij = G_ij H_ij`.
    Strain,
    /// Stress-based: `Ψ̄_i = H_i / E_i`, `Ψ̄_ij = H_ij / G_ij`.
    Stress,
}

/// Per-element six-tuples of energy variables.
#[derive(Debug, Clone)]
pub struct HField {
    pub flavor: HFlavor,
    /// Volumetric values `(H_1, H_2, H_3)` per element.
    pub vol: Vec<[f64; 3]>,
    /// Shear values `(H_12, H_13, H_23)` per element.
    pub dev: Vec<[f64; 3]>,
}

impl HField {
    pub fn n_elements(&self) -> usize {
        self.vol.len()
    }

    /// Value of optimization slot `s` (see module docs) for element `e`.
    pub fn slot(&self, e: usize, s: usize) -> f64 {
        if s < 3 {
            self.vol[e][s]
        } else {
            self.dev[e][s - 3]
        }
    }
}

/// Mean and population standard deviation per slot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HStats {
    pub mean: [f64; 6],
    pub std_dev: [f64; 6],
}

/// Strain-based H values from the solved state:
/// `H_i = Σ_p ε·D̂^v_i ε J_p w_p / (2 Σ_p J_p w_p)` and the shear analogue.
///
/// The volumetric quadratic form uses the full stiffness block, so these
/// values are never negative for admissible properties.
pub fn compute_h_direct(
    mesh: &Mesh,
    sol: &SolutionField,
    props: &[OrthotropicProps],
) -> Result<HField> {
    let per_element: Vec<([f64; 3], [f64; 3])> = (0..mesh.n_elements())
        .into_par_iter()
        .map(|e| {
            let eps = sol.eps[e];
            let gamma = sol.gamma[e];
            let mut vol = [0.0; 3];
            let mut dev = [0.0; 3];
            let mut total_w = 0.0;
            for &(_, w) in &mesh.integration_data(e) {
                total_w += w;
                for i in 0..3 {
                    let dh = props[e].reduced_volumetric_direct(i)?;
                    vol[i] += eps.dot(&(dh * eps)) * w;
                }
                for p in 0..3 {
                    dev[p] += gamma.dot(&(reduced_shear(p) * gamma)) * w;
                }
            }
            for v in vol.iter_mut().chain(dev.iter_mut()) {
                *v /= 2.0 * total_w;
            }
            Ok((vol, dev))
        })
        .collect::<Result<_>>()?;

    Ok(split(HFlavor::Strain, per_element))
}

/// Stress-based H values from the solved state, using the single-column
/// reduced compliance matrices. Strongly coupled stress states can drive a
/// volumetric slot negative; occurrences are logged, never clamped.
pub fn compute_h_complementary(
    mesh: &Mesh,
    sol: &SolutionField,
    props: &[OrthotropicProps],
) -> Result<HField> {
    let per_element: Vec<([f64; 3], [f64; 3])> = (0..mesh.n_elements())
        .into_par_iter()
        .map(|e| {
            let sigma = sol.sigma[e];
            let tau = sol.tau[e];
            let mut vol = [0.0; 3];
            let mut dev = [0.0; 3];
            let mut total_w = 0.0;
            for &(_, w) in &mesh.integration_data(e) {
                total_w += w;
                for i in 0..3 {
                    let m = props[e].reduced_volumetric_complementary(i);
                    vol[i] += sigma.dot(&(m * sigma)) * w;
                }
                for p in 0..3 {
                    dev[p] += tau.dot(&(reduced_shear(p) * tau)) * w;
                }
            }
            for v in vol.iter_mut().chain(dev.iter_mut()) {
                *v /= 2.0 * total_w;
            }
            (vol, dev)
        })
        .collect();

    let negatives = per_element
        .iter()
        .map(|(vol, _)| vol.iter().filter(|&&v| v < 0.0).count())
        .sum::<usize>();
    if negatives > 0 {
        log::debug!("{negatives} negative stress-flavor volumetric H values");
    }

    Ok(split(HFlavor::Stress, per_element))
}

fn split(flavor: HFlavor, per_element: Vec<([f64; 3], [f64; 3])>) -> HField {
    let mut vol = Vec::with_capacity(per_element.len());
    let mut dev = Vec::with_capacity(per_element.len());
    for (v, d) in per_element {
        vol.push(v);
        dev.push(d);
    }
    HField { flavor, vol, dev }
}

/// Convert to strain flavor via `H^ε_i = H^σ_i / E_i²` and
/// `H^ε_ij = H^σ_ij / G_ij²`; a strain-flavored field is returned unchanged.
pub fn to_strain_flavor(h: &HField, props: &[OrthotropicProps]) -> HField {
    match h.flavor {
        HFlavor::Strain => h.clone(),
        HFlavor::Stress => {
            let vol = h
                .vol
                .iter()
                .zip(props)
                .map(|(v, p)| [v[0] / (p.e[0] * p.e[0]), v[1] / (p.e[1] * p.e[1]), v[2] / (p.e[2] * p.e[2])])
                .collect();
            let dev = h
                .dev
                .iter()
                .zip(props)
                .map(|(d, p)| [d[0] / (p.g[0] * p.g[0]), d[1] / (p.g[1] * p.g[1]), d[2] / (p.g[2] * p.g[2])])
                .collect();
            HField {
                flavor: HFlavor::Strain,
                vol,
                dev,
            }
        }
    }
}

/// Mean and population standard deviation per slot over the elements for
/// which `active(element, slot)` holds. Sequential summation keeps the
/// result independent of thread count.
pub fn stats<F: Fn(usize, usize) -> bool>(h: &HField, active: F) -> HStats {
    let n_e = h.n_elements();
    let mut mean = [0.0; 6];
    let mut std_dev = [0.0; 6];
    for s in 0..6 {
        let mut count = 0usize;
        let mut sum = 0.0;
        for e in 0..n_e {
            if active(e, s) {
                sum += h.slot(e, s);
                count += 1;
            }
        }
        if count == 0 {
            continue;
        }
        let m = sum / count as f64;
        let mut sq = 0.0;
        for e in 0..n_e {
            if active(e, s) {
                let d = h.slot(e, s) - m;
                sq += d * d;
            }
        }
        mean[s] = m;
        std_dev[s] = (sq / count as f64).sqrt();
    }
    HStats { mean, std_dev }
}

/// Statistics over every element.
pub fn stats_all(h: &HField) -> HStats {
    stats(h, |_, _| true)
}

/// Total elastic energy reconstructed from the H values, in N·mm.
pub fn total_energy(h: &HField, props: &[OrthotropicProps], mesh: &Mesh) -> f64 {
    let mut total = 0.0;
    for e in 0..h.n_elements() {
        let p = &props[e];
        let omega = mesh.element_volume[e];
        let mut density = 0.0;
        match h.flavor {
            HFlavor::Strain => {
                for i in 0..3 {
                    density += p.e[i] * h.vol[e][i];
                }
                for pair in 0..3 {
                    density += p.g[pair] * h.dev[e][pair];
                }
            }
            HFlavor::Stress => {
                for i in 0..3 {
                    density += h.vol[e][i] / p.e[i];
                }
                for pair in 0..3 {
                    density += h.dev[e][pair] / p.g[pair];
                }
            }
        }
        total += density * omega;
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::{assemble, element_energy, face_traction, solve, BoundarySpec, SolverKind};
    use crate::material::PoissonMode;
    use crate::mesh::{build_structured_tet_mesh, Face, Region};
    use approx::assert_relative_eq;
    use nalgebra::Vector3;

    fn varied_props(n: usize) -> Vec<OrthotropicProps> {
        (0..n)
            .map(|e| {
                let f = 1.0 + (e % 5) as f64 * 0.17;
                OrthotropicProps::new(
                    [90e3 * f, 140e3, 260e3 / f],
                    [9e3 * f, 31e3, 52e3],
                    [0.18, 0.27, 0.12],
                    PoissonMode::Symmetry,
                )
                .unwrap()
            })
            .collect()
    }

    fn solved_case() -> (Mesh, Vec<OrthotropicProps>, SolutionField, BoundarySpec) {
        let mesh = build_structured_tet_mesh(3, 100.0);
        let props = varied_props(mesh.n_elements());
        let mut bc = BoundarySpec::default();
        for n in mesh.select_nodes(&Region::full_face(Face::ZMinus)).unwrap() {
            bc.dirichlet.push((n, Vector3::zeros()));
        }
        bc.neumann = face_traction(&mesh, Face::ZPlus, Vector3::new(0.4, -0.3, 1.0)).unwrap();
        let k = assemble(&mesh, &props).unwrap();
        let sol = solve(&mesh, &k, &props, &bc, SolverKind::DirectCholesky).unwrap();
        (mesh, props, sol, bc)
    }

    #[test]
    fn pure_shear_h_values() {
        let mesh = build_structured_tet_mesh(1, 10.0);
        let props = vec![OrthotropicProps::isotropic(100e3, 0.25); 5];
        let g = 2e-3;
        // Affine u_x = γ y gives γ12 = γ and no other strain.
        let u: Vec<f64> = mesh
            .nodes
            .iter()
            .flat_map(|p| [g * p.y, 0.0, 0.0])
            .collect();
        let sol = {
            // recover() is private; rebuild through solve-free path.
            let mut eps = Vec::new();
            let mut gamma = Vec::new();
            let mut sigma = Vec::new();
            let mut tau = Vec::new();
            for e in 0..mesh.n_elements() {
                let (b, _) = crate::fem::strain_displacement(&mesh, e);
                let mut ue = nalgebra::SVector::<f64, 12>::zeros();
                for (n, &node) in mesh.elements[e].iter().enumerate() {
                    for c in 0..3 {
                        ue[3 * n + c] = u[3 * node + c];
                    }
                }
                let s = b * ue;
                let ev = Vector3::new(s[0], s[1], s[2]);
                let gv = Vector3::new(s[3], s[4], s[5]);
                sigma.push(props[e].volumetric_stiffness().unwrap() * ev);
                tau.push(props[e].shear_stiffness() * gv);
                eps.push(ev);
                gamma.push(gv);
            }
            SolutionField {
                u,
                eps,
                gamma,
                sigma,
                tau,
            }
        };

        let h = compute_h_direct(&mesh, &sol, &props).unwrap();
        for e in 0..mesh.n_elements() {
            assert_relative_eq!(h.dev[e][0], g * g / 2.0, max_relative = 1e-12);
            assert!(h.dev[e][1].abs() < 1e-18 && h.dev[e][2].abs() < 1e-18);
        }

        let hc = compute_h_complementary(&mesh, &sol, &props).unwrap();
        let g12 = props[0].g[0];
        for e in 0..mesh.n_elements() {
            assert_relative_eq!(hc.dev[e][0], (g12 * g).powi(2) / 2.0, max_relative = 1e-12);
        }
    }

    #[test]
    fn uniaxial_stress_h_complementary() {
        // A state with σ = (s, 0, 0) loads only the first volumetric slot.
        let mesh = build_structured_tet_mesh(1, 10.0);
        let p = OrthotropicProps::isotropic(100e3, 0.3);
        let s = 7.5;
        let sigma = Vector3::new(s, 0.0, 0.0);
        let eps = p.volumetric_compliance() * sigma;
        let sol = SolutionField {
            u: vec![0.0; 3 * mesh.n_nodes()],
            eps: vec![eps; 5],
            gamma: vec![Vector3::zeros(); 5],
            sigma: vec![sigma; 5],
            tau: vec![Vector3::zeros(); 5],
        };
        let h = compute_h_complementary(&mesh, &sol, &vec![p; 5]).unwrap();
        for e in 0..5 {
            assert_relative_eq!(h.vol[e][0], s * s / 2.0, max_relative = 1e-12);
            assert!(h.vol[e][1].abs() < 1e-15 && h.vol[e][2].abs() < 1e-15);
        }
    }

    #[test]
    fn zero_strain_gives_zero_h() {
        let mesh = build_structured_tet_mesh(1, 10.0);
        let props = vec![OrthotropicProps::isotropic(100e3, 0.3); 5];
        let sol = SolutionField {
            u: vec![0.0; 3 * mesh.n_nodes()],
            eps: vec![Vector3::zeros(); 5],
            gamma: vec![Vector3::zeros(); 5],
            sigma: vec![Vector3::zeros(); 5],
            tau: vec![Vector3::zeros(); 5],
        };
        let h = compute_h_direct(&mesh, &sol, &props).unwrap();
        assert!(h.vol.iter().flatten().chain(h.dev.iter().flatten()).all(|&v| v == 0.0));
    }

    #[test]
    fn reconstruction_matches_element_energy() {
        let (mesh, props, sol, _) = solved_case();
        let h = compute_h_direct(&mesh, &sol, &props).unwrap();
        for e in 0..mesh.n_elements() {
            let (vol, dev) = element_energy(&mesh, e, &sol, &props[e]).unwrap();
            let we: f64 = vol.iter().sum::<f64>() + dev.iter().sum::<f64>();
            let mut from_h = 0.0;
            for i in 0..3 {
                from_h += props[e].e[i] * h.vol[e][i] * mesh.element_volume[e];
            }
            for p in 0..3 {
                from_h += props[e].g[p] * h.dev[e][p] * mesh.element_volume[e];
            }
            assert_relative_eq!(from_h, we, max_relative = 1e-10, epsilon = 1e-16);
        }
    }

    #[test]
    fn shear_slots_obey_the_duality_relation() {
        let (mesh, props, sol, _) = solved_case();
        let hd = compute_h_direct(&mesh, &sol, &props).unwrap();
        let hc = compute_h_complementary(&mesh, &sol, &props).unwrap();
        for e in 0..mesh.n_elements() {
            for p in 0..3 {
                let g2 = props[e].g[p] * props[e].g[p];
                assert_relative_eq!(
                    hc.dev[e][p] / g2,
                    hd.dev[e][p],
                    max_relative = 1e-10,
                    epsilon = 1e-20
                );
            }
        }
        // Conversion reproduces the same numbers.
        let conv = to_strain_flavor(&hc, &props);
        for e in 0..mesh.n_elements() {
            for p in 0..3 {
                assert_eq!(conv.dev[e][p], hc.dev[e][p] / (props[e].g[p] * props[e].g[p]));
            }
        }
    }

    #[test]
    fn both_flavors_give_the_same_total_energy() {
        let (mesh, props, sol, _) = solved_case();
        let hd = compute_h_direct(&mesh, &sol, &props).unwrap();
        let hc = compute_h_complementary(&mesh, &sol, &props).unwrap();
        let wd = total_energy(&hd, &props, &mesh);
        let wc = total_energy(&hc, &props, &mesh);
        assert_relative_eq!(wd, wc, max_relative = 1e-10);

        // And both match the stiffness-route energy.
        let direct: f64 = (0..mesh.n_elements())
            .map(|e| {
                let (v, d) = element_energy(&mesh, e, &sol, &props[e]).unwrap();
                v.iter().sum::<f64>() + d.iter().sum::<f64>()
            })
            .sum();
        assert_relative_eq!(wd, direct, max_relative = 1e-10);
    }

    #[test]
    fn force_scaling_squares_the_h_values() {
        let (mesh, props, sol, bc) = solved_case();
        let mut bc4 = bc.clone();
        for f in &mut bc4.neumann {
            f.1 *= 4.0;
        }
        let k = assemble(&mesh, &props).unwrap();
        let sol4 = solve(&mesh, &k, &props, &bc4, SolverKind::DirectCholesky).unwrap();
        let h1 = compute_h_direct(&mesh, &sol, &props).unwrap();
        let h16 = compute_h_direct(&mesh, &sol4, &props).unwrap();
        for e in 0..mesh.n_elements() {
            for s in 0..6 {
                // Power-of-two scaling is exact in floating point.
                assert_eq!(h16.slot(e, s), 16.0 * h1.slot(e, s));
            }
        }
    }

    #[test]
    fn stats_hand_values() {
        let h = HField {
            flavor: HFlavor::Strain,
            vol: vec![[2.0, 5.0, 0.0], [1.0, 5.0, 0.0], [0.0, 5.0, 0.0]],
            dev: vec![[0.0; 3]; 3],
        };
        let s = stats_all(&h);
        assert_relative_eq!(s.mean[0], 1.0);
        assert_relative_eq!(s.std_dev[0], (2.0f64 / 3.0).sqrt(), max_relative = 1e-12);
        assert_relative_eq!(s.std_dev[0], 0.8165, max_relative = 1e-4);
        // All equal => zero spread; all zero => zero spread.
        assert_eq!(s.std_dev[1], 0.0);
        assert_eq!(s.std_dev[2], 0.0);
    }

    #[test]
    fn stats_respect_the_active_mask() {
        let h = HField {
            flavor: HFlavor::Strain,
            vol: vec![[10.0, 0.0, 0.0], [2.0, 0.0, 0.0], [4.0, 0.0, 0.0]],
            dev: vec![[0.0; 3]; 3],
        };
        let s = stats(&h, |e, slot| slot != 0 || e != 0);
        assert_relative_eq!(s.mean[0], 3.0);
        assert_relative_eq!(s.std_dev[0], 1.0);
        // Single active element degenerates to zero spread.
        let s = stats(&h, |e, slot| slot != 0 || e == 1);
        assert_relative_eq!(s.mean[0], 2.0);
        assert_eq!(s.std_dev[0], 0.0);
    }
}
