//! The optimization loop: α computation, the base stiffness update in its
//! direct, complementary and isotropic variants, element freezing at the
//! modulus bounds, admissibility repair, convergence detection and run
//! orchestration.

use rayon::prelude::*;

use crate::energy::{self, HField, HStats};
use crate::error::{Error, Result};
use crate::fem::{self, Assembler, BoundarySpec, SolutionField, SolverKind};
use crate::material::{OrthotropicProps, PoissonMode, PropertyBounds, Violation, SHEAR_PAIRS};
use crate::mesh::Mesh;

/// Margin keeping repaired moduli strictly inside the admissible set.
const REPAIR_MARGIN: f64 = 1e-6;

/// Which update rule drives the moduli.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Approach {
    /// Strain-based: `E ← E (1 + α)`.
    Direct,
    /// Stress-based: `E ← E / (1 - α)`.
    Complementary,
}

/// Whether each element carries one modulus or six.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaterialMode {
    Isotropic,
    Orthotropic,
}

/// Knobs of one optimization run.
#[derive(Debug, Clone, Copy)]
pub struct OptimConfig {
    pub approach: Approach,
    pub material_mode: MaterialMode,
    /// Update smoothing parameters `(k1, k2, k3, k12, k13, k23)`; the
    /// isotropic mode uses `k[0]`.
    pub k: [f64; 6],
    pub bounds: PropertyBounds,
    pub poisson: PoissonMode,
    /// Relative energy-change tolerance of the convergence criterion.
    pub epsilon: f64,
    pub max_iters: usize,
    /// An element counts as high-energy during constraint repair when its
    /// energy density reaches this multiple of the domain mean.
    pub high_energy_factor: f64,
    pub solver: SolverKind,
}

impl OptimConfig {
    pub fn validate(&self) -> Result<()> {
        self.bounds.validate()?;
        if self.k.iter().any(|&k| !(k > 0.0)) {
            return Err(Error::InvalidConfig(format!(
                "every update parameter k must be positive, got {:?}",
                self.k
            )));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        if self.max_iters < 1 {
            return Err(Error::InvalidConfig("max_iters must be at least 1".into()));
        }
        if !(self.high_energy_factor >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "high_energy_factor must be non-negative, got {}",
                self.high_energy_factor
            )));
        }
        if let PoissonMode::KappaSum { kappa } = self.poisson {
            if kappa.abs() >= 2.0 {
                return Err(Error::KappaOutOfRange(kappa));
            }
        }
        Ok(())
    }
}

/// Per-iteration log entry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    /// 1-based iteration index.
    pub iter: usize,
    /// Total elastic energy at this iteration's solve, N·mm.
    pub w_total: f64,
    /// External work of the applied loads, N·mm.
    pub compliance: f64,
    /// Standard deviation of the six strain-flavor H slots over the active
    /// elements.
    pub s_h: [f64; 6],
    /// Frozen element-property slots after this iteration's update.
    pub frozen_count: usize,
    /// Elements repaired by constraint enforcement this iteration.
    pub repairs: usize,
}

/// Per-element, per-slot freeze state. A slot frozen at a bound keeps its
/// value for the rest of the run; constraint repair may move it as a last
/// resort, re-freezing it at the repaired value.
#[derive(Debug, Clone)]
pub struct FreezeMask {
    frozen: Vec<[bool; 6]>,
    value: Vec<[f64; 6]>,
}

impl FreezeMask {
    pub fn new(n_elements: usize) -> Self {
        FreezeMask {
            frozen: vec![[false; 6]; n_elements],
            value: vec![[0.0; 6]; n_elements],
        }
    }

    pub fn is_frozen(&self, e: usize, slot: usize) -> bool {
        self.frozen[e][slot]
    }

    pub fn frozen_value(&self, e: usize, slot: usize) -> Option<f64> {
        self.frozen[e][slot].then(|| self.value[e][slot])
    }

    pub fn freeze(&mut self, e: usize, slot: usize, value: f64) {
        self.frozen[e][slot] = true;
        self.value[e][slot] = value;
    }

    /// Total number of frozen slots.
    pub fn count(&self) -> usize {
        self.frozen
            .iter()
            .map(|f| f.iter().filter(|&&b| b).count())
            .sum()
    }
}

/// Update parameters `α = (H - mean) / (s k)` per element and slot; slots
/// with zero spread get `α = 0`.
pub fn compute_alpha(h_strain: &HField, stats: &HStats, k: &[f64; 6]) -> Vec<[f64; 6]> {
    let n_e = h_strain.n_elements();
    let mut alpha = vec![[0.0; 6]; n_e];
    for s in 0..6 {
        let spread = stats.std_dev[s];
        if spread == 0.0 {
            continue;
        }
        let scale = 1.0 / (spread * k[s]);
        for (e, a) in alpha.iter_mut().enumerate() {
            a[s] = (h_strain.slot(e, s) - stats.mean[s]) * scale;
        }
    }
    alpha
}

/// Apply the base stiffness update to every non-frozen slot, clamp to the
/// bounds and refresh the derived Poisson ratios.
///
/// A complementary α ≥ 1 would flip the modulus sign; it is clamped to
/// `1 - 1e-6` and logged.
pub fn base_update(
    props: &mut [OrthotropicProps],
    alpha: &[[f64; 6]],
    approach: Approach,
    bounds: &PropertyBounds,
    mask: &FreezeMask,
    poisson: PoissonMode,
) -> Result<()> {
    let mut overflow_clamps = 0usize;
    for (e, p) in props.iter_mut().enumerate() {
        for s in 0..6 {
            if mask.is_frozen(e, s) {
                continue;
            }
            let a = alpha[e][s];
            let old = p.slot(s);
            let new = match approach {
                Approach::Direct => old * (1.0 + a),
                Approach::Complementary => {
                    let a = if a >= 1.0 {
                        overflow_clamps += 1;
                        1.0 - 1e-6
                    } else {
                        a
                    };
                    old / (1.0 - a)
                }
            };
            let (lo, hi) = if s < 3 {
                (bounds.e_min, bounds.e_max)
            } else {
                (bounds.g_min, bounds.g_max)
            };
            p.set_slot(s, new.clamp(lo, hi));
        }
        p.complete_poisson(poisson)?;
    }
    if overflow_clamps > 0 {
        log::warn!("clamped {overflow_clamps} complementary updates with alpha >= 1");
    }
    Ok(())
}

/// Freeze every slot sitting exactly at a bound. The mask is monotone:
/// frozen slots stay frozen.
pub fn apply_freezing(props: &[OrthotropicProps], bounds: &PropertyBounds, mask: &mut FreezeMask) {
    for (e, p) in props.iter().enumerate() {
        for s in 0..6 {
            if mask.is_frozen(e, s) {
                continue;
            }
            let v = p.slot(s);
            let (lo, hi) = if s < 3 {
                (bounds.e_min, bounds.e_max)
            } else {
                (bounds.g_min, bounds.g_max)
            };
            if v == lo || v == hi {
                mask.freeze(e, s, v);
            }
        }
    }
}

/// Isotropic variant: the single Young modulus occupies slots 0..3, which
/// freeze together.
fn apply_freezing_iso(props: &[OrthotropicProps], bounds: &PropertyBounds, mask: &mut FreezeMask) {
    for (e, p) in props.iter().enumerate() {
        if mask.is_frozen(e, 0) {
            continue;
        }
        let v = p.e[0];
        if v == bounds.e_min || v == bounds.e_max {
            for s in 0..3 {
                mask.freeze(e, s, v);
            }
        }
    }
}

/// One repair move: a Young slot and the clause-boundary value to set it to.
struct RepairCandidate {
    slot: usize,
    value: f64,
}

/// Bring every element back inside the admissible set.
///
/// High-energy elements (density at or above `high_energy_factor` times the
/// domain mean) are stiffened: the deficient modulus is raised to the clause
/// boundary. Low-energy elements are softened instead. A frozen slot is only
/// moved when no free slot can absorb the repair, in which case it is
/// re-frozen at the repaired value. Elements still inadmissible after
/// sweeping fall back to equal Young moduli at their clamped geometric mean;
/// failure beyond that is reported as irreparable.
pub fn enforce_constraints(
    props: &mut [OrthotropicProps],
    mask: &mut FreezeMask,
    energy_density: &[f64],
    mean_density: f64,
    cfg: &OptimConfig,
) -> Result<usize> {
    let bounds = &cfg.bounds;
    let mut repaired_elements = 0usize;

    for e in 0..props.len() {
        if props[e].check_constraints().satisfied() {
            continue;
        }
        repaired_elements += 1;
        let high = energy_density[e] >= cfg.high_energy_factor * mean_density;

        let mut admissible = false;
        for _sweep in 0..10 {
            props[e].complete_poisson(cfg.poisson)?;
            let report = props[e].check_constraints();
            if report.satisfied() {
                admissible = true;
                break;
            }
            for violation in &report.violations {
                let candidates = match *violation {
                    Violation::NegativeYoung { direction } => vec![RepairCandidate {
                        slot: direction,
                        value: bounds.e_min,
                    }],
                    Violation::NegativeShear { pair } => {
                        props[e].g[pair] = bounds.g_min;
                        continue;
                    }
                    Violation::PoissonPairBound { pair, .. } => {
                        pair_candidates(&props[e], pair, high, bounds)
                    }
                    Violation::TripleProduct { .. } => match cfg.poisson {
                        PoissonMode::Symmetry => triple_candidates(&props[e], high, bounds),
                        // In kappa mode the ratios move with the moduli;
                        // step toward the admissible equal-modulus point.
                        PoissonMode::KappaSum { .. } => Vec::new(),
                    },
                };
                apply_first_candidate(&mut props[e], mask, e, candidates);
            }
            if matches!(cfg.poisson, PoissonMode::KappaSum { .. }) {
                step_toward_equal_moduli(&mut props[e], bounds);
            }
        }

        if !admissible {
            props[e].complete_poisson(cfg.poisson)?;
            if !props[e].check_constraints().satisfied() {
                // Last resort: equal Young moduli are admissible whenever the
                // initial state was.
                let gm = (props[e].e[0] * props[e].e[1] * props[e].e[2])
                    .cbrt()
                    .clamp(bounds.e_min, bounds.e_max);
                log::warn!(
                    "element {e}: equalizing Young moduli at {gm} to restore admissibility"
                );
                for s in 0..3 {
                    props[e].e[s] = gm;
                    if mask.is_frozen(e, s) {
                        mask.freeze(e, s, gm);
                    }
                }
                props[e].complete_poisson(cfg.poisson)?;
                if !props[e].check_constraints().satisfied() {
                    return Err(Error::IrreparableElement { element: e });
                }
            }
        }
    }

    Ok(repaired_elements)
}

/// Candidates for a violated pair clause `ν_ij² E_j < E_i`: raise `E_i` to
/// the boundary or lower `E_j`, ordered by the element's energy class.
fn pair_candidates(
    p: &OrthotropicProps,
    pair: usize,
    high: bool,
    bounds: &PropertyBounds,
) -> Vec<RepairCandidate> {
    let (i, j) = SHEAR_PAIRS[pair];
    let nu_sq = p.nu[pair] * p.nu[pair];
    let raise = {
        let v = nu_sq * p.e[j] * (1.0 + REPAIR_MARGIN);
        (v <= bounds.e_max && v > p.e[i]).then_some(RepairCandidate { slot: i, value: v })
    };
    let lower = if nu_sq > 0.0 {
        let v = p.e[i] / nu_sq * (1.0 - REPAIR_MARGIN);
        (v >= bounds.e_min && v < p.e[j]).then_some(RepairCandidate { slot: j, value: v })
    } else {
        None
    };
    let mut out = Vec::new();
    if high {
        out.extend(raise);
        out.extend(lower);
    } else {
        out.extend(lower);
        out.extend(raise);
    }
    out
}

/// Candidates for the violated triple-product clause under the symmetry
/// completion, where it reads
/// `1 - ν12² E2/E1 - ν13² E3/E1 - ν23² E3/E2 - 2 ν12 ν13 ν23 E3/E1 > 0`:
/// raise `E1` or lower `E3` to the clause boundary.
fn triple_candidates(
    p: &OrthotropicProps,
    high: bool,
    bounds: &PropertyBounds,
) -> Vec<RepairCandidate> {
    let [e1, e2, e3] = p.e;
    let [nu12, nu13, nu23] = p.nu;
    let a = nu12 * nu12;
    let b = nu13 * nu13;
    let c = nu23 * nu23;
    let d = 2.0 * nu12 * nu13 * nu23;

    let raise = {
        let denom = 1.0 - c * e3 / e2;
        if denom > 0.0 {
            let v = (a * e2 + (b + d) * e3) / denom * (1.0 + REPAIR_MARGIN);
            (v > e1 && v <= bounds.e_max).then_some(RepairCandidate { slot: 0, value: v })
        } else {
            None
        }
    };
    let lower = {
        let coef = (b + d) / e1 + c / e2;
        let num = 1.0 - a * e2 / e1;
        if coef > 0.0 && num > 0.0 {
            let v = num / coef * (1.0 - REPAIR_MARGIN);
            (v < e3 && v >= bounds.e_min).then_some(RepairCandidate { slot: 2, value: v })
        } else {
            None
        }
    };

    let mut out = Vec::new();
    if high {
        out.extend(raise);
        out.extend(lower);
    } else {
        out.extend(lower);
        out.extend(raise);
    }
    out
}

/// Apply the first viable candidate, preferring free slots; frozen slots are
/// touched only when nothing else can absorb the repair.
fn apply_first_candidate(
    p: &mut OrthotropicProps,
    mask: &mut FreezeMask,
    e: usize,
    candidates: Vec<RepairCandidate>,
) {
    if let Some(c) = candidates.iter().find(|c| !mask.is_frozen(e, c.slot)) {
        p.set_slot(c.slot, c.value);
        return;
    }
    if let Some(c) = candidates.first() {
        log::warn!(
            "element {e}: moving frozen slot {} to {} to restore admissibility",
            c.slot,
            c.value
        );
        p.set_slot(c.slot, c.value);
        mask.freeze(e, c.slot, c.value);
    }
}

/// Halve the log-distance of every Young modulus to their geometric mean.
fn step_toward_equal_moduli(p: &mut OrthotropicProps, bounds: &PropertyBounds) {
    let gm = (p.e[0] * p.e[1] * p.e[2]).cbrt();
    for s in 0..3 {
        p.e[s] = (p.e[s] * gm).sqrt().clamp(bounds.e_min, bounds.e_max);
    }
}

/// Relative energy-change convergence test: true when
/// `|W_curr - W_prev| / W_prev <= epsilon`. Callers treat the first
/// iteration (no previous energy) as not converged.
pub fn check_convergence(w_prev: f64, w_curr: f64, epsilon: f64) -> bool {
    w_prev > 0.0 && (w_curr - w_prev).abs() / w_prev <= epsilon
}

/// Everything the optimizer knows at the end of one iteration; handed to
/// observers registered through [`run_observed`].
pub struct IterationState<'a> {
    pub iter: usize,
    pub mesh: &'a Mesh,
    pub props: &'a [OrthotropicProps],
    pub mask: &'a FreezeMask,
    pub sol: &'a SolutionField,
    /// H field in the flavor of the configured approach.
    pub h: &'a HField,
    pub record: &'a IterationRecord,
    pub converged: bool,
}

/// Outcome of an optimization run.
///
/// `final_solution`, `final_h`, `final_energy` and `final_compliance` belong
/// to the last completed solve. For a converged run `props` are exactly the
/// properties that produced that solve; for a run stopped at `max_iters`
/// they additionally carry the last update.
#[derive(Debug)]
pub struct RunResult {
    pub props: Vec<OrthotropicProps>,
    pub mask: FreezeMask,
    pub history: Vec<IterationRecord>,
    pub converged: bool,
    pub final_solution: SolutionField,
    pub final_h: HField,
    pub final_energy: f64,
    pub final_compliance: f64,
}

impl RunResult {
    pub fn iterations(&self) -> usize {
        self.history.len()
    }
}

/// Run the optimization loop until the energy stabilizes or `max_iters` is
/// reached (the latter is reported through `converged = false`, with the
/// history intact).
pub fn run(
    mesh: &Mesh,
    bc: &BoundarySpec,
    initial: &OrthotropicProps,
    cfg: &OptimConfig,
) -> Result<RunResult> {
    run_observed(mesh, bc, initial, cfg, |_| {})
}

/// [`run`] with a per-iteration observer hook.
pub fn run_observed(
    mesh: &Mesh,
    bc: &BoundarySpec,
    initial: &OrthotropicProps,
    cfg: &OptimConfig,
    mut observe: impl FnMut(&IterationState),
) -> Result<RunResult> {
    cfg.validate()?;
    bc.validate(mesh.n_nodes())?;
    let init_report = initial.check_constraints();
    if !init_report.satisfied() {
        return Err(Error::InvalidConfig(format!(
            "initial properties violate the admissibility constraints: {:?}",
            init_report.violations
        )));
    }

    let n_e = mesh.n_elements();
    let mut props = vec![*initial; n_e];
    let mut mask = FreezeMask::new(n_e);
    let assembler = Assembler::new(mesh);

    let mut history: Vec<IterationRecord> = Vec::new();
    let mut w_prev: Option<f64> = None;

    for iter in 1..=cfg.max_iters {
        let k = assembler.assemble(mesh, &props)?;
        let sol = fem::solve(mesh, &k, &props, bc, cfg.solver)?;
        let h = match cfg.approach {
            Approach::Direct => energy::compute_h_direct(mesh, &sol, &props)?,
            Approach::Complementary => energy::compute_h_complementary(mesh, &sol, &props)?,
        };
        let w = energy::total_energy(&h, &props, mesh);
        let compliance = fem::compliance(bc, &sol);
        let h_strain = energy::to_strain_flavor(&h, &props);
        let stats = energy::stats(&h_strain, |e, s| !mask.is_frozen(e, s));

        let converged = w_prev.is_some_and(|wp| check_convergence(wp, w, cfg.epsilon));
        if converged {
            let record = IterationRecord {
                iter,
                w_total: w,
                compliance,
                s_h: stats.std_dev,
                frozen_count: mask.count(),
                repairs: 0,
            };
            observe(&IterationState {
                iter,
                mesh,
                props: &props,
                mask: &mask,
                sol: &sol,
                h: &h,
                record: &record,
                converged: true,
            });
            history.push(record);
            return Ok(RunResult {
                props,
                mask,
                history,
                converged: true,
                final_solution: sol,
                final_h: h,
                final_energy: w,
                final_compliance: compliance,
            });
        }

        let densities = fem::energy_density(mesh, &sol, &props)?;
        let mean_density = w / mesh.element_volume.iter().sum::<f64>();

        let repairs = match cfg.material_mode {
            MaterialMode::Orthotropic => {
                let alpha = compute_alpha(&h_strain, &stats, &cfg.k);
                base_update(&mut props, &alpha, cfg.approach, &cfg.bounds, &mask, cfg.poisson)?;
                apply_freezing(&props, &cfg.bounds, &mut mask);
                enforce_constraints(&mut props, &mut mask, &densities, mean_density, cfg)?
            }
            MaterialMode::Isotropic => {
                update_isotropic(&mut props, &mask, &densities, cfg)?;
                apply_freezing_iso(&props, &cfg.bounds, &mut mask);
                0
            }
        };

        let record = IterationRecord {
            iter,
            w_total: w,
            compliance,
            s_h: stats.std_dev,
            frozen_count: mask.count(),
            repairs,
        };
        observe(&IterationState {
            iter,
            mesh,
            props: &props,
            mask: &mask,
            sol: &sol,
            h: &h,
            record: &record,
            converged: false,
        });
        history.push(record);
        w_prev = Some(w);

        if iter == cfg.max_iters {
            return Ok(RunResult {
                props,
                mask,
                history,
                converged: false,
                final_solution: sol,
                final_h: h,
                final_energy: w,
                final_compliance: compliance,
            });
        }
    }
    unreachable!("loop returns on convergence or at max_iters");
}

/// Single-modulus update of the isotropic baseline: one H per element
/// (`Ψ̄ / E` in strain flavor either way, since the stress flavor divides
/// out), `k[0]` as the smoothing parameter, and `G = E / (2 (1 + ν))`
/// refreshed after the step.
fn update_isotropic(
    props: &mut [OrthotropicProps],
    mask: &FreezeMask,
    densities: &[f64],
    cfg: &OptimConfig,
) -> Result<()> {
    let h: Vec<f64> = props
        .par_iter()
        .zip(densities)
        .map(|(p, &psi)| psi / p.e[0])
        .collect();

    let active: Vec<usize> = (0..props.len())
        .filter(|&e| !mask.is_frozen(e, 0))
        .collect();
    if active.is_empty() {
        return Ok(());
    }
    let mean = active.iter().map(|&e| h[e]).sum::<f64>() / active.len() as f64;
    let spread = (active.iter().map(|&e| (h[e] - mean).powi(2)).sum::<f64>()
        / active.len() as f64)
        .sqrt();

    let mut overflow_clamps = 0usize;
    for (e, p) in props.iter_mut().enumerate() {
        if mask.is_frozen(e, 0) {
            continue;
        }
        let alpha = if spread == 0.0 {
            0.0
        } else {
            (h[e] - mean) / (spread * cfg.k[0])
        };
        let e_new = match cfg.approach {
            Approach::Direct => p.e[0] * (1.0 + alpha),
            Approach::Complementary => {
                let alpha = if alpha >= 1.0 {
                    overflow_clamps += 1;
                    1.0 - 1e-6
                } else {
                    alpha
                };
                p.e[0] / (1.0 - alpha)
            }
        };
        let e_new = e_new.clamp(cfg.bounds.e_min, cfg.bounds.e_max);
        let nu = p.nu[0];
        *p = OrthotropicProps::isotropic(e_new, nu);
    }
    if overflow_clamps > 0 {
        log::warn!("clamped {overflow_clamps} complementary updates with alpha >= 1");
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::HFlavor;
    use approx::assert_relative_eq;

    fn bounds() -> PropertyBounds {
        PropertyBounds {
            e_min: 50e3,
            e_max: 500e3,
            g_min: 7.519e3,
            g_max: 75.19e3,
        }
    }

    fn cfg(approach: Approach) -> OptimConfig {
        OptimConfig {
            approach,
            material_mode: MaterialMode::Orthotropic,
            k: [15.0; 6],
            bounds: bounds(),
            poisson: PoissonMode::Symmetry,
            epsilon: 0.01,
            max_iters: 100,
            high_energy_factor: 1.0,
            solver: SolverKind::DirectCholesky,
        }
    }

    fn three_element_h(values: [f64; 3]) -> HField {
        HField {
            flavor: HFlavor::Strain,
            vol: values.iter().map(|&v| [v, 1.0, 1.0]).collect(),
            dev: vec![[0.0; 3]; 3],
        }
    }

    #[test]
    fn alpha_hand_value() {
        let h = three_element_h([2.0, 1.0, 0.0]);
        let stats = energy::stats_all(&h);
        let alpha = compute_alpha(&h, &stats, &[15.0; 6]);
        let expected = 1.0 / ((2.0f64 / 3.0).sqrt() * 15.0);
        assert_relative_eq!(alpha[0][0], expected, max_relative = 1e-12);
        assert_relative_eq!(alpha[0][0], 0.08165, max_relative = 1e-3);
        // Element at the mean gets zero.
        assert_eq!(alpha[1][0], 0.0);
        // Degenerate spread gives zero for the whole slot.
        assert_eq!(alpha[0][1], 0.0);
        assert_eq!(alpha[2][1], 0.0);
    }

    #[test]
    fn base_update_arithmetic() {
        let alpha_val = 1.0 / ((2.0f64 / 3.0).sqrt() * 15.0);
        let mut props = vec![OrthotropicProps::isotropic(200e3, 0.33)];
        let alpha = vec![[alpha_val, 0.0, 0.0, 0.0, 0.0, 0.0]];
        let mask = FreezeMask::new(1);

        base_update(
            &mut props,
            &alpha,
            Approach::Direct,
            &bounds(),
            &mask,
            PoissonMode::Symmetry,
        )
        .unwrap();
        assert_relative_eq!(props[0].e[0], 216.33e3, max_relative = 1e-4);

        let mut props = vec![OrthotropicProps::isotropic(200e3, 0.33)];
        base_update(
            &mut props,
            &alpha,
            Approach::Complementary,
            &bounds(),
            &mask,
            PoissonMode::Symmetry,
        )
        .unwrap();
        assert_relative_eq!(props[0].e[0], 217.78e3, max_relative = 1e-4);
    }

    #[test]
    fn base_update_clamps_to_bounds() {
        let mut props = vec![OrthotropicProps::isotropic(480e3, 0.33)];
        let alpha = vec![[0.1, 0.0, 0.0, 0.0, 0.0, 0.0]];
        let mask = FreezeMask::new(1);
        base_update(
            &mut props,
            &alpha,
            Approach::Direct,
            &bounds(),
            &mask,
            PoissonMode::Symmetry,
        )
        .unwrap();
        assert_eq!(props[0].e[0], 500e3);
    }

    #[test]
    fn complementary_alpha_overflow_is_clamped() {
        let mut props = vec![OrthotropicProps::isotropic(200e3, 0.33)];
        let alpha = vec![[1.5, 0.0, 0.0, 0.0, 0.0, 0.0]];
        let mask = FreezeMask::new(1);
        base_update(
            &mut props,
            &alpha,
            Approach::Complementary,
            &bounds(),
            &mask,
            PoissonMode::Symmetry,
        )
        .unwrap();
        // 200e3 / 1e-6 overflows the upper bound and clamps there.
        assert_eq!(props[0].e[0], 500e3);
    }

    #[test]
    fn freezing_is_monotone_and_blocks_updates() {
        let mut props = vec![OrthotropicProps::isotropic(200e3, 0.33)];
        props[0].e[0] = 50e3;
        let mut mask = FreezeMask::new(1);
        apply_freezing(&props, &bounds(), &mut mask);
        assert!(mask.is_frozen(0, 0));
        assert_eq!(mask.frozen_value(0, 0), Some(50e3));
        assert!(!mask.is_frozen(0, 1));

        // A frozen slot ignores further updates.
        let alpha = vec![[5.0, 0.0, 0.0, 0.0, 0.0, 0.0]];
        base_update(
            &mut props,
            &alpha,
            Approach::Direct,
            &bounds(),
            &mask,
            PoissonMode::Symmetry,
        )
        .unwrap();
        assert_eq!(props[0].e[0], 50e3);

        // With every slot frozen the update is a no-op.
        for s in 0..6 {
            mask.freeze(0, s, props[0].slot(s));
        }
        let before = props[0];
        let alpha = vec![[0.3; 6]];
        base_update(
            &mut props,
            &alpha,
            Approach::Direct,
            &bounds(),
            &mask,
            PoissonMode::Symmetry,
        )
        .unwrap();
        assert_eq!(props[0], before);
    }

    #[test]
    fn repair_softens_low_energy_elements() {
        // ν12 = 0.33 with E1 = 50, E2 = 500 GPa violates the pair clause;
        // a low-energy element lowers E2 to E1/ν12² ≈ 459.1 GPa.
        let mut props = vec![OrthotropicProps::new(
            [50e3, 500e3, 200e3],
            [20e3; 3],
            [0.33; 3],
            PoissonMode::Symmetry,
        )
        .unwrap()];
        let mut mask = FreezeMask::new(1);
        let c = cfg(Approach::Direct);
        let repairs = enforce_constraints(&mut props, &mut mask, &[0.1], 1.0, &c).unwrap();
        assert_eq!(repairs, 1);
        assert!(props[0].check_constraints().satisfied());
        assert!(props[0].e[1] <= 50e3 / (0.33 * 0.33));
        assert_relative_eq!(props[0].e[1], 459.1e3, max_relative = 1e-3);
        assert_eq!(props[0].e[0], 50e3);
    }

    #[test]
    fn repair_stiffens_high_energy_elements() {
        let mut props = vec![OrthotropicProps::new(
            [50e3, 500e3, 200e3],
            [20e3; 3],
            [0.33; 3],
            PoissonMode::Symmetry,
        )
        .unwrap()];
        let mut mask = FreezeMask::new(1);
        let c = cfg(Approach::Direct);
        enforce_constraints(&mut props, &mut mask, &[5.0], 1.0, &c).unwrap();
        assert!(props[0].check_constraints().satisfied());
        assert!(props[0].e[0] >= 0.33 * 0.33 * 500e3);
        assert_relative_eq!(props[0].e[0], 54.45e3, max_relative = 1e-3);
        assert_eq!(props[0].e[1], 500e3);
    }

    #[test]
    fn repair_leaves_admissible_elements_alone() {
        let p = OrthotropicProps::new(
            [200e3, 300e3, 120e3],
            [20e3; 3],
            [0.3; 3],
            PoissonMode::Symmetry,
        )
        .unwrap();
        let mut props = vec![p];
        let mut mask = FreezeMask::new(1);
        let c = cfg(Approach::Direct);
        let repairs = enforce_constraints(&mut props, &mut mask, &[1.0], 1.0, &c).unwrap();
        assert_eq!(repairs, 0);
        assert_eq!(props[0], p);
    }

    #[test]
    fn repair_handles_the_triple_product_clause() {
        // Pair-admissible state whose triple clause fails: E1 small, E3
        // near the pair boundary, E2 in between.
        let e1 = 54.5e3;
        let e2 = 158.0e3;
        let e3 = 495.0e3;
        let p = OrthotropicProps::new([e1, e2, e3], [20e3; 3], [0.33; 3], PoissonMode::Symmetry)
            .unwrap();
        let report = p.check_constraints();
        assert!(!report.satisfied());
        assert!(report
            .violations
            .iter()
            .all(|v| matches!(v, Violation::TripleProduct { .. })));

        for (density, label) in [(5.0, "high"), (0.1, "low")] {
            let mut props = vec![p];
            let mut mask = FreezeMask::new(1);
            let c = cfg(Approach::Direct);
            let repairs = enforce_constraints(&mut props, &mut mask, &[density], 1.0, &c).unwrap();
            assert_eq!(repairs, 1, "{label}");
            assert!(props[0].check_constraints().satisfied(), "{label}");
            if density > 1.0 {
                assert!(props[0].e[0] > e1, "high-energy element stiffens");
            } else {
                assert!(props[0].e[2] < e3, "low-energy element softens");
            }
        }
    }

    #[test]
    fn kappa_mode_repair_reaches_admissibility() {
        let mut p = OrthotropicProps::isotropic(200e3, 0.33);
        p.e = [50e3, 500e3, 500e3];
        let mode = PoissonMode::KappaSum { kappa: 0.66 };
        p.complete_poisson(mode).unwrap();
        assert!(!p.check_constraints().satisfied());

        let mut props = vec![p];
        let mut mask = FreezeMask::new(1);
        let mut c = cfg(Approach::Direct);
        c.poisson = mode;
        let repairs = enforce_constraints(&mut props, &mut mask, &[1.0], 1.0, &c).unwrap();
        assert_eq!(repairs, 1);
        assert!(props[0].check_constraints().satisfied());
    }

    #[test]
    fn convergence_checks() {
        assert!(check_convergence(100.0, 100.5, 0.01));
        assert!(!check_convergence(100.0, 110.0, 0.01));
        assert!(check_convergence(100.0, 100.0, 1e-300));
        assert!(!check_convergence(0.0, 0.0, 0.01));
    }

    #[test]
    fn direct_and_complementary_agree_for_large_k() {
        // One update with k -> inf differs between the two rules by O(α²)
        // per slot.
        let h = three_element_h([2.0, 1.0, 0.5]);
        let stats = energy::stats_all(&h);
        let k = [1e6; 6];
        let alpha = compute_alpha(&h, &stats, &k);
        let max_alpha = alpha.iter().flatten().fold(0.0f64, |m, &a| m.max(a.abs()));
        assert!(max_alpha < 1e-5);

        let base = OrthotropicProps::isotropic(200e3, 0.33);
        let mask = FreezeMask::new(3);
        let mut direct = vec![base; 3];
        base_update(
            &mut direct,
            &alpha,
            Approach::Direct,
            &bounds(),
            &mask,
            PoissonMode::Symmetry,
        )
        .unwrap();
        let mut comp = vec![base; 3];
        base_update(
            &mut comp,
            &alpha,
            Approach::Complementary,
            &bounds(),
            &mask,
            PoissonMode::Symmetry,
        )
        .unwrap();

        for e in 0..3 {
            for s in 0..6 {
                let rel = (direct[e].slot(s) - comp[e].slot(s)).abs() / comp[e].slot(s);
                assert!(rel <= 10.0 * max_alpha * max_alpha + 1e-15);
            }
        }
    }
}
