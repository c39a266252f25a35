//! Gradient descent on the energy toward a critical point, and Hessian-based
//! classification of the point reached.
//!
//! The search direction is the scaled gradient (`d_min^{p+2} * grad E`), the
//! step length comes from Armijo backtracking on `log E` (on `E_0` for the
//! logarithmic energy), and no point moves more than `step_fraction * d_min`
//! in one iteration.

use serde::{Deserialize, Serialize};

use crate::energy::{
    gradient, gradient_with_kinks, hessian_fd, min_distance, objective, objective_change, EnergySpec, Kink, CUT_BAND,
};
use crate::error::{invalid, Error, Result};
use crate::isometry::{stabilizer, symmetrize};
use crate::torus::{displacement, Configuration};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DescentOptions {
    /// Stop once the scaled-gradient sup-norm is at most this.
    pub grad_tol: f64,
    pub max_iters: usize,
    /// Sufficient-decrease constant of the Armijo test.
    pub armijo_c: f64,
    /// Backtracking factor.
    pub shrink: f64,
    /// Per-iteration move cap as a fraction of the current minimal distance.
    pub step_fraction: f64,
    /// Keep every k-th iterate (plus the last); 0 disables the trajectory.
    pub record_trajectory_every: usize,
    /// Keep per-iteration objective and gradient-norm histories.
    pub record_history: bool,
    /// Restrict the descent to configurations carrying every torus isometry
    /// of the initial configuration, by averaging the gradient over that
    /// group. In exact arithmetic the flow never leaves this set; in floating
    /// point, rounding noise can otherwise grow along unstable transverse
    /// directions.
    pub preserve_symmetry: bool,
}

impl Default for DescentOptions {
    fn default() -> Self {
        Self {
            grad_tol: 1e-10,
            max_iters: 200_000,
            armijo_c: 1e-4,
            shrink: 0.5,
            step_fraction: 0.1,
            record_trajectory_every: 0,
            record_history: true,
            preserve_symmetry: true,
        }
    }
}

impl DescentOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.grad_tol > 0.0) {
            return Err(invalid("grad_tol must be > 0"));
        }
        if !(self.shrink > 0.0 && self.shrink < 1.0) {
            return Err(invalid("shrink must lie in (0, 1)"));
        }
        if !(self.step_fraction > 0.0 && self.step_fraction < 0.5) {
            return Err(invalid("step_fraction must lie in (0, 0.5)"));
        }
        if !(self.armijo_c > 0.0 && self.armijo_c < 1.0) {
            return Err(invalid("armijo_c must lie in (0, 1)"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Converged,
    MaxIters,
    StepUnderflow,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescentResult {
    #[serde(rename = "final")]
    pub final_config: Configuration,
    /// `log E_p` of the final configuration; `E_0` itself for the
    /// logarithmic energy.
    pub final_energy_log: f64,
    pub iterations: usize,
    pub termination: Termination,
    /// Scaled-gradient sup-norm at the final configuration.
    pub final_grad_sup: f64,
    #[serde(skip)]
    pub trajectory: Option<Vec<(usize, Configuration)>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub energy_history: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grad_norm_history: Option<Vec<f64>>,
}

const UNDERFLOW_RATIO: f64 = 1e-18;
const STEP_GROWTH: f64 = 2.0;
/// Pair components within `KINK_REACH` times the last per-point move of the
/// cut locus are treated as sitting on it, capped at `MAX_BAND`.
const KINK_REACH: f64 = 4.0;
const MAX_BAND: f64 = 1e-3;
const MAX_SWEEPS: usize = 1000;
const INTERIOR_MARGIN: f64 = 1e-9;

/// Replace `v` (the gradient with kink components at their midpoint) by the
/// element of smallest norm in the set of gradients obtained by letting every
/// kink contribute anything in its range. Moving against that element
/// decreases the energy at the rate of its squared norm even when pairs sit
/// on the cut locus, and keeps such pairs from oscillating across it.
/// Coordinate descent on the box-constrained least-squares problem; returns
/// the kinks left strictly inside their range.
fn min_norm_subgradient(v: &mut [[f64; 2]], kinks: &[Kink], tol: f64) -> Vec<Kink> {
    let mut lambda = vec![0.0f64; kinks.len()];
    for _ in 0..MAX_SWEEPS {
        let mut largest = 0.0f64;
        for (k, kink) in kinks.iter().enumerate() {
            let w = kink.weight;
            if w == 0.0 {
                continue;
            }
            let rel = v[kink.i][kink.axis] - v[kink.j][kink.axis];
            let next = (lambda[k] - rel / (2.0 * w)).clamp(-1.0, 1.0);
            let step = (next - lambda[k]) * w;
            if step != 0.0 {
                v[kink.i][kink.axis] += step;
                v[kink.j][kink.axis] -= step;
                lambda[k] = next;
                largest = largest.max(step.abs());
            }
        }
        if largest <= tol {
            break;
        }
    }
    kinks
        .iter()
        .zip(&lambda)
        .filter(|(_, l)| l.abs() < 1.0 - INTERIOR_MARGIN)
        .map(|(k, _)| *k)
        .collect()
}

/// Give the points joined by interior kinks identical components along the
/// kink axis (their mean), so those pairs do not move relative to each
/// other at all, rather than up to the solver's residual.
fn lock_kinks(v: &mut [[f64; 2]], interior: &[Kink]) {
    let n = v.len();
    for axis in 0..2 {
        let mut parent: Vec<usize> = (0..n).collect();
        fn root(parent: &mut [usize], mut a: usize) -> usize {
            while parent[a] != a {
                parent[a] = parent[parent[a]];
                a = parent[a];
            }
            a
        }
        let mut linked = false;
        for k in interior.iter().filter(|k| k.axis == axis) {
            let (a, b) = (root(&mut parent, k.i), root(&mut parent, k.j));
            if a != b {
                parent[a.max(b)] = a.min(b);
                linked = true;
            }
        }
        if !linked {
            continue;
        }
        let mut sum = vec![0.0f64; n];
        let mut count = vec![0usize; n];
        for i in 0..n {
            let r = root(&mut parent, i);
            sum[r] += v[i][axis];
            count[r] += 1;
        }
        for i in 0..n {
            let r = root(&mut parent, i);
            if count[r] > 1 {
                v[i][axis] = sum[r] / count[r] as f64;
            }
        }
    }
}

/// Per-coordinate tolerance for recognising a symmetry of the initial configuration.
pub const SYMMETRY_TOL: f64 = 1e-9;

pub fn descend(init: &Configuration, spec: EnergySpec, opts: &DescentOptions) -> Result<DescentResult> {
    spec.validate()?;
    opts.validate()?;
    if let Some((i, j)) = init.find_coincident() {
        return Err(Error::Degenerate(i, j));
    }

    let group = if opts.preserve_symmetry {
        stabilizer(init, SYMMETRY_TOL)
    } else {
        Vec::new()
    };
    let mut x = init.clone();
    let mut obj = objective(&x, spec)?;
    let mut trajectory = (opts.record_trajectory_every > 0).then(Vec::new);
    let mut energy_history = opts.record_history.then(Vec::new);
    let mut grad_history = opts.record_history.then(Vec::new);
    let mut last_step = f64::INFINITY;
    let mut band = CUT_BAND;
    let mut iter = 0;

    let (termination, sup) = loop {
        let (mut g, kinks) = gradient_with_kinks(&x, spec, true, band)?;
        let interior = min_norm_subgradient(&mut g.vectors, &kinks, 0.01 * opts.grad_tol);
        symmetrize(&mut g.vectors, &group);
        lock_kinks(&mut g.vectors, &interior);
        let sup = g.sup_norm();
        if let Some(h) = energy_history.as_mut() {
            h.push(obj);
        }
        if let Some(h) = grad_history.as_mut() {
            h.push(sup);
        }
        if let Some(tr) = trajectory.as_mut() {
            if iter % opts.record_trajectory_every == 0 {
                tr.push((iter, x.clone()));
            }
        }
        if sup <= opts.grad_tol {
            break (Termination::Converged, sup);
        }
        if iter >= opts.max_iters {
            break (Termination::MaxIters, sup);
        }

        let d_min = min_distance(&x);
        let cap = opts.step_fraction * d_min / g.max_point_norm();
        let floor = cap * UNDERFLOW_RATIO;
        let gsq = g.squared_norm();
        let mut t = cap.min(STEP_GROWTH * last_step);
        let accepted = loop {
            let (delta, rate) = objective_change(&x, spec, &g.vectors, t, d_min);
            if delta <= -opts.armijo_c * t * gsq / rate {
                break true;
            }
            t *= opts.shrink;
            if t < floor {
                break false;
            }
        };
        if !accepted {
            break (Termination::StepUnderflow, sup);
        }

        x = Configuration::new(
            x.points()
                .iter()
                .zip(&g.vectors)
                .map(|(p, v)| p.translated(-t * v[0], -t * v[1]))
                .collect(),
        )?;
        obj = objective(&x, spec)?;
        last_step = t;
        // Keep kinks that were active at the last step inside the band.
        let held = interior
            .iter()
            .map(|k| {
                let (dx, dy) = displacement(x.points()[k.i], x.points()[k.j]);
                0.5 - [dx, dy][k.axis].abs()
            })
            .fold(0.0, f64::max);
        band = (KINK_REACH * t * g.max_point_norm())
            .max(2.0 * held)
            .clamp(CUT_BAND, MAX_BAND);
        iter += 1;
    };

    if let Some(tr) = trajectory.as_mut() {
        if tr.last().map(|(k, _)| *k) != Some(iter) {
            tr.push((iter, x.clone()));
        }
    }
    Ok(DescentResult {
        final_config: x,
        final_energy_log: obj,
        iterations: iter,
        termination,
        final_grad_sup: sup,
        trajectory,
        energy_history,
        grad_norm_history: grad_history,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Classification {
    LocalMin,
    Saddle { index: usize },
    Degenerate,
}

/// Relative eigenvalue threshold separating zero modes from signed ones.
pub const CLASSIFY_THETA: f64 = 1e-6;

/// Hessian eigenvalues with the two smallest-magnitude ones (the
/// translation modes) removed, plus the largest magnitude overall.
pub fn hessian_spectrum(config: &Configuration, spec: EnergySpec) -> Result<(Vec<f64>, f64)> {
    let h = hessian_fd(config, spec)?;
    let mut ev: Vec<f64> = h.symmetric_eigen().eigenvalues.iter().copied().collect();
    let max_abs = ev.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    ev.sort_by(|a, b| a.abs().total_cmp(&b.abs()));
    let rest = ev.split_off(2.min(ev.len()));
    Ok((rest, max_abs))
}

/// Classify a near-critical configuration by its finite-difference Hessian.
/// Requires the scaled-gradient sup-norm to be at most `10 * grad_tol`.
pub fn classify(config: &Configuration, spec: EnergySpec, grad_tol: f64) -> Result<Classification> {
    let sup = gradient(config, spec, true)?.sup_norm();
    let limit = 10.0 * grad_tol;
    if !(sup <= limit) {
        return Err(Error::NotNearCritical { sup_norm: sup, limit });
    }
    let (rest, max_abs) = hessian_spectrum(config, spec)?;
    let cut = CLASSIFY_THETA * max_abs;
    if rest.iter().any(|v| v.abs() <= cut) {
        return Ok(Classification::Degenerate);
    }
    match rest.iter().filter(|&&v| v < -cut).count() {
        0 => Ok(Classification::LocalMin),
        index => Ok(Classification::Saddle { index }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::factory::{named, NamedConfig};

    fn f5() -> Configuration {
        named(&NamedConfig::F5).unwrap()
    }

    #[test]
    fn exact_f5_converges_immediately() {
        for p in [2.0, 8.0, 60.0] {
            let r = descend(&f5(), EnergySpec::Riesz { p }, &DescentOptions::default()).unwrap();
            assert_eq!(r.termination, Termination::Converged);
            assert_eq!(r.iterations, 0);
        }
    }

    #[test]
    fn pairs_straddling_the_cut_locus_still_converge() {
        // Every pair of this start sits within 1e-9 of half a period on one axis.
        let c = Configuration::from_coords(&[
            [0.6534389307058288, 0.12476725693273184],
            [0.15343893277084047, 0.2983287682517047],
            [0.653438932888731, 0.6247672566631606],
            [0.1534389325460959, 0.7983287696375783],
        ])
        .unwrap();
        let r = descend(&c, EnergySpec::Riesz { p: 2.0 }, &DescentOptions::default()).unwrap();
        assert_eq!(r.termination, Termination::Converged);
        assert!(r.final_energy_log < 3.7256);
    }

    #[test]
    fn small_random_starts_converge() {
        for seed in 0..24u64 {
            let n = 3 + (seed % 8) as usize;
            let c = crate::factory::random_config(n, seed).unwrap();
            for spec in [EnergySpec::Riesz { p: 2.0 }, EnergySpec::Log] {
                let r = descend(&c, spec, &DescentOptions::default()).unwrap();
                assert_eq!(r.termination, Termination::Converged, "n={n} seed={seed} {spec:?}");
            }
        }
    }

    #[test]
    fn options_are_validated() {
        let bad = DescentOptions {
            shrink: 1.0,
            ..Default::default()
        };
        assert!(descend(&f5(), EnergySpec::Log, &bad).is_err());
        let bad = DescentOptions {
            step_fraction: 0.5,
            ..Default::default()
        };
        assert!(descend(&f5(), EnergySpec::Log, &bad).is_err());
        let dup = Configuration::from_coords(&[[0.1, 0.1], [0.1, 0.1]]).unwrap();
        assert!(matches!(
            descend(&dup, EnergySpec::Log, &DescentOptions::default()),
            Err(Error::Degenerate(0, 1))
        ));
    }

    #[test]
    fn trajectory_keeps_first_and_last() {
        let init = crate::factory::random_config(6, 3).unwrap();
        let opts = DescentOptions {
            max_iters: 25,
            record_trajectory_every: 10,
            ..Default::default()
        };
        let r = descend(&init, EnergySpec::Riesz { p: 4.0 }, &opts).unwrap();
        let frames: Vec<usize> = r.trajectory.unwrap().iter().map(|(k, _)| *k).collect();
        assert_eq!(frames.first(), Some(&0));
        assert_eq!(frames.last(), Some(&r.iterations));
        assert_eq!(r.energy_history.unwrap().len(), r.iterations + 1);
    }

    #[test]
    fn classify_small_examples() {
        let spec = EnergySpec::Riesz { p: 30.0 };
        assert_eq!(classify(&f5(), spec, 1e-10).unwrap(), Classification::LocalMin);
        let t1 = named(&NamedConfig::T1).unwrap();
        assert!(matches!(classify(&t1, spec, 1e-10).unwrap(), Classification::Saddle { .. }));
        let off = crate::factory::random_config(5, 9).unwrap();
        assert!(matches!(classify(&off, spec, 1e-10), Err(Error::NotNearCritical { .. })));
    }
}

