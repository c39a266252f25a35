//! Riesz `p`-energy and logarithmic energy of torus configurations.
//!
//! Sums run over ordered pairs `i != j`, so each unordered pair contributes
//! twice. The pair loop visits `(i, j)` with `i < j` in lexicographic order
//! and accumulates sequentially, which keeps every result bit-reproducible.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::torus::{displacement, Configuration, TorusPoint};

/// Which energy to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum EnergySpec {
    /// `sum_{i != j} |x_i - x_j|^{-p}`, `p > 0`.
    Riesz { p: f64 },
    /// `sum_{i != j} log(1 / |x_i - x_j|)`.
    Log,
}

impl EnergySpec {
    pub fn riesz(p: f64) -> Result<Self> {
        let spec = EnergySpec::Riesz { p };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            EnergySpec::Riesz { p } if !(p.is_finite() && p > 0.0) => {
                Err(invalid(format!("Riesz exponent must be finite and > 0, got {p}")))
            }
            _ => Ok(()),
        }
    }

    /// The exponent `p`, with the logarithmic energy treated as `p = 0`.
    pub fn exponent(&self) -> f64 {
        match *self {
            EnergySpec::Riesz { p } => p,
            EnergySpec::Log => 0.0,
        }
    }
}

impl std::fmt::Display for EnergySpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            EnergySpec::Riesz { p } => write!(f, "riesz(p={p})"),
            EnergySpec::Log => write!(f, "log"),
        }
    }
}

/// Per-point gradient vectors, possibly multiplied by a positive `scale`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientField {
    pub vectors: Vec<[f64; 2]>,
    /// Factor the stored vectors were multiplied by (`1` when unscaled).
    pub scale: f64,
}

impl GradientField {
    /// Largest absolute component.
    pub fn sup_norm(&self) -> f64 {
        self.vectors
            .iter()
            .flat_map(|v| v.iter())
            .fold(0.0f64, |m, c| m.max(c.abs()))
    }

    /// Largest per-point Euclidean norm.
    pub fn max_point_norm(&self) -> f64 {
        self.vectors
            .iter()
            .fold(0.0f64, |m, v| m.max(v[0].hypot(v[1])))
    }

    pub fn squared_norm(&self) -> f64 {
        self.vectors.iter().map(|v| v[0] * v[0] + v[1] * v[1]).sum()
    }

    /// Sum of all vectors (zero up to rounding by translation invariance).
    pub fn net_force(&self) -> [f64; 2] {
        self.vectors
            .iter()
            .fold([0.0, 0.0], |acc, v| [acc[0] + v[0], acc[1] + v[1]])
    }
}

fn ensure_distinct(config: &Configuration) -> Result<()> {
    match config.find_coincident() {
        Some((i, j)) => Err(Error::Degenerate(i, j)),
        None => Ok(()),
    }
}

fn ensure_p(p: f64) -> Result<()> {
    EnergySpec::Riesz { p }.validate()
}

/// All `n(n-1)/2` pair distances, sorted ascending.
pub fn pair_distances(config: &Configuration) -> Vec<f64> {
    let pts = config.points();
    let n = pts.len();
    let mut out = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            out.push(crate::torus::distance(pts[i], pts[j]));
        }
    }
    out.sort_by(f64::total_cmp);
    out
}

pub fn min_distance(config: &Configuration) -> f64 {
    let pts = config.points();
    let mut best = f64::INFINITY;
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            best = best.min(crate::torus::distance(pts[i], pts[j]));
        }
    }
    best
}

/// Ordered-pair sum of `(d_ref / d_ij)^p`.
fn scaled_riesz_sum(pts: &[TorusPoint], p: f64, d_ref: f64) -> f64 {
    let mut s = 0.0;
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            let d = crate::torus::distance(pts[i], pts[j]);
            s += (d_ref / d).powf(p);
        }
    }
    2.0 * s
}

pub fn riesz_energy(config: &Configuration, p: f64) -> Result<f64> {
    ensure_p(p)?;
    ensure_distinct(config)?;
    let pts = config.points();
    let mut e = 0.0;
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            e += crate::torus::distance(pts[i], pts[j]).powf(-p);
        }
    }
    let e = 2.0 * e;
    if e.is_finite() {
        Ok(e)
    } else {
        Err(Error::Overflow(p))
    }
}

pub fn log_energy(config: &Configuration) -> Result<f64> {
    ensure_distinct(config)?;
    let pts = config.points();
    let mut e = 0.0;
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            e -= crate::torus::distance(pts[i], pts[j]).ln();
        }
    }
    Ok(2.0 * e)
}

/// `log(riesz_energy(config, p))`, evaluated by factoring out the largest
/// term so that it stays finite for arbitrarily large `p`.
pub fn log_domain_energy(config: &Configuration, p: f64) -> Result<f64> {
    ensure_p(p)?;
    ensure_distinct(config)?;
    let d_min = min_distance(config);
    Ok(-p * d_min.ln() + scaled_riesz_sum(config.points(), p, d_min).ln())
}

/// Energy value for `spec`: `E_p` for Riesz, `E_0` for Log.
pub fn energy(config: &Configuration, spec: EnergySpec) -> Result<f64> {
    match spec {
        EnergySpec::Riesz { p } => riesz_energy(config, p),
        EnergySpec::Log => log_energy(config),
    }
}

/// Components this close to 1/2 count as lying on the cut locus, so rounding
/// cannot flip an antipodal pair between the two sides of the kink.
pub(crate) const CUT_BAND: f64 = 1e-12;

/// A pair whose minimal displacement along `axis` sits (within a band) at
/// the cut locus, where the pair distance has a symmetric kink. Its
/// contribution to the gradient of point `i` ranges over `[-weight, weight]`
/// along `axis` (opposite for `j`); the plain gradient uses the midpoint 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Kink {
    pub i: usize,
    pub j: usize,
    pub axis: usize,
    pub weight: f64,
}

/// Gradient of the energy with respect to every point.
///
/// `grad_i E = -2p sum_{j != i} disp(x_i, x_j) / d_ij^{p+2}` (with `p` replaced by
/// `1` and the exponent by `2` for the logarithmic energy). When `scaled` is
/// set the vectors are multiplied by `d_min^{p+2}`, which keeps them bounded
/// for any `p`. Displacement components at the cut locus contribute nothing:
/// zero is the midpoint of the two one-sided derivatives and keeps pair
/// forces antisymmetric.
pub fn gradient(config: &Configuration, spec: EnergySpec, scaled: bool) -> Result<GradientField> {
    Ok(gradient_with_kinks(config, spec, scaled, CUT_BAND)?.0)
}

/// [`gradient`] with a configurable cut-locus band, also listing the kinks.
pub(crate) fn gradient_with_kinks(
    config: &Configuration,
    spec: EnergySpec,
    scaled: bool,
    band: f64,
) -> Result<(GradientField, Vec<Kink>)> {
    spec.validate()?;
    ensure_distinct(config)?;
    let pts = config.points();
    let n = pts.len();
    let (prefactor, power) = match spec {
        EnergySpec::Riesz { p } => (2.0 * p, p + 2.0),
        EnergySpec::Log => (2.0, 2.0),
    };
    let d_ref = if scaled { min_distance(config) } else { 1.0 };
    let scale = if scaled { d_ref.powf(power) } else { 1.0 };

    let mut vectors = vec![[0.0f64; 2]; n];
    let mut kinks = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let (dx, dy) = displacement(pts[i], pts[j]);
            let d = dx.hypot(dy);
            let w = if scaled {
                (d_ref / d).powf(power)
            } else {
                d.powf(-power)
            };
            for (axis, c) in [dx, dy].into_iter().enumerate() {
                if c.abs() >= 0.5 - band {
                    kinks.push(Kink {
                        i,
                        j,
                        axis,
                        weight: prefactor * w * c.abs(),
                    });
                } else {
                    let f = prefactor * w * c;
                    vectors[i][axis] -= f;
                    vectors[j][axis] += f;
                }
            }
        }
    }
    if !scaled && vectors.iter().flatten().any(|c| !c.is_finite()) {
        return Err(Error::Overflow(spec.exponent()));
    }
    Ok((GradientField { vectors, scale }, kinks))
}

/// Ordered-pair energy restricted to pairs touching `involved`, scaled by
/// `d_ref^{p+2}` for Riesz energies. Terms not touching `involved` cancel in
/// the finite-difference stencils that use this.
fn local_energy(pts: &[TorusPoint], involved: &[usize], spec: EnergySpec, d_ref: f64) -> f64 {
    let term = |a: TorusPoint, b: TorusPoint| {
        let d = crate::torus::distance(a, b);
        match spec {
            EnergySpec::Riesz { p } => (d_ref / d).powf(p) * d_ref * d_ref,
            EnergySpec::Log => -d.ln(),
        }
    };
    let mut e = 0.0;
    for (k, &i) in involved.iter().enumerate() {
        for (j, &pj) in pts.iter().enumerate() {
            if j == i || involved[..k].contains(&j) {
                continue;
            }
            e += term(pts[i], pj);
        }
    }
    2.0 * e
}

/// Central finite-difference Hessian (`2n x 2n`, coordinates ordered
/// `x_0, y_0, x_1, ...`). Riesz energies are multiplied by
/// `d_min^{p+2}` so entries stay finite; the step is `1e-5 * max(1, d_min)`.
pub fn hessian_fd(config: &Configuration, spec: EnergySpec) -> Result<DMatrix<f64>> {
    spec.validate()?;
    ensure_distinct(config)?;
    let d_min = min_distance(config);
    let h = 1e-5 * d_min.max(1.0);
    let base = config.points().to_vec();
    let dim = 2 * base.len();
    let mut hess = DMatrix::zeros(dim, dim);

    let shifted = |a: usize, sa: f64, b: usize, sb: f64| -> f64 {
        let mut pts = base.clone();
        for (c, s) in [(a, sa), (b, sb)] {
            let p = &mut pts[c / 2];
            let (dx, dy) = if c % 2 == 0 { (s * h, 0.0) } else { (0.0, s * h) };
            *p = p.translated(dx, dy);
        }
        let involved: Vec<usize> = if a / 2 == b / 2 {
            vec![a / 2]
        } else {
            vec![a / 2, b / 2]
        };
        local_energy(&pts, &involved, spec, d_min)
    };

    for a in 0..dim {
        for b in a..dim {
            let v = (shifted(a, 1.0, b, 1.0) - shifted(a, 1.0, b, -1.0) - shifted(a, -1.0, b, 1.0)
                + shifted(a, -1.0, b, -1.0))
                / (4.0 * h * h);
            hess[(a, b)] = v;
            hess[(b, a)] = v;
        }
    }
    Ok(hess)
}

/// Objective used by the descent: `log E_p` for Riesz energies, `E_0` for
/// the logarithmic energy.
pub(crate) fn objective(config: &Configuration, spec: EnergySpec) -> Result<f64> {
    match spec {
        EnergySpec::Riesz { p } => log_domain_energy(config, p),
        EnergySpec::Log => log_energy(config),
    }
}

/// Change of the descent objective when every point `i` moves by
/// `-t * dir[i]`, evaluated pair by pair from the displacement increments so
/// that changes far below the objective's own rounding level stay resolved.
///
/// Also returns `s * E` (Riesz, with `s = d_ref^{p+2}`) or `s` (Log, with
/// `s = d_ref^2`): the factor relating the scaled gradient to the gradient of
/// the objective.
pub(crate) fn objective_change(
    config: &Configuration,
    spec: EnergySpec,
    dir: &[[f64; 2]],
    t: f64,
    d_ref: f64,
) -> (f64, f64) {
    let pts = config.points();
    let n = pts.len();
    let p = spec.exponent();
    let mut base = 0.0;
    let mut delta = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            let (dx, dy) = displacement(pts[i], pts[j]);
            let d2 = dx * dx + dy * dy;
            let sx = -t * (dir[i][0] - dir[j][0]);
            let sy = -t * (dir[i][1] - dir[j][1]);
            // Relative change of d^2. With `k` the wrap applied to the moved
            // component, `(d + s + k)^2 - d^2 = (s + k) (2d + k + s)`; `2d + k`
            // is exact near the cut locus, so crossings stay resolved.
            let grow = |d: f64, s: f64| {
                let k = -(d + s + 0.5).floor();
                (s + k) * ((2.0 * d + k) + s)
            };
            let r = (grow(dx, sx) + grow(dy, sy)) / d2;
            match spec {
                EnergySpec::Riesz { .. } => {
                    let w = (d_ref * d_ref / d2).powf(0.5 * p);
                    base += w;
                    delta += w * (-0.5 * p * r.ln_1p()).exp_m1();
                }
                EnergySpec::Log => delta -= r.ln_1p(),
            }
        }
    }
    match spec {
        EnergySpec::Riesz { .. } => ((delta / base).ln_1p(), 2.0 * d_ref * d_ref * base),
        EnergySpec::Log => (delta, d_ref * d_ref),
    }
}
