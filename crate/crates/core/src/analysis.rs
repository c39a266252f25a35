//! Closed-form energies of the small named families, phase-transition
//! solvers, quantitative checks of the striped construction (threshold,
//! energy bound, non-crossing, mask recovery), the perturbation probes
//! around the five-point Fibonacci set, and a grid-likeness score.

use std::f64::consts::{PI, SQRT_2};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::factory::{mask_canonical, ConstructionSpec, S_ALPHA_MAX};
use crate::torus::{min_image, Configuration};

const INV_SQRT5: f64 = 0.447_213_595_499_958;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum Family {
    T1,
    T2,
    T3,
    SAlpha { alpha: f64 },
    SShift,
    F5,
    /// The lowest-energy member of the `S_alpha` family at the given `p`.
    SFamilyMin,
}

impl Family {
    /// Parse names used on the command line: `t1 t2 t3 s0 s-shift f5
    /// s-min s-alpha=<angle>`.
    pub fn parse(name: &str) -> Result<Self> {
        let lower = name.trim().to_ascii_lowercase();
        if let Some(a) = lower.strip_prefix("s-alpha=") {
            let alpha: f64 = a
                .parse()
                .map_err(|_| invalid(format!("bad angle in family {name:?}")))?;
            return Ok(Family::SAlpha { alpha });
        }
        Ok(match lower.as_str() {
            "t1" => Family::T1,
            "t2" => Family::T2,
            "t3" => Family::T3,
            "s0" => Family::SAlpha { alpha: 0.0 },
            "s-shift" | "sshift" => Family::SShift,
            "f5" => Family::F5,
            "s-min" | "s-family-min" => Family::SFamilyMin,
            _ => return Err(invalid(format!("unknown family {name:?}"))),
        })
    }

    pub fn label(&self) -> String {
        match self {
            Family::T1 => "t1".into(),
            Family::T2 => "t2".into(),
            Family::T3 => "t3".into(),
            Family::SAlpha { alpha } => format!("s-alpha={alpha}"),
            Family::SShift => "s-shift".into(),
            Family::F5 => "f5".into(),
            Family::SFamilyMin => "s-min".into(),
        }
    }

    /// `(multiplicity, 1/d)` for every distinct distance, counting ordered
    /// pairs. Not available for `SFamilyMin`.
    fn terms(&self) -> Result<Vec<(f64, f64)>> {
        let r5 = 5f64.sqrt();
        Ok(match *self {
            Family::T1 => vec![(4.0, 2.0), (2.0, SQRT_2)],
            Family::T2 => vec![(2.0, 2.0), (4.0, 4.0 / r5)],
            Family::T3 => vec![(6.0, (6f64.sqrt() + SQRT_2) / 2.0)],
            Family::SAlpha { alpha } => {
                check_alpha(alpha)?;
                vec![(8.0, 2.0 * alpha.cos()), (4.0, SQRT_2 / (1.0 - alpha.tan()))]
            }
            Family::SShift => vec![(4.0, 2.0), (8.0, 4.0 / r5)],
            Family::F5 => vec![(20.0, r5)],
            Family::SFamilyMin => return Err(invalid("S family minimum has no fixed distance set")),
        })
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if (0.0..=S_ALPHA_MAX).contains(&alpha) {
        Ok(())
    } else {
        Err(invalid(format!("alpha must lie in [0, pi/12], got {alpha}")))
    }
}

fn check_p(p: f64) -> Result<()> {
    if p.is_finite() && p > 0.0 {
        Ok(())
    } else {
        Err(invalid(format!("p must be finite and > 0, got {p}")))
    }
}

fn log_sum_exp(logs: &[f64]) -> f64 {
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + logs.iter().map(|l| (l - max).exp()).sum::<f64>().ln()
}

/// Ordered-pair energy of a family, from its closed form.
pub fn closed_form_energy(family: &Family, p: f64) -> Result<f64> {
    check_p(p)?;
    let e = match family {
        Family::SFamilyMin => closed_form_log_energy(family, p)?.exp(),
        f => f.terms()?.iter().map(|&(c, r)| c * r.powf(p)).sum(),
    };
    if e.is_finite() {
        Ok(e)
    } else {
        Err(Error::Overflow(p))
    }
}

/// Logarithm of [`closed_form_energy`], finite for any `p`.
pub fn closed_form_log_energy(family: &Family, p: f64) -> Result<f64> {
    check_p(p)?;
    match family {
        Family::SFamilyMin => Ok(family_min_alpha(p)?.log_energy),
        f => {
            let logs: Vec<f64> = f.terms()?.iter().map(|&(c, r)| c.ln() + p * r.ln()).collect();
            Ok(log_sum_exp(&logs))
        }
    }
}

/// Value of `p` in `[p_lo, p_hi]` where the two families have equal energy,
/// by bisection on the log-energy difference to a bracket width of `1e-6`.
pub fn crossover(a: &Family, b: &Family, p_lo: f64, p_hi: f64) -> Result<f64> {
    check_p(p_lo)?;
    check_p(p_hi)?;
    if p_lo >= p_hi {
        return Err(invalid(format!("empty bracket [{p_lo}, {p_hi}]")));
    }
    let diff = |p: f64| -> Result<f64> {
        Ok(closed_form_log_energy(a, p)? - closed_form_log_energy(b, p)?)
    };
    let (mut lo, mut hi) = (p_lo, p_hi);
    let f_lo = diff(lo)?;
    let f_hi = diff(hi)?;
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }
    if f_lo.signum() == f_hi.signum() {
        return Err(Error::NoSignChange { lo, hi });
    }
    while hi - lo > 1e-6 {
        let mid = 0.5 * (lo + hi);
        let f_mid = diff(mid)?;
        if f_mid == 0.0 {
            return Ok(mid);
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Unordered-pair energy `4 (2 cos a)^p + 2 (sqrt2 / (1 - tan a))^p` of `S_alpha`,
/// without the range check (used by finite differences that step past pi/12).
fn s_alpha_unordered(alpha: f64, p: f64) -> f64 {
    4.0 * (2.0 * alpha.cos()).powf(p) + 2.0 * (SQRT_2 / (1.0 - alpha.tan())).powf(p)
}

/// `d/d alpha` of the unordered `S_alpha` energy at `alpha = pi/12`: the
/// closed form `sqrt3 p 2^{1+p/2} / (sqrt3 - 1)^{p-2}` and a central
/// difference with step `1e-7`.
pub fn s_alpha_derivative_check(p: f64) -> Result<(f64, f64)> {
    check_p(p)?;
    let s3 = 3f64.sqrt();
    let closed = s3 * p * 2f64.powf(1.0 + p / 2.0) / (s3 - 1.0).powf(p - 2.0);
    let h = 1e-7;
    let a = PI / 12.0;
    let fd = (s_alpha_unordered(a + h, p) - s_alpha_unordered(a - h, p)) / (2.0 * h);
    Ok((closed, fd))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FamilyMinimum {
    pub alpha: f64,
    /// Ordered-pair log-energy at `alpha`.
    pub log_energy: f64,
    /// False when the minimum sits at an end of `[0, pi/12]`.
    pub interior: bool,
}

const ALPHA_SCAN: usize = 2000;
const ALPHA_TOL: f64 = 1e-10;

/// Minimise the `S_alpha` energy over `alpha in [0, pi/12]`. The energy is
/// not unimodal in `alpha`, so a grid scan locates the best cell and
/// golden-section search refines it to `1e-10`.
pub fn family_min_alpha(p: f64) -> Result<FamilyMinimum> {
    check_p(p)?;
    let f = |a: f64| {
        let logs = [8f64.ln() + p * (2.0 * a.cos()).ln(), 4f64.ln() + p * (SQRT_2 / (1.0 - a.tan())).ln()];
        log_sum_exp(&logs)
    };
    let step = S_ALPHA_MAX / ALPHA_SCAN as f64;
    let best = (0..=ALPHA_SCAN)
        .map(|i| (i, f(i as f64 * step)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("non-empty scan")
        .0;
    let mut lo = best.saturating_sub(1) as f64 * step;
    let mut hi = ((best + 1).min(ALPHA_SCAN)) as f64 * step;

    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = hi - inv_phi * (hi - lo);
    let mut d = lo + inv_phi * (hi - lo);
    let (mut fc, mut fd) = (f(c), f(d));
    while hi - lo > ALPHA_TOL {
        if fc < fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - inv_phi * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + inv_phi * (hi - lo);
            fd = f(d);
        }
    }
    let mut alpha = 0.5 * (lo + hi);
    let mut value = f(alpha);
    for end in [0.0, S_ALPHA_MAX] {
        if f(end) < value {
            alpha = end;
            value = f(end);
        }
    }
    let interior = alpha > ALPHA_TOL && alpha < S_ALPHA_MAX - ALPHA_TOL;
    Ok(FamilyMinimum {
        alpha,
        log_energy: value,
        interior,
    })
}

/// Smallest `p` for which the non-crossing argument applies:
/// `log(8 sqrt n) / log(1.179)`.
pub fn theorem1_threshold(n: usize) -> Result<f64> {
    if n == 0 {
        return Err(invalid("n must be positive"));
    }
    Ok((8.0 * (n as f64).sqrt()).ln() / 1.179f64.ln())
}

/// Minimal distance `delta = sqrt(89)/(8m)` of the striped grid and the log
/// of the energy bound `6n/delta^p + n^2/(1.69 delta)^p` with `n = 4m^2/5`.
pub fn energy_upper_bound(m: usize, p: f64) -> Result<(f64, f64)> {
    if m < 10 || m % 10 != 0 {
        return Err(invalid(format!("m must be a positive multiple of 10, got {m}")));
    }
    check_p(p)?;
    let delta = 89f64.sqrt() / (8.0 * m as f64);
    let n = (4 * m * m / 5) as f64;
    let bound = log_sum_exp(&[
        (6.0 * n).ln() - p * delta.ln(),
        2.0 * n.ln() - p * (1.69 * delta).ln(),
    ]);
    Ok((delta, bound))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrossingReport {
    pub columns_ok: bool,
    pub max_x_drift: f64,
    pub ordering_ok: bool,
}

/// Column tolerance of [`crossing_monitor`].
pub const COLUMN_TOL: f64 = 1e-6;

fn column_of(x: f64, m: usize) -> (usize, f64) {
    let c = (x * m as f64).round() as usize % m;
    (c, min_image(x - c as f64 / m as f64).abs())
}

/// Labels of points in columns 0 and 1, cyclically ordered by `y`.
fn merged_order(frame: &Configuration, labels: &[usize]) -> Vec<usize> {
    let mut v: Vec<(f64, usize)> = labels.iter().map(|&i| (frame.points()[i].y, i)).collect();
    v.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    v.into_iter().map(|(_, i)| i).collect()
}

fn is_rotation(a: &[usize], b: &[usize]) -> bool {
    a.len() == b.len() && (a.is_empty() || (0..a.len()).any(|s| a.iter().cycle().skip(s).take(a.len()).eq(b.iter())))
}

/// Check a descent trajectory started at the striped construction: every
/// point stays within `1e-6` of its initial column, and the merged cyclic
/// `y`-order of the first plain and first offset column is the same at the
/// first and last frame.
pub fn crossing_monitor(trajectory: &[Configuration], spec: &ConstructionSpec) -> Result<CrossingReport> {
    spec.validate()?;
    let first = trajectory.first().ok_or(Error::EmptyTrajectory)?;
    let last = trajectory.last().expect("non-empty");
    let mut max_x_drift = 0.0f64;
    for frame in trajectory {
        if frame.len() != first.len() {
            return Err(Error::SizeMismatch(frame.len(), first.len()));
        }
        for (a, b) in frame.points().iter().zip(first.points()) {
            max_x_drift = max_x_drift.max(min_image(a.x - b.x).abs());
        }
    }
    let labels: Vec<usize> = first
        .points()
        .iter()
        .enumerate()
        .filter(|(_, p)| {
            let (c, off) = column_of(p.x, spec.m);
            c <= 1 && off <= COLUMN_TOL
        })
        .map(|(i, _)| i)
        .collect();
    let ordering_ok = is_rotation(&merged_order(first, &labels), &merged_order(last, &labels));
    Ok(CrossingReport {
        columns_ok: max_x_drift <= COLUMN_TOL,
        max_x_drift,
        ordering_ok,
    })
}

/// Binning tolerance of [`recover_mask`].
pub const BIN_TOL: f64 = 1e-3;

/// Read the deletion mask back off a configuration reached from the striped
/// construction: the gaps between consecutive points of column 0 that hold
/// no point of column 1 are the deleted rows. Returned in canonical
/// (smallest-rotation) form.
pub fn recover_mask(config: &Configuration, m: usize) -> Result<Vec<usize>> {
    if m < 10 || m % 10 != 0 {
        return Err(invalid(format!("m must be a positive multiple of 10, got {m}")));
    }
    let rows = 4 * m / 5;
    let mut red = Vec::new();
    let mut blue = Vec::new();
    for (index, p) in config.points().iter().enumerate() {
        let (c, off) = column_of(p.x, m);
        if off > BIN_TOL {
            return Err(Error::ColumnBinning {
                index,
                x: p.x,
                tol: BIN_TOL,
            });
        }
        match c {
            0 => red.push(p.y),
            1 => blue.push(p.y),
            _ => {}
        }
    }
    if red.len() != rows || blue.len() != rows - 2 * m / 5 {
        return Err(Error::MaskRecovery(format!(
            "expected {rows} + {} points in the first two columns, found {} + {}",
            rows - 2 * m / 5,
            red.len(),
            blue.len()
        )));
    }
    red.sort_by(f64::total_cmp);
    let mut occupied = vec![false; rows];
    for &y in &blue {
        let below = red.iter().filter(|&&r| r <= y).count();
        let gap = (below + rows - 1) % rows;
        if std::mem::replace(&mut occupied[gap], true) {
            return Err(Error::MaskRecovery(format!("two offset points share gap {gap}")));
        }
    }
    let mask: Vec<usize> = (0..rows).filter(|&k| !occupied[k]).collect();
    mask_canonical(&mask, m)
}

/// Sum of planar distances from `(x, y)` to `(+-1/sqrt5, 0)` and `(0, +-1/sqrt5)`.
pub fn lemma1_f(x: f64, y: f64) -> f64 {
    let a = INV_SQRT5;
    (x - a).hypot(y) + (x + a).hypot(y) + x.hypot(y - a) + x.hypot(y + a)
}

/// Least-squares coefficient `c` in `F(x, y) - 4/sqrt5 ~ c (x^2 + y^2)` over
/// `samples` points drawn uniformly from the disk of the given radius
/// (ChaCha8, seed 0).
pub fn lemma1_fit(radius: f64, samples: usize) -> Result<f64> {
    if !(radius > 0.0 && radius <= 1e-3) {
        return Err(invalid(format!("radius must lie in (0, 1e-3], got {radius}")));
    }
    if samples == 0 {
        return Err(invalid("need at least one sample"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let f0 = 4.0 * INV_SQRT5;
    let (mut num, mut den) = (0.0, 0.0);
    for _ in 0..samples {
        let r = radius * rng.gen::<f64>().sqrt();
        let theta = 2.0 * PI * rng.gen::<f64>();
        let (x, y) = (r * theta.cos(), r * theta.sin());
        let r2 = x * x + y * y;
        num += (lemma1_f(x, y) - f0) * r2;
        den += r2 * r2;
    }
    Ok(num / den)
}

/// Distance deviations of a perturbed Fibonacci set from `1/sqrt5`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationReport {
    /// `max_i |y_i|`.
    pub epsilon: f64,
    /// `delta_ij` for `i < j` in lexicographic order.
    pub delta: Vec<f64>,
    pub sum_delta: f64,
    pub min_delta: f64,
    pub max_delta: f64,
}

fn fibonacci_point(k: usize) -> [f64; 2] {
    [k as f64 / 5.0, ((2 * k) % 5) as f64 / 5.0]
}

/// Measure `delta_ij = |(p_i + y_i) - (p_j + y_j)| - 1/sqrt5` for the five
/// Fibonacci points. Requires `y_1 = 0` and `|y_i| <= 1/1000`.
pub fn lemma2_probe(y: &[[f64; 2]; 5]) -> Result<PerturbationReport> {
    if y[0] != [0.0, 0.0] {
        return Err(invalid("the first shift must be zero"));
    }
    let epsilon = y.iter().map(|v| v[0].hypot(v[1])).fold(0.0, f64::max);
    if !(epsilon <= 1e-3) {
        return Err(invalid(format!("shifts must have norm <= 1e-3, got {epsilon}")));
    }
    let mut delta = Vec::with_capacity(10);
    for i in 0..5 {
        for j in i + 1..5 {
            let (pi, pj) = (fibonacci_point(i), fibonacci_point(j));
            let dx = min_image(pi[0] - pj[0]) + (y[i][0] - y[j][0]);
            let dy = min_image(pi[1] - pj[1]) + (y[i][1] - y[j][1]);
            delta.push(dx.hypot(dy) - INV_SQRT5);
        }
    }
    Ok(PerturbationReport {
        epsilon,
        sum_delta: delta.iter().sum(),
        min_delta: delta.iter().copied().fold(f64::INFINITY, f64::min),
        max_delta: delta.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        delta,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lemma2Summary {
    pub probes: usize,
    pub epsilon: f64,
    /// Whether `min_delta < 0` held in every probe.
    pub all_min_negative: bool,
    /// `min over probes of (-min_delta) / epsilon`.
    pub c_emp: f64,
    /// `max over probes of |sum_delta| / epsilon^2`.
    pub max_sum_ratio: f64,
}

/// Random perturbations with `y_1 = 0` and `y_2..y_5` uniform in a disk,
/// rescaled so the largest has norm exactly `epsilon`. Probe `k` draws from
/// ChaCha8 seeded with `seed`, stream `k`.
pub fn lemma2_monte_carlo(epsilon: f64, probes: usize, seed: u64) -> Result<Lemma2Summary> {
    if !(epsilon > 0.0 && epsilon <= 1e-3) || probes == 0 {
        return Err(invalid("need 0 < epsilon <= 1e-3 and at least one probe"));
    }
    let reports = (0..probes)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            let mut y = [[0.0; 2]; 5];
            for v in y.iter_mut().skip(1) {
                let r = rng.gen::<f64>().sqrt();
                let theta = 2.0 * PI * rng.gen::<f64>();
                *v = [r * theta.cos(), r * theta.sin()];
            }
            let max = y.iter().map(|v| v[0].hypot(v[1])).fold(0.0, f64::max);
            for v in y.iter_mut() {
                *v = [v[0] * epsilon / max, v[1] * epsilon / max];
            }
            lemma2_probe(&y)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut summary = Lemma2Summary {
        probes,
        epsilon,
        all_min_negative: true,
        c_emp: f64::INFINITY,
        max_sum_ratio: 0.0,
    };
    for r in &reports {
        summary.all_min_negative &= r.min_delta < 0.0;
        summary.c_emp = summary.c_emp.min(-r.min_delta / r.epsilon);
        summary.max_sum_ratio = summary.max_sum_ratio.max(r.sum_delta.abs() / (r.epsilon * r.epsilon));
    }
    Ok(summary)
}

fn h_unchecked(x: f64, p: f64, c: f64) -> f64 {
    (INV_SQRT5 - x).powf(-p) + 9.0 * (INV_SQRT5 + x / 9.0 + c * x * x).powf(-p)
}

/// `h(x) = (1/sqrt5 - x)^{-p} + 9 (1/sqrt5 + x/9 + c x^2)^{-p}` on `[0, 1/sqrt5)`.
pub fn hfun(x: f64, p: f64, c: f64) -> Result<f64> {
    check_p(p)?;
    if !(c > 0.0) {
        return Err(invalid(format!("c must be > 0, got {c}")));
    }
    if !(0.0..INV_SQRT5).contains(&x) {
        return Err(invalid(format!("x must lie in [0, 1/sqrt5), got {x}")));
    }
    Ok(h_unchecked(x, p, c))
}

/// `h''(0) = (2p/9) 5^{p/2} (25 (1 + p) - 81 sqrt5 c)`.
pub fn hfun_second_derivative_at_zero(p: f64, c: f64) -> f64 {
    2.0 * p / 9.0 * 5f64.powf(p / 2.0) * (25.0 * (1.0 + p) - 81.0 * 5f64.sqrt() * c)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HCheck {
    pub h0_ok: bool,
    pub hpp0_ok: bool,
    pub monotone_ok: bool,
    pub h0: f64,
    pub hpp0_closed: f64,
    pub hpp0_fd: f64,
}

pub fn hfun_check(p: f64, c: f64, x_max: f64, steps: usize) -> Result<HCheck> {
    if !(x_max > 0.0 && x_max < INV_SQRT5) || steps < 2 {
        return Err(invalid("need 0 < x_max < 1/sqrt5 and at least 2 grid points"));
    }
    let h0 = hfun(0.0, p, c)?;
    let expected = 10.0 * 5f64.powf(p / 2.0);
    let step = 1e-5;
    let hpp0_fd = (h_unchecked(step, p, c) - 2.0 * h0 + h_unchecked(-step, p, c)) / (step * step);
    let hpp0_closed = hfun_second_derivative_at_zero(p, c);
    let mut monotone_ok = true;
    let mut prev = h0;
    for k in 1..steps {
        let v = hfun(x_max * k as f64 / (steps - 1) as f64, p, c)?;
        monotone_ok &= v >= prev;
        prev = v;
    }
    Ok(HCheck {
        h0_ok: (h0 - expected).abs() <= 1e-12 * expected,
        hpp0_ok: (hpp0_fd - hpp0_closed).abs() <= 1e-4 * hpp0_closed.abs(),
        monotone_ok,
        h0,
        hpp0_closed,
        hpp0_fd,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridScore {
    pub n_lines_x: usize,
    pub n_lines_y: usize,
    /// Fraction of points whose `x` is within `tol` of the centre of a
    /// cluster with at least 3 members.
    pub coverage: f64,
}

/// Single-linkage clusters of circular coordinates in `[0, 1)`: returns
/// `(centre, size)` per cluster.
fn circular_clusters(values: &[f64], tol: f64) -> Vec<(f64, usize)> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    // Gap after element i (to i+1, wrapping).
    let breaks: Vec<usize> = (0..n)
        .filter(|&i| {
            let next = if i + 1 < n { v[i + 1] } else { v[0] + 1.0 };
            next - v[i] > tol
        })
        .collect();
    if breaks.is_empty() {
        let centre = v.iter().sum::<f64>() / n as f64;
        return vec![(centre, n)];
    }
    let mut out = Vec::with_capacity(breaks.len());
    for (b, &end) in breaks.iter().enumerate() {
        let start = (breaks[(b + breaks.len() - 1) % breaks.len()] + 1) % n;
        let mut members = Vec::new();
        let mut i = start;
        loop {
            members.push(v[i]);
            if i == end {
                break;
            }
            i = (i + 1) % n;
        }
        // Unwrap relative to the first member before averaging.
        let base = members[0];
        let mean = members.iter().map(|&u| base + min_image(u - base)).sum::<f64>() / members.len() as f64;
        out.push((mean - mean.floor(), members.len()));
    }
    out
}

/// Count axis-parallel "lines" of points: 1-D circular single-linkage
/// clustering of the `x` and of the `y` coordinates with gap threshold `tol`.
pub fn grid_score(config: &Configuration, tol: f64) -> GridScore {
    let xs: Vec<f64> = config.points().iter().map(|p| p.x).collect();
    let ys: Vec<f64> = config.points().iter().map(|p| p.y).collect();
    let cx = circular_clusters(&xs, tol);
    let cy = circular_clusters(&ys, tol);
    let centres: Vec<f64> = cx.iter().filter(|c| c.1 >= 3).map(|c| c.0).collect();
    let covered = xs
        .iter()
        .filter(|&&x| centres.iter().any(|&c| min_image(x - c).abs() <= tol))
        .count();
    GridScore {
        n_lines_x: cx.len(),
        n_lines_y: cy.len(),
        coverage: covered as f64 / xs.len() as f64,
    }
}

/// Log-energies of several families on `p = lo, lo + step, ..., <= hi`.
pub fn phase_scan(families: &[Family], lo: f64, hi: f64, step: f64) -> Result<Vec<(f64, Vec<f64>)>> {
    if !(step > 0.0) || hi < lo {
        return Err(invalid("phase scan needs step > 0 and hi >= lo"));
    }
    let count = ((hi - lo) / step + 1e-9).floor() as usize + 1;
    (0..count)
        .map(|k| {
            let p = lo + k as f64 * step;
            let row = families
                .iter()
                .map(|f| closed_form_log_energy(f, p))
                .collect::<Result<Vec<_>>>()?;
            Ok((p, row))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::riesz_energy;
    use crate::factory::{construct_theorem1, named, NamedConfig};

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / a.abs().max(b.abs())
    }

    #[test]
    fn closed_forms_match_direct_sums() {
        let pairs = [
            (Family::T1, NamedConfig::T1),
            (Family::T2, NamedConfig::T2),
            (Family::T3, NamedConfig::T3),
            (Family::SShift, NamedConfig::SShift),
            (Family::F5, NamedConfig::F5),
            (Family::SAlpha { alpha: 0.0 }, NamedConfig::SAlpha { alpha: 0.0 }),
            (Family::SAlpha { alpha: 0.17 }, NamedConfig::SAlpha { alpha: 0.17 }),
            (Family::SAlpha { alpha: S_ALPHA_MAX }, NamedConfig::SAlpha { alpha: S_ALPHA_MAX }),
        ];
        for (fam, cfg) in pairs {
            let c = named(&cfg).unwrap();
            for p in [1.0, 2.0, 5.0, 10.0, 30.0] {
                let closed = closed_form_energy(&fam, p).unwrap();
                let direct = riesz_energy(&c, p).unwrap();
                assert!(rel(closed, direct) <= 1e-12, "{fam:?} p={p}: {closed} vs {direct}");
                assert!(rel(closed_form_log_energy(&fam, p).unwrap(), closed.ln()) <= 1e-13);
            }
        }
    }

    #[test]
    fn closed_form_examples() {
        assert!(rel(closed_form_energy(&Family::SAlpha { alpha: 0.0 }, 2.0).unwrap(), 40.0) < 1e-15);
        assert!(rel(closed_form_energy(&Family::F5, 2.0).unwrap(), 100.0) < 1e-15);
        assert!(closed_form_energy(&Family::SAlpha { alpha: 1.0 }, 2.0).is_err());
    }

    #[test]
    fn crossover_brackets_and_errors() {
        let p = crossover(&Family::T1, &Family::T2, 1.0, 10.0).unwrap();
        assert!((p - 4.505).abs() < 0.01);
        assert!(matches!(
            crossover(&Family::T1, &Family::T2, 10.0, 20.0),
            Err(Error::NoSignChange { .. })
        ));
    }

    #[test]
    fn crossover_invariant_under_convention() {
        // Doubling both energies shifts both logs by ln 2; the root is unchanged.
        let a = crossover(&Family::T2, &Family::T3, 10.0, 40.0).unwrap();
        let half = |f: &Family, p: f64| closed_form_log_energy(f, p).unwrap() - 2f64.ln();
        let (mut lo, mut hi) = (10.0, 40.0);
        while hi - lo > 1e-6 {
            let mid = 0.5 * (lo + hi);
            if (half(&Family::T2, mid) - half(&Family::T3, mid)) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert!((a - 0.5 * (lo + hi)).abs() <= 1e-6);
    }

    #[test]
    fn derivative_examples() {
        let (closed, fd) = s_alpha_derivative_check(2.0).unwrap();
        assert!((closed - 8.0 * 3f64.sqrt()).abs() < 1e-12);
        assert!(rel(closed, fd) < 1e-4);
        for p in [0.5, 10.0, 20.0, 50.0] {
            let (closed, fd) = s_alpha_derivative_check(p).unwrap();
            assert!(closed > 0.0);
            assert!(rel(closed, fd) < 1e-4, "p={p}");
        }
    }

    #[test]
    fn family_min_behaviour() {
        for p in [40.0, 80.0] {
            let m = family_min_alpha(p).unwrap();
            assert!(m.interior);
            let c_hat = (S_ALPHA_MAX - m.alpha) * p;
            assert!((0.4..=0.8).contains(&c_hat), "p={p}: {c_hat}");
            let at_end = closed_form_log_energy(&Family::SAlpha { alpha: S_ALPHA_MAX }, p).unwrap();
            assert!(m.log_energy < at_end);
        }
        // small p: the square wins
        let m = family_min_alpha(2.0).unwrap();
        assert_eq!(m.alpha, 0.0);
        assert!(!m.interior);
    }

    #[test]
    fn threshold_values() {
        assert!((theorem1_threshold(60).unwrap() - 25.03).abs() < 0.05);
        let e2 = std::f64::consts::E.powi(2);
        let v = (8.0 * e2.sqrt()).ln() / 1.179f64.ln();
        assert!((v - (3.03 * 2.0 + 12.62)).abs() < 0.05);
        assert!((theorem1_threshold(1).unwrap() - 12.63).abs() < 0.01);
    }

    #[test]
    fn upper_bound_values() {
        let (delta, b) = energy_upper_bound(10, 26.0).unwrap();
        assert!((delta - 0.117_924_764_2).abs() < 1e-10);
        let direct = (6.0 * 80.0 / delta.powf(26.0) + 6400.0 / (1.69 * delta).powf(26.0)).ln();
        assert!((b - direct).abs() < 1e-12);
        assert!(energy_upper_bound(12, 26.0).is_err());
    }

    #[test]
    fn static_trajectory_recovers_everything() {
        let spec = ConstructionSpec::new(10, [2, 3, 5, 7]).unwrap();
        let c = construct_theorem1(&spec).unwrap();
        let rep = crossing_monitor(&[c.clone(), c.clone()], &spec).unwrap();
        assert!(rep.columns_ok && rep.ordering_ok);
        assert_eq!(rep.max_x_drift, 0.0);
        assert_eq!(recover_mask(&c, 10).unwrap(), mask_canonical(&spec.mask, 10).unwrap());
        assert!(matches!(crossing_monitor(&[], &spec), Err(Error::EmptyTrajectory)));
    }

    #[test]
    fn crossing_is_detected() {
        let spec = ConstructionSpec::new(10, [0, 1, 2, 3]).unwrap();
        let c = construct_theorem1(&spec).unwrap();
        // Push one offset-column point past its plain-column neighbour.
        let blue = c.points().iter().position(|p| (p.x - 0.1).abs() < 1e-12).unwrap();
        let mut pts = c.points().to_vec();
        pts[blue] = pts[blue].translated(0.0, 0.1);
        let moved = Configuration::new(pts).unwrap();
        let rep = crossing_monitor(&[c, moved.clone()], &spec).unwrap();
        assert!(!rep.ordering_ok);
        assert!(rep.columns_ok);
        let off_column = moved.translated(0.01, 0.0);
        assert!(matches!(recover_mask(&off_column, 10), Err(Error::ColumnBinning { .. })));
    }

    #[test]
    fn lemma1_values() {
        assert!((lemma1_f(0.0, 0.0) - 4.0 * INV_SQRT5).abs() < 1e-15);
        let d = lemma1_f(1e-3, 0.0) - 4.0 * INV_SQRT5;
        assert!(rel(d, 5f64.sqrt() * 1e-6) < 0.01);
        let a = lemma1_fit(1e-3, 10_000).unwrap();
        assert!(rel(a, 5f64.sqrt()) < 0.01);
        assert!(lemma1_fit(2e-3, 10).is_err());
    }

    #[test]
    fn lemma2_values() {
        let r = lemma2_probe(&[[0.0; 2]; 5]).unwrap();
        assert_eq!(r.epsilon, 0.0);
        assert!(r.delta.iter().all(|d| d.abs() < 1e-15));
        let mut y = [[0.0; 2]; 5];
        y[0] = [1e-4, 0.0];
        assert!(lemma2_probe(&y).is_err());
        y[0] = [0.0, 0.0];
        y[2] = [2e-3, 0.0];
        assert!(lemma2_probe(&y).is_err());
        let s = lemma2_monte_carlo(1e-4, 2000, 7).unwrap();
        assert!(s.all_min_negative && s.c_emp > 0.0 && s.max_sum_ratio.is_finite());
    }

    #[test]
    fn h_values() {
        assert!((hfun(0.0, 2.0, 1.0).unwrap() - 50.0).abs() < 1e-12);
        assert!(hfun(INV_SQRT5, 2.0, 1.0).is_err());
        let chk = hfun_check(20.0, 1.0, 0.2, 2000).unwrap();
        assert!(chk.h0_ok && chk.hpp0_ok && chk.monotone_ok, "{chk:?}");
        let expected = 40.0 / 9.0 * 5f64.powi(10) * (25.0 * 21.0 - 81.0 * 5f64.sqrt());
        assert!(rel(chk.hpp0_closed, expected) < 1e-14);
    }

    #[test]
    fn grid_score_examples() {
        let g = grid_score(&named(&NamedConfig::Grid { k: 5 }).unwrap(), 1e-6);
        assert_eq!((g.n_lines_x, g.n_lines_y, g.coverage), (5, 5, 1.0));
        let spec = ConstructionSpec::new(10, [0, 2, 4, 6]).unwrap();
        assert_eq!(grid_score(&construct_theorem1(&spec).unwrap(), 1e-6).n_lines_x, 10);
        let r = grid_score(&crate::factory::random_config(100, 1).unwrap(), 1e-6);
        assert_eq!(r.coverage, 0.0);
        assert_eq!(r.n_lines_x, 100);
    }

    #[test]
    fn grid_clusters_wrap_around_zero() {
        let c = Configuration::from_coords(&[[0.9999999, 0.1], [0.0, 0.3], [0.0000001, 0.6], [0.5, 0.9]]).unwrap();
        let g = grid_score(&c, 1e-6);
        assert_eq!(g.n_lines_x, 2);
        assert_eq!(g.coverage, 0.75);
    }
}
