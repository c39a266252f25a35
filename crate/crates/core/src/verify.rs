//! Numbered end-to-end checks of the reproduction, grouped into suites.
//! Each check returns a pass/fail outcome with a one-line detail; checks
//! marked informational report numbers without a verdict.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::analysis::{
    crossing_monitor, crossover, energy_upper_bound, family_min_alpha, grid_score,
    hfun_check, lemma1_fit, lemma2_monte_carlo, recover_mask, s_alpha_derivative_check, theorem1_threshold,
    Family,
};
use crate::census::{canonical_key, census_run, random_isometry, CensusOptions, InitDescriptor, DEFAULT_Q};
use crate::energy::{energy, gradient, log_domain_energy, min_distance, pair_distances, riesz_energy, EnergySpec};
use crate::error::Result;
use crate::factory::{
    all_masks, construct_theorem1, mask_canonical, named, neighbor_profile, random_config, theorem1_grid,
    ConstructionSpec, NamedConfig, S_ALPHA_MAX,
};
use crate::flow::{descend, DescentOptions, DescentResult, Termination};
use crate::torus::{Configuration, TorusPoint};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Info,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub id: u32,
    pub title: String,
    pub status: Status,
    pub detail: String,
    pub seconds: f64,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.status {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Info => "INFO",
        };
        write!(f, "{tag} [{:>2}] {}: {} ({:.2} s)", self.id, self.title, self.detail, self.seconds)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Gradients,
    Theorem1,
    SmallN,
    Lemmas,
    All,
}

impl FromStr for Suite {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Ok(match s {
            "gradients" => Suite::Gradients,
            "theorem1" => Suite::Theorem1,
            "small-n" => Suite::SmallN,
            "lemmas" => Suite::Lemmas,
            "all" => Suite::All,
            _ => return Err(format!("unknown suite {s:?} (gradients, theorem1, small-n, lemmas, all)")),
        })
    }
}

impl Suite {
    pub fn criteria(self) -> Vec<u32> {
        match self {
            Suite::Gradients => vec![1, 9],
            Suite::Theorem1 => vec![5, 6, 13],
            Suite::SmallN => vec![2, 3, 4, 10, 12],
            Suite::Lemmas => vec![7, 8, 11],
            Suite::All => (1..=13).collect(),
        }
    }
}

pub const TITLES: [&str; 13] = [
    "F5 energy closed form",
    "phase-transition crossovers",
    "S_alpha derivative at pi/12",
    "interior minimiser of the S_alpha family",
    "striped construction geometry and energy bound",
    "striped construction end to end (m=10, p=26)",
    "h(x) value, curvature and monotonicity",
    "quadratic growth of the four-distance sum",
    "gradient against finite differences",
    "descent monotonicity, determinism, key invariance",
    "perturbations of the Fibonacci set",
    "grid-likeness under the logarithmic energy",
    "exponential count in n",
];

fn title(id: u32) -> &'static str {
    TITLES[(id - 1) as usize]
}

type Check = Result<(bool, String)>;

/// Run one numbered criterion. Numerical errors count as failures.
pub fn run_criterion(id: u32) -> Outcome {
    let start = Instant::now();
    let (status, detail) = match id {
        1 => verdict(c1()),
        2 => verdict(c2()),
        3 => verdict(c3()),
        4 => verdict(c4()),
        5 => verdict(c5()),
        6 => verdict(c6()),
        7 => verdict(c7()),
        8 => verdict(c8()),
        9 => verdict(c9()),
        10 => verdict(c10()),
        11 => verdict(c11()),
        12 => info(c12()),
        13 => (
            Status::Info,
            "growth in n is not checked at this scale; criterion 6 covers the mask-to-critical-point injectivity at m=10".into(),
        ),
        _ => (Status::Fail, format!("no criterion {id}")),
    };
    Outcome {
        id,
        title: if (1..=13).contains(&id) { title(id) } else { "unknown" }.into(),
        status,
        detail,
        seconds: start.elapsed().as_secs_f64(),
    }
}

fn verdict(r: Check) -> (Status, String) {
    match r {
        Ok((true, d)) => (Status::Pass, d),
        Ok((false, d)) => (Status::Fail, d),
        Err(e) => (Status::Fail, format!("error: {e}")),
    }
}

fn info(r: Result<String>) -> (Status, String) {
    match r {
        Ok(d) => (Status::Info, d),
        Err(e) => (Status::Fail, format!("error: {e}")),
    }
}

pub fn run_suite(suite: Suite) -> Vec<Outcome> {
    suite.criteria().into_iter().map(run_criterion).collect()
}

pub fn all_passed(outcomes: &[Outcome]) -> bool {
    outcomes.iter().all(|o| o.status != Status::Fail)
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn c1() -> Check {
    let f5 = named(&NamedConfig::F5)?;
    let mut worst = 0.0f64;
    for p in [1.0, 2.0, 10.0] {
        worst = worst.max(rel(riesz_energy(&f5, p)?, 20.0 * 5f64.powf(p / 2.0)));
    }
    let log_expected = 20f64.ln() + 50.0 * 5f64.ln();
    worst = worst.max(rel(log_domain_energy(&f5, 100.0)?, log_expected));
    Ok((worst <= 1e-12, format!("max relative error {worst:.2e} (tol 1e-12)")))
}

fn c2() -> Check {
    let s0 = Family::SAlpha { alpha: 0.0 };
    let cases = [
        ("T1/T2", Family::T1, Family::T2, 1.0, 10.0, 4.505, 0.01),
        ("T2/T3", Family::T2, Family::T3, 10.0, 40.0, 29.653, 0.05),
        ("S0/Sshift", s0, Family::SShift, 1.0, 10.0, 4.506, 0.01),
        ("Sshift/Smin", Family::SShift, Family::SFamilyMin, 10.0, 40.0, 26.3, 0.1),
    ];
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, a, b, lo, hi, target, tol) in cases {
        let p = crossover(&a, &b, lo, hi)?;
        ok &= (p - target).abs() <= tol;
        parts.push(format!("{name} {p:.6}"));
    }
    Ok((ok, parts.join(", ")))
}

fn c3() -> Check {
    let mut worst = 0.0f64;
    for p in [2.0, 10.0, 20.0] {
        let (closed, fd) = s_alpha_derivative_check(p)?;
        worst = worst.max(rel(fd, closed));
    }
    Ok((worst <= 1e-4, format!("max relative error {worst:.2e} (tol 1e-4)")))
}

fn c4() -> Check {
    let mut ok = true;
    let mut parts = Vec::new();
    for p in [40.0, 80.0] {
        let m = family_min_alpha(p)?;
        let c_hat = (S_ALPHA_MAX - m.alpha) * p;
        ok &= m.interior && (0.4..=0.8).contains(&c_hat);
        parts.push(format!("p={p}: c_hat {c_hat:.4}"));
    }
    Ok((ok, parts.join(", ")))
}

/// Ten masks spread over the lexicographic list.
fn sampled_masks() -> Result<Vec<Vec<usize>>> {
    Ok(all_masks(10)?.into_iter().step_by(7).take(10).collect())
}

fn c5() -> Check {
    let m = 10;
    let delta_exact = 89f64.sqrt() / 80.0;
    let grid = theorem1_grid(m)?;
    let profile = neighbor_profile(&grid);
    let rest = grid.len() - 7;
    let delta_ok = (profile.delta - delta_exact).abs() <= 1e-15;
    let profile_ok = profile.counts.iter().all(|c| *c == [4, 2, rest]);
    let mut worst_gap = f64::INFINITY;
    for mask in sampled_masks()? {
        let c = construct_theorem1(&ConstructionSpec::new(m, mask)?)?;
        for p in [21.0, 26.0, 40.0] {
            let (_, bound) = energy_upper_bound(m, p)?;
            worst_gap = worst_gap.min(bound - log_domain_energy(&c, p)?);
        }
    }
    let bound_ok = worst_gap >= 0.0;
    let first = profile.counts[0];
    Ok((
        delta_ok && profile_ok && bound_ok,
        format!(
            "delta error {:.1e}; profile {} (point 0 has {:?}, expected [4, 2, {rest}]); log bound slack >= {worst_gap:.4}",
            (profile.delta - delta_exact).abs(),
            if profile_ok { "ok" } else { "mismatch" },
            first
        ),
    ))
}

/// Non-increasing up to summation rounding.
fn monotone(res: &DescentResult) -> bool {
    res.energy_history
        .as_ref()
        .is_none_or(|h| h.windows(2).all(|w| w[1] <= w[0] + 1e-12 * w[0].abs().max(1.0)))
}

fn c6() -> Check {
    let m = 10;
    let p = 26.0;
    let spec = EnergySpec::Riesz { p };
    // The non-crossing argument counts the points left after deletion.
    let threshold = theorem1_threshold(3 * m * m / 5)?;
    let masks = all_masks(m)?;
    let opts = DescentOptions {
        record_trajectory_every: 1,
        ..Default::default()
    };
    let (mut converged, mut ordered, mut recovered, mut mono) = (0, 0, 0, 0);
    let mut drift = 0.0f64;
    for mask in &masks {
        let cs = ConstructionSpec::new(m, mask.iter().copied())?;
        let res = descend(&construct_theorem1(&cs)?, spec, &opts)?;
        converged += usize::from(res.termination == Termination::Converged);
        mono += usize::from(monotone(&res));
        let frames: Vec<Configuration> = res.trajectory.iter().flatten().map(|(_, c)| c.clone()).collect();
        let report = crossing_monitor(&frames, &cs)?;
        drift = drift.max(report.max_x_drift);
        ordered += usize::from(report.ordering_ok);
        if recover_mask(&res.final_config, m).ok() == Some(mask_canonical(mask, m)?) {
            recovered += 1;
        }
    }
    let inits: Vec<InitDescriptor> = masks
        .iter()
        .map(|mask| InitDescriptor::Theorem1 { m, mask: mask.clone() })
        .collect();
    let copts = CensusOptions {
        classify: false,
        jobs: 1,
        ..Default::default()
    };
    let census = census_run(&inits, spec, &DescentOptions::default(), &copts)?;
    let total = masks.len();
    let ok = p > threshold
        && converged == total
        && mono == total
        && drift <= 1e-9
        && ordered == total
        && recovered == total
        && census.distinct >= 8;
    Ok((
        ok,
        format!(
            "threshold {threshold:.3}; converged {converged}/{total}; monotone {mono}/{total}; max x-drift {drift:.1e}; \
             order kept {ordered}/{total}; masks recovered {recovered}/{total}; distinct keys {} (oracle 8)",
            census.distinct
        ),
    ))
}

fn c7() -> Check {
    let mut ok = true;
    let mut parts = Vec::new();
    for (p, c) in [(20.0, 1.0), (40.0, 2.0)] {
        let h = hfun_check(p, c, 0.2, 2000)?;
        ok &= h.h0_ok && h.hpp0_ok && h.monotone_ok;
        parts.push(format!(
            "(p={p}, c={c}): h'' rel err {:.1e}, monotone {}",
            rel(h.hpp0_fd, h.hpp0_closed),
            h.monotone_ok
        ));
    }
    Ok((ok, parts.join("; ")))
}

fn c8() -> Check {
    let c = lemma1_fit(1e-3, 10_000)?;
    let e = rel(c, 5f64.sqrt());
    Ok((e <= 0.01, format!("coefficient {c:.6} vs sqrt5, relative error {e:.2e}")))
}

fn c11() -> Check {
    let s = lemma2_monte_carlo(1e-4, 100_000, 0)?;
    Ok((
        s.all_min_negative && s.c_emp > 0.0 && s.max_sum_ratio.is_finite(),
        format!(
            "min_delta < 0 in all {} probes: {}; c_emp {:.4}; max |sum|/eps^2 {:.3}",
            s.probes, s.all_min_negative, s.c_emp, s.max_sum_ratio
        ),
    ))
}

/// Central-difference gradient of the energy with step `h`.
fn fd_gradient(config: &Configuration, spec: EnergySpec, h: f64) -> Result<Vec<[f64; 2]>> {
    let pts = config.points();
    let mut out = vec![[0.0; 2]; pts.len()];
    for i in 0..pts.len() {
        for axis in 0..2 {
            let shifted = |s: f64| -> Result<f64> {
                let mut q = pts.to_vec();
                let (dx, dy) = if axis == 0 { (s, 0.0) } else { (0.0, s) };
                q[i] = TorusPoint::translated(q[i], dx, dy);
                energy(&Configuration::new(q)?, spec)
            };
            out[i][axis] = (shifted(h)? - shifted(-h)?) / (2.0 * h);
        }
    }
    Ok(out)
}

fn c9() -> Check {
    let specs = [
        EnergySpec::Log,
        EnergySpec::Riesz { p: 2.0 },
        EnergySpec::Riesz { p: 8.0 },
        EnergySpec::Riesz { p: 26.0 },
    ];
    let mut worst = 0.0f64;
    for k in 0..100u64 {
        let n = 3 + (k % 8) as usize;
        let spec = specs[(k % 4) as usize];
        let c = random_config(n, 1000 + k)?;
        let g = gradient(&c, spec, false)?;
        let fd = fd_gradient(&c, spec, 1e-6 * min_distance(&c))?;
        let scale = g.sup_norm();
        let err = g
            .vectors
            .iter()
            .flatten()
            .zip(fd.iter().flatten())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        worst = worst.max(err / scale);
    }
    Ok((worst <= 1e-6, format!("100 instances, max sup-norm relative error {worst:.2e} (tol 1e-6)")))
}

fn c10() -> Check {
    // Descent: monotone and bit-for-bit repeatable.
    let mut mono = 0;
    let mut repeat = 0;
    let runs = 12;
    for k in 0..runs as u64 {
        let spec = [EnergySpec::Log, EnergySpec::Riesz { p: 2.0 }, EnergySpec::Riesz { p: 8.0 }][(k % 3) as usize];
        let c = random_config(4 + (k % 5) as usize, 500 + k)?;
        let opts = DescentOptions {
            max_iters: 2000,
            ..Default::default()
        };
        let a = descend(&c, spec, &opts)?;
        let b = descend(&c, spec, &opts)?;
        mono += usize::from(monotone(&a));
        repeat += usize::from(a.final_config == b.final_config && a.energy_history == b.energy_history);
    }
    // Key invariance under random symmetry actions.
    let mut invariant = 0;
    for k in 0..1000u64 {
        let c = random_config(3 + (k % 10) as usize, k)?;
        let moved = random_isometry(&c, 1_000_000 + k);
        invariant += usize::from(canonical_key(&c, DEFAULT_Q)? == canonical_key(&moved, DEFAULT_Q)?);
    }
    // Separation: pairs whose distance multisets differ by more than 10q.
    let (mut far, mut separated) = (0, 0);
    for k in 0..200u64 {
        let n = 3 + (k % 6) as usize;
        let a = random_config(n, 7000 + 2 * k)?;
        let b = random_config(n, 7001 + 2 * k)?;
        let gap = pair_distances(&a)
            .iter()
            .zip(pair_distances(&b))
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        if gap > 10.0 * DEFAULT_Q {
            far += 1;
            separated += usize::from(canonical_key(&a, DEFAULT_Q)? != canonical_key(&b, DEFAULT_Q)?);
        }
    }
    Ok((
        mono == runs && repeat == runs && invariant == 1000 && separated == far,
        format!(
            "monotone {mono}/{runs}; repeatable {repeat}/{runs}; key invariant {invariant}/1000; separated {separated}/{far}"
        ),
    ))
}

fn c12() -> Result<String> {
    let opts = DescentOptions {
        max_iters: 5000,
        record_history: false,
        ..Default::default()
    };
    let mut parts = Vec::new();
    for seed in 0..3u64 {
        let res = descend(&random_config(100, seed)?, EnergySpec::Log, &opts)?;
        let g = grid_score(&res.final_config, 1e-3);
        parts.push(format!(
            "seed {seed}: {:?} after {} iterations, lines {}x{}, coverage {:.2}",
            res.termination, res.iterations, g.n_lines_x, g.n_lines_y, g.coverage
        ));
    }
    Ok(parts.join("; "))
}
