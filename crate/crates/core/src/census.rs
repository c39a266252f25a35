//! Symmetry-invariant fingerprints of configurations and bookkeeping for
//! batches of descents: run, fingerprint, group, persist.

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::hash::{Hash, Hasher};
use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{grid_score, GridScore};
use crate::energy::{log_domain_energy, log_energy, min_distance, pair_distances, EnergySpec};
use crate::error::{invalid, Error, Result};
use crate::factory::{construct_theorem1, named, random_config, ConstructionSpec, NamedConfig};
use crate::flow::{classify, descend, Classification, DescentOptions, Termination};
use crate::isometry::PointMap;
use crate::torus::{displacement, wrap_unit, Configuration, TorusPoint};

pub const DEFAULT_Q: f64 = 1e-5;

/// Which isometries are factored out when comparing configurations.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SymmetryGroup {
    /// Translations and the eight lattice symmetries.
    #[default]
    Full,
    /// Translations only.
    TranslationsOnly,
}

impl SymmetryGroup {
    fn maps(self) -> &'static [PointMap] {
        match self {
            SymmetryGroup::Full => &PointMap::ALL,
            SymmetryGroup::TranslationsOnly => &PointMap::ALL[..1],
        }
    }
}

/// Fingerprint of a configuration modulo isometries and relabeling: the
/// lexicographically smallest sorted list of quantized coordinates over all
/// anchor points and point maps.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CanonicalKey {
    pub q: f64,
    pub points: Vec<[i64; 2]>,
}

impl PartialEq for CanonicalKey {
    fn eq(&self, other: &Self) -> bool {
        self.q.to_bits() == other.q.to_bits() && self.points == other.points
    }
}

impl Eq for CanonicalKey {}

impl Hash for CanonicalKey {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.q.to_bits().hash(state);
        self.points.hash(state);
    }
}

impl PartialOrd for CanonicalKey {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for CanonicalKey {
    fn cmp(&self, other: &Self) -> Ordering {
        self.q.total_cmp(&other.q).then_with(|| self.points.cmp(&other.points))
    }
}

fn levels(q: f64) -> Result<i64> {
    if !(q > 0.0 && q <= 0.5) {
        return Err(invalid(format!("key resolution must lie in (0, 1/2], got {q}")));
    }
    Ok((1.0 / q).round() as i64)
}

pub fn canonical_key(config: &Configuration, q: f64) -> Result<CanonicalKey> {
    canonical_key_in(config, q, SymmetryGroup::Full)
}

pub fn canonical_key_in(config: &Configuration, q: f64, group: SymmetryGroup) -> Result<CanonicalKey> {
    let levels = levels(q)?;
    let scale = levels as f64;
    let quantize = |u: f64| (wrap_unit(u) * scale).round_ties_even() as i64 % levels;
    let mut best: Option<Vec<[i64; 2]>> = None;
    let mut candidate = Vec::with_capacity(config.len());
    for map in group.maps() {
        let images: Vec<(f64, f64)> = config.points().iter().map(|p| map.apply(p.x, p.y)).collect();
        for &(ax, ay) in &images {
            candidate.clear();
            candidate.extend(images.iter().map(|&(x, y)| [quantize(x - ax), quantize(y - ay)]));
            candidate.sort_unstable();
            if best.as_ref().is_none_or(|b| candidate < *b) {
                best = Some(candidate.clone());
            }
        }
    }
    Ok(CanonicalKey {
        q,
        points: best.expect("configurations have at least two points"),
    })
}

pub fn equivalent(a: &Configuration, b: &Configuration, tol: f64) -> Result<bool> {
    equivalent_in(a, b, tol, SymmetryGroup::Full)
}

/// Whether some isometry in `group` followed by a relabeling maps `a` onto
/// `b` with every point within `tol` (per coordinate).
pub fn equivalent_in(a: &Configuration, b: &Configuration, tol: f64, group: SymmetryGroup) -> Result<bool> {
    if a.len() != b.len() {
        return Err(Error::SizeMismatch(a.len(), b.len()));
    }
    let (da, db) = (pair_distances(a), pair_distances(b));
    if da.iter().zip(&db).any(|(x, y)| (x - y).abs() > tol) {
        return Ok(false);
    }
    let n = a.len();
    let target = b.points();
    for map in group.maps() {
        let images: Vec<TorusPoint> = a.points().iter().map(|&p| map.apply_point(p)).collect();
        for anchor in target {
            let (sx, sy) = displacement(*anchor, images[0]);
            let mut used = vec![false; n];
            let aligned = images.iter().all(|img| {
                let moved = img.translated(sx, sy);
                let nearest = (0..n)
                    .filter(|&k| !used[k])
                    .map(|k| {
                        let (dx, dy) = displacement(moved, target[k]);
                        (k, dx.abs().max(dy.abs()))
                    })
                    .min_by(|x, y| x.1.total_cmp(&y.1));
                match nearest {
                    Some((k, d)) if d <= tol => {
                        used[k] = true;
                        true
                    }
                    _ => false,
                }
            });
            if aligned {
                return Ok(true);
            }
        }
    }
    Ok(false)
}

/// How a census input configuration is produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InitDescriptor {
    Named { config: NamedConfig },
    Theorem1 { m: usize, mask: Vec<usize> },
    Random { n: usize, seed: u64 },
    /// `base` moved by a random translation, point map and relabeling.
    Transformed { base: Box<InitDescriptor>, seed: u64 },
}

impl InitDescriptor {
    pub fn build(&self) -> Result<Configuration> {
        match self {
            InitDescriptor::Named { config } => named(config),
            InitDescriptor::Theorem1 { m, mask } => {
                construct_theorem1(&ConstructionSpec::new(*m, mask.iter().copied())?)
            }
            InitDescriptor::Random { n, seed } => random_config(*n, *seed),
            InitDescriptor::Transformed { base, seed } => Ok(random_isometry(&base.build()?, *seed)),
        }
    }
}

/// Apply a random translation, a random point map and a random relabeling
/// drawn from ChaCha8 seeded with `seed`.
pub fn random_isometry(config: &Configuration, seed: u64) -> Configuration {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (dx, dy) = (rng.gen::<f64>(), rng.gen::<f64>());
    let map = PointMap::ALL[rng.gen_range(0..8)];
    let mut perm: Vec<usize> = (0..config.len()).collect();
    perm.shuffle(&mut rng);
    let moved: Vec<TorusPoint> = config
        .points()
        .iter()
        .map(|&p| map.apply_point(p).translated(dx, dy))
        .collect();
    let relabeled = perm.iter().map(|&i| moved[i]).collect();
    Configuration::new(relabeled).expect("isometry preserves size")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CensusOptions {
    pub q: f64,
    pub group: SymmetryGroup,
    /// When false the inputs themselves are fingerprinted.
    pub descend: bool,
    pub classify: bool,
    /// Tolerance of the `equivalent` fallback used while grouping.
    pub equiv_tol: f64,
    pub grid_tol: f64,
    /// Worker threads; 0 uses the global pool.
    pub jobs: usize,
}

impl Default for CensusOptions {
    fn default() -> Self {
        Self {
            q: DEFAULT_Q,
            group: SymmetryGroup::Full,
            descend: true,
            classify: true,
            equiv_tol: 2.0 * DEFAULT_Q,
            grid_tol: 1e-6,
            jobs: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CensusRecord {
    pub index: usize,
    pub n: usize,
    pub spec: EnergySpec,
    pub init: InitDescriptor,
    /// `None` when descent was switched off or the run failed.
    pub termination: Option<Termination>,
    pub iterations: usize,
    pub final_log_energy: Option<f64>,
    pub min_distance: Option<f64>,
    pub key: Option<CanonicalKey>,
    pub classification: Option<Classification>,
    pub grid_score: Option<GridScore>,
    pub error: Option<String>,
    #[serde(rename = "final")]
    pub final_config: Option<Configuration>,
}

fn objective_log(config: &Configuration, spec: EnergySpec) -> Result<f64> {
    match spec {
        EnergySpec::Riesz { p } => log_domain_energy(config, p),
        EnergySpec::Log => log_energy(config),
    }
}

/// Run one census entry. Failures are stored in the record.
pub fn run_one(
    index: usize,
    init: &InitDescriptor,
    spec: EnergySpec,
    dopts: &DescentOptions,
    copts: &CensusOptions,
) -> CensusRecord {
    let mut rec = CensusRecord {
        index,
        n: 0,
        spec,
        init: init.clone(),
        termination: None,
        iterations: 0,
        final_log_energy: None,
        min_distance: None,
        key: None,
        classification: None,
        grid_score: None,
        error: None,
        final_config: None,
    };
    if let Err(e) = fill_record(&mut rec, spec, dopts, copts) {
        rec.error = Some(e.to_string());
    }
    rec
}

fn fill_record(rec: &mut CensusRecord, spec: EnergySpec, dopts: &DescentOptions, copts: &CensusOptions) -> Result<()> {
    let start = rec.init.build()?;
    rec.n = start.len();
    let (config, settled) = if copts.descend {
        let opts = DescentOptions {
            record_history: false,
            record_trajectory_every: 0,
            ..*dopts
        };
        let res = descend(&start, spec, &opts)?;
        rec.termination = Some(res.termination);
        rec.iterations = res.iterations;
        (res.final_config, res.termination == Termination::Converged)
    } else {
        (start, true)
    };
    rec.final_log_energy = Some(objective_log(&config, spec)?);
    rec.min_distance = Some(min_distance(&config));
    rec.grid_score = Some(grid_score(&config, copts.grid_tol));
    if settled {
        rec.key = Some(canonical_key_in(&config, copts.q, copts.group)?);
        if copts.classify {
            match classify(&config, spec, dopts.grad_tol) {
                Ok(c) => rec.classification = Some(c),
                Err(e) if !copts.descend => rec.error = Some(e.to_string()),
                Err(e) => return Err(e),
            }
        }
    }
    rec.final_config = Some(config);
    Ok(())
}

/// Run the given `(index, init)` entries, in parallel when `jobs != 1`.
/// Output order follows input order.
pub fn run_records(
    inits: &[(usize, InitDescriptor)],
    spec: EnergySpec,
    dopts: &DescentOptions,
    copts: &CensusOptions,
) -> Result<Vec<CensusRecord>> {
    spec.validate()?;
    dopts.validate()?;
    levels(copts.q)?;
    let work = || {
        inits
            .par_iter()
            .map(|(i, init)| run_one(*i, init, spec, dopts, copts))
            .collect::<Vec<_>>()
    };
    Ok(if copts.jobs == 0 {
        work()
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(copts.jobs)
            .build()
            .map_err(|e| invalid(e.to_string()))?
            .install(work)
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CensusGroup {
    pub key: CanonicalKey,
    pub multiplicity: usize,
    pub members: Vec<usize>,
    pub log_energy: f64,
    pub min_distance: f64,
    pub classification: Option<Classification>,
    pub representative: Configuration,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CensusReport {
    pub spec: EnergySpec,
    pub q: f64,
    pub group: SymmetryGroup,
    pub records: usize,
    pub keyed: usize,
    pub failed: usize,
    pub distinct: usize,
    /// Sorted by (log-energy, key).
    pub groups: Vec<CensusGroup>,
}

/// Group records by key in index order. A record whose key is new is
/// merged into an existing group if `equivalent` aligns it with that
/// group's representative.
pub fn build_report(records: &[CensusRecord], spec: EnergySpec, copts: &CensusOptions) -> Result<CensusReport> {
    let mut sorted: Vec<&CensusRecord> = records.iter().collect();
    sorted.sort_by_key(|r| r.index);
    let mut groups: Vec<CensusGroup> = Vec::new();
    for rec in &sorted {
        let (Some(key), Some(cfg), Some(energy)) = (&rec.key, &rec.final_config, rec.final_log_energy) else {
            continue;
        };
        let mut home = groups.iter().position(|g| &g.key == key);
        if home.is_none() {
            for (gi, g) in groups.iter().enumerate() {
                if g.representative.len() == cfg.len()
                    && (g.log_energy - energy).abs() <= 1e-6 * energy.abs().max(1.0)
                    && equivalent_in(&g.representative, cfg, copts.equiv_tol, copts.group)?
                {
                    home = Some(gi);
                    break;
                }
            }
        }
        match home {
            Some(gi) => {
                groups[gi].multiplicity += 1;
                groups[gi].members.push(rec.index);
            }
            None => groups.push(CensusGroup {
                key: key.clone(),
                multiplicity: 1,
                members: vec![rec.index],
                log_energy: energy,
                min_distance: rec.min_distance.unwrap_or(f64::NAN),
                classification: rec.classification,
                representative: cfg.clone(),
            }),
        }
    }
    groups.sort_by(|a, b| a.log_energy.total_cmp(&b.log_energy).then_with(|| a.key.cmp(&b.key)));
    Ok(CensusReport {
        spec,
        q: copts.q,
        group: copts.group,
        records: records.len(),
        keyed: records.iter().filter(|r| r.key.is_some()).count(),
        failed: records.iter().filter(|r| r.error.is_some() && r.key.is_none()).count(),
        distinct: groups.len(),
        groups,
    })
}

/// Descend from every init and group the outcomes.
pub fn census_run(
    inits: &[InitDescriptor],
    spec: EnergySpec,
    dopts: &DescentOptions,
    copts: &CensusOptions,
) -> Result<CensusReport> {
    let indexed: Vec<(usize, InitDescriptor)> = inits.iter().cloned().enumerate().collect();
    let records = run_records(&indexed, spec, dopts, copts)?;
    build_report(&records, spec, copts)
}

/// Entries of `inits` without a matching completed record (same index and
/// same descriptor).
pub fn pending(inits: &[InitDescriptor], done: &[CensusRecord]) -> Vec<(usize, InitDescriptor)> {
    let finished: BTreeSet<usize> = done
        .iter()
        .filter(|r| inits.get(r.index) == Some(&r.init))
        .map(|r| r.index)
        .collect();
    inits
        .iter()
        .cloned()
        .enumerate()
        .filter(|(i, _)| !finished.contains(i))
        .collect()
}

pub fn write_jsonl<W: Write>(mut out: W, records: &[CensusRecord]) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Read records back, ignoring a truncated final line left by an
/// interrupted run.
pub fn read_jsonl<R: BufRead>(input: R) -> Result<Vec<CensusRecord>> {
    let lines: Vec<String> = input.lines().collect::<std::io::Result<_>>()?;
    let last = lines.iter().rposition(|l| !l.trim().is_empty());
    let mut out = Vec::new();
    for (i, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(line) {
            Ok(r) => out.push(r),
            Err(_) if Some(i) == last => break,
            Err(e) => return Err(e.into()),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f5() -> Configuration {
        named(&NamedConfig::F5).unwrap()
    }

    #[test]
    fn key_is_invariant_under_isometry_and_relabeling() {
        let c = random_config(9, 3).unwrap();
        let k = canonical_key(&c, DEFAULT_Q).unwrap();
        for seed in 0..20 {
            assert_eq!(canonical_key(&random_isometry(&c, seed), DEFAULT_Q).unwrap(), k);
        }
    }

    #[test]
    fn key_examples() {
        let t1 = named(&NamedConfig::T1).unwrap();
        let t2 = named(&NamedConfig::T2).unwrap();
        assert_ne!(canonical_key(&t1, DEFAULT_Q).unwrap(), canonical_key(&t2, DEFAULT_Q).unwrap());
        let mirror = f5().mapped(|x, y| (1.0 - x, y)).unwrap();
        assert_eq!(canonical_key(&f5(), DEFAULT_Q).unwrap(), canonical_key(&mirror, DEFAULT_Q).unwrap());
        assert!(canonical_key(&f5(), 0.0).is_err());
    }

    #[test]
    fn translation_group_separates_mirror_images() {
        let c = random_config(6, 11).unwrap();
        let mirror = c.mapped(|x, y| (1.0 - x, y)).unwrap();
        let g = SymmetryGroup::TranslationsOnly;
        assert_ne!(canonical_key_in(&c, DEFAULT_Q, g).unwrap(), canonical_key_in(&mirror, DEFAULT_Q, g).unwrap());
        assert_eq!(canonical_key(&c, DEFAULT_Q).unwrap(), canonical_key(&mirror, DEFAULT_Q).unwrap());
        assert!(!equivalent_in(&c, &mirror, 1e-9, g).unwrap());
        assert!(equivalent(&c, &mirror, 1e-9).unwrap());
    }

    #[test]
    fn equivalence_examples() {
        assert!(equivalent(&f5(), &f5(), 1e-12).unwrap());
        assert!(equivalent(&f5(), &random_isometry(&f5(), 9), 1e-9).unwrap());
        let s0 = named(&NamedConfig::SAlpha { alpha: 0.0 }).unwrap();
        let s12 = named(&NamedConfig::SAlpha {
            alpha: crate::factory::S_ALPHA_MAX,
        })
        .unwrap();
        assert!(!equivalent(&s0, &s12, 1e-3).unwrap());
        assert!(matches!(equivalent(&f5(), &s0, 1e-3), Err(Error::SizeMismatch(5, 4))));
    }

    #[test]
    fn census_of_f5_translates_is_one_group() {
        let inits: Vec<InitDescriptor> = (0..5)
            .map(|seed| InitDescriptor::Transformed {
                base: Box::new(InitDescriptor::Named { config: NamedConfig::F5 }),
                seed,
            })
            .collect();
        let rep = census_run(&inits, EnergySpec::Riesz { p: 4.0 }, &DescentOptions::default(), &CensusOptions::default()).unwrap();
        assert_eq!(rep.distinct, 1);
        assert_eq!(rep.groups[0].multiplicity, 5);
    }

    #[test]
    fn census_of_inputs_without_descent() {
        let inits: Vec<InitDescriptor> = [NamedConfig::T1, NamedConfig::T2, NamedConfig::T3]
            .into_iter()
            .map(|config| InitDescriptor::Named { config })
            .collect();
        let copts = CensusOptions {
            descend: false,
            ..Default::default()
        };
        let rep = census_run(&inits, EnergySpec::Riesz { p: 2.0 }, &DescentOptions::default(), &copts).unwrap();
        assert_eq!(rep.distinct, 3);
        assert!(rep.groups.windows(2).all(|w| w[0].log_energy <= w[1].log_energy));
    }

    #[test]
    fn records_round_trip_and_resume() {
        let inits = vec![
            InitDescriptor::Random { n: 4, seed: 1 },
            InitDescriptor::Named { config: NamedConfig::F5 },
        ];
        let copts = CensusOptions {
            classify: false,
            ..Default::default()
        };
        let recs = run_records(&[(0, inits[0].clone())], EnergySpec::Riesz { p: 2.0 }, &DescentOptions::default(), &copts).unwrap();
        let mut buf = Vec::new();
        write_jsonl(&mut buf, &recs).unwrap();
        buf.extend_from_slice(b"{\"index\":1,\"trunc");
        let back = read_jsonl(buf.as_slice()).unwrap();
        assert_eq!(back, recs);
        let todo = pending(&inits, &back);
        assert_eq!(todo, vec![(1, inits[1].clone())]);
    }

    #[test]
    fn descriptor_json_shape() {
        let d = InitDescriptor::Theorem1 { m: 10, mask: vec![0, 1, 2, 3] };
        assert_eq!(serde_json::to_string(&d).unwrap(), r#"{"kind":"theorem1","m":10,"mask":[0,1,2,3]}"#);
        let t: InitDescriptor = serde_json::from_str(r#"{"kind":"named","config":{"name":"s-alpha","alpha":0.1}}"#).unwrap();
        assert_eq!(t, InitDescriptor::Named { config: NamedConfig::SAlpha { alpha: 0.1 } });
    }
}
