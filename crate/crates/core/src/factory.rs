//! Generators for the named small configurations, Type I packings, square
//! grids, the striped construction with row-deletion masks, and seeded
//! random configurations.

use std::collections::BTreeSet;
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::energy::min_distance;
use crate::error::{invalid, Result};
use crate::torus::{distance, Configuration};

/// Largest angle of the `S_alpha` family.
pub const S_ALPHA_MAX: f64 = PI / 12.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum NamedConfig {
    T1,
    T2,
    T3,
    SAlpha { alpha: f64 },
    SShift,
    F5,
    /// Columns at `j / cols`, points at `k / rows`, odd columns offset by
    /// half a row spacing.
    TypeI { cols: usize, rows: usize },
    /// The `k x k` lattice `(i / k, j / k)`.
    Grid { k: usize },
}

impl NamedConfig {
    /// Parse a CLI-style family name; parameters are filled in by the caller.
    pub fn from_name(name: &str) -> Option<Self> {
        Some(match name.to_ascii_lowercase().as_str() {
            "t1" => NamedConfig::T1,
            "t2" => NamedConfig::T2,
            "t3" => NamedConfig::T3,
            "s0" => NamedConfig::SAlpha { alpha: 0.0 },
            "s-shift" | "sshift" => NamedConfig::SShift,
            "f5" => NamedConfig::F5,
            _ => return None,
        })
    }
}

pub fn named(config: &NamedConfig) -> Result<Configuration> {
    let s3 = 3f64.sqrt();
    let coords: Vec<[f64; 2]> = match *config {
        NamedConfig::T1 => vec![[0.0, 0.0], [0.5, 0.0], [0.5, 0.5]],
        NamedConfig::T2 => vec![[0.0, 0.5], [0.5, 0.25], [0.5, 0.75]],
        NamedConfig::T3 => {
            let a = (2.0 - s3) / 2.0;
            vec![[0.0, 0.0], [0.5, a], [a, 0.5]]
        }
        NamedConfig::SAlpha { alpha } => {
            if !(0.0..=S_ALPHA_MAX).contains(&alpha) {
                return Err(invalid(format!("alpha must lie in [0, pi/12], got {alpha}")));
            }
            let t = alpha.tan();
            vec![
                [0.0, 0.0],
                [t / 2.0, 0.5],
                [0.5, t / 2.0],
                [(1.0 + t) / 2.0, (1.0 + t) / 2.0],
            ]
        }
        NamedConfig::SShift => vec![[0.0, 0.0], [0.25, 0.5], [0.5, 0.0], [0.75, 0.5]],
        NamedConfig::F5 => (0..5)
            .map(|k| [k as f64 / 5.0, ((2 * k) % 5) as f64 / 5.0])
            .collect(),
        NamedConfig::TypeI { cols, rows } => {
            if cols == 0 || rows == 0 || cols * rows < 2 {
                return Err(invalid("type I packing needs cols, rows >= 1 and at least 2 points"));
            }
            let mut c = Vec::with_capacity(cols * rows);
            for j in 0..cols {
                let offset = if j % 2 == 1 { 0.5 / rows as f64 } else { 0.0 };
                for k in 0..rows {
                    c.push([j as f64 / cols as f64, k as f64 / rows as f64 + offset]);
                }
            }
            c
        }
        NamedConfig::Grid { k } => {
            if k < 2 {
                return Err(invalid("grid needs k >= 2"));
            }
            (0..k * k)
                .map(|i| [(i / k) as f64 / k as f64, (i % k) as f64 / k as f64])
                .collect()
        }
    };
    Configuration::from_coords(&coords)
}

/// Parameters of the striped construction: `m` columns and the set of row
/// indices deleted from every offset column.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstructionSpec {
    pub m: usize,
    pub mask: Vec<usize>,
}

impl ConstructionSpec {
    pub fn new(m: usize, mask: impl IntoIterator<Item = usize>) -> Result<Self> {
        let mask: BTreeSet<usize> = mask.into_iter().collect();
        let spec = Self {
            m,
            mask: mask.into_iter().collect(),
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Points per column before deletion, `4m/5`.
    pub fn rows(&self) -> usize {
        4 * self.m / 5
    }

    /// Number of points after deletion, `3m^2/5`.
    pub fn size(&self) -> usize {
        3 * self.m * self.m / 5
    }

    pub fn validate(&self) -> Result<()> {
        validate_m(self.m)?;
        let rows = self.rows();
        if self.mask.len() != 2 * self.m / 5 {
            return Err(invalid(format!(
                "mask must have {} rows for m = {}, got {}",
                2 * self.m / 5,
                self.m,
                self.mask.len()
            )));
        }
        if self.mask.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("mask rows must be distinct"));
        }
        if let Some(&r) = self.mask.iter().find(|&&r| r >= rows) {
            return Err(invalid(format!("mask row {r} out of range 0..{rows}")));
        }
        Ok(())
    }
}

fn validate_m(m: usize) -> Result<()> {
    if m < 10 || m % 10 != 0 {
        return Err(invalid(format!("m must be a positive multiple of 10, got {m}")));
    }
    Ok(())
}

fn striped(m: usize, deleted: &[usize]) -> Result<Configuration> {
    let rows = 4 * m / 5;
    let spacing = 5.0 / (4.0 * m as f64);
    let mut coords = Vec::with_capacity(rows * m);
    for j in 0..m {
        let offset_column = j % 2 == 1;
        let offset = if offset_column { 5.0 / (8.0 * m as f64) } else { 0.0 };
        for k in 0..rows {
            if offset_column && deleted.contains(&k) {
                continue;
            }
            coords.push([j as f64 / m as f64, k as f64 * spacing + offset]);
        }
    }
    Configuration::from_coords(&coords)
}

/// The striped construction: `m` columns of `4m/5` equispaced points, odd
/// columns offset by half a row spacing, and the masked rows removed from
/// every odd column. Points are ordered column by column.
pub fn construct_theorem1(spec: &ConstructionSpec) -> Result<Configuration> {
    spec.validate()?;
    striped(spec.m, &spec.mask)
}

/// The full `4m^2/5`-point grid before any rows are deleted.
pub fn theorem1_grid(m: usize) -> Result<Configuration> {
    validate_m(m)?;
    striped(m, &[])
}

/// Number of neighbours of each point in the distance bands
/// `[delta, 1.06 delta)`, `[1.06 delta, 1.69 delta)` and `[1.69 delta, inf)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighborProfile {
    pub delta: f64,
    pub counts: Vec<[usize; 3]>,
}

pub fn neighbor_profile(config: &Configuration) -> NeighborProfile {
    let delta = min_distance(config);
    let pts = config.points();
    let counts = pts
        .iter()
        .enumerate()
        .map(|(i, &a)| {
            let mut c = [0usize; 3];
            for (j, &b) in pts.iter().enumerate() {
                if i == j {
                    continue;
                }
                let ratio = distance(a, b) / delta;
                let band = if ratio < 1.06 {
                    0
                } else if ratio < 1.69 {
                    1
                } else {
                    2
                };
                c[band] += 1;
            }
            c
        })
        .collect();
    NeighborProfile { delta, counts }
}

fn mask_len(m: usize) -> Result<(usize, usize)> {
    validate_m(m)?;
    Ok((4 * m / 5, 2 * m / 5))
}

fn rotated(mask: &[usize], shift: usize, rows: usize) -> Vec<usize> {
    let mut r: Vec<usize> = mask.iter().map(|&k| (k + shift) % rows).collect();
    r.sort_unstable();
    r
}

fn reflected(mask: &[usize], rows: usize) -> Vec<usize> {
    let mut r: Vec<usize> = mask.iter().map(|&k| (rows - k) % rows).collect();
    r.sort_unstable();
    r
}

/// Lexicographically smallest cyclic rotation of `mask` in `Z_{4m/5}`.
///
/// A shift of the whole configuration by one row spacing in `y` rotates the
/// mask by one, so this is the representative of the shift class.
pub fn mask_canonical(mask: &[usize], m: usize) -> Result<Vec<usize>> {
    ConstructionSpec::new(m, mask.iter().copied())?;
    let (rows, _) = mask_len(m)?;
    Ok((0..rows)
        .map(|s| rotated(mask, s, rows))
        .min()
        .expect("rows > 0"))
}

/// Smallest representative under rotations and reflections of `Z_{4m/5}`.
pub fn mask_canonical_dihedral(mask: &[usize], m: usize) -> Result<Vec<usize>> {
    let (rows, _) = mask_len(m)?;
    let a = mask_canonical(mask, m)?;
    let b = mask_canonical(&reflected(mask, rows), m)?;
    Ok(a.min(b))
}

/// Every valid mask for `m`, in lexicographic order.
pub fn all_masks(m: usize) -> Result<Vec<Vec<usize>>> {
    let (rows, size) = mask_len(m)?;
    let mut out = Vec::new();
    let mut current = Vec::with_capacity(size);
    fn rec(start: usize, rows: usize, size: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == size {
            out.push(cur.clone());
            return;
        }
        for k in start..=rows - (size - cur.len()) {
            cur.push(k);
            rec(k + 1, rows, size, cur, out);
            cur.pop();
        }
    }
    rec(0, rows, size, &mut current, &mut out);
    Ok(out)
}

/// One representative per rotation class (necklaces), sorted.
pub fn mask_orbits(m: usize) -> Result<Vec<Vec<usize>>> {
    let set: BTreeSet<Vec<usize>> = all_masks(m)?
        .iter()
        .map(|mask| mask_canonical(mask, m))
        .collect::<Result<_>>()?;
    Ok(set.into_iter().collect())
}

/// One representative per rotation-and-reflection class (bracelets), sorted.
pub fn mask_bracelets(m: usize) -> Result<Vec<Vec<usize>>> {
    let set: BTreeSet<Vec<usize>> = all_masks(m)?
        .iter()
        .map(|mask| mask_canonical_dihedral(mask, m))
        .collect::<Result<_>>()?;
    Ok(set.into_iter().collect())
}

/// `n` independent uniform points from ChaCha8 seeded with `seed` via
/// `seed_from_u64`; each coordinate is a uniform `f64` in `[0, 1)`, `x` drawn
/// before `y`. The stream is identical on every platform.
pub fn random_config(n: usize, seed: u64) -> Result<Configuration> {
    if n < 2 {
        return Err(invalid(format!("random configuration needs n >= 2, got {n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coords: Vec<[f64; 2]> = (0..n).map(|_| [rng.gen::<f64>(), rng.gen::<f64>()]).collect();
    Configuration::from_coords(&coords)
}
