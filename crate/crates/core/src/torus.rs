//! Flat-torus geometry on the unit square with opposite edges identified.
//!
//! Every coordinate is kept in `[0, 1)`; wrapping is applied eagerly after
//! each mutation so the distance code can assume canonical range.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Reduce a finite real to `[0, 1)`.
#[inline]
pub(crate) fn wrap_unit(u: f64) -> f64 {
    let r = u - u.floor();
    // `u - floor(u)` rounds up to exactly 1.0 for tiny negative inputs.
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

/// Minimal representative of a coordinate difference, in `[-1/2, 1/2)`.
///
/// A difference of exactly `±1/2` maps to `-1/2`.
#[inline]
pub fn min_image(d: f64) -> f64 {
    d - (d + 0.5).floor()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TorusPoint {
    pub x: f64,
    pub y: f64,
}

impl TorusPoint {
    /// Wrap `(u, v)` onto the torus.
    pub fn wrap(u: f64, v: f64) -> Result<Self> {
        if !u.is_finite() || !v.is_finite() {
            return Err(Error::NonFinite(u, v));
        }
        Ok(Self {
            x: wrap_unit(u),
            y: wrap_unit(v),
        })
    }

    /// Translate by `(dx, dy)` and wrap. Inputs must be finite.
    #[inline]
    pub fn translated(self, dx: f64, dy: f64) -> Self {
        Self {
            x: wrap_unit(self.x + dx),
            y: wrap_unit(self.y + dy),
        }
    }
}

/// Minimal displacement `a - b` on the torus; each component in `[-1/2, 1/2)`.
#[inline]
pub fn displacement(a: TorusPoint, b: TorusPoint) -> (f64, f64) {
    (min_image(a.x - b.x), min_image(a.y - b.y))
}

/// Geodesic distance on the flat torus.
#[inline]
pub fn distance(a: TorusPoint, b: TorusPoint) -> f64 {
    let (dx, dy) = displacement(a, b);
    dx.hypot(dy)
}

/// An ordered list of `n >= 2` torus points.
///
/// Pairwise distinctness is not enforced here; energy evaluation rejects
/// coincident points.
#[derive(Debug, Clone, PartialEq)]
pub struct Configuration {
    points: Vec<TorusPoint>,
}

impl Configuration {
    pub fn new(points: Vec<TorusPoint>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::TooFewPoints(points.len()));
        }
        Ok(Self { points })
    }

    /// Build from raw coordinate pairs, wrapping each one.
    pub fn from_coords(coords: &[[f64; 2]]) -> Result<Self> {
        let points = coords
            .iter()
            .map(|&[u, v]| TorusPoint::wrap(u, v))
            .collect::<Result<Vec<_>>>()?;
        Self::new(points)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[TorusPoint] {
        &self.points
    }

    pub fn coords(&self) -> Vec<[f64; 2]> {
        self.points.iter().map(|p| [p.x, p.y]).collect()
    }

    /// Translate every point by `(dx, dy)`.
    pub fn translated(&self, dx: f64, dy: f64) -> Self {
        Self {
            points: self.points.iter().map(|p| p.translated(dx, dy)).collect(),
        }
    }

    /// Apply an arbitrary map to every point and wrap the result.
    pub fn mapped(&self, f: impl Fn(f64, f64) -> (f64, f64)) -> Result<Self> {
        let points = self
            .points
            .iter()
            .map(|p| {
                let (u, v) = f(p.x, p.y);
                TorusPoint::wrap(u, v)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(points)
    }

    /// Reorder points so that the new `k`-th point is the old `perm[k]`-th.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.len() {
            return Err(Error::SizeMismatch(perm.len(), self.len()));
        }
        let mut seen = vec![false; perm.len()];
        for &i in perm {
            if i >= perm.len() || std::mem::replace(&mut seen[i], true) {
                return Err(Error::InvalidParameter(format!(
                    "not a permutation: {perm:?}"
                )));
            }
        }
        Ok(Self {
            points: perm.iter().map(|&i| self.points[i]).collect(),
        })
    }

    /// Index pair of the first coincident points, if any.
    pub fn find_coincident(&self) -> Option<(usize, usize)> {
        let n = self.points.len();
        for i in 0..n {
            for j in i + 1..n {
                let (dx, dy) = displacement(self.points[i], self.points[j]);
                if dx == 0.0 && dy == 0.0 {
                    return Some((i, j));
                }
            }
        }
        None
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("configuration serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

#[derive(Serialize, Deserialize)]
struct ConfigurationFile {
    n: usize,
    points: Vec<[f64; 2]>,
}

impl Serialize for Configuration {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        ConfigurationFile {
            n: self.len(),
            points: self.coords(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Configuration {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let file = ConfigurationFile::deserialize(deserializer)?;
        if file.n != file.points.len() {
            return Err(D::Error::custom(format!(
                "\"n\" is {} but {} points were given",
                file.n,
                file.points.len()
            )));
        }
        Configuration::from_coords(&file.points).map_err(D::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(x: f64, y: f64) -> TorusPoint {
        TorusPoint::wrap(x, y).unwrap()
    }

    #[test]
    fn wrap_examples() {
        assert_eq!(pt(1.25, -0.5), TorusPoint { x: 0.25, y: 0.5 });
        assert_eq!(pt(0.0, 0.0), TorusPoint { x: 0.0, y: 0.0 });
        assert_eq!(pt(3.0, 2.75), TorusPoint { x: 0.0, y: 0.75 });
        assert_eq!(pt(-1e-20, 0.0).x, 0.0);
        assert!(TorusPoint::wrap(f64::NAN, 0.0).is_err());
        assert!(TorusPoint::wrap(0.0, f64::INFINITY).is_err());
    }

    #[test]
    fn wrap_is_idempotent() {
        for &(u, v) in &[(7.3, -2.2), (-0.999, 0.5), (1e9 + 0.1, -1e-12)] {
            let p = pt(u, v);
            assert_eq!(pt(p.x, p.y), p);
            assert!((0.0..1.0).contains(&p.x) && (0.0..1.0).contains(&p.y));
        }
    }

    #[test]
    fn displacement_examples() {
        let (dx, dy) = displacement(pt(0.9, 0.1), pt(0.1, 0.9));
        assert!((dx + 0.2).abs() < 1e-15 && (dy - 0.2).abs() < 1e-15);
        assert_eq!(displacement(pt(0.3, 0.7), pt(0.3, 0.7)), (0.0, 0.0));
        // cut locus
        assert_eq!(displacement(pt(0.5, 0.0), pt(0.0, 0.0)), (-0.5, 0.0));
        assert_eq!(displacement(pt(0.0, 0.0), pt(0.5, 0.0)), (-0.5, 0.0));
    }

    #[test]
    fn distance_examples() {
        assert!((distance(pt(0.0, 0.0), pt(0.75, 0.0)) - 0.25).abs() < 1e-15);
        assert!((distance(pt(0.0, 0.0), pt(0.5, 0.5)) - 0.5f64.sqrt()).abs() < 1e-15);
        let s3 = 3f64.sqrt();
        let d = distance(pt(0.0, 0.0), pt(0.5, (2.0 - s3) / 2.0));
        let expected = (6f64.sqrt() - 2f64.sqrt()) / 2.0;
        assert!((d - expected).abs() < 1e-15);
    }

    #[test]
    fn json_roundtrip_and_validation() {
        let c = Configuration::from_coords(&[[0.0, 0.0], [0.25, 0.5]]).unwrap();
        let s = c.to_json();
        assert_eq!(s, r#"{"n":2,"points":[[0.0,0.0],[0.25,0.5]]}"#);
        assert_eq!(Configuration::from_json(&s).unwrap(), c);
        // wrap applied on read
        let w = Configuration::from_json(r#"{"n":2,"points":[[1.25,-0.5],[0,0.1]]}"#).unwrap();
        assert_eq!(w.points()[0], TorusPoint { x: 0.25, y: 0.5 });
        assert!(Configuration::from_json(r#"{"n":3,"points":[[0,0],[0.5,0.5]]}"#).is_err());
        assert!(Configuration::from_json(r#"{"n":1,"points":[[0,0]]}"#).is_err());
    }

    #[test]
    fn permuted_rejects_non_permutations() {
        let c = Configuration::from_coords(&[[0.0, 0.0], [0.25, 0.5], [0.5, 0.1]]).unwrap();
        assert!(c.permuted(&[0, 0, 1]).is_err());
        assert!(c.permuted(&[0, 1]).is_err());
        assert_eq!(c.permuted(&[2, 1, 0]).unwrap().points()[0], c.points()[2]);
    }
}
