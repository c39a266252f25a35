//! Isometries of the square flat torus: the point group D4 combined with
//! translations, and the detection of the isometries fixing a configuration.

use serde::{Deserialize, Serialize};

use crate::torus::{displacement, wrap_unit, Configuration, TorusPoint};

/// The eight linear symmetries of the square lattice, as integer matrices
/// `[[a, b], [c, d]]` acting by `(x, y) -> (a x + b y, c x + d y)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PointMap(pub [[i8; 2]; 2]);

impl PointMap {
    pub const IDENTITY: PointMap = PointMap([[1, 0], [0, 1]]);

    /// Identity, the three rotations, and the four reflections.
    pub const ALL: [PointMap; 8] = [
        PointMap([[1, 0], [0, 1]]),
        PointMap([[0, -1], [1, 0]]),
        PointMap([[-1, 0], [0, -1]]),
        PointMap([[0, 1], [-1, 0]]),
        PointMap([[-1, 0], [0, 1]]),
        PointMap([[1, 0], [0, -1]]),
        PointMap([[0, 1], [1, 0]]),
        PointMap([[0, -1], [-1, 0]]),
    ];

    #[inline]
    pub fn apply(&self, x: f64, y: f64) -> (f64, f64) {
        let [[a, b], [c, d]] = self.0;
        (
            f64::from(a) * x + f64::from(b) * y,
            f64::from(c) * x + f64::from(d) * y,
        )
    }

    #[inline]
    pub fn apply_point(&self, p: TorusPoint) -> TorusPoint {
        let (u, v) = self.apply(p.x, p.y);
        TorusPoint {
            x: wrap_unit(u),
            y: wrap_unit(v),
        }
    }

    /// Apply the transpose (the inverse, since the matrix is orthogonal).
    #[inline]
    pub fn apply_inverse(&self, x: f64, y: f64) -> (f64, f64) {
        let [[a, b], [c, d]] = self.0;
        (
            f64::from(a) * x + f64::from(c) * y,
            f64::from(b) * x + f64::from(d) * y,
        )
    }
}

/// A torus isometry `x -> L x + shift` together with the relabeling it
/// induces on a configuration it fixes: point `i` is sent onto point
/// `perm[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Symmetry {
    pub linear: PointMap,
    pub shift: (f64, f64),
    pub perm: Vec<usize>,
}

/// All isometries in translations x D4 that map `config` onto itself up to
/// `tol` per point, each reported once per distinct relabeling. The identity
/// is always first.
pub fn stabilizer(config: &Configuration, tol: f64) -> Vec<Symmetry> {
    let pts = config.points();
    let n = pts.len();
    let mut out: Vec<Symmetry> = Vec::new();
    for linear in PointMap::ALL {
        let images: Vec<TorusPoint> = pts.iter().map(|&p| linear.apply_point(p)).collect();
        for target in 0..n {
            let (sx, sy) = displacement(pts[target], images[0]);
            let mut perm = Vec::with_capacity(n);
            let mut used = vec![false; n];
            let ok = images.iter().all(|img| {
                let moved = img.translated(sx, sy);
                let hit = (0..n).find(|&k| {
                    !used[k] && {
                        let (dx, dy) = displacement(moved, pts[k]);
                        dx.abs() <= tol && dy.abs() <= tol
                    }
                });
                match hit {
                    Some(k) => {
                        used[k] = true;
                        perm.push(k);
                        true
                    }
                    None => false,
                }
            });
            if ok && !out.iter().any(|s| s.perm == perm && s.linear == linear) {
                out.push(Symmetry {
                    linear,
                    shift: (sx, sy),
                    perm,
                });
            }
        }
    }
    out
}

/// Average per-point vectors over a symmetry group so the result is
/// equivariant: `v'_i = (1/|G|) sum_g L_g^T v_{g(i)}`.
pub fn symmetrize(vectors: &mut [[f64; 2]], group: &[Symmetry]) {
    if group.len() <= 1 {
        return;
    }
    let scale = 1.0 / group.len() as f64;
    let averaged: Vec<[f64; 2]> = (0..vectors.len())
        .map(|i| {
            let mut acc = [0.0, 0.0];
            for g in group {
                let v = vectors[g.perm[i]];
                let (a, b) = g.linear.apply_inverse(v[0], v[1]);
                acc[0] += a;
                acc[1] += b;
            }
            [acc[0] * scale, acc[1] * scale]
        })
        .collect();
    vectors.copy_from_slice(&averaged);
}
