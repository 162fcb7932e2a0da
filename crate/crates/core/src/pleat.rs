//! Pleated surfaces in `H^3` realizing a configuration.
//!
//! Each tribone becomes the ideal triangle spanned by its three values; adjacent
//! triangles meet along the geodesic of their shared edge. The bending there is read
//! off the cross-ratio of the quadribone, and checked against a computation in the
//! hyperboloid model.

use std::f64::consts::PI;
use std::fmt::Write as _;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::cp1::{cross_ratio, CP1Point, Verdict};
use crate::error::{Error, Result};
use crate::grow::Configuration;
use crate::tree::{BElement, Quadribone, Tribone};

/// Horoball truncation height used by the mesh.
pub const HOROBALL_HEIGHT: f64 = 4.0;

/// Interior dihedral angle along the shared edge of `(x, l, r, n)`, from the cross-ratio.
///
/// The triangles are `(x, l, r)` and `(l, r, n)`. Returns `None` when the four points
/// are not pairwise distinct.
pub fn dihedral_angle(x: &CP1Point, l: &CP1Point, r: &CP1Point, n: &CP1Point) -> Option<f64> {
    let chi = cross_ratio(x, l, r, n).ok()?.value()?;
    let d = 1.0 - chi;
    if d.norm() == 0.0 {
        return None;
    }
    Some(d.arg().abs())
}

/// Bending angle `π − θ` along the shared edge.
pub fn bending_angle(x: &CP1Point, l: &CP1Point, r: &CP1Point, n: &CP1Point) -> Option<f64> {
    dihedral_angle(x, l, r, n).map(|t| PI - t)
}

type V4 = [f64; 4];

fn minkowski(a: &V4, b: &V4) -> f64 {
    -a[0] * b[0] + a[1] * b[1] + a[2] * b[2] + a[3] * b[3]
}

fn null_vector(p: &CP1Point) -> V4 {
    let [x, y, z] = p.to_sphere();
    [1.0, x, y, z]
}

fn axpy(a: f64, x: &V4, y: &V4) -> V4 {
    std::array::from_fn(|i| a * x[i] + y[i])
}

fn scale(a: f64, x: &V4) -> V4 {
    x.map(|v| a * v)
}

/// Unit tangent at `p` on the geodesic `e`, orthogonal to it, pointing toward `v`.
fn inward(v: &V4, p: &V4, e: &V4) -> Option<V4> {
    let u = axpy(minkowski(v, p), p, v);
    let u = axpy(-minkowski(&u, e), e, &u);
    let nn = minkowski(&u, &u);
    (nn > 0.0).then(|| scale(1.0 / nn.sqrt(), &u))
}

/// The similarity sending the finite ones of `l`, `r` to `0`, `1` (or a single finite one to `0`).
/// Clustered points become well separated before they are put on the sphere.
fn spread(l: &CP1Point, r: &CP1Point) -> impl Fn(&CP1Point) -> CP1Point {
    let (shift, unit) = match (l.to_complex(), r.to_complex()) {
        (Some(a), Some(b)) => (a, b - a),
        (Some(a), None) | (None, Some(a)) => (a, Complex64::new(1.0, 0.0)),
        (None, None) => (Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)),
    };
    move |p: &CP1Point| match p.to_complex() {
        Some(z) => CP1Point::finite((z - shift) / unit),
        None => *p,
    }
}

/// Dihedral angle computed on the hyperboloid, without cross-ratios.
pub fn dihedral_angle_hyperboloid(x: &CP1Point, l: &CP1Point, r: &CP1Point, n: &CP1Point) -> Option<f64> {
    let f = spread(l, r);
    let (xv, lv, rv, nv) = (null_vector(&f(x)), null_vector(&f(l)), null_vector(&f(r)), null_vector(&f(n)));
    let lr = minkowski(&lv, &rv);
    if lr >= 0.0 {
        return None;
    }
    let s = (-2.0 * lr).sqrt();
    let p = scale(1.0 / s, &axpy(1.0, &lv, &rv));
    let e = scale(1.0 / s, &axpy(-1.0, &rv, &lv));
    let u1 = inward(&xv, &p, &e)?;
    let u2 = inward(&nv, &p, &e)?;
    let c = minkowski(&u1, &u2);
    let w = axpy(-c, &u1, &u2);
    Some(minkowski(&w, &w).max(0.0).sqrt().atan2(c))
}

/// Sign of the orientation of the four null vectors, a proxy for the bending direction.
pub fn orientation_hyperboloid(x: &CP1Point, l: &CP1Point, r: &CP1Point, n: &CP1Point) -> f64 {
    let m = [null_vector(x), null_vector(l), null_vector(r), null_vector(n)];
    det4(&m).signum()
}

fn det4(m: &[V4; 4]) -> f64 {
    let minor = |c0: usize, c1: usize, c2: usize| -> f64 {
        m[1][c0] * (m[2][c1] * m[3][c2] - m[2][c2] * m[3][c1]) - m[1][c1] * (m[2][c0] * m[3][c2] - m[2][c2] * m[3][c0])
            + m[1][c2] * (m[2][c0] * m[3][c1] - m[2][c1] * m[3][c0])
    };
    m[0][0] * minor(1, 2, 3) - m[0][1] * minor(0, 2, 3) + m[0][2] * minor(0, 1, 3) - m[0][3] * minor(0, 1, 2)
}

/// One ideal triangle of the surface.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Face {
    pub tribone: Tribone,
    pub vertices: [CP1Point; 3],
    /// Vertices on the unit sphere, the boundary of the ball model.
    pub ball: [[f64; 3]; 3],
}

/// The bend along one interior edge.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Bend {
    pub quadribone: Quadribone,
    /// `(x, l, r, n)`; the edge is `(l, r)`.
    pub oriented: [BElement; 4],
    pub dihedral: f64,
    pub bending: f64,
    pub im_cross_ratio: f64,
    pub verdict: Verdict,
}

impl Bend {
    pub fn locally_convex(&self) -> bool {
        self.verdict.holds() && self.bending > 0.0 && self.bending < PI
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Pleating {
    pub faces: Vec<Face>,
    pub bends: Vec<Bend>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BendingSummary {
    pub edges: usize,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub locally_convex: bool,
}

impl Pleating {
    pub fn locally_convex(&self) -> bool {
        self.bends.iter().all(Bend::locally_convex)
    }

    pub fn summary(&self) -> BendingSummary {
        let angles: Vec<f64> = self.bends.iter().map(|b| b.bending).collect();
        let n = angles.len();
        BendingSummary {
            edges: n,
            min: angles.iter().copied().fold(f64::INFINITY, f64::min),
            max: angles.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            mean: if n == 0 { f64::NAN } else { angles.iter().sum::<f64>() / n as f64 },
            locally_convex: self.locally_convex(),
        }
    }

    /// Bend along the edge of the quadribone with elements `q`, in any order.
    pub fn bend(&self, q: &Quadribone) -> Option<&Bend> {
        self.bends.iter().find(|b| &b.quadribone == q)
    }
}

fn point(c: &Configuration, b: &BElement) -> Result<CP1Point> {
    c.value(b)
        .copied()
        .ok_or_else(|| Error::InvalidConfig(format!("element {b} is not assigned")))
}

/// Realizes every face and bend of the configuration's domain.
pub fn realize(c: &Configuration) -> Result<Pleating> {
    let mut faces = Vec::new();
    for t in c.domain_tribones()? {
        let [a, b, cc] = t.elements();
        let vertices = [point(c, a)?, point(c, b)?, point(c, cc)?];
        faces.push(Face {
            ball: vertices.map(|v| v.to_sphere()),
            tribone: t,
            vertices,
        });
    }
    let data = crate::configdata::ConfigData::new(c.convention);
    let mut bends = Vec::new();
    for (quadribone, o) in c.domain_quadribones()? {
        let [x, l, r, n] = [point(c, &o[0])?, point(c, &o[1])?, point(c, &o[2])?, point(c, &o[3])?];
        let verdict = data.o4(&[x, l, r, n]);
        let dihedral = match (verdict, dihedral_angle(&x, &l, &r, &n)) {
            (Verdict::Degenerate, _) | (_, None) => {
                return Err(Error::DegenerateEdge {
                    quadribone: quadribone.to_string(),
                })
            }
            (_, Some(t)) => t,
        };
        bends.push(Bend {
            im_cross_ratio: cross_ratio(&x, &l, &r, &n)?.im(),
            quadribone,
            oriented: o,
            dihedral,
            bending: PI - dihedral,
            verdict,
        });
    }
    Ok(Pleating { faces, bends })
}

/// Realizes and fails unless every bend is locally convex.
pub fn certify(c: &Configuration) -> Result<Pleating> {
    let p = realize(c)?;
    if let Some(b) = p.bends.iter().find(|b| !b.locally_convex()) {
        return Err(Error::NotLocallyConvex {
            quadribone: b.quadribone.to_string(),
        });
    }
    Ok(p)
}

/// Klein model point to the Poincaré ball.
fn klein_to_ball(k: [f64; 3]) -> [f64; 3] {
    let r2: f64 = k.iter().map(|v| v * v).sum();
    let s = 1.0 / (1.0 + (1.0 - r2).max(0.0).sqrt());
    k.map(|v| v * s)
}

fn klein_to_hyperboloid(k: [f64; 3]) -> Option<V4> {
    let r2: f64 = k.iter().map(|v| v * v).sum();
    (r2 < 1.0).then(|| {
        let s = 1.0 / (1.0 - r2).sqrt();
        [s, k[0] * s, k[1] * s, k[2] * s]
    })
}

/// A triangle mesh of the surface in the Poincaré ball.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct Mesh {
    pub vertices: Vec<[f64; 3]>,
    pub triangles: Vec<[usize; 3]>,
    pub chord_error: f64,
}

impl Mesh {
    pub fn to_obj(&self) -> String {
        let mut s = String::new();
        for v in &self.vertices {
            let _ = writeln!(s, "v {:.12} {:.12} {:.12}", v[0], v[1], v[2]);
        }
        for t in &self.triangles {
            let _ = writeln!(s, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1);
        }
        s
    }
}

/// Meshes each face by subdividing it `resolution` times along each side.
///
/// Faces are flat in the Klein model, so the subdivision is done there and mapped to the
/// ball. Cusps are cut off along horoballs of the given height. Fails when the largest
/// gap between a mapped edge midpoint and the straight chord exceeds `tolerance`.
pub fn mesh(p: &Pleating, resolution: usize, horoball_height: f64, tolerance: f64) -> Result<Mesh> {
    let m = resolution.max(1);
    let cutoff = (-horoball_height).exp();
    let mut out = Mesh::default();
    for face in &p.faces {
        let corners = face.ball;
        let cusp: Vec<V4> = corners.iter().map(|c| [1.0, c[0], c[1], c[2]]).collect();
        let klein = |i: usize, j: usize| -> [f64; 3] {
            let (a, b) = (i as f64 / m as f64, j as f64 / m as f64);
            let c = 1.0 - a - b;
            std::array::from_fn(|k| a * corners[0][k] + b * corners[1][k] + c * corners[2][k])
        };
        let kept = |k: [f64; 3]| -> bool {
            klein_to_hyperboloid(k).is_some_and(|x| cusp.iter().all(|v| -minkowski(&x, v) >= cutoff))
        };
        let mut index = std::collections::HashMap::new();
        let mut vid = |i: usize, j: usize, out: &mut Mesh| -> usize {
            *index.entry((i, j)).or_insert_with(|| {
                out.vertices.push(klein_to_ball(klein(i, j)));
                out.vertices.len() - 1
            })
        };
        for i in 0..m {
            for j in 0..m - i {
                let mut tris = vec![[(i, j), (i + 1, j), (i, j + 1)]];
                if i + j + 1 < m {
                    tris.push([(i + 1, j), (i + 1, j + 1), (i, j + 1)]);
                }
                for t in tris {
                    if !t.iter().all(|&(a, b)| kept(klein(a, b))) {
                        continue;
                    }
                    for e in 0..3 {
                        let (a, b) = (klein(t[e].0, t[e].1), klein(t[(e + 1) % 3].0, t[(e + 1) % 3].1));
                        let mid = klein_to_ball(std::array::from_fn(|k| 0.5 * (a[k] + b[k])));
                        let (pa, pb) = (klein_to_ball(a), klein_to_ball(b));
                        let gap = (0..3).map(|k| (mid[k] - 0.5 * (pa[k] + pb[k])).powi(2)).sum::<f64>().sqrt();
                        out.chord_error = out.chord_error.max(gap);
                    }
                    let ids = t.map(|(a, b)| vid(a, b, &mut out));
                    out.triangles.push(ids);
                }
            }
        }
    }
    if out.chord_error > tolerance {
        return Err(Error::ResolutionTooLow {
            chord_error: out.chord_error,
            tolerance,
        });
    }
    Ok(out)
}
