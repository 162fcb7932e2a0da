//! Upper half-space geometry, Busemann cocycles and equivariant boundary measures.
//!
//! Points of `H³` are `(z, t)` with `z ∈ C`, `t > 0`. A determinant-one matrix acts by
//! its Poincaré extension
//!
//! ```text
//! z' = ((az + b)·conj(cz + d) + a·conj(c)·t²) / (|cz + d|² + |c|²t²)
//! t' = t / (|cz + d|² + |c|²t²)
//! ```
//!
//! Boundary densities are with respect to planar area `dA` and are handled as logarithms.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, UnitSphere};
use serde::{Deserialize, Serialize};

use crate::cp1::{CP1Point, Mobius};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct H3Point {
    pub z: Complex64,
    pub t: f64,
}

impl H3Point {
    pub fn new(z: Complex64, t: f64) -> Self {
        debug_assert!(t > 0.0);
        Self { z, t }
    }

    /// The point `j = (0, 1)`.
    pub fn j() -> Self {
        Self::new(Complex64::new(0.0, 0.0), 1.0)
    }

    pub fn distance(&self, other: &H3Point) -> f64 {
        let num = (self.z - other.z).norm_sqr() + (self.t - other.t).powi(2);
        // acosh(1 + u) = 2 asinh(sqrt(u/2)), stable for small u
        let u = num / (2.0 * self.t * other.t);
        2.0 * (u / 2.0).sqrt().asinh()
    }

    /// Affine isometry `η ↦ z + tη` taking `j` to `self`.
    pub fn from_j(&self) -> Mobius {
        let s = self.t.sqrt();
        Mobius {
            a: Complex64::new(s, 0.0),
            b: self.z / s,
            c: Complex64::new(0.0, 0.0),
            d: Complex64::new(1.0 / s, 0.0),
        }
    }
}

pub fn poincare_extension(m: &Mobius, x: &H3Point) -> H3Point {
    let (a, b, c, d) = (m.a, m.b, m.c, m.d);
    let t2 = x.t * x.t;
    let czd = c * x.z + d;
    let den = czd.norm_sqr() + c.norm_sqr() * t2;
    let z = ((a * x.z + b) * czd.conj() + a * c.conj() * t2) / den;
    H3Point::new(z, x.t / den)
}

/// `B_η(x, y) = lim_{w→η} d(x, w) − d(y, w)`.
pub fn busemann(eta: &CP1Point, x: &H3Point, y: &H3Point) -> f64 {
    match eta.to_complex() {
        None => (y.t / x.t).ln(),
        Some(e) => {
            let f = |p: &H3Point| (((p.z - e).norm_sqr() + p.t * p.t) / p.t).ln();
            f(x) - f(y)
        }
    }
}

/// Log of the visual density `(1/π)(t/(|η − z|² + t²))²`; `−∞` at `η = ∞`.
pub fn log_visual_density(x: &H3Point, eta: &CP1Point) -> f64 {
    match eta.to_complex() {
        None => f64::NEG_INFINITY,
        Some(e) => 2.0 * (x.t / ((e - x.z).norm_sqr() + x.t * x.t)).ln() - PI.ln(),
    }
}

pub fn visual_density(x: &H3Point, eta: &CP1Point) -> f64 {
    log_visual_density(x, eta).exp()
}

/// Exact draw from the visual measure seen from `x`.
pub fn sample_visual<R: Rng + ?Sized>(x: &H3Point, rng: &mut R) -> CP1Point {
    let v: [f64; 3] = UnitSphere.sample(rng);
    x.from_j().apply(&CP1Point::from_sphere(v))
}

fn standard_barycenter() -> H3Point {
    H3Point::new(Complex64::new(0.5, 0.0), 3f64.sqrt() / 2.0)
}

/// The point of `H³` fixed by the order-three symmetry of the ideal triangle `(a, b, c)`.
pub fn barycenter(a: &CP1Point, b: &CP1Point, c: &CP1Point) -> Result<H3Point> {
    let m = Mobius::from_standard(a, b, c)?;
    let p = poincare_extension(&m, &standard_barycenter());
    if !(p.t > 0.0 && p.t.is_finite() && p.z.is_finite()) {
        return Err(Error::NonFiniteDensity(format!("barycenter of ({a}, {b}, {c})")));
    }
    Ok(p)
}

/// A basepoint-indexed family of probability measures on the sphere at infinity.
pub trait EquivariantFamily: Send + Sync {
    fn name(&self) -> &'static str;

    /// Log density of `μ_x` with respect to planar area.
    fn log_density(&self, x: &H3Point, eta: &CP1Point) -> f64;

    fn sample<R: Rng + ?Sized>(&self, x: &H3Point, rng: &mut R) -> CP1Point
    where
        Self: Sized;

    /// Conformal exponent, when the family is a conformal density.
    fn delta(&self) -> Option<f64>;

    /// `c_η(x, y)` with `p_x(η)/p_y(η) = exp(−c_η(x, y))`.
    fn cocycle(&self, eta: &CP1Point, x: &H3Point, y: &H3Point) -> f64 {
        self.log_density(y, eta) - self.log_density(x, eta)
    }
}

/// The visual family: `μ_x` is the pushforward of the round measure on the unit tangent
/// sphere at `x`. Conformal of exponent 2 and Möbius-equivariant.
#[derive(Clone, Copy, Debug, Default)]
pub struct VisualFamily;

impl EquivariantFamily for VisualFamily {
    fn name(&self) -> &'static str {
        "visual"
    }

    fn log_density(&self, x: &H3Point, eta: &CP1Point) -> f64 {
        log_visual_density(x, eta)
    }

    fn sample<R: Rng + ?Sized>(&self, x: &H3Point, rng: &mut R) -> CP1Point {
        sample_visual(x, rng)
    }

    fn delta(&self) -> Option<f64> {
        Some(2.0)
    }

    fn cocycle(&self, eta: &CP1Point, x: &H3Point, y: &H3Point) -> f64 {
        2.0 * busemann(eta, x, y)
    }
}

/// Visual density raised to the power `s > 1/2`, renormalized per basepoint.
///
/// Equivariant under the affine maps `η ↦ z + tη` only, so its measures differ in
/// class-level behaviour from the visual family.
#[derive(Clone, Copy, Debug)]
pub struct PowerFamily {
    s: f64,
}

impl PowerFamily {
    pub fn new(s: f64) -> Result<Self> {
        if !(s > 0.5 && s.is_finite()) {
            return Err(Error::InvalidConfig(format!("power exponent must exceed 1/2, got {s}")));
        }
        Ok(Self { s })
    }

    pub fn exponent(&self) -> f64 {
        self.s
    }

    // log ∫ p_x^s dA = (2 − 2s) log t + (1 − s) log π − log(2s − 1)
    fn log_normalizer(&self, x: &H3Point) -> f64 {
        let s = self.s;
        (2.0 - 2.0 * s) * x.t.ln() + (1.0 - s) * PI.ln() - (2.0 * s - 1.0).ln()
    }
}

impl EquivariantFamily for PowerFamily {
    fn name(&self) -> &'static str {
        "power"
    }

    fn log_density(&self, x: &H3Point, eta: &CP1Point) -> f64 {
        self.s * log_visual_density(x, eta) - self.log_normalizer(x)
    }

    fn sample<R: Rng + ?Sized>(&self, x: &H3Point, rng: &mut R) -> CP1Point {
        // radial law from j: F(r) = 1 − (1 + r²)^{1 − 2s}
        let u: f64 = rng.random();
        let r = ((1.0 - u).powf(1.0 / (1.0 - 2.0 * self.s)) - 1.0).max(0.0).sqrt();
        let theta = 2.0 * PI * rng.random::<f64>();
        x.from_j().apply_c(Complex64::from_polar(r, theta))
    }

    fn delta(&self) -> Option<f64> {
        None
    }
}

/// Either built-in family, chosen at run time.
#[derive(Clone, Copy, Debug)]
pub enum Family {
    Visual(VisualFamily),
    Power(PowerFamily),
}

impl Default for Family {
    fn default() -> Self {
        Family::Visual(VisualFamily)
    }
}

impl EquivariantFamily for Family {
    fn name(&self) -> &'static str {
        match self {
            Family::Visual(f) => f.name(),
            Family::Power(f) => f.name(),
        }
    }

    fn log_density(&self, x: &H3Point, eta: &CP1Point) -> f64 {
        match self {
            Family::Visual(f) => f.log_density(x, eta),
            Family::Power(f) => f.log_density(x, eta),
        }
    }

    fn sample<R: Rng + ?Sized>(&self, x: &H3Point, rng: &mut R) -> CP1Point {
        match self {
            Family::Visual(f) => f.sample(x, rng),
            Family::Power(f) => f.sample(x, rng),
        }
    }

    fn delta(&self) -> Option<f64> {
        match self {
            Family::Visual(f) => f.delta(),
            Family::Power(f) => f.delta(),
        }
    }

    fn cocycle(&self, eta: &CP1Point, x: &H3Point, y: &H3Point) -> f64 {
        match self {
            Family::Visual(f) => f.cocycle(eta, x, y),
            Family::Power(f) => f.cocycle(eta, x, y),
        }
    }
}

/// `log ρ₃(a,b,c) = Σ log p_β(·)` over the three points, `β` the barycenter.
pub fn log_rho3_with<F: EquivariantFamily + ?Sized>(fam: &F, a: &CP1Point, b: &CP1Point, c: &CP1Point) -> Result<f64> {
    let beta = barycenter(a, b, c)?;
    Ok(fam.log_density(&beta, a) + fam.log_density(&beta, b) + fam.log_density(&beta, c))
}

/// Same quantity computed from an arbitrary basepoint `x` through the cocycle.
pub fn log_rho3_via_basepoint<F: EquivariantFamily + ?Sized>(
    fam: &F,
    x: &H3Point,
    a: &CP1Point,
    b: &CP1Point,
    c: &CP1Point,
) -> Result<f64> {
    let beta = barycenter(a, b, c)?;
    Ok([a, b, c].iter().map(|p| fam.log_density(x, p) + fam.cocycle(p, x, &beta)).sum())
}

pub fn log_rho3(a: &CP1Point, b: &CP1Point, c: &CP1Point) -> Result<f64> {
    log_rho3_with(&VisualFamily, a, b, c)
}

pub fn rho3(a: &CP1Point, b: &CP1Point, c: &CP1Point) -> Result<f64> {
    Ok(log_rho3(a, b, c)?.exp())
}

/// Uniform random element of `SU(2)`, acting on `CP^1` by rotations.
pub fn random_rotation<R: Rng + ?Sized>(rng: &mut R) -> Mobius {
    let q: [f64; 4] = std::array::from_fn(|_| rand_distr::StandardNormal.sample(rng));
    let n = q.iter().map(|x| x * x).sum::<f64>().sqrt();
    let (w, z) = (Complex64::new(q[0] / n, q[1] / n), Complex64::new(q[2] / n, q[3] / n));
    Mobius {
        a: w,
        b: -z,
        c: z.conj(),
        d: w.conj(),
    }
}

/// Isometry sending `j` to a point at hyperbolic distance `r` in direction `u ∈ S²`.
pub fn translation_from_j(r: f64, u: [f64; 3]) -> Mobius {
    // boost along the vertical axis, then rotate the axis endpoint ∞ to the direction u
    let e = (r / 2.0).exp();
    let boost = Mobius {
        a: Complex64::new(e, 0.0),
        b: Complex64::new(0.0, 0.0),
        c: Complex64::new(0.0, 0.0),
        d: Complex64::new(1.0 / e, 0.0),
    };
    let target = CP1Point::from_sphere(u);
    // rotation taking ∞ to `target`: inverse of the rotation taking the antipode to 0
    let antipode = CP1Point::from_sphere([-u[0], -u[1], -u[2]]);
    let rot = Mobius::rotation_to_zero(&antipode).inverse();
    debug_assert!(rot.apply(&CP1Point::infinity()).approx_eq(&target));
    rot.compose(&boost).compose(&rot.inverse())
}
