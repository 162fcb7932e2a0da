//! The complex projective line: homogeneous points, Möbius maps, the cross-ratio
//! and the local rules `O₃`, `O₄`.
//!
//! Cross-ratio convention: `[a;b;c;d] = M(d)` where `M` sends `a, b, c` to `0, 1, ∞`,
//! so `[0;1;∞;z] = z`.

use std::fmt;

use num_complex::Complex64;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::tree::BElement;

/// Projective equality threshold.
pub const EPS_PROJ: f64 = 1e-12;

/// Dead zone for sign tests on imaginary parts.
pub const EPS_SIGN: f64 = 1e-12;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// A point `[z : w]` of `CP^1`, scaled so `|z|² + |w|² = 1` and `w` is real and non-negative.
#[derive(Clone, Copy, PartialEq)]
pub struct CP1Point {
    z: Complex64,
    w: Complex64,
}

impl CP1Point {
    pub fn new(z: Complex64, w: Complex64) -> Result<Self> {
        let n = (z.norm_sqr() + w.norm_sqr()).sqrt();
        if !(n.is_finite() && n > 0.0) {
            return Err(Error::NonFiniteDensity(format!("homogeneous pair ({z}, {w})")));
        }
        Ok(Self::scaled(z / n, w / n))
    }

    // assumes unit norm
    fn scaled(z: Complex64, w: Complex64) -> Self {
        let r = w.norm();
        if r == 0.0 {
            return Self { z: ONE, w: ZERO };
        }
        let phase = w.conj() / r;
        Self {
            z: z * phase,
            w: Complex64::new(r, 0.0),
        }
    }

    fn from_pair(z: Complex64, w: Complex64) -> Self {
        Self::new(z, w).expect("nonzero homogeneous pair")
    }

    pub fn finite(c: Complex64) -> Self {
        Self::from_pair(c, ONE)
    }

    pub fn from_re_im(re: f64, im: f64) -> Self {
        Self::finite(Complex64::new(re, im))
    }

    pub fn infinity() -> Self {
        Self { z: ONE, w: ZERO }
    }

    /// The real point `p/q` on `RP^1 ⊂ CP^1`.
    pub fn from_belement(b: &BElement) -> Self {
        if b.is_infinite() {
            return Self::infinity();
        }
        let x = b.to_f64();
        if x.is_finite() {
            Self::finite(Complex64::new(x, 0.0))
        } else {
            Self::infinity()
        }
    }

    pub fn homogeneous(&self) -> (Complex64, Complex64) {
        (self.z, self.w)
    }

    /// Affine coordinate, `None` at `∞`.
    pub fn to_complex(&self) -> Option<Complex64> {
        if self.w.norm() < EPS_PROJ {
            None
        } else {
            Some(self.z / self.w)
        }
    }

    pub fn is_infinite(&self) -> bool {
        self.to_complex().is_none()
    }

    /// `|z₁w₂ − z₂w₁|`, half the chordal distance.
    pub fn wedge(&self, other: &CP1Point) -> f64 {
        (self.z * other.w - other.z * self.w).norm()
    }

    /// Chordal distance on the unit sphere; at most 2.
    pub fn chordal(&self, other: &CP1Point) -> f64 {
        2.0 * self.wedge(other)
    }

    pub fn approx_eq(&self, other: &CP1Point) -> bool {
        self.wedge(other) < EPS_PROJ
    }

    pub fn conj(&self) -> CP1Point {
        Self::scaled(self.z.conj(), self.w.conj())
    }

    /// Point of the unit sphere under stereographic projection from the north pole.
    pub fn to_sphere(&self) -> [f64; 3] {
        // [z:w] ↦ (2 Re(z w̄), 2 Im(z w̄), |z|² − |w|²)
        let p = self.z * self.w.conj();
        [2.0 * p.re, 2.0 * p.im, self.z.norm_sqr() - self.w.norm_sqr()]
    }

    pub fn from_sphere(v: [f64; 3]) -> Self {
        let [x, y, s] = v;
        // z = (x + iy)/(1 − s) = (1 + s)/(x − iy)
        if s >= 0.0 {
            Self::from_pair(Complex64::new(1.0 + s, 0.0), Complex64::new(x, -y))
        } else {
            Self::from_pair(Complex64::new(x, y), Complex64::new(1.0 - s, 0.0))
        }
    }
}

impl fmt::Debug for CP1Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.to_complex() {
            None => write!(f, "inf"),
            Some(c) => write!(f, "{}{:+}i", c.re, c.im),
        }
    }
}

impl fmt::Display for CP1Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl std::str::FromStr for CP1Point {
    type Err = Error;

    /// Accepts `inf`, `i`, `-i`, `2`, `1.5-2i`, `3+i`.
    fn from_str(s: &str) -> Result<Self> {
        let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        let bad = || Error::InvalidConfig(format!("cannot parse {s:?} as a point of CP^1"));
        if t == "inf" || t == "∞" {
            return Ok(Self::infinity());
        }
        if t.is_empty() {
            return Err(bad());
        }
        let Some(body) = t.strip_suffix('i') else {
            return t.parse::<f64>().map(|x| Self::from_re_im(x, 0.0)).map_err(|_| bad());
        };
        // split at the last sign that is not an exponent sign or the leading char
        let bytes = body.as_bytes();
        let split = (1..bytes.len())
            .rev()
            .find(|&k| (bytes[k] == b'+' || bytes[k] == b'-') && !matches!(bytes[k - 1], b'e' | b'E'));
        let (re, im) = match split {
            Some(k) => (&body[..k], &body[k..]),
            None => ("0", body),
        };
        let im = match im {
            "" | "+" => 1.0,
            "-" => -1.0,
            x => x.parse::<f64>().map_err(|_| bad())?,
        };
        let re = re.parse::<f64>().map_err(|_| bad())?;
        Ok(Self::from_re_im(re, im))
    }
}

impl Serialize for CP1Point {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Affine {
            re: f64,
            im: f64,
            hom: [f64; 4],
        }
        if self.w == ZERO {
            return serializer.serialize_str("inf");
        }
        let clamp = |x: f64| if x.is_finite() { x } else { f64::MAX.copysign(x) };
        let c = self.z / self.w;
        Affine {
            re: clamp(c.re),
            im: clamp(c.im),
            hom: [self.z.re, self.z.im, self.w.re, self.w.im],
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for CP1Point {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        // buffered untagged enums lose floats under arbitrary-precision numbers
        let v = serde_json::Value::deserialize(deserializer)?;
        let num = |key: &str| v.get(key).and_then(serde_json::Value::as_f64);
        match &v {
            serde_json::Value::String(s) if s == "inf" => return Ok(CP1Point::infinity()),
            serde_json::Value::Object(_) => {}
            _ => return Err(D::Error::custom(format!("expected a point, got {v}"))),
        }
        if let Some(h) = v.get("hom").and_then(serde_json::Value::as_array) {
            let h: Vec<f64> = h.iter().filter_map(serde_json::Value::as_f64).collect();
            if h.len() != 4 {
                return Err(D::Error::custom("hom must have four numbers"));
            }
            let (z, w) = (Complex64::new(h[0], h[1]), Complex64::new(h[2], h[3]));
            if ((z.norm_sqr() + w.norm_sqr()) - 1.0).abs() < 1e-15 {
                // already normalized: keep the bits
                return Ok(CP1Point::scaled(z, w));
            }
            return CP1Point::new(z, w).map_err(D::Error::custom);
        }
        match (num("re"), num("im")) {
            (Some(re), Some(im)) => Ok(CP1Point::from_re_im(re, im)),
            _ => Err(D::Error::custom(format!("expected re and im in {v}"))),
        }
    }
}

/// An element of `PSL(2,C)` as a determinant-one matrix `[[a, b], [c, d]]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mobius {
    pub a: Complex64,
    pub b: Complex64,
    pub c: Complex64,
    pub d: Complex64,
}

impl Mobius {
    pub fn new(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> Result<Self> {
        let det = a * d - b * c;
        if !(det.norm() > 1e-300) || !det.is_finite() {
            return Err(Error::BadDeterminant(det.to_string()));
        }
        let s = det.sqrt();
        Ok(Self {
            a: a / s,
            b: b / s,
            c: c / s,
            d: d / s,
        })
    }

    pub fn identity() -> Self {
        Self {
            a: ONE,
            b: ZERO,
            c: ZERO,
            d: ONE,
        }
    }

    pub fn from_real(m: [f64; 4]) -> Result<Self> {
        Self::new(
            Complex64::new(m[0], 0.0),
            Complex64::new(m[1], 0.0),
            Complex64::new(m[2], 0.0),
            Complex64::new(m[3], 0.0),
        )
    }

    pub fn apply(&self, p: &CP1Point) -> CP1Point {
        let (z, w) = p.homogeneous();
        CP1Point::from_pair(self.a * z + self.b * w, self.c * z + self.d * w)
    }

    pub fn apply_c(&self, z: Complex64) -> CP1Point {
        self.apply(&CP1Point::finite(z))
    }

    /// `self ∘ other`.
    pub fn compose(&self, o: &Mobius) -> Mobius {
        Mobius {
            a: self.a * o.a + self.b * o.c,
            b: self.a * o.b + self.b * o.d,
            c: self.c * o.a + self.d * o.c,
            d: self.c * o.b + self.d * o.d,
        }
    }

    pub fn inverse(&self) -> Mobius {
        Mobius {
            a: self.d,
            b: -self.b,
            c: -self.c,
            d: self.a,
        }
    }

    /// Modulus of the derivative at a finite point, `1/|cz + d|²`.
    pub fn derivative_modulus(&self, z: Complex64) -> f64 {
        1.0 / (self.c * z + self.d).norm_sqr()
    }

    /// The map sending `a, b, c` to `0, 1, ∞`.
    pub fn to_standard(a: &CP1Point, b: &CP1Point, c: &CP1Point) -> Result<Mobius> {
        if !in_o3(a, b, c) {
            return Err(Error::DegenerateTriple);
        }
        // ℓ_p(x) = det[x p] vanishes exactly at p
        let lc_b = b.z * c.w - b.w * c.z;
        let la_b = b.z * a.w - b.w * a.z;
        Mobius::new(lc_b * a.w, -lc_b * a.z, la_b * c.w, -la_b * c.z)
    }

    /// The map sending `0, 1, ∞` to `a, b, c`.
    pub fn from_standard(a: &CP1Point, b: &CP1Point, c: &CP1Point) -> Result<Mobius> {
        Ok(Self::to_standard(a, b, c)?.inverse())
    }

    /// The unique map with `M(a) = a'`, `M(b) = b'`, `M(c) = c'`.
    pub fn from_triples(src: [&CP1Point; 3], dst: [&CP1Point; 3]) -> Result<Mobius> {
        let s = Self::to_standard(src[0], src[1], src[2])?;
        let t = Self::from_standard(dst[0], dst[1], dst[2])?;
        Ok(t.compose(&s))
    }

    /// Unitary rotation `[[w̄, −z̄]... ]` sending `p` to `0 = [0:1]`.
    pub fn rotation_to_zero(p: &CP1Point) -> Mobius {
        let (z, w) = p.homogeneous();
        Mobius {
            a: w,
            b: -z,
            c: z.conj(),
            d: w.conj(),
        }
    }

    pub fn max_abs_entry(&self) -> f64 {
        [self.a, self.b, self.c, self.d].iter().map(|x| x.norm()).fold(0.0, f64::max)
    }
}

/// The cross-ratio `[a;b;c;d]` as a point of `CP^1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CrossRatioValue(pub CP1Point);

impl CrossRatioValue {
    pub fn point(&self) -> &CP1Point {
        &self.0
    }

    pub fn value(&self) -> Option<Complex64> {
        self.0.to_complex()
    }

    /// Imaginary part; `0` at `∞`.
    pub fn im(&self) -> f64 {
        self.value().map_or(0.0, |c| c.im)
    }
}

pub fn cross_ratio(a: &CP1Point, b: &CP1Point, c: &CP1Point, d: &CP1Point) -> Result<CrossRatioValue> {
    Ok(CrossRatioValue(Mobius::to_standard(a, b, c)?.apply(d)))
}

/// Affine cross-ratio of four complex numbers.
pub fn cross_ratio_c(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> Complex64 {
    (d - a) * (b - c) / ((d - c) * (b - a))
}

pub fn in_o3(a: &CP1Point, b: &CP1Point, c: &CP1Point) -> bool {
    !a.approx_eq(b) && !b.approx_eq(c) && !a.approx_eq(c)
}

/// Which side of the circle through the first three points counts as admissible.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SignConvention {
    /// `Im [a;b;c;d] < 0`.
    #[default]
    Negative,
    /// `Im [a;b;c;d] ≠ 0`.
    Nonzero,
}

impl fmt::Display for SignConvention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SignConvention::Negative => "negative",
            SignConvention::Nonzero => "nonzero",
        })
    }
}

impl std::str::FromStr for SignConvention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "negative" | "im<0" => Ok(Self::Negative),
            "nonzero" | "im!=0" => Ok(Self::Nonzero),
            _ => Err(Error::InvalidConfig(format!("unknown sign convention {s:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Inside,
    Outside,
    /// Within the dead zone of the boundary, or the first three points collide.
    Degenerate,
}

impl Verdict {
    pub fn holds(self) -> bool {
        self == Verdict::Inside
    }
}

/// Sign of the imaginary part of a cross-ratio, `0` inside the dead zone.
pub fn im_sign(chi: &CrossRatioValue) -> i8 {
    match chi.value() {
        None => 0,
        Some(c) if c.im.abs() < EPS_SIGN => 0,
        Some(c) if c.im < 0.0 => -1,
        Some(_) => 1,
    }
}

pub fn o4_verdict(a: &CP1Point, b: &CP1Point, c: &CP1Point, d: &CP1Point, conv: SignConvention) -> Verdict {
    let Ok(chi) = cross_ratio(a, b, c, d) else {
        return Verdict::Degenerate;
    };
    match (im_sign(&chi), conv) {
        (0, _) => Verdict::Degenerate,
        (-1, _) | (1, SignConvention::Nonzero) => Verdict::Inside,
        _ => Verdict::Outside,
    }
}

pub fn in_o4(a: &CP1Point, b: &CP1Point, c: &CP1Point, d: &CP1Point, conv: SignConvention) -> bool {
    o4_verdict(a, b, c, d, conv).holds()
}

/// A permutation of four positions: `σ·(x₀,x₁,x₂,x₃) = (x_{σ₀}, x_{σ₁}, x_{σ₂}, x_{σ₃})`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Perm4(pub [usize; 4]);

impl Perm4 {
    pub const IDENTITY: Perm4 = Perm4([0, 1, 2, 3]);
    pub const REVERSAL: Perm4 = Perm4([3, 2, 1, 0]);

    pub fn all() -> Vec<Perm4> {
        let mut out = Vec::with_capacity(24);
        for i in 0..4 {
            for j in 0..4 {
                for k in 0..4 {
                    for l in 0..4 {
                        let p = [i, j, k, l];
                        let mut seen = [false; 4];
                        p.iter().for_each(|&x| seen[x] = true);
                        if seen.iter().all(|&s| s) {
                            out.push(Perm4(p));
                        }
                    }
                }
            }
        }
        out
    }

    pub fn even() -> Vec<Perm4> {
        Self::all().into_iter().filter(|p| p.is_even()).collect()
    }

    pub fn is_even(&self) -> bool {
        let p = self.0;
        let inversions = (0..4).flat_map(|i| (i + 1..4).map(move |j| (i, j))).filter(|&(i, j)| p[i] > p[j]).count();
        inversions % 2 == 0
    }

    pub fn apply<T: Clone>(&self, x: &[T; 4]) -> [T; 4] {
        [x[self.0[0]].clone(), x[self.0[1]].clone(), x[self.0[2]].clone(), x[self.0[3]].clone()]
    }
}

/// `[σ(a,b,c,d)]` as a function of `χ = [a;b;c;d]`, evaluated on the normal form `(0, 1, ∞, χ)`.
pub fn permutation_action(sigma: Perm4, chi: &CrossRatioValue) -> CrossRatioValue {
    let q = [
        CP1Point::finite(ZERO),
        CP1Point::finite(ONE),
        CP1Point::infinity(),
        *chi.point(),
    ];
    let [a, b, c, d] = sigma.apply(&q);
    cross_ratio(&a, &b, &c, &d).unwrap_or(CrossRatioValue(CP1Point::infinity()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> CP1Point {
        CP1Point::from_re_im(re, im)
    }

    fn inf() -> CP1Point {
        CP1Point::infinity()
    }

    #[test]
    fn normalization_zero_one_inf() {
        for z in [Complex64::new(0.3, -2.0), Complex64::new(-7.0, 0.5), Complex64::new(1e3, 1e-3)] {
            let chi = cross_ratio(&c(0.0, 0.0), &c(1.0, 0.0), &inf(), &CP1Point::finite(z)).unwrap();
            assert!((chi.value().unwrap() - z).norm() <= 1e-14 * z.norm().max(1.0));
        }
    }

    #[test]
    fn d_equal_a_gives_zero() {
        let (a, b, cc) = (c(2.0, 1.0), c(-1.0, 0.5), c(0.0, -3.0));
        let chi = cross_ratio(&a, &b, &cc, &a).unwrap();
        assert!(chi.value().unwrap().norm() < 1e-12);
        assert!(cross_ratio(&a, &b, &cc, &cc).unwrap().point().is_infinite());
        assert!((cross_ratio(&a, &b, &cc, &b).unwrap().value().unwrap() - 1.0).norm() < 1e-12);
    }

    #[test]
    fn harmonic_quadruple() {
        // oracle: affine formula on the unit circle
        let pts = [(1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.0, -1.0)];
        let zs: Vec<Complex64> = pts.iter().map(|&(x, y)| Complex64::new(x, y)).collect();
        let oracle = cross_ratio_c(zs[0], zs[1], zs[2], zs[3]);
        assert!((oracle - Complex64::new(-1.0, 0.0)).norm() < 1e-15);
        let chi = cross_ratio(&c(1.0, 0.0), &c(0.0, 1.0), &c(-1.0, 0.0), &c(0.0, -1.0)).unwrap();
        assert!((chi.value().unwrap() - oracle).norm() < 1e-12);
    }

    #[test]
    fn degenerate_triple_is_error() {
        assert!(matches!(
            cross_ratio(&c(1.0, 0.0), &c(1.0, 0.0), &inf(), &c(0.0, 1.0)),
            Err(Error::DegenerateTriple)
        ));
    }

    #[test]
    fn o4_examples() {
        let (z, o, i) = (c(0.0, 0.0), c(1.0, 0.0), inf());
        assert!(!in_o4(&z, &o, &i, &c(0.0, 1.0), SignConvention::Negative));
        assert!(in_o4(&z, &o, &i, &c(0.0, 1.0), SignConvention::Nonzero));
        assert!(in_o4(&z, &o, &i, &c(0.0, -1.0), SignConvention::Negative));
        assert!(in_o4(&z, &o, &i, &c(0.0, -1.0), SignConvention::Nonzero));
        assert_eq!(o4_verdict(&z, &o, &i, &c(2.0, 0.0), SignConvention::Negative), Verdict::Degenerate);
        assert!(!in_o4(&z, &o, &i, &c(2.0, 0.0), SignConvention::Nonzero));
        assert_eq!(o4_verdict(&z, &z, &i, &c(2.0, -1.0), SignConvention::Negative), Verdict::Degenerate);
    }

    #[test]
    fn mobius_from_triples_examples() {
        let std = [c(0.0, 0.0), c(1.0, 0.0), inf()];
        let m = Mobius::from_triples([&std[0], &std[1], &std[2]], [&std[0], &std[1], &std[2]]).unwrap();
        for p in [c(0.3, 0.2), c(-4.0, 1.0)] {
            assert!(m.apply(&p).approx_eq(&p));
        }
        // z ↦ 1 − z
        let m = Mobius::from_triples([&std[0], &std[1], &std[2]], [&std[1], &std[0], &std[2]]).unwrap();
        for z in [Complex64::new(0.3, 0.2), Complex64::new(-4.0, 1.0)] {
            let img = m.apply_c(z).to_complex().unwrap();
            assert!((img - (1.0 - z)).norm() < 1e-12);
        }
    }

    #[test]
    fn permutation_examples() {
        let chi = cross_ratio(&c(0.5, 2.0), &c(-1.0, 0.0), &c(3.0, -1.0), &c(0.0, 0.7)).unwrap();
        let x = chi.value().unwrap();
        let rev = permutation_action(Perm4::REVERSAL, &chi).value().unwrap();
        assert!((rev - x).norm() < 1e-12);
        let swap_last = permutation_action(Perm4([0, 1, 3, 2]), &chi).value().unwrap();
        assert!((swap_last - (1.0 - x)).norm() < 1e-12);
        let swap_ac = permutation_action(Perm4([2, 1, 0, 3]), &chi).value().unwrap();
        assert!((swap_ac - 1.0 / x).norm() < 1e-12);
        assert_eq!(Perm4::all().len(), 24);
        assert_eq!(Perm4::even().len(), 12);
        assert!(Perm4::REVERSAL.is_even());
    }

    #[test]
    fn sphere_roundtrip() {
        for p in [c(0.0, 0.0), c(3.0, -2.0), c(1e-8, 1e9), inf()] {
            let q = CP1Point::from_sphere(p.to_sphere());
            assert!(p.approx_eq(&q), "{p:?} vs {q:?}");
        }
        assert_eq!(inf().to_sphere(), [0.0, 0.0, 1.0]);
    }

    #[test]
    fn parse_points() {
        assert!("i".parse::<CP1Point>().unwrap().approx_eq(&c(0.0, 1.0)));
        assert!("-i".parse::<CP1Point>().unwrap().approx_eq(&c(0.0, -1.0)));
        assert!("1.5-2i".parse::<CP1Point>().unwrap().approx_eq(&c(1.5, -2.0)));
        assert!("-1".parse::<CP1Point>().unwrap().approx_eq(&c(-1.0, 0.0)));
        assert!("1e-3+2e+1i".parse::<CP1Point>().unwrap().approx_eq(&c(1e-3, 20.0)));
        assert!("inf".parse::<CP1Point>().unwrap().is_infinite());
        assert!("x".parse::<CP1Point>().is_err());
    }

    #[test]
    fn json_roundtrip_exact() {
        let p = c(0.1234567, -9.87654321);
        let s = serde_json::to_string(&p).unwrap();
        let q: CP1Point = serde_json::from_str(&s).unwrap();
        assert_eq!(p, q);
        assert_eq!(serde_json::to_string(&inf()).unwrap(), "\"inf\"");
        let r: CP1Point = serde_json::from_str(r#"{"re":2.0,"im":-1.0}"#).unwrap();
        assert!(r.approx_eq(&c(2.0, -1.0)));
    }
}
