//! The trivalent tree dual to the Farey tessellation of the hyperbolic plane.
//!
//! The complementary regions of the tree are indexed by `B = QP^1`, stored as
//! exact reduced fractions ([`BElement`]). A vertex of the tree is the ideal
//! triangle around it ([`Tribone`]); an edge is the pair of triangles sharing it
//! ([`Quadribone`]). `PSL(2,Z)` acts by fractional-linear maps ([`TreeIsometry`]).
//!
//! Everything here is exact integer arithmetic.

use std::cmp::Ordering;
use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// A point of `QP^1`: a reduced fraction `num/den` with `den >= 0`; `1/0` is `∞`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BElement {
    num: BigInt,
    den: BigInt,
}

impl BElement {
    pub fn new(num: impl Into<BigInt>, den: impl Into<BigInt>) -> Result<Self> {
        let (num, den) = (num.into(), den.into());
        if num.is_zero() && den.is_zero() {
            return Err(Error::InvalidElement {
                num: num.to_string(),
                den: den.to_string(),
            });
        }
        Ok(Self::normalized(num, den))
    }

    fn normalized(mut num: BigInt, mut den: BigInt) -> Self {
        let g = num.gcd(&den);
        if !g.is_one() {
            num /= &g;
            den /= &g;
        }
        if den.is_negative() || (den.is_zero() && num.is_negative()) {
            num = -num;
            den = -den;
        }
        Self { num, den }
    }

    pub fn integer(n: i64) -> Self {
        Self {
            num: BigInt::from(n),
            den: BigInt::one(),
        }
    }

    pub fn infinity() -> Self {
        Self {
            num: BigInt::one(),
            den: BigInt::zero(),
        }
    }

    pub fn num(&self) -> &BigInt {
        &self.num
    }

    pub fn den(&self) -> &BigInt {
        &self.den
    }

    pub fn is_infinite(&self) -> bool {
        self.den.is_zero()
    }

    /// `|num₁·den₂ − den₁·num₂| = 1`.
    pub fn is_adjacent(&self, other: &BElement) -> bool {
        (&self.num * &other.den - &self.den * &other.num).abs().is_one()
    }

    /// Value on the extended real line; `∞` maps to `f64::INFINITY`.
    pub fn to_f64(&self) -> f64 {
        if self.is_infinite() {
            return f64::INFINITY;
        }
        match (self.num.to_f64(), self.den.to_f64()) {
            (Some(n), Some(d)) if n.is_finite() && d.is_finite() => n / d,
            _ => ratio_f64(&self.num, &self.den),
        }
    }

    /// The two Farey parents: adjacent elements whose mediant is `self`.
    /// `None` for the three elements of the root triangle.
    pub fn farey_parents(&self) -> Option<(BElement, BElement)> {
        if self.is_root_element() {
            return None;
        }
        if self.den.is_one() {
            let n = &self.num;
            let prev = if n.is_positive() { n - 1 } else { n + 1 };
            return Some((
                BElement {
                    num: prev,
                    den: BigInt::one(),
                },
                BElement::infinity(),
            ));
        }
        // left parent u/v < p/q with p·v − q·u = 1 and 0 < v < q
        let (p, q) = (&self.num, &self.den);
        let eg = p.extended_gcd(q);
        // eg.x·p + eg.y·q = 1, so v = x mod q, u = −y adjusted
        let v = eg.x.mod_floor(q);
        let u = (p * &v - BigInt::one()) / q;
        let left = BElement { num: u, den: v };
        let right = BElement::normalized(p - &left.num, q - &left.den);
        Some((left, right))
    }

    fn is_root_element(&self) -> bool {
        self.is_infinite() || (self.den.is_one() && (self.num.is_zero() || self.num.is_one()))
    }
}

fn ratio_f64(num: &BigInt, den: &BigInt) -> f64 {
    // shift both to keep ~60 significant bits
    let shift = num.bits().max(den.bits()).saturating_sub(60);
    let n = (num >> shift).to_f64().unwrap_or(f64::NAN);
    let d = (den >> shift).to_f64().unwrap_or(f64::NAN);
    n / d
}

impl Ord for BElement {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self.is_infinite(), other.is_infinite()) {
            (true, true) => Ordering::Equal,
            (true, false) => Ordering::Greater,
            (false, true) => Ordering::Less,
            (false, false) => (&self.num * &other.den).cmp(&(&other.num * &self.den)),
        }
    }
}

impl PartialOrd for BElement {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for BElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_infinite() {
            write!(f, "inf")
        } else if self.den.is_one() {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/{}", self.num, self.den)
        }
    }
}

impl fmt::Debug for BElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl FromStr for BElement {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::InvalidElement {
            num: s.to_string(),
            den: String::new(),
        };
        if s == "inf" || s == "∞" {
            return Ok(Self::infinity());
        }
        match s.split_once('/') {
            Some((n, d)) => Self::new(
                BigInt::from_str(n.trim()).map_err(|_| bad())?,
                BigInt::from_str(d.trim()).map_err(|_| bad())?,
            ),
            None => Self::new(BigInt::from_str(s).map_err(|_| bad())?, 1),
        }
    }
}

fn bigint_to_json(n: &BigInt) -> serde_json::Number {
    serde_json::Number::from_str(&n.to_string()).expect("integer literal")
}

impl Serialize for BElement {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = serializer.serialize_struct("BElement", 2)?;
        st.serialize_field("num", &bigint_to_json(&self.num))?;
        st.serialize_field("den", &bigint_to_json(&self.den))?;
        st.end()
    }
}

impl<'de> Deserialize<'de> for BElement {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            num: serde_json::Number,
            den: serde_json::Number,
        }
        let raw = Raw::deserialize(deserializer)?;
        let parse = |n: &serde_json::Number| {
            BigInt::from_str(&n.to_string()).map_err(|_| D::Error::custom(format!("not an integer: {n}")))
        };
        BElement::new(parse(&raw.num)?, parse(&raw.den)?).map_err(D::Error::custom)
    }
}

/// Positive circular order of three points on `RP^1` (increasing, wrapping through `∞`).
pub fn circular_order_positive(x: &BElement, y: &BElement, z: &BElement) -> bool {
    (x < y && y < z) || (y < z && z < x) || (z < x && x < y)
}

/// A vertex of the tree: an ideal triangle of the Farey tessellation.
///
/// Stored sorted ascending, which is the positively oriented rotation with the
/// smallest element first.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Tribone([BElement; 3]);

impl Tribone {
    pub fn new(a: BElement, b: BElement, c: BElement) -> Result<Self> {
        if !(a.is_adjacent(&b) && b.is_adjacent(&c) && a.is_adjacent(&c)) {
            return Err(Error::NotATribone(a.to_string(), b.to_string(), c.to_string()));
        }
        let mut v = [a, b, c];
        v.sort();
        Ok(Self(v))
    }

    pub fn elements(&self) -> &[BElement; 3] {
        &self.0
    }

    pub fn contains(&self, b: &BElement) -> bool {
        self.0.contains(b)
    }

    /// Positively oriented rotation beginning at `first`.
    pub fn rotation_from(&self, first: &BElement) -> Option<[BElement; 3]> {
        let i = self.0.iter().position(|e| e == first)?;
        Some([
            self.0[i].clone(),
            self.0[(i + 1) % 3].clone(),
            self.0[(i + 2) % 3].clone(),
        ])
    }

    /// The element of the triangle not in `{u, v}`.
    pub fn third(&self, u: &BElement, v: &BElement) -> Option<&BElement> {
        if !(self.contains(u) && self.contains(v)) || u == v {
            return None;
        }
        self.0.iter().find(|e| *e != u && *e != v)
    }

    /// Newest element relative to the root triangle; `None` for the root itself.
    pub fn youngest(&self) -> Option<&BElement> {
        let [x, y, z] = &self.0;
        if z.is_infinite() {
            // (n, n+1, ∞)
            if x.num().is_zero() {
                return None;
            }
            return Some(if x.num().is_positive() { y } else { x });
        }
        self.0.iter().max_by(|a, b| a.den().cmp(b.den()))
    }

    /// The adjacent triangle one step closer to the root.
    pub fn parent(&self) -> Option<Tribone> {
        let y = self.youngest()?;
        let [l, r] = self.others(y);
        let x = neighbor_across(&l, &r, y).expect("triangle vertices are adjacent");
        Some(Tribone::new(l, r, x).expect("Farey triangle"))
    }

    fn others(&self, e: &BElement) -> [BElement; 2] {
        let v: Vec<BElement> = self.0.iter().filter(|x| *x != e).cloned().collect();
        [v[0].clone(), v[1].clone()]
    }

    /// The three triangles sharing an edge with this one.
    pub fn neighbors(&self) -> [Tribone; 3] {
        let [a, b, c] = &self.0;
        let across = |u: &BElement, v: &BElement, w: &BElement| {
            let d = neighbor_across(u, v, w).expect("triangle vertices are adjacent");
            Tribone::new(u.clone(), v.clone(), d).expect("Farey triangle")
        };
        [across(a, b, c), across(b, c, a), across(a, c, b)]
    }

    /// The triangle with this one's youngest element and its Farey parents, or the
    /// root for the three root elements.
    pub fn home_of(b: &BElement) -> Tribone {
        match b.farey_parents() {
            None => root_tribone(),
            Some((l, r)) => Tribone::new(l, r, b.clone()).expect("mediant triangle"),
        }
    }

    /// Path `[self, parent, …, root]`.
    pub fn ancestors(&self) -> Vec<Tribone> {
        let mut out = vec![self.clone()];
        while let Some(p) = out.last().unwrap().parent() {
            out.push(p);
        }
        out
    }

    pub fn depth(&self) -> usize {
        self.ancestors().len() - 1
    }

    pub fn is_root(&self) -> bool {
        self.youngest().is_none()
    }
}

impl fmt::Debug for Tribone {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.0[0], self.0[1], self.0[2])
    }
}

impl fmt::Display for Tribone {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// The base vertex `v₀`: the triangle `(0, 1, ∞)`.
pub fn root_tribone() -> Tribone {
    Tribone([BElement::integer(0), BElement::integer(1), BElement::infinity()])
}

/// The vertex `d ≠ w` of the other Farey triangle on the edge `{u, v}`.
pub fn neighbor_across(u: &BElement, v: &BElement, w: &BElement) -> Result<BElement> {
    if !(u.is_adjacent(v) && v.is_adjacent(w) && u.is_adjacent(w)) {
        return Err(Error::NotATribone(u.to_string(), v.to_string(), w.to_string()));
    }
    let sum = BElement::normalized(&u.num + &v.num, &u.den + &v.den);
    if &sum != w {
        return Ok(sum);
    }
    Ok(BElement::normalized(&u.num - &v.num, &u.den - &v.den))
}

/// An edge of the tree, as the oriented quadruple `(a, b, c, d)` whose triangles are
/// `(a, b, c)` and `(d, c, b)`, both positively oriented. Equal up to the reversal
/// `(d, c, b, a)`; the lexicographically smaller representative is stored.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Quadribone([BElement; 4]);

impl Quadribone {
    pub fn new(a: BElement, b: BElement, c: BElement, d: BElement) -> Result<Self> {
        for (x, y, z) in [(&a, &b, &c), (&d, &c, &b)] {
            if !(x.is_adjacent(y) && y.is_adjacent(z) && x.is_adjacent(z)) || !circular_order_positive(x, y, z) {
                return Err(Error::NotATribone(x.to_string(), y.to_string(), z.to_string()));
            }
        }
        if a == d {
            return Err(Error::NotATribone(a.to_string(), b.to_string(), c.to_string()));
        }
        let fwd = [a, b, c, d];
        let rev = [fwd[3].clone(), fwd[2].clone(), fwd[1].clone(), fwd[0].clone()];
        Ok(Self(if rev < fwd { rev } else { fwd }))
    }

    /// The edge of `t` opposite to `far`, oriented from `t`: `(far, u, v, new)`.
    pub fn glued(t: &Tribone, far: &BElement) -> Option<Self> {
        let [x, u, v] = t.rotation_from(far)?;
        let d = neighbor_across(&u, &v, &x).ok()?;
        Quadribone::new(x, u, v, d).ok()
    }

    pub fn elements(&self) -> &[BElement; 4] {
        &self.0
    }

    /// Orientation starting from the triangle that contains `first`.
    pub fn oriented_from(&self, first: &BElement) -> Option<[BElement; 4]> {
        let q = &self.0;
        if &q[0] == first {
            Some(q.clone())
        } else if &q[3] == first {
            Some([q[3].clone(), q[2].clone(), q[1].clone(), q[0].clone()])
        } else {
            None
        }
    }

    pub fn tribones(&self) -> (Tribone, Tribone) {
        let [a, b, c, d] = &self.0;
        (
            Tribone::new(a.clone(), b.clone(), c.clone()).expect("validated"),
            Tribone::new(d.clone(), c.clone(), b.clone()).expect("validated"),
        )
    }

    pub fn edge(&self) -> (&BElement, &BElement) {
        (&self.0[1], &self.0[2])
    }
}

impl fmt::Debug for Quadribone {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {}, {})", self.0[0], self.0[1], self.0[2], self.0[3])
    }
}

impl fmt::Display for Quadribone {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Path of triangles from `from` to `to` (inclusive) through their lowest common ancestor.
pub fn tree_path(from: &Tribone, to: &Tribone) -> Vec<Tribone> {
    let up_from = from.ancestors();
    let up_to = to.ancestors();
    let index: HashMap<&Tribone, usize> = up_from.iter().enumerate().map(|(i, t)| (t, i)).collect();
    let (j, i) = up_to
        .iter()
        .enumerate()
        .find_map(|(j, t)| index.get(t).map(|&i| (j, i)))
        .expect("all ancestor chains end at the root");
    let mut path: Vec<Tribone> = up_from[..=i].to_vec();
    path.extend(up_to[..j].iter().rev().cloned());
    path
}

pub fn tree_distance(a: &Tribone, b: &Tribone) -> usize {
    tree_path(a, b).len() - 1
}

/// A vertex reached by breadth-first search, with the step that reached it.
#[derive(Clone, Debug)]
pub struct BallVertex {
    pub tribone: Tribone,
    pub depth: usize,
    /// The previous vertex and the element this vertex adds to it.
    pub via: Option<(Tribone, BElement)>,
}

/// Vertices within distance `n` of `v`, breadth-first, siblings ordered by their new element.
pub fn ball_vertices(v: &Tribone, n: usize) -> Vec<BallVertex> {
    let mut out = vec![BallVertex {
        tribone: v.clone(),
        depth: 0,
        via: None,
    }];
    let mut seen: HashSet<Tribone> = HashSet::from([v.clone()]);
    let mut frontier = 0;
    for depth in 1..=n {
        let end = out.len();
        let mut layer = Vec::new();
        for i in frontier..end {
            let t = out[i].tribone.clone();
            for nb in t.neighbors() {
                if seen.insert(nb.clone()) {
                    let new = nb.elements().iter().find(|e| !t.contains(e)).unwrap().clone();
                    layer.push(BallVertex {
                        tribone: nb,
                        depth,
                        via: Some((t.clone(), new)),
                    });
                }
            }
        }
        layer.sort_by(|a, b| a.via.as_ref().unwrap().1.cmp(&b.via.as_ref().unwrap().1));
        frontier = end;
        out.extend(layer);
    }
    out
}

/// A finite subset of `B`, optionally certified as a connected union of quadribones.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct BoneSet {
    pub elements: BTreeSet<BElement>,
    pub connected: bool,
    pub quadribones: Vec<Quadribone>,
}

impl BoneSet {
    pub fn from_elements(elements: impl IntoIterator<Item = BElement>) -> Self {
        Self {
            elements: elements.into_iter().collect(),
            connected: false,
            quadribones: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn contains(&self, b: &BElement) -> bool {
        self.elements.contains(b)
    }

    pub fn is_subset(&self, other: &BoneSet) -> bool {
        self.elements.is_subset(&other.elements)
    }
}

/// `Bₙ(v)`: the elements of all triangles within tree distance `n` of `v`.
pub fn ball(v: &Tribone, n: usize) -> BoneSet {
    let verts = ball_vertices(v, n);
    let mut elements = BTreeSet::new();
    let mut quadribones = Vec::new();
    for bv in &verts {
        elements.extend(bv.tribone.elements().iter().cloned());
        if let Some((prev, new)) = &bv.via {
            let far = prev
                .elements()
                .iter()
                .find(|e| !bv.tribone.contains(e))
                .expect("adjacent triangles share an edge");
            let q = Quadribone::glued(prev, far).expect("edge of the tessellation");
            debug_assert!(q.elements().contains(new));
            quadribones.push(q);
        }
    }
    BoneSet {
        elements,
        connected: true,
        quadribones,
    }
}

/// Least number of quadribones in a connected union meeting both `a` and `c`;
/// `0` when the sets intersect, `None` if either is empty.
///
/// The triangles containing an element form a line in the tree, so the answer is
/// `max(1, distance between the two lines)` minimized over pairs.
pub fn min_bone_between(a: &BoneSet, c: &BoneSet) -> Option<usize> {
    let mut best: Option<usize> = None;
    for x in &a.elements {
        for y in &c.elements {
            let path = tree_path(&Tribone::home_of(x), &Tribone::home_of(y));
            let last_x = path.iter().rposition(|t| t.contains(x)).expect("path starts on x");
            let first_y = path.iter().position(|t| t.contains(y)).expect("path ends on y");
            let d = if x == y { 0 } else { first_y.saturating_sub(last_x).max(1) };
            best = Some(best.map_or(d, |b| b.min(d)));
        }
    }
    best
}

/// `true` iff no connected union of at most `p` quadribones meets both sets.
pub fn bones_and_disconnection(a: &BoneSet, c: &BoneSet, p: usize) -> bool {
    match min_bone_between(a, c) {
        None => true,
        Some(m) => m > p,
    }
}

/// An element of `PSL(2,Z)`, sign-normalized so that `c > 0`, or `c = 0` and `d > 0`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct TreeIsometry {
    m: [BigInt; 4],
}

impl TreeIsometry {
    pub fn new(a: impl Into<BigInt>, b: impl Into<BigInt>, c: impl Into<BigInt>, d: impl Into<BigInt>) -> Result<Self> {
        let m = [a.into(), b.into(), c.into(), d.into()];
        let det = &m[0] * &m[3] - &m[1] * &m[2];
        if !det.is_one() {
            return Err(Error::BadDeterminant(det.to_string()));
        }
        Ok(Self::normalized(m))
    }

    fn normalized(mut m: [BigInt; 4]) -> Self {
        if m[2].is_negative() || (m[2].is_zero() && m[3].is_negative()) {
            for x in m.iter_mut() {
                *x = -&*x;
            }
        }
        Self { m }
    }

    pub fn identity() -> Self {
        Self::new(1, 0, 0, 1).unwrap()
    }

    /// `z ↦ z + 1`.
    pub fn translation() -> Self {
        Self::new(1, 1, 0, 1).unwrap()
    }

    /// `z ↦ −1/z`.
    pub fn inversion() -> Self {
        Self::new(0, -1, 1, 0).unwrap()
    }

    pub fn entries(&self) -> &[BigInt; 4] {
        &self.m
    }

    pub fn compose(&self, other: &TreeIsometry) -> TreeIsometry {
        let [a, b, c, d] = &self.m;
        let [e, f, g, h] = &other.m;
        Self::normalized([a * e + b * g, a * f + b * h, c * e + d * g, c * f + d * h])
    }

    pub fn inverse(&self) -> TreeIsometry {
        let [a, b, c, d] = &self.m;
        Self::normalized([d.clone(), -b, -c, a.clone()])
    }

    pub fn pow(&self, n: u32) -> TreeIsometry {
        let mut acc = Self::identity();
        let mut base = self.clone();
        let mut n = n;
        while n > 0 {
            if n & 1 == 1 {
                acc = acc.compose(&base);
            }
            base = base.compose(&base);
            n >>= 1;
        }
        acc
    }

    /// Trace, sign-normalized.
    pub fn trace(&self) -> BigInt {
        &self.m[0] + &self.m[3]
    }

    pub fn is_hyperbolic(&self) -> bool {
        self.trace().abs() > BigInt::from(2)
    }

    pub fn act(&self, b: &BElement) -> BElement {
        act_on_b(self, b)
    }

    pub fn act_tribone(&self, t: &Tribone) -> Tribone {
        let [x, y, z] = t.elements();
        Tribone::new(self.act(x), self.act(y), self.act(z)).expect("PSL(2,Z) preserves the tessellation")
    }

    pub fn act_quadribone(&self, q: &Quadribone) -> Quadribone {
        let [a, b, c, d] = q.elements();
        Quadribone::new(self.act(a), self.act(b), self.act(c), self.act(d))
            .expect("PSL(2,Z) preserves orientation and adjacency")
    }
}

impl fmt::Debug for TreeIsometry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[[{}, {}], [{}, {}]]", self.m[0], self.m[1], self.m[2], self.m[3])
    }
}

impl fmt::Display for TreeIsometry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{},{}", self.m[0], self.m[1], self.m[2], self.m[3])
    }
}

impl FromStr for TreeIsometry {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        let bad = || Error::InvalidConfig(format!("expected four comma-separated integers, got {s:?}"));
        if parts.len() != 4 {
            return Err(bad());
        }
        let v: Vec<BigInt> = parts
            .iter()
            .map(|p| BigInt::from_str(p).map_err(|_| bad()))
            .collect::<Result<_>>()?;
        Self::new(v[0].clone(), v[1].clone(), v[2].clone(), v[3].clone())
    }
}

impl Serialize for TreeIsometry {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for TreeIsometry {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Fractional-linear image `(a·p + b·q)/(c·p + d·q)`; unimodularity keeps it reduced.
pub fn act_on_b(g: &TreeIsometry, x: &BElement) -> BElement {
    let [a, b, c, d] = &g.m;
    let (p, q) = (&x.num, &x.den);
    BElement::normalized(a * p + b * q, c * p + d * q)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(s: &str) -> BElement {
        s.parse().unwrap()
    }

    #[test]
    fn root_is_positive_farey_triangle() {
        let r = root_tribone();
        let [a, b, c] = r.elements();
        assert_eq!((a, b, c), (&e("0"), &e("1"), &e("inf")));
        assert!(a.is_adjacent(b) && b.is_adjacent(c) && a.is_adjacent(c));
        assert!(circular_order_positive(a, b, c));
        assert!(!circular_order_positive(b, a, c));
    }

    #[test]
    fn neighbor_across_examples() {
        assert_eq!(neighbor_across(&e("0"), &e("1"), &e("inf")).unwrap(), e("1/2"));
        assert_eq!(neighbor_across(&e("0"), &e("inf"), &e("1")).unwrap(), e("-1"));
        assert_eq!(neighbor_across(&e("1"), &e("inf"), &e("0")).unwrap(), e("2"));
        assert!(matches!(
            neighbor_across(&e("0"), &e("2"), &e("inf")),
            Err(Error::NotATribone(..))
        ));
    }

    #[test]
    fn element_normalization_and_parse() {
        assert_eq!(BElement::new(-2, -4).unwrap(), e("1/2"));
        assert_eq!(BElement::new(-3, 0).unwrap(), BElement::infinity());
        assert!(BElement::new(0, 0).is_err());
        assert_eq!(e("-3/6"), BElement::new(1, -2).unwrap());
        assert_eq!(BElement::infinity().num(), &BigInt::one());
    }

    #[test]
    fn ordering_puts_infinity_last() {
        let mut v = vec![e("inf"), e("1/2"), e("-7"), e("0")];
        v.sort();
        assert_eq!(v, vec![e("-7"), e("0"), e("1/2"), e("inf")]);
    }

    #[test]
    fn farey_parents_are_adjacent_and_mediate() {
        for s in ["2/5", "-1/2", "3", "-4", "-1", "7/12", "-5/3"] {
            let x = e(s);
            let (l, r) = x.farey_parents().unwrap();
            assert!(l.is_adjacent(&r) && l.is_adjacent(&x) && r.is_adjacent(&x), "{s}");
            let t = Tribone::home_of(&x);
            assert_eq!(t.youngest(), Some(&x), "{s}");
        }
        assert!(e("0").farey_parents().is_none());
        assert!(e("inf").farey_parents().is_none());
    }

    #[test]
    fn parents_climb_to_root() {
        let t = Tribone::home_of(&e("5/13"));
        let chain = t.ancestors();
        assert!(chain.last().unwrap().is_root());
        for w in chain.windows(2) {
            assert_eq!(tree_distance(&w[0], &w[1]), 1);
        }
        assert_eq!(Tribone::home_of(&e("1/2")).depth(), 1);
        assert_eq!(Tribone::home_of(&e("-1")).depth(), 1);
        assert_eq!(Tribone::home_of(&e("3")).depth(), 2);
        assert_eq!(Tribone::home_of(&e("2/3")).depth(), 2);
    }

    #[test]
    fn ball_sizes_small() {
        let r = root_tribone();
        assert_eq!(ball(&r, 0).elements, r.elements().iter().cloned().collect());
        for n in 0..=5 {
            assert_eq!(ball(&r, n).len(), 3 << n);
            assert!(ball(&r, n).is_subset(&ball(&r, n + 1)));
        }
    }

    #[test]
    fn quadribone_has_two_tribones() {
        let q = Quadribone::glued(&root_tribone(), &e("inf")).unwrap();
        assert_eq!(q.oriented_from(&e("inf")).unwrap(), [e("inf"), e("0"), e("1"), e("1/2")]);
        let (t1, t2) = q.tribones();
        let both = [t1, t2];
        assert!(both.contains(&root_tribone()));
        assert!(both.contains(&Tribone::new(e("0"), e("1/2"), e("1")).unwrap()));
        // reversal gives the same edge
        let r = Quadribone::new(e("1/2"), e("1"), e("0"), e("inf")).unwrap();
        assert_eq!(q, r);
        assert!(Quadribone::new(e("0"), e("1"), e("inf"), e("inf")).is_err());
    }

    #[test]
    fn isometry_action_examples() {
        let t = TreeIsometry::translation();
        assert_eq!(t.act(&e("0")), e("1"));
        assert_eq!(t.act(&e("inf")), e("inf"));
        let s = TreeIsometry::inversion();
        assert_eq!(s.act(&e("0")), e("inf"));
        assert_eq!(s.act(&e("2")), e("-1/2"));
        assert!(TreeIsometry::new(2, 1, 1, 2).is_err());
        let g: TreeIsometry = "2,1,1,1".parse().unwrap();
        assert!(g.is_hyperbolic());
        assert_eq!(g.compose(&g.inverse()), TreeIsometry::identity());
        assert_eq!(g.pow(3), g.compose(&g).compose(&g));
    }

    #[test]
    fn disconnection_same_set() {
        let b1 = ball(&root_tribone(), 1);
        assert!(!bones_and_disconnection(&b1, &b1, 0));
        assert_eq!(min_bone_between(&b1, &b1), Some(0));
    }

    #[test]
    fn json_roundtrip_big() {
        let x = BElement::new(BigInt::from(10).pow(30) + 1, BigInt::from(7)).unwrap();
        let s = serde_json::to_string(&x).unwrap();
        assert!(s.starts_with("{\"num\":1000000000000000000000000000001,"));
        let y: BElement = serde_json::from_str(&s).unwrap();
        assert_eq!(x, y);
        assert_eq!(serde_json::to_string(&BElement::infinity()).unwrap(), r#"{"num":1,"den":0}"#);
    }
}
