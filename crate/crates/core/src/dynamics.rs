//! The modular group acting on configurations by `f ↦ f ∘ g`, vanishing half-trees of
//! hyperbolic elements, and the contraction and ergodicity experiments built on them.

use std::cmp::Ordering;
use std::collections::HashMap;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::configdata::MeasuredData;
use crate::cp1::{cross_ratio, CP1Point};
use crate::error::{Error, Result};
use crate::h3measure::EquivariantFamily;
use crate::grow::{glue_step, glue_value, Field, LazyField};
use crate::pleat::bending_angle;
use crate::rng::stream;
use crate::stats::{block_bootstrap_ci, intervals_overlap};
use crate::tree::{ball_vertices, neighbor_across, root_tribone, BElement, Quadribone, TreeIsometry, Tribone};

/// `b ↦ f(g·b)`.
pub struct Acted<'a, F: Field + ?Sized> {
    pub g: TreeIsometry,
    pub inner: &'a mut F,
}

pub fn act<'a, F: Field + ?Sized>(g: &TreeIsometry, f: &'a mut F) -> Acted<'a, F> {
    Acted { g: g.clone(), inner: f }
}

impl<F: Field + ?Sized> Field for Acted<'_, F> {
    fn value(&mut self, b: &BElement) -> Result<CP1Point> {
        self.inner.value(&self.g.act(b))
    }
}

/// The real number `(p + s·√disc)/q` with `q > 0`, `disc` not a square.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QuadSurd {
    pub p: BigInt,
    pub s: BigInt,
    pub disc: BigInt,
    pub q: BigInt,
}

/// Sign of `a + b√d` for `d > 0` not a square.
fn sign_surd(a: &BigInt, b: &BigInt, d: &BigInt) -> Ordering {
    let zero = BigInt::zero();
    match (a.cmp(&zero), b.cmp(&zero)) {
        (Ordering::Equal, sb) => sb,
        (sa, Ordering::Equal) => sa,
        (sa, sb) if sa == sb => sa,
        (sa, _) => {
            // opposite signs: compare a² with b²d
            let c = (a * a).cmp(&(b * b * d));
            if sa == Ordering::Greater {
                c
            } else {
                c.reverse()
            }
        }
    }
}

impl QuadSurd {
    pub fn to_f64(&self) -> f64 {
        use num_traits::ToPrimitive;
        let f = |x: &BigInt| x.to_f64().unwrap_or(f64::NAN);
        (f(&self.p) + f(&self.s) * f(&self.disc).sqrt()) / f(&self.q)
    }

    /// Compares with a point of `RP^1`, `∞` being larger than every real.
    pub fn cmp_element(&self, b: &BElement) -> Ordering {
        if b.is_infinite() {
            return Ordering::Less;
        }
        let (r, t) = (b.num(), b.den());
        sign_surd(&(&self.p * t - r * &self.q), &(&self.s * t), &self.disc)
    }
}

/// Attracting and repelling fixed points of a hyperbolic element.
pub fn fixed_points(g: &TreeIsometry) -> Result<(QuadSurd, QuadSurd)> {
    if !g.is_hyperbolic() {
        return Err(Error::NotHyperbolic(g.to_string()));
    }
    let [a, _, c, d] = g.entries().clone();
    let tr = &a + &d;
    let disc = &tr * &tr - BigInt::from(4);
    // roots of c z² + (d − a) z − b, i.e. (a − d ± √disc)/2c, with c > 0 after normalization
    debug_assert!(c.is_positive());
    let sign = if tr.is_positive() { BigInt::one() } else { -BigInt::one() };
    let mk = |s: BigInt| QuadSurd {
        p: &a - &d,
        s,
        disc: disc.clone(),
        q: BigInt::from(2) * &c,
    };
    Ok((mk(sign.clone()), mk(-sign)))
}

/// Positive circular order on `RP^1` from pairwise comparisons.
fn circular(o_xy: Ordering, o_yz: Ordering, o_zx: Ordering) -> bool {
    use Ordering::*;
    matches!((o_xy, o_yz, o_zx), (Less, Less, Greater) | (Greater, Less, Less) | (Less, Greater, Less))
}

/// Whether the surd lies on the open arc from `u` to `v` that contains `w`.
fn surd_on_arc(x: &QuadSurd, u: &BElement, v: &BElement, w: &BElement) -> bool {
    let o_ux = x.cmp_element(u).reverse();
    let o_xv = x.cmp_element(v);
    let o_vu = v.cmp(u);
    let o_uw = u.cmp(w);
    let o_wv = w.cmp(v);
    circular(o_ux, o_xv, o_vu) == circular(o_uw, o_wv, o_vu)
}

/// The elements on one side of a Farey edge `(u, v)`, endpoints included.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct HalfTree {
    pub u: BElement,
    pub v: BElement,
    /// Third vertex of the triangle on the kept side.
    pub w: BElement,
}

impl HalfTree {
    pub fn contains(&self, b: &BElement) -> bool {
        if b == &self.u || b == &self.v {
            return true;
        }
        self.contains_interior(b)
    }

    fn contains_interior(&self, b: &BElement) -> bool {
        if b == &self.u || b == &self.v {
            return false;
        }
        let pos = |x: &BElement| crate::tree::circular_order_positive(&self.u, x, &self.v);
        pos(b) == pos(&self.w)
    }

    pub fn contains_surd(&self, x: &QuadSurd) -> bool {
        surd_on_arc(x, &self.u, &self.v, &self.w)
    }

    /// Exact containment of half-trees, by comparing their boundary arcs.
    pub fn is_subset_of(&self, other: &HalfTree) -> bool {
        [&self.u, &self.v, &self.w].iter().all(|b| other.contains(b))
            && !self.contains_interior(&other.u)
            && !self.contains_interior(&other.v)
    }

    /// The triangle on the kept side of the edge.
    pub fn inner_tribone(&self) -> Tribone {
        Tribone::new(self.u.clone(), self.v.clone(), self.w.clone()).expect("edge triangles are tribones")
    }

    pub fn shares_endpoint(&self, other: &HalfTree) -> bool {
        self.u == other.u || self.u == other.v || self.v == other.u || self.v == other.v
    }
}

/// Edge `(u, v)` of `t` whose far arc contains `x`, as `(u, v, opposite vertex)`.
fn arc_containing(t: &Tribone, x: &QuadSurd) -> (BElement, BElement, BElement) {
    let [a, b, c] = t.elements().clone();
    let cands = [(a.clone(), b.clone(), c.clone()), (b.clone(), c.clone(), a.clone()), (c, a, b)];
    for (u, v, w) in cands {
        let opp = neighbor_across(&u, &v, &w).expect("edges of tribones are Farey edges");
        if surd_on_arc(x, &u, &v, &opp) {
            return (u, v, w);
        }
    }
    unreachable!("an irrational point lies on exactly one arc of a triangle")
}

/// Cut edges of the axis of a hyperbolic element and their half-trees.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VanishingSequence {
    pub gamma: TreeIsometry,
    /// Triangle on the axis nearest `(0, 1, ∞)`.
    pub axis_start: Tribone,
    /// Cut edges walking toward the attracting point, with the far side kept.
    pub forward: Vec<HalfTree>,
    /// Cut edges walking toward the repelling point.
    pub backward: Vec<HalfTree>,
    /// `U_n⁺ = forward[n + offset]`.
    pub offset: usize,
}

fn walk(start: &Tribone, x: &QuadSurd, n: usize) -> Vec<HalfTree> {
    let mut out = Vec::with_capacity(n);
    let mut t = start.clone();
    for _ in 0..n {
        let (u, v, w) = arc_containing(&t, x);
        let far = neighbor_across(&u, &v, &w).expect("Farey edge");
        out.push(HalfTree {
            u: u.clone(),
            v: v.clone(),
            w: far.clone(),
        });
        t = Tribone::new(u, v, far).expect("neighbors are tribones");
    }
    out
}

/// The first `n` sets of the vanishing sequences of `g` and `g⁻¹`.
pub fn vanishing_sets(g: &TreeIsometry, n: usize) -> Result<VanishingSequence> {
    let (plus, minus) = fixed_points(g)?;
    // walk from the root until the two fixed points are separated
    let mut t = root_tribone();
    loop {
        let (u, v, w) = arc_containing(&t, &plus);
        let opp = neighbor_across(&u, &v, &w)?;
        if surd_on_arc(&minus, &u, &v, &opp) {
            t = Tribone::new(u, v, opp)?;
        } else {
            break;
        }
    }
    let backward = walk(&t, &minus, n + 1);
    let mut forward = walk(&t, &plus, n + 3);
    let offset = forward
        .iter()
        .position(|h| !h.shares_endpoint(&backward[0]))
        .expect("consecutive cut edges cannot all share an endpoint with a fixed edge");
    forward.truncate(n + offset);
    Ok(VanishingSequence {
        gamma: g.clone(),
        axis_start: t,
        forward,
        backward: backward[..n].to_vec(),
        offset,
    })
}

impl VanishingSequence {
    pub fn len(&self) -> usize {
        self.backward.len()
    }

    pub fn is_empty(&self) -> bool {
        self.backward.is_empty()
    }

    pub fn plus(&self, n: usize) -> &HalfTree {
        &self.forward[n + self.offset]
    }

    pub fn minus(&self, n: usize) -> &HalfTree {
        &self.backward[n]
    }

    /// Quadribone crossed by the axis at the `n`-th forward cut.
    pub fn cut_quadribone(&self, n: usize) -> Quadribone {
        let h = self.plus(n);
        let near = neighbor_across(&h.u, &h.v, &h.w).expect("Farey edge");
        Quadribone::glued(&Tribone::new(h.u.clone(), h.v.clone(), near.clone()).expect("tribone"), &near)
            .expect("adjacent triangles")
    }

    /// Checks the three axioms and disjointness on the materialized set `k`.
    pub fn check(&self, k: &[BElement], max_power: u32) -> AxiomReport {
        let n = self.len();
        let nested = |s: &dyn Fn(usize) -> HalfTree| (0..n.saturating_sub(1)).all(|i| s(i + 1).is_subset_of(&s(i)));
        let nesting = nested(&|i| self.plus(i).clone()) && nested(&|i| self.minus(i).clone());
        let (attract, repel) = fixed_points(&self.gamma).expect("hyperbolic");
        let fixed_inside = (0..n).all(|i| self.plus(i).contains_surd(&attract) && self.minus(i).contains_surd(&repel));
        let vanishing =
            k.iter().all(|b| !self.plus(n - 1).contains(b)) && k.iter().all(|b| !self.minus(n - 1).contains(b));
        // closed arcs are disjoint when neither holds an endpoint of the other
        let (p0, m0) = (self.plus(0), self.minus(0));
        let disjoint = !p0.contains(&m0.u) && !p0.contains(&m0.v) && !m0.contains(&p0.u) && !m0.contains(&p0.v);
        let inv = self.gamma.inverse();
        let absorb = |g: &TreeIsometry, h: &dyn Fn(usize) -> HalfTree| -> Vec<Option<u32>> {
            let mut table = Vec::with_capacity(n);
            let mut gp = TreeIsometry::identity();
            let mut p = 0;
            for i in 0..n {
                let set = h(i);
                loop {
                    if k.iter().all(|b| set.contains(&gp.act(b))) {
                        table.push(Some(p));
                        break;
                    }
                    if p >= max_power {
                        table.push(None);
                        break;
                    }
                    gp = gp.compose(g);
                    p += 1;
                }
            }
            table
        };
        let p_plus = absorb(&self.gamma, &|i| self.plus(i).clone());
        let p_minus = absorb(&inv, &|i| self.minus(i).clone());
        AxiomReport {
            nesting,
            fixed_points_inside: fixed_inside,
            empty_intersection: vanishing,
            disjoint_start: disjoint,
            absorption: p_plus.iter().all(Option::is_some) && p_minus.iter().all(Option::is_some),
            p_plus,
            p_minus,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AxiomReport {
    pub nesting: bool,
    pub fixed_points_inside: bool,
    pub empty_intersection: bool,
    pub disjoint_start: bool,
    pub absorption: bool,
    /// Smallest `p` with `γᵖ(K) ⊂ U_n⁺`, per `n`.
    pub p_plus: Vec<Option<u32>>,
    pub p_minus: Vec<Option<u32>>,
}

impl AxiomReport {
    pub fn holds(&self) -> bool {
        self.nesting && self.fixed_points_inside && self.empty_intersection && self.disjoint_start && self.absorption
    }
}

/// Random element with `2 < |trace| ≤ max_trace`, as a word in the generators.
pub fn random_hyperbolic<R: Rng + ?Sized>(rng: &mut R, max_trace: u32) -> TreeIsometry {
    let bound = BigInt::from(max_trace);
    loop {
        let mut g = TreeIsometry::identity();
        for _ in 0..rng.random_range(1..8) {
            let k: i64 = rng.random_range(-4..=4);
            g = g.compose(&TreeIsometry::new(1, k, 0, 1).expect("unipotent")).compose(&TreeIsometry::inversion());
        }
        if g.is_hyperbolic() && g.trace().abs() <= bound {
            return g;
        }
    }
}

/// Element indices and tribones of `B_N`, in breadth-first order.
#[derive(Clone, Debug)]
pub struct BallLayout {
    pub depth: usize,
    pub elements: Vec<BElement>,
    /// Number of elements of `B_n`.
    pub level_end: Vec<usize>,
    /// Level and element indices of each tribone.
    pub tribones: Vec<(usize, [usize; 3])>,
}

impl BallLayout {
    pub fn new(depth: usize) -> Self {
        let verts = ball_vertices(&root_tribone(), depth);
        let mut elements: Vec<BElement> = root_tribone().elements().to_vec();
        let mut level_end = vec![3; depth + 1];
        for v in &verts[1..] {
            elements.push(v.via.as_ref().expect("non-root").1.clone());
            level_end[v.depth] = elements.len();
        }
        for n in 1..=depth {
            level_end[n] = level_end[n].max(level_end[n - 1]);
        }
        let index: HashMap<&BElement, usize> = elements.iter().enumerate().map(|(i, b)| (b, i)).collect();
        let tribones = verts
            .iter()
            .map(|v| (v.depth, v.tribone.elements().clone().map(|b| index[&b])))
            .collect();
        Self {
            depth,
            elements,
            level_end,
            tribones,
        }
    }
}

/// The truncated contraction metric between value vectors laid out on `B_N`.
pub fn metric_values(layout: &BallLayout, f: &[CP1Point], g: &[CP1Point], data: &crate::configdata::ConfigData) -> f64 {
    let mut max_chord = Vec::with_capacity(layout.depth + 1);
    let mut m = 0.0f64;
    let mut start = 0;
    for &end in &layout.level_end {
        for i in start..end {
            m = m.max(f[i].chordal(&g[i]));
        }
        start = end;
        max_chord.push(m.min(1.0));
    }
    let mut total = 0.0;
    for n in 0..=layout.depth {
        let mut sum = 0.0;
        let mut count = 0;
        for (lvl, [a, b, c]) in &layout.tribones {
            if *lvl > n {
                continue;
            }
            count += 1;
            let in_f = data.in_o3(&[f[*a], f[*b], f[*c]]);
            let in_g = data.in_o3(&[g[*a], g[*b], g[*c]]);
            sum += match (in_f, in_g) {
                (true, true) => max_chord[n],
                (false, false) => 0.0,
                _ => 1.0,
            };
        }
        total += sum / count as f64 / 2f64.powi(n as i32);
    }
    total
}

/// Metric between two grown configurations on `B_N` of the standard root.
pub fn metric_d(f: &crate::grow::Configuration, g: &crate::grow::Configuration, depth: usize) -> Result<f64> {
    let layout = BallLayout::new(depth);
    let grab = |c: &crate::grow::Configuration| -> Result<Vec<CP1Point>> {
        let avail = (0..=depth)
            .take_while(|&n| layout.elements[..layout.level_end[n]].iter().all(|b| c.value(b).is_some()))
            .count();
        if avail <= depth {
            return Err(Error::InsufficientDepth {
                required: depth,
                available: avail.saturating_sub(1),
            });
        }
        Ok(layout.elements.iter().map(|b| *c.value(b).expect("checked")).collect())
    };
    let data = crate::configdata::ConfigData::new(f.convention);
    Ok(metric_values(&layout, &grab(f)?, &grab(g)?, &data))
}

/// Metric between two fields, growing them on `B_N` as needed.
pub fn metric_fields(layout: &BallLayout, f: &mut dyn Field, g: &mut dyn Field, data: &crate::configdata::ConfigData) -> Result<f64> {
    let fv = f.values(&layout.elements)?;
    let gv = g.values(&layout.elements)?;
    Ok(metric_values(layout, &fv, &gv, data))
}

/// A field equal to `inner` on a half-tree and to an independent continuation elsewhere.
pub struct Spliced<'a> {
    pub half: HalfTree,
    pub inner: &'a mut LazyField,
    pub outside: LazyField,
}

impl<'a> Spliced<'a> {
    /// Resamples everything outside `half`, growing outward from its inner triangle.
    pub fn new(half: HalfTree, inner: &'a mut LazyField, seed: u64) -> Result<Self> {
        let root = half.inner_tribone();
        let [a, b, c] = root.elements();
        let vals = [inner.value(a)?, inner.value(b)?, inner.value(c)?];
        let outside = LazyField::with_root(*inner.measured_data(), seed, root, vals)?;
        Ok(Self { half, inner, outside })
    }
}

impl Field for Spliced<'_> {
    fn value(&mut self, b: &BElement) -> Result<CP1Point> {
        if self.half.contains(b) {
            self.inner.value(b)
        } else {
            self.outside.value(b)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContractionRow {
    pub p: u32,
    pub d_value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContractionReport {
    pub rows: Vec<ContractionRow>,
    /// First `p` with `γᵖ(B_N) ⊂ U⁺`, from which the distance is exactly zero.
    pub absorbed_at: Option<u32>,
    /// First `p` whose orbit lies too deep for double precision; the table stops there.
    pub precision_limit: Option<u32>,
}

fn hits_precision_limit(e: &Error) -> bool {
    match e {
        Error::DegenerateTriple => true,
        Error::Glue { source, .. } => hits_precision_limit(source),
        _ => false,
    }
}

/// `d(γᵖf, γᵖg)` for `p = 0..=steps`, where `g` agrees with `f` on `U_{n_agree}⁺`.
///
/// With `control` set, `g` is independent of `f` everywhere.
pub fn contraction_experiment(
    md: &MeasuredData,
    gamma: &TreeIsometry,
    n_agree: usize,
    steps: u32,
    depth: usize,
    seed: u64,
    control: bool,
) -> Result<ContractionReport> {
    let vs = vanishing_sets(gamma, n_agree + 1)?;
    let half = vs.plus(n_agree).clone();
    let mut f = LazyField::new(*md, seed)?;
    let g_seed = stream(seed, "contraction-g").next_u64();
    let mut independent = LazyField::new(*md, g_seed)?;
    let mut fcopy = f.clone();
    let mut spliced = Spliced::new(half.clone(), &mut fcopy, g_seed)?;
    let layout = BallLayout::new(depth);
    let data = md.data;
    let mut report = ContractionReport {
        rows: Vec::new(),
        absorbed_at: None,
        precision_limit: None,
    };
    let mut gp = TreeIsometry::identity();
    for p in 0..=steps {
        let inside = !control && layout.elements.iter().all(|b| half.contains(&gp.act(b)));
        if inside && report.absorbed_at.is_none() {
            report.absorbed_at = Some(p);
        }
        let d = if inside {
            // f and g coincide on U⁺ by construction
            Ok(0.0)
        } else if control {
            metric_fields(&layout, &mut act(&gp, &mut f), &mut act(&gp, &mut independent), &data)
        } else {
            metric_fields(&layout, &mut act(&gp, &mut f), &mut act(&gp, &mut spliced), &data)
        };
        match d {
            Ok(d_value) => report.rows.push(ContractionRow { p, d_value }),
            Err(e) if hits_precision_limit(&e) => {
                report.precision_limit = Some(p);
                break;
            }
            Err(e) => return Err(e),
        }
        gp = gp.compose(gamma);
    }
    Ok(report)
}

/// Bounded functions of the values on the root quadribone `(∞, 0, 1, 1/2)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Observable {
    /// Bending angle along the root edge.
    RootBend,
    /// `Im χ / (1 + |χ|²)` for the root cross-ratio `χ`.
    RootIm,
    Constant(f64),
}

impl std::fmt::Display for Observable {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::RootBend => write!(f, "root-bend"),
            Self::RootIm => write!(f, "root-im"),
            Self::Constant(c) => write!(f, "const:{c}"),
        }
    }
}

impl std::str::FromStr for Observable {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "root-bend" => Ok(Self::RootBend),
            "root-im" => Ok(Self::RootIm),
            _ => s
                .strip_prefix("const:")
                .and_then(|v| v.parse().ok())
                .map(Self::Constant)
                .ok_or_else(|| Error::InvalidConfig(format!("unknown observable {s:?}"))),
        }
    }
}

impl Observable {
    pub fn eval(&self, q: &[CP1Point; 4]) -> Result<f64> {
        let [x, l, r, n] = q;
        match self {
            Self::RootBend => bending_angle(x, l, r, n).ok_or(Error::DegenerateEdge {
                quadribone: "root".into(),
            }),
            Self::RootIm => {
                let chi = cross_ratio(x, l, r, n)?;
                Ok(chi.value().map_or(0.0, |c| c.im / (1.0 + c.norm_sqr())))
            }
            Self::Constant(c) => Ok(*c),
        }
    }
}

pub fn root_quadruple() -> [BElement; 4] {
    ["inf", "0", "1", "1/2"].map(|s| s.parse().expect("literal"))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BirkhoffTrace {
    pub seed: u64,
    pub values: Vec<f64>,
    pub running: Vec<f64>,
}

/// Values on the quadribone of `t1` and `t2` in the frame sending the grown-side
/// triangle to `(0, 1, ∞)`.
///
/// A glued value depends on its parent triangle only through the kernel, so for a
/// Möbius-equivariant family the normalized frame carries the same law as absolute
/// coordinates. Orbit points sit arbitrarily deep in the tree, where absolute values
/// would all round to the same point.
pub fn framed_quadruple(md: &MeasuredData, seed: u64, t1: &Tribone, t2: &Tribone) -> Result<[CP1Point; 4]> {
    let (p, q) = if t2.parent().as_ref() == Some(t1) {
        (t1, t2)
    } else if t1.parent().as_ref() == Some(t2) {
        (t2, t1)
    } else {
        return Err(Error::InvalidConfig(format!("{t1} and {t2} are not adjacent")));
    };
    let (quad, _) = glue_step(p, q);
    let standard = [
        CP1Point::from_re_im(0.0, 0.0),
        CP1Point::from_re_im(1.0, 0.0),
        CP1Point::infinity(),
    ];
    let frame = |b: &BElement| standard[p.elements().iter().position(|e| e == b).expect("in p")];
    let parents = [frame(&quad[0]), frame(&quad[1]), frame(&quad[2])];
    let d = glue_value(md, seed, &quad, parents)?;
    Ok([parents[0], parents[1], parents[2], d])
}

/// `φ(f ∘ γᵏ)` for `k < steps` and the running averages.
///
/// Requires a Möbius-equivariant family; see [`framed_quadruple`].
pub fn birkhoff_average(md: &MeasuredData, gamma: &TreeIsometry, obs: Observable, steps: usize, seed: u64) -> Result<BirkhoffTrace> {
    if !gamma.is_hyperbolic() {
        return Err(Error::NotHyperbolic(gamma.to_string()));
    }
    if md.family.delta().is_none() {
        return Err(Error::InvalidConfig("orbit averages need a Möbius-equivariant family".into()));
    }
    let q = root_quadruple();
    let t1 = Tribone::new(q[0].clone(), q[1].clone(), q[2].clone())?;
    let t2 = Tribone::new(q[1].clone(), q[2].clone(), q[3].clone())?;
    let mut gk = TreeIsometry::identity();
    let mut values = Vec::with_capacity(steps);
    let mut running = Vec::with_capacity(steps);
    let mut sum = 0.0;
    for k in 0..steps {
        let vals = framed_quadruple(md, seed, &gk.act_tribone(&t1), &gk.act_tribone(&t2))?;
        let v = obs.eval(&vals)?;
        sum += v;
        values.push(v);
        running.push(sum / (k + 1) as f64);
        gk = gk.compose(gamma);
    }
    Ok(BirkhoffTrace { seed, values, running })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BirkhoffComparison {
    pub traces: Vec<BirkhoffTrace>,
    pub intervals: Vec<(f64, f64)>,
    pub overlap: bool,
}

/// Running averages for several seeds, with block-bootstrap intervals of the final mean.
pub fn birkhoff_compare(
    md: &MeasuredData,
    gamma: &TreeIsometry,
    obs: Observable,
    steps: usize,
    seeds: &[u64],
    block: usize,
    resamples: usize,
) -> Result<BirkhoffComparison> {
    let traces: Vec<BirkhoffTrace> = seeds
        .iter()
        .map(|&s| birkhoff_average(md, gamma, obs, steps, s))
        .collect::<Result<_>>()?;
    let intervals: Vec<(f64, f64)> = traces
        .iter()
        .map(|t| block_bootstrap_ci(&t.values, block, resamples, 0.95, &mut stream(t.seed, "bootstrap")))
        .collect();
    let overlap = intervals.iter().all(|a| intervals.iter().all(|b| intervals_overlap(*a, *b)));
    Ok(BirkhoffComparison {
        traces,
        intervals,
        overlap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::configdata::Mode;
    use crate::grow::grow_ball;
    use crate::tree::ball;

    fn e(s: &str) -> BElement {
        s.parse().unwrap()
    }

    fn cat() -> TreeIsometry {
        TreeIsometry::new(2, 1, 1, 1).unwrap()
    }

    #[test]
    fn golden_fixed_points() {
        let (p, m) = fixed_points(&cat()).unwrap();
        let s5 = 5f64.sqrt();
        assert!((p.to_f64() - (1.0 + s5) / 2.0).abs() < 1e-15);
        assert!((m.to_f64() - (1.0 - s5) / 2.0).abs() < 1e-15);
        assert_eq!(p.cmp_element(&e("8/5")), Ordering::Greater);
        assert_eq!(p.cmp_element(&e("13/8")), Ordering::Less);
        assert_eq!(p.cmp_element(&e("inf")), Ordering::Less);
        assert!(fixed_points(&TreeIsometry::translation()).is_err());
    }

    #[test]
    fn right_action() {
        let md = MeasuredData::visual(Mode::Raw);
        let mut f = LazyField::new(md, 3).unwrap();
        let g = TreeIsometry::new(1, 1, 1, 2).unwrap();
        let h = TreeIsometry::inversion();
        let hg = h.compose(&g);
        for b in ball(&root_tribone(), 4).elements {
            let lhs = act(&g, &mut act(&h, &mut f)).value(&b).unwrap();
            let rhs = act(&hg, &mut f).value(&b).unwrap();
            assert_eq!(lhs, rhs);
            assert_eq!(act(&TreeIsometry::identity(), &mut f).value(&b).unwrap(), f.value(&b).unwrap());
        }
    }

    #[test]
    fn cat_map_axioms() {
        let vs = vanishing_sets(&cat(), 20).unwrap();
        let k: Vec<BElement> = ball(&root_tribone(), 3).elements.into_iter().collect();
        let rep = vs.check(&k, 200);
        assert!(rep.holds(), "{rep:?}");
        // oracle: cut edges toward the golden ratio are pairs of consecutive Fibonacci ratios
        let fib = |n: usize| -> BElement {
            let (mut a, mut b) = (1i64, 1i64);
            for _ in 0..n {
                (a, b) = (b, a + b);
            }
            BElement::new(b, a).unwrap()
        };
        for h in &vs.forward[2..] {
            let ok = (0..40).any(|n| (h.u == fib(n) && h.v == fib(n + 1)) || (h.v == fib(n) && h.u == fib(n + 1)));
            assert!(ok, "{h:?}");
        }
        // p(n) grows linearly
        let p: Vec<u32> = rep.p_plus.iter().map(|p| p.unwrap()).collect();
        assert!(p.windows(2).all(|w| w[0] <= w[1]));
        assert!(p[19] <= 20);
    }

    #[test]
    fn random_elements_satisfy_axioms() {
        let mut rng = stream(4, "hyp");
        let k: Vec<BElement> = root_tribone().elements().to_vec();
        for _ in 0..5 {
            let g = random_hyperbolic(&mut rng, 50);
            let rep = vanishing_sets(&g, 20).unwrap().check(&k, 400);
            assert!(rep.holds(), "{g} {rep:?}");
        }
    }

    #[test]
    fn metric_basics() {
        let md = MeasuredData::visual(Mode::Raw);
        let f = grow_ball(&md, 1, 5).unwrap();
        let g = grow_ball(&md, 2, 5).unwrap();
        let h = grow_ball(&md, 3, 5).unwrap();
        assert_eq!(metric_d(&f, &f, 5).unwrap(), 0.0);
        let (fg, gh, fh) = (metric_d(&f, &g, 5).unwrap(), metric_d(&g, &h, 5).unwrap(), metric_d(&f, &h, 5).unwrap());
        assert_eq!(fg, metric_d(&g, &f, 5).unwrap());
        assert!(fh <= fg + gh + 1e-12);
        assert!(matches!(metric_d(&f, &g, 6), Err(Error::InsufficientDepth { .. })));
        // agreeing on B_3 bounds the distance
        let mut gg = f.clone();
        let b3 = ball(&root_tribone(), 3);
        for (b, v) in &g.assignments {
            if !b3.contains(b) {
                gg.assignments.insert(b.clone(), *v);
            }
        }
        assert!(metric_d(&f, &gg, 5).unwrap() <= 0.5f64.powi(3) + 0.5f64.powi(5));
    }

    #[test]
    fn contraction_decays() {
        let md = MeasuredData::visual(Mode::Raw);
        let rep = contraction_experiment(&md, &cat(), 3, 20, 6, 1, false).unwrap();
        let rows = &rep.rows;
        assert!(rows[0].d_value > 0.1);
        assert!(rows.last().unwrap().d_value < 1e-6, "{rows:?}");
        let p0 = rep.absorbed_at.unwrap() as usize;
        // the last evaluated row before absorption already agrees on a large ball
        assert!(rows[p0 - 1].d_value <= 0.5, "{rows:?}");
        let ctl = contraction_experiment(&md, &cat(), 3, 10, 4, 1, true).unwrap();
        assert!(ctl.rows.iter().all(|r| r.d_value > 0.1));
        assert_eq!(ctl.absorbed_at, None);
    }

    #[test]
    fn birkhoff_constant_and_bounded() {
        let md = MeasuredData::visual(Mode::Raw);
        let t = birkhoff_average(&md, &cat(), Observable::Constant(0.25), 10, 1).unwrap();
        assert!(t.running.iter().all(|v| *v == 0.25));
        let t = birkhoff_average(&md, &cat(), Observable::RootBend, 200, 1).unwrap();
        assert!(t.values.iter().all(|v| *v > 0.0 && *v < std::f64::consts::PI));
        assert_eq!("root-bend".parse::<Observable>().unwrap(), Observable::RootBend);
    }

    #[test]
    fn framed_edges_match_absolute_law() {
        let md = MeasuredData::visual(Mode::Raw);
        let q = root_quadruple();
        let absolute: Vec<f64> = (0..400)
            .map(|s| {
                let mut f = LazyField::new(md, s).unwrap();
                let v = f.values(&q).unwrap();
                Observable::RootBend.eval(&[v[0], v[1], v[2], v[3]]).unwrap()
            })
            .collect();
        let framed = birkhoff_average(&md, &cat(), Observable::RootBend, 400, 7).unwrap().values;
        let ks = crate::stats::ks_two_sample(&absolute, &framed);
        assert!(ks.p_value > 0.001, "{ks:?}");
    }
}
