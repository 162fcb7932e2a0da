//! Chains of quadribone values joining two admissible triples.
//!
//! A chain `q₁, …, q_j` in `O₄` starts at the tribone `(q₁¹, q₁², q₁³)`. Writing
//! `E_n = (q_n³, q_n², q_n⁴)` for the end of step `n`, the next quadribone starts either at
//! `E_n` or at its rotation `(q_n², q_n⁴, q_n³)`. The chain joins `t₁` to `t₂` when its
//! last end is `t₂`; the variant `(q_j², q_j³, q_j⁴)` is also accepted.
//!
//! [`connect`] builds chains out of three-step moves that perturb a triple and swap two
//! of its entries, closes them into loops, and uses the loops to absorb perturbations.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cp1::{in_o3, CP1Point, Mobius, SignConvention};
use crate::error::{Error, Result};

use super::ConfigData;

/// Largest chain [`validate_chain`] accepts.
pub const MAX_CHAIN: usize = 1000;

const ATTEMPTS: usize = 256;
const LOCAL_ATTEMPTS: usize = 24;
const DISK_ATTEMPTS: usize = 64;

type Triple = [CP1Point; 3];
type Quad = [CP1Point; 4];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepRule {
    /// First quadribone, starting at `t₁`.
    Start,
    /// Starts at `(q³, q², q⁴)` of the previous one.
    Continue,
    /// Starts at `(q², q⁴, q³)` of the previous one.
    Rotate,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EndConvention {
    /// `t₂ = (q_j³, q_j², q_j⁴)`.
    Q3Q2Q4,
    /// `t₂ = (q_j², q_j³, q_j⁴)`.
    Q2Q3Q4,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Chain {
    pub t1: Triple,
    pub t2: Triple,
    pub quadribones: Vec<Quad>,
    pub rules: Vec<StepRule>,
    pub end_convention: EndConvention,
}

impl Chain {
    pub fn len(&self) -> usize {
        self.quadribones.len()
    }

    pub fn is_empty(&self) -> bool {
        self.quadribones.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    Empty,
    TooLong,
    NotInO4,
    StartMismatch,
    Transition,
    EndMismatch,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub index: usize,
    pub kind: ViolationKind,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainValidation {
    pub valid: bool,
    pub first_violation: Option<Violation>,
    pub rules: Vec<StepRule>,
    pub end_convention: Option<EndConvention>,
}

fn same(x: &[CP1Point], y: &[CP1Point]) -> bool {
    x.iter().zip(y).all(|(p, q)| p.approx_eq(q))
}

fn end_of(q: &Quad) -> Triple {
    [q[2], q[1], q[3]]
}

fn rotated(t: &Triple) -> Triple {
    [t[1], t[2], t[0]]
}

/// Checks membership in `O₄`, the start at `t₁`, every transition, and the end at `t₂`.
pub fn validate_chain(chain: &Chain, conv: SignConvention) -> ChainValidation {
    let cd = ConfigData::new(conv);
    let mut rules = Vec::with_capacity(chain.len());
    let fail = |index, kind, rules| ChainValidation {
        valid: false,
        first_violation: Some(Violation { index, kind }),
        rules,
        end_convention: None,
    };
    let qs = &chain.quadribones;
    if qs.is_empty() {
        return fail(0, ViolationKind::Empty, rules);
    }
    if qs.len() > MAX_CHAIN {
        return fail(MAX_CHAIN, ViolationKind::TooLong, rules);
    }
    for (n, q) in qs.iter().enumerate() {
        if !cd.in_o4(q) {
            return fail(n, ViolationKind::NotInO4, rules);
        }
        if n == 0 {
            if !same(&q[..3], &chain.t1) {
                return fail(0, ViolationKind::StartMismatch, rules);
            }
            rules.push(StepRule::Start);
            continue;
        }
        let e = end_of(&qs[n - 1]);
        if same(&q[..3], &e) {
            rules.push(StepRule::Continue);
        } else if same(&q[..3], &rotated(&e)) {
            rules.push(StepRule::Rotate);
        } else {
            return fail(n, ViolationKind::Transition, rules);
        }
    }
    let last = qs.last().unwrap();
    let end_convention = if same(&end_of(last), &chain.t2) {
        EndConvention::Q3Q2Q4
    } else if same(&[last[1], last[2], last[3]], &chain.t2) {
        EndConvention::Q2Q3Q4
    } else {
        return fail(qs.len() - 1, ViolationKind::EndMismatch, rules);
    };
    ChainValidation {
        valid: true,
        first_violation: None,
        rules,
        end_convention: Some(end_convention),
    }
}

/// A run of quadribones under construction, composed by concatenation.
#[derive(Clone, Debug, Default)]
struct Links(Vec<Quad>);

impl Links {
    fn end(&self) -> Triple {
        end_of(self.0.last().expect("nonempty links"))
    }

    fn then(mut self, other: Links) -> Links {
        debug_assert!(self.0.is_empty() || same(&self.end(), &other.0[0][..3]));
        self.0.extend(other.0);
        self
    }

    /// Reversing each quadribone and their order turns `(a,b,c) ⇝ (u,v,w)` into
    /// `(w,u,v) ⇝ (b,c,a)`.
    fn reversed(&self) -> Links {
        Links(self.0.iter().rev().map(|q| [q[3], q[2], q[1], q[0]]).collect())
    }

    fn substitute(&self, from: &[CP1Point], to: &[CP1Point]) -> Links {
        let swap = |p: CP1Point| from.iter().position(|f| *f == p).map_or(p, |i| to[i]);
        Links(self.0.iter().map(|q| q.map(swap)).collect())
    }

    fn admissible(&self, cd: &ConfigData) -> bool {
        self.0.iter().all(|q| cd.in_o4(q))
    }
}

/// Why one construction attempt failed; the named step goes into the error report.
#[derive(Debug)]
struct Stuck(&'static str);

type Step<T> = std::result::Result<T, Stuck>;

fn min_chord(t: &Triple) -> f64 {
    t[0].chordal(&t[1]).min(t[1].chordal(&t[2])).min(t[0].chordal(&t[2]))
}

struct Builder<'r, R: Rng + ?Sized> {
    cd: ConfigData,
    rng: &'r mut R,
    /// Global shrink factor for this attempt, `≤ 1`.
    scale: f64,
}

impl<R: Rng + ?Sized> Builder<'_, R> {
    fn radius(&self, t: &Triple) -> f64 {
        self.scale * min_chord(t) / 8.0
    }

    /// Point within chordal distance about `radius` of `p`, inside `D(t)`.
    fn near(&mut self, p: &CP1Point, t: &Triple, radius: f64) -> Step<CP1Point> {
        // rotate p to 0, sample an annulus there, rotate back
        let u = Mobius::rotation_to_zero(p).inverse();
        for _ in 0..DISK_ATTEMPTS {
            let r = radius / 2.0 * (self.rng.random_range(1.0 / 16.0..1.0f64)).sqrt();
            let theta = self.rng.random_range(0.0..std::f64::consts::TAU);
            let q = u.apply_c(Complex64::from_polar(r, theta));
            if self.cd.in_o4(&[t[0], t[1], t[2], q]) {
                return Ok(q);
            }
        }
        Err(Stuck("perturbation"))
    }

    /// `(x,y,z) ⇝₃ (x₁,z₁,y₁)` with `(x₁,y₁,z₁)` near `(x,y,z)`. Returns the new points.
    fn step1(&mut self, t: &Triple, r: f64) -> Step<(Links, Triple)> {
        let [x, y, z] = *t;
        let x1 = self.near(&x, &[x, y, z], r)?;
        let z1 = self.near(&z, &[z, y, x1], r)?;
        let y1 = self.near(&y, &[y, z1, x1], r)?;
        Ok((Links(vec![[x, y, z, x1], [z, y, x1, z1], [y, z1, x1, y1]]), [x1, y1, z1]))
    }

    /// `(x,y,z) ⇝₃ (y₁,x₁,z₁)` with `(x₁,y₁,z₁)` near `(x,y,z)`.
    fn step2(&mut self, t: &Triple, r: f64) -> Step<(Links, Triple)> {
        let [x, y, z] = *t;
        let x1 = self.near(&x, &[x, y, z], r)?;
        let y1 = self.near(&y, &[y, x1, z], r)?;
        let z1 = self.near(&z, &[z, x1, y1], r)?;
        Ok((Links(vec![[x, y, z, x1], [y, x1, z, y1], [z, x1, y1, z1]]), [x1, y1, z1]))
    }

    /// `(a,b,c) ⇝₁₂ (b,c,a)`. With `start`, the chain begins there instead of at `t`,
    /// which succeeds when `start` is close enough to `t`.
    fn rotation(&mut self, t: &Triple, start: Option<&Triple>) -> Step<Links> {
        let [a, b, c] = *t;
        let r = self.radius(t);
        let (c1, [a4, b4, c4]) = self.step1(t, r)?;
        if let Some(s) = start {
            if !c1.substitute(t, s).admissible(&self.cd) {
                return Err(Stuck("loop start"));
            }
        }

        // (a4,c4,b4) ⇝ (a3,b3,c3), then reroute c1 to end there
        let mut r2 = r / 8.0;
        let mut found = None;
        for _ in 0..LOCAL_ATTEMPTS {
            let (c2, [x1, y1, z1]) = self.step1(&[a4, c4, b4], r2)?;
            let (a3, b3, c3) = (x1, z1, y1);
            let mut c1p = c1.substitute(&[a4, b4, c4], &[a3, b3, c3]);
            if let Some(s) = start {
                c1p = c1p.substitute(t, s);
            }
            if c1p.admissible(&self.cd) {
                found = Some((c2, c1p, [a3, b3, c3]));
                break;
            }
            r2 /= 2.0;
        }
        let (c2, c1p, [a3, b3, c3]) = found.ok_or(Stuck("rotation reroute"))?;

        // (a3,c3,b3) ⇝ (c2,a2,b2), then reroute c2 to end at (a2,b2,c2)
        let mut r3 = r2 / 8.0;
        let mut found = None;
        for _ in 0..LOCAL_ATTEMPTS {
            let (c3l, [x1, y1, z1]) = self.step2(&[a3, c3, b3], r3)?;
            let (a2, b2, c2p) = (x1, z1, y1);
            let c2pp = c2.substitute(&[a3, b3, c3], &[a2, b2, c2p]);
            if c2pp.admissible(&self.cd) {
                found = Some((c3l, c2pp));
                break;
            }
            r3 /= 2.0;
        }
        let (c3l, c2pp) = found.ok_or(Stuck("rotation close"))?;

        let f = c1.then(c2pp);
        let out = c1p.then(c3l).then(f.reversed());
        debug_assert!(same(&out.end(), &[b, c, a]));
        Ok(out)
    }

    /// `(a,b,c) ⇝₃₆ (a,b,c)`, or from a nearby `start` to `(a,b,c)`.
    fn loop36(&mut self, t: &Triple, start: Option<&Triple>) -> Step<Links> {
        let r1 = self.rotation(t, start)?;
        let t2 = rotated(t);
        let r2 = self.rotation(&t2, None)?;
        let r3 = self.rotation(&rotated(&t2), None)?;
        Ok(r1.then(r2).then(r3))
    }

    /// Perturbing move `m` followed by a loop absorbing the perturbation at `target`.
    fn swap_with(&mut self, t: &Triple, target: &Triple, second: bool) -> Step<Links> {
        let mut rho = self.radius(t) * self.scale / 64.0;
        for _ in 0..LOCAL_ATTEMPTS {
            let (links, [x1, y1, z1]) = if second { self.step2(t, rho)? } else { self.step1(t, rho)? };
            let reached = if second { [y1, x1, z1] } else { [x1, z1, y1] };
            if let Ok(l) = self.loop36(target, Some(&reached)) {
                return Ok(links.then(l));
            }
            rho /= 2.0;
        }
        Err(Stuck("swap"))
    }

    /// `(a,b,c) ⇝ σ(a,b,c)` for the permutation `σ` given as source indices.
    fn permute(&mut self, t: &Triple, sigma: [usize; 3]) -> Step<Links> {
        let [a, b, c] = *t;
        match sigma {
            [0, 1, 2] => self.loop36(t, None),
            [1, 2, 0] => self.rotation(t, None),
            [2, 0, 1] => Ok(self.rotation(t, None)?.then(self.rotation(&[b, c, a], None)?)),
            [0, 2, 1] => self.swap_with(t, &[a, c, b], false),
            [1, 0, 2] => self.swap_with(t, &[b, a, c], true),
            [2, 1, 0] => Ok(self.rotation(t, None)?.then(self.swap_with(&[b, c, a], &[c, b, a], true)?)),
            _ => unreachable!("not a permutation"),
        }
    }

    /// `(x,y,z) ⇝₄₀ (y,z,p')` where `p' = p` unless `p` is too close to the circle
    /// through `x, y, z` or to one of them, in which case `p'` is a nearby point.
    fn shift_in(&mut self, t: &Triple, p: &CP1Point, target: &Triple) -> Step<(Links, CP1Point)> {
        let [x, y, z] = *t;
        let floor = self.radius(target) * self.scale / 64.0;
        let clear = |q: &CP1Point, cd: &ConfigData| {
            t.iter().all(|v| v.chordal(q) > floor) && (cd.in_o4(&[x, y, z, *q]) || cd.in_o4(&[x, z, y, *q]))
        };
        let mut q = *p;
        if !clear(&q, &self.cd) {
            let u = Mobius::rotation_to_zero(p).inverse();
            let mut found = false;
            for _ in 0..DISK_ATTEMPTS {
                let r = floor * self.rng.random_range(0.25..1.0f64).sqrt();
                let theta = self.rng.random_range(0.0..std::f64::consts::TAU);
                q = u.apply_c(Complex64::from_polar(r, theta));
                if clear(&q, &self.cd) {
                    found = true;
                    break;
                }
            }
            if !found {
                return Err(Stuck("dense extension"));
            }
        }
        let links = if self.cd.in_o4(&[x, y, z, q]) {
            Links(vec![[x, y, z, q]]).then(self.permute(&[z, y, q], [1, 0, 2])?)
        } else {
            self.permute(t, [0, 2, 1])?.then(Links(vec![[x, z, y, q]]))
        };
        Ok((links, q))
    }

    fn join(&mut self, t1: &Triple, t2: &Triple) -> Step<Links> {
        // t2 a permutation of t1
        let sigma: Vec<Option<usize>> = t2.iter().map(|p| t1.iter().position(|q| q.approx_eq(p))).collect();
        if let [Some(i), Some(j), Some(k)] = sigma[..] {
            return self.permute(t1, [i, j, k]);
        }
        let mut cur = *t1;
        let mut links = Links::default();
        let mut moved = false;
        for p in t2 {
            let (l, q) = self.shift_in(&cur, p, t2)?;
            moved |= q != *p;
            links = links.then(l);
            cur = [cur[1], cur[2], q];
        }
        if moved {
            links = links.then(self.loop36(t2, Some(&cur))?);
        }
        Ok(links)
    }
}

/// Builds a chain from `t1` to `t2`, retrying with geometrically shrinking radii.
pub fn connect<R: Rng + ?Sized>(t1: &Triple, t2: &Triple, conv: SignConvention, rng: &mut R) -> Result<Chain> {
    if !in_o3(&t1[0], &t1[1], &t1[2]) || !in_o3(&t2[0], &t2[1], &t2[2]) {
        return Err(Error::DegenerateTriple);
    }
    let cd = ConfigData::new(conv);
    let mut last = "start";
    for attempt in 0..ATTEMPTS {
        let mut b = Builder {
            cd,
            rng: &mut *rng,
            scale: 0.5f64.powi((attempt / 4) as i32),
        };
        match b.join(t1, t2) {
            Ok(links) => {
                let mut chain = Chain {
                    t1: *t1,
                    t2: *t2,
                    quadribones: links.0,
                    rules: Vec::new(),
                    end_convention: EndConvention::Q3Q2Q4,
                };
                let v = validate_chain(&chain, conv);
                if v.valid {
                    chain.rules = v.rules;
                    chain.end_convention = v.end_convention.unwrap();
                    return Ok(chain);
                }
                last = "validation";
            }
            Err(Stuck(step)) => last = step,
        }
    }
    Err(Error::SearchBudgetExceeded {
        step: last.to_string(),
        attempts: ATTEMPTS,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn pt(s: &str) -> CP1Point {
        s.parse().unwrap()
    }

    fn tri(a: &str, b: &str, c: &str) -> Triple {
        [pt(a), pt(b), pt(c)]
    }

    fn check(chain: &Chain) {
        let v = validate_chain(chain, SignConvention::Negative);
        assert!(v.valid, "{:?}", v.first_violation);
    }

    #[test]
    fn self_loop_within_36() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let t = tri("0", "1", "inf");
        let c = connect(&t, &t, SignConvention::Negative, &mut rng).unwrap();
        assert!(c.len() <= 36, "{}", c.len());
        check(&c);
    }

    #[test]
    fn permutations_within_100() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let t = tri("0.3-0.2i", "2+i", "-1");
        for s in [[0, 1, 2], [1, 2, 0], [2, 0, 1], [0, 2, 1], [1, 0, 2], [2, 1, 0]] {
            let t2 = [t[s[0]], t[s[1]], t[s[2]]];
            let c = connect(&t, &t2, SignConvention::Negative, &mut rng).unwrap();
            assert!(c.len() <= 100, "{s:?}: {}", c.len());
            check(&c);
        }
    }

    #[test]
    fn general_pair() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let c = connect(&tri("0", "1", "inf"), &tri("i", "2", "-1"), SignConvention::Negative, &mut rng).unwrap();
        assert!(c.len() <= MAX_CHAIN);
        check(&c);
        assert_eq!(c.rules[0], StepRule::Start);
    }

    #[test]
    fn flipped_sign_is_caught() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let t = tri("0", "1", "inf");
        let mut c = connect(&t, &tri("i", "2", "-1"), SignConvention::Negative, &mut rng).unwrap();
        let k = c.len() / 2;
        // conjugating every point flips the sign of every cross-ratio
        c.quadribones[k] = c.quadribones[k].map(|p| p.conj());
        let v = validate_chain(&c, SignConvention::Negative);
        assert!(!v.valid);
        assert_eq!(v.first_violation.unwrap().index, k);
    }

    #[test]
    fn shuffled_middle_is_caught() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let t = tri("0", "1", "inf");
        let mut c = connect(&t, &tri("i", "2", "-1"), SignConvention::Negative, &mut rng).unwrap();
        let k = c.len() / 2;
        c.quadribones.swap(k, k + 1);
        let v = validate_chain(&c, SignConvention::Negative);
        assert!(!v.valid);
        assert_eq!(v.first_violation.unwrap().kind, ViolationKind::Transition);
    }

    #[test]
    fn reversal_turns_ends_around() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let cd = ConfigData::default();
        let t = tri("0", "1", "inf");
        let mut b = Builder {
            cd,
            rng: &mut rng,
            scale: 1.0,
        };
        let (l, _) = b.step1(&t, b.radius(&t)).unwrap();
        let [a, bb, c] = t;
        let [u, v, w] = l.end();
        let r = l.reversed();
        assert!(r.admissible(&cd));
        assert!(same(&r.0[0][..3], &[w, u, v]));
        assert!(same(&r.end(), &[bb, c, a]));
    }

    #[test]
    fn other_end_convention_accepted() {
        let q = [pt("0"), pt("1"), pt("inf"), pt("-i")];
        let chain = Chain {
            t1: [q[0], q[1], q[2]],
            t2: [q[1], q[2], q[3]],
            quadribones: vec![q],
            rules: vec![],
            end_convention: EndConvention::Q2Q3Q4,
        };
        assert_eq!(validate_chain(&chain, SignConvention::Negative).end_convention, Some(EndConvention::Q2Q3Q4));
    }

    #[test]
    fn degenerate_endpoint_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let r = connect(&tri("0", "0", "inf"), &tri("i", "2", "-1"), SignConvention::Negative, &mut rng);
        assert!(matches!(r, Err(Error::DegenerateTriple)));
    }
}
