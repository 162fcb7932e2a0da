//! Lazily grown random configurations `f: B → CP^1`.
//!
//! The root triangle gets a triple from the `μ³` sampler; every other element `n` is
//! glued along the unique quadribone `(x, L, R, n)` joining it to the part already
//! grown, with `f(n)` drawn from the kernel at `(f(x), f(L), f(R))`. Each element draws
//! from its own keyed stream, so the value of `n` never depends on the order in which
//! regions are requested.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::configdata::{MeasuredData, Mode};
use crate::cp1::{CP1Point, SignConvention, Verdict};
use crate::error::{Error, Result};
use crate::rng::{element_stream, stream};
use crate::tree::{ball_vertices, root_tribone, tree_path, BElement, BoneSet, Quadribone, Tribone};

/// Chordal distance, in the normalized frame of the parent triple, below which a glued
/// value counts as colliding with its neighbors.
pub const COLLISION_GUARD: f64 = 1e-9;
const COLLISION_BUDGET: usize = 64;

/// Anything that assigns points of `CP^1` to elements of `B` on demand.
pub trait Field {
    fn value(&mut self, b: &BElement) -> Result<CP1Point>;

    fn values(&mut self, bs: &[BElement]) -> Result<Vec<CP1Point>> {
        bs.iter().map(|b| self.value(b)).collect()
    }
}

/// One gluing step: the quadribone `(x, L, R, new)` oriented from the grown side.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GlueRecord {
    pub quadribone: [BElement; 4],
}

/// A random field grown on demand from a root vertex.
#[derive(Clone, Debug)]
pub struct LazyField {
    md: MeasuredData,
    seed: u64,
    root: Tribone,
    values: HashMap<BElement, CP1Point>,
    /// Grown vertices and their distance from the root.
    visited: HashMap<Tribone, usize>,
    /// The root and its ancestors up to `(0, 1, ∞)`.
    root_line: HashMap<Tribone, usize>,
    log: Vec<GlueRecord>,
}

impl LazyField {
    /// Field rooted at `(0, 1, ∞)` with a root triple drawn from the `μ³` sampler.
    pub fn new(md: MeasuredData, seed: u64) -> Result<Self> {
        let root_values = sample_root(&md, seed)?;
        Self::with_root(md, seed, root_tribone(), root_values)
    }

    /// Field rooted at `root` with prescribed values on its (sorted) elements.
    pub fn with_root(md: MeasuredData, seed: u64, root: Tribone, root_values: [CP1Point; 3]) -> Result<Self> {
        if !md.data.in_o3(&root_values) {
            return Err(Error::DegenerateTriple);
        }
        let values = root.elements().iter().cloned().zip(root_values).collect();
        let root_line = root.ancestors().into_iter().enumerate().map(|(i, t)| (t, i)).collect();
        Ok(Self {
            md,
            seed,
            visited: HashMap::from([(root.clone(), 0)]),
            root_line,
            root,
            values,
            log: Vec::new(),
        })
    }

    pub fn measured_data(&self) -> &MeasuredData {
        &self.md
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn root(&self) -> &Tribone {
        &self.root
    }

    pub fn get(&self, b: &BElement) -> Option<CP1Point> {
        self.values.get(b).copied()
    }

    pub fn is_materialized(&self, t: &Tribone) -> bool {
        self.visited.contains_key(t)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn log(&self) -> &[GlueRecord] {
        &self.log
    }

    /// Vertices on the path from `t` back to the grown part, starting at the first grown one.
    fn missing_path(&self, t: &Tribone) -> Vec<Tribone> {
        let mut path = vec![t.clone()];
        loop {
            let cur = path.last().expect("nonempty");
            if self.visited.contains_key(cur) {
                path.reverse();
                return path;
            }
            if let Some(&i) = self.root_line.get(cur) {
                // reached the root's line of ancestors; go back down toward the root
                let line = self.root.ancestors();
                for v in line[..i].iter().rev() {
                    path.push(v.clone());
                    if self.visited.contains_key(v) {
                        break;
                    }
                }
                let k = path.iter().position(|v| self.visited.contains_key(v)).expect("root is grown");
                path.truncate(k + 1);
                path.reverse();
                return path;
            }
            let up = cur.parent().expect("the root line ends at (0, 1, ∞)");
            path.push(up);
        }
    }

    /// Grows every vertex needed to reach the `targets`, in order of depth then tribone.
    pub fn ensure_vertices(&mut self, targets: &[Tribone]) -> Result<()> {
        // parent of each new vertex on its way from the grown part
        let mut plan: BTreeMap<(usize, Tribone), Tribone> = BTreeMap::new();
        let mut planned: HashMap<Tribone, usize> = HashMap::new();
        for t in targets {
            let path = self.missing_path(t);
            let mut depth = self.visited[&path[0]];
            for w in path.windows(2) {
                depth = match planned.get(&w[1]) {
                    Some(&d) => d,
                    None => {
                        planned.insert(w[1].clone(), depth + 1);
                        plan.insert((depth + 1, w[1].clone()), w[0].clone());
                        depth + 1
                    }
                };
            }
        }
        for ((depth, q), p) in plan {
            self.glue(&p, &q, depth)?;
        }
        Ok(())
    }

    pub fn ensure_vertex(&mut self, t: &Tribone) -> Result<()> {
        self.ensure_vertices(std::slice::from_ref(t))
    }

    fn glue(&mut self, p: &Tribone, q: &Tribone, depth: usize) -> Result<()> {
        let (quad, new) = glue_step(p, q);
        let parents = [&quad[0], &quad[1], &quad[2]].map(|b| self.values[b]);
        let value = glue_value(&self.md, self.seed, &quad, parents)?;
        self.values.insert(new, value);
        self.visited.insert(q.clone(), depth);
        self.log.push(GlueRecord { quadribone: quad });
        Ok(())
    }

    /// Materializes `B_n` of the root.
    pub fn grow_ball(&mut self, n: usize) -> Result<()> {
        let targets: Vec<Tribone> = ball_vertices(&self.root, n).into_iter().map(|v| v.tribone).collect();
        self.ensure_vertices(&targets)
    }

    /// Materializes the smallest connected region containing the root and `a`.
    pub fn grow_region(&mut self, a: &BoneSet) -> Result<()> {
        let targets: Vec<Tribone> = a.elements.iter().map(|b| self.first_vertex_with(b)).collect();
        self.ensure_vertices(&targets)
    }

    /// The vertex nearest the root whose triangle contains `b`.
    pub fn first_vertex_with(&self, b: &BElement) -> Tribone {
        let home = Tribone::home_of(b);
        if self.root.is_root() {
            return home;
        }
        tree_path(&self.root, &home)
            .into_iter()
            .find(|t| t.contains(b))
            .expect("home contains b")
    }

    /// Snapshot of everything grown so far.
    pub fn configuration(&self) -> Configuration {
        Configuration {
            version: 1,
            mode: self.md.mode,
            seed: self.seed,
            family: self.md.family_label(),
            convention: self.md.data.conv,
            root: self.root.elements().clone(),
            assignments: self.values.iter().map(|(b, v)| (b.clone(), *v)).collect(),
            log: self.log.clone(),
        }
    }
}

impl Field for LazyField {
    fn value(&mut self, b: &BElement) -> Result<CP1Point> {
        if let Some(v) = self.values.get(b) {
            return Ok(*v);
        }
        let t = self.first_vertex_with(b);
        self.ensure_vertex(&t)?;
        Ok(self.values[b])
    }
}

/// Whether `d` keeps its distance from the parent triple, measured in the frame that
/// sends the triple to `(0, 1, ∞)` so the test does not depend on scale.
pub fn clear_of_parents(x: &CP1Point, l: &CP1Point, r: &CP1Point, d: &CP1Point) -> bool {
    let Ok(chi) = crate::cp1::cross_ratio(x, l, r, d) else {
        return false;
    };
    let chi = chi.point();
    [CP1Point::from_re_im(0.0, 0.0), CP1Point::from_re_im(1.0, 0.0), CP1Point::infinity()]
        .iter()
        .all(|v| v.chordal(chi) > COLLISION_GUARD)
}

/// The quadribone `(x, l, r, new)` gluing `q` onto `p`, and its new element.
pub fn glue_step(p: &Tribone, q: &Tribone) -> ([BElement; 4], BElement) {
    let far = p.elements().iter().find(|e| !q.contains(e)).expect("adjacent").clone();
    let new = q.elements().iter().find(|e| !p.contains(e)).expect("adjacent").clone();
    let [x, l, r] = p.rotation_from(&far).expect("far is in p");
    ([x, l, r, new.clone()], new)
}

/// Draws the value of the new element of `quad` given the values on its first three.
pub fn glue_value(md: &MeasuredData, seed: u64, quad: &[BElement; 4], parents: [CP1Point; 3]) -> Result<CP1Point> {
    let [fx, fl, fr] = parents;
    let label = || {
        let [x, l, r, n] = quad.clone();
        Quadribone::new(x, l, r, n).map_or_else(|_| format!("{quad:?}"), |q| q.to_string())
    };
    let mut rng = element_stream(seed, "glue", &quad[3]);
    for _ in 0..COLLISION_BUDGET {
        let d = md.kernel_sample(&fx, &fl, &fr, &mut rng).map_err(|e| Error::Glue {
            quadribone: label(),
            source: Box::new(e),
        })?;
        if clear_of_parents(&fx, &fl, &fr, &d) {
            return Ok(d);
        }
    }
    Err(Error::Glue {
        quadribone: label(),
        source: Box::new(Error::RejectionBudgetExceeded {
            budget: COLLISION_BUDGET,
            triple: format!("({fx}, {fl}, {fr})"),
        }),
    })
}

/// Root triple for `seed` on the named root stream.
pub fn sample_root(md: &MeasuredData, seed: u64) -> Result<[CP1Point; 3]> {
    md.sample_root(&mut stream(seed, "root"))
}

/// A finite configuration: the grown assignments and how they were grown.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Configuration {
    pub version: u32,
    pub mode: Mode,
    pub seed: u64,
    pub family: String,
    pub convention: SignConvention,
    pub root: [BElement; 3],
    #[serde(with = "assignment_list")]
    pub assignments: BTreeMap<BElement, CP1Point>,
    pub log: Vec<GlueRecord>,
}

mod assignment_list {
    use std::collections::BTreeMap;

    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use crate::cp1::CP1Point;
    use crate::tree::BElement;

    #[derive(Serialize, Deserialize)]
    struct Entry {
        #[serde(flatten)]
        element: BElement,
        value: CP1Point,
    }

    pub fn serialize<S: Serializer>(m: &BTreeMap<BElement, CP1Point>, s: S) -> Result<S::Ok, S::Error> {
        let v: Vec<Entry> = m
            .iter()
            .map(|(b, p)| Entry {
                element: b.clone(),
                value: *p,
            })
            .collect();
        v.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<BElement, CP1Point>, D::Error> {
        let v: Vec<serde_json::Value> = Vec::deserialize(d)?;
        v.into_iter()
            .map(|e| {
                let element: BElement = serde_json::from_value(e.clone()).map_err(serde::de::Error::custom)?;
                let value: CP1Point = serde_json::from_value(e.get("value").cloned().unwrap_or_default())
                    .map_err(serde::de::Error::custom)?;
                Ok((element, value))
            })
            .collect()
    }
}

/// Verdicts for every tribone and quadribone of a configuration's domain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certificates {
    pub tribones: Vec<(Tribone, bool)>,
    pub quadribones: Vec<(Quadribone, Verdict)>,
}

impl Certificates {
    pub fn all_hold(&self) -> bool {
        self.tribones.iter().all(|(_, ok)| *ok) && self.quadribones.iter().all(|(_, v)| v.holds())
    }

    pub fn violations(&self) -> Vec<String> {
        self.tribones
            .iter()
            .filter(|(_, ok)| !ok)
            .map(|(t, _)| t.to_string())
            .chain(self.quadribones.iter().filter(|(_, v)| !v.holds()).map(|(q, _)| q.to_string()))
            .collect()
    }
}

impl Configuration {
    pub fn root_tribone(&self) -> Result<Tribone> {
        let [a, b, c] = self.root.clone();
        Tribone::new(a, b, c)
    }

    pub fn value(&self, b: &BElement) -> Option<&CP1Point> {
        self.assignments.get(b)
    }

    pub fn len(&self) -> usize {
        self.assignments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignments.is_empty()
    }

    /// Tribones of the domain: the root and the second triangle of each glued quadribone.
    pub fn domain_tribones(&self) -> Result<Vec<Tribone>> {
        let mut out = vec![self.root_tribone()?];
        for g in &self.log {
            let [_, l, r, n] = g.quadribone.clone();
            out.push(Tribone::new(l, r, n)?);
        }
        Ok(out)
    }

    pub fn domain_quadribones(&self) -> Result<Vec<(Quadribone, [BElement; 4])>> {
        self.log
            .iter()
            .map(|g| {
                let [x, l, r, n] = g.quadribone.clone();
                Ok((Quadribone::new(x, l, r, n)?, g.quadribone.clone()))
            })
            .collect()
    }

    fn point(&self, b: &BElement) -> Result<CP1Point> {
        self.assignments
            .get(b)
            .copied()
            .ok_or_else(|| Error::InvalidConfig(format!("element {b} is not assigned")))
    }

    pub fn certificates(&self) -> Result<Certificates> {
        let cd = crate::configdata::ConfigData::new(self.convention);
        let tribones = self
            .domain_tribones()?
            .into_iter()
            .map(|t| {
                let [a, b, c] = t.elements();
                Ok((t.clone(), cd.in_o3(&[self.point(a)?, self.point(b)?, self.point(c)?])))
            })
            .collect::<Result<_>>()?;
        let quadribones = self
            .domain_quadribones()?
            .into_iter()
            .map(|(q, o)| {
                let v = [self.point(&o[0])?, self.point(&o[1])?, self.point(&o[2])?, self.point(&o[3])?];
                Ok((q, cd.o4(&v)))
            })
            .collect::<Result<_>>()?;
        Ok(Certificates { tribones, quadribones })
    }

    /// The sub-configuration on the elements of `a`.
    pub fn restrict(&self, a: &BoneSet) -> Configuration {
        let assignments: BTreeMap<BElement, CP1Point> = self
            .assignments
            .iter()
            .filter(|(b, _)| a.contains(b))
            .map(|(b, v)| (b.clone(), *v))
            .collect();
        let log = self
            .log
            .iter()
            .filter(|g| g.quadribone.iter().all(|b| a.contains(b)))
            .cloned()
            .collect();
        Configuration {
            assignments,
            log,
            ..self.clone()
        }
    }

    /// Regrows the log from the seed and reports whether every value reproduces exactly.
    pub fn replay(&self, md: &MeasuredData) -> Result<bool> {
        let root = self.root_tribone()?;
        let root_values = [self.point(&self.root[0])?, self.point(&self.root[1])?, self.point(&self.root[2])?];
        let mut f = LazyField::with_root(md.with_mode(self.mode), self.seed, root, root_values)?;
        for g in &self.log {
            let [_, l, r, n] = g.quadribone.clone();
            f.ensure_vertex(&Tribone::new(l, r, n)?)?;
        }
        let same_values = self.assignments.iter().all(|(b, v)| f.get(b) == Some(*v));
        Ok(same_values && f.log == self.log && f.len() == self.len())
    }

    /// Replaces one value, for building counterexamples.
    pub fn with_value(&self, b: &BElement, v: CP1Point) -> Configuration {
        let mut c = self.clone();
        c.assignments.insert(b.clone(), v);
        c
    }
}

/// Grows `B_n` of the standard root for `seed` and returns the snapshot.
pub fn grow_ball(md: &MeasuredData, seed: u64, n: usize) -> Result<Configuration> {
    let mut f = LazyField::new(*md, seed)?;
    f.grow_ball(n)?;
    Ok(f.configuration())
}

/// Sphere coordinates of the listed points, concatenated.
pub fn sphere_features(points: &[CP1Point]) -> Vec<f64> {
    points.iter().flat_map(|p| p.to_sphere()).collect()
}

/// Outcome of growing one region from the two ends of the root edge.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoRootReport {
    pub mode: Mode,
    pub samples: usize,
    pub depth: usize,
    pub quadribones: usize,
    pub test: crate::stats::BlockedTest,
    /// The comparison is only a consequence of reversal symmetry in sym mode.
    pub applicable: bool,
    pub note: String,
}

/// Cross-ratios, on the sphere, of every quadribone between vertices of `region`.
fn region_features(f: &LazyField, region: &[Tribone]) -> Result<Vec<f64>> {
    let set: std::collections::HashSet<&Tribone> = region.iter().collect();
    let mut quads = Vec::new();
    for v in region {
        for nb in v.neighbors() {
            if set.contains(&nb) && v < &nb {
                let (quad, _) = glue_step(v, &nb);
                let [x, l, r, n] = quad;
                quads.push(Quadribone::new(x, l, r, n)?);
            }
        }
    }
    quads.sort();
    let mut out = Vec::new();
    for q in quads {
        let v: Vec<CP1Point> = q
            .elements()
            .iter()
            .map(|b| f.get(b).ok_or_else(|| Error::InvalidConfig(format!("{b} not grown"))))
            .collect::<Result<_>>()?;
        out.extend(sphere_features(&[crate::cp1::cross_ratio(&v[0], &v[1], &v[2], &v[3])?.0]));
    }
    Ok(out)
}

/// Grows the region within `depth` of the root edge from `(0, 1, ∞)` and from
/// `(0, 1/2, 1)`, and compares the Möbius-invariant shape of the two populations.
pub fn two_root_agreement_test(
    md: &MeasuredData,
    nsamples: usize,
    depth: usize,
    seed: u64,
    block: usize,
    permutations: usize,
) -> Result<TwoRootReport> {
    use rand::RngCore;
    let v = root_tribone();
    let w = Tribone::home_of(&BElement::new(1, 2)?);
    let mut region: Vec<Tribone> = ball_vertices(&v, depth)
        .into_iter()
        .chain(ball_vertices(&w, depth))
        .map(|x| x.tribone)
        .collect();
    region.sort();
    region.dedup();
    let population = |root: &Tribone, name: &str| -> Result<Vec<Vec<f64>>> {
        let (roots, _) = md.sample_roots(nsamples, &mut stream(seed, &format!("{name}-roots")))?;
        let mut seeds = stream(seed, &format!("{name}-fields"));
        roots
            .into_iter()
            .map(|t| {
                let mut f = LazyField::with_root(*md, seeds.next_u64(), root.clone(), t)?;
                f.ensure_vertices(&region)?;
                region_features(&f, &region)
            })
            .collect()
    };
    let mut a = population(&v, "two-root-a")?;
    let mut b = population(&w, "two-root-b")?;
    let mut rng = stream(seed, "two-root-test");
    // spread each block over the whole chain
    use rand::seq::SliceRandom;
    a.shuffle(&mut rng);
    b.shuffle(&mut rng);
    let test = crate::stats::blocked_energy_test(&a, &b, block, permutations, &mut rng);
    let applicable = md.mode == Mode::Sym;
    Ok(TwoRootReport {
        mode: md.mode,
        samples: nsamples,
        depth,
        quadribones: a.first().map_or(0, |x| x.len() / 3),
        test,
        applicable,
        note: if applicable {
            "sym mode: reversal symmetry makes the two constructions agree".into()
        } else {
            "raw mode: corollary not applicable".into()
        },
    })
}

impl MeasuredData {
    pub fn family_label(&self) -> String {
        use crate::h3measure::{EquivariantFamily, Family};
        match self.family {
            Family::Visual(_) => "visual".into(),
            Family::Power(p) => format!("{}:{}", p.name(), p.exponent()),
        }
    }
}
