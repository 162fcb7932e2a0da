//! Property suites shared by the command line and the acceptance tests.
//!
//! Each suite returns a [`SuiteReport`] listing the measured quantity of every
//! check next to the tolerance it was held to.

use std::f64::consts::PI;
use std::str::FromStr;
use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, RngCore};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::configdata::chain::{connect, validate_chain, MAX_CHAIN};
use crate::configdata::{MeasuredData, Mode};
use crate::cp1::{cross_ratio, im_sign, in_o3, permutation_action, CP1Point, Mobius, Perm4};
use crate::dynamics::{birkhoff_compare, contraction_experiment, random_hyperbolic, vanishing_sets, Observable};
use crate::error::{Error, Result};
use crate::grow::{grow_ball, two_root_agreement_test, LazyField};
use crate::h3measure::{
    barycenter, busemann, log_rho3_via_basepoint, log_rho3_with, poincare_extension, sample_visual, EquivariantFamily, Family,
    H3Point, PowerFamily, VisualFamily,
};
use crate::pleat::{certify, dihedral_angle_hyperboloid};
use crate::rng::stream;
use crate::stats::{blocked_energy_test, correlation, kendall_trend, variance};
use crate::tree::{ball, ball_vertices, root_tribone, tree_path, BElement, TreeIsometry, Tribone};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Crossratio,
    Measure,
    Consistency,
    Connectivity,
    Convexity,
    Contraction,
    Vanishing,
    Combinatorics,
    Ergodicity,
    Singularity,
    Markov,
}

impl Suite {
    pub const ALL: [Suite; 11] = [
        Suite::Crossratio,
        Suite::Measure,
        Suite::Consistency,
        Suite::Connectivity,
        Suite::Convexity,
        Suite::Contraction,
        Suite::Vanishing,
        Suite::Combinatorics,
        Suite::Ergodicity,
        Suite::Singularity,
        Suite::Markov,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Suite::Crossratio => "crossratio",
            Suite::Measure => "measure",
            Suite::Consistency => "consistency",
            Suite::Connectivity => "connectivity",
            Suite::Convexity => "convexity",
            Suite::Contraction => "contraction",
            Suite::Vanishing => "vanishing",
            Suite::Combinatorics => "combinatorics",
            Suite::Ergodicity => "ergodicity",
            Suite::Singularity => "singularity",
            Suite::Markov => "markov",
        }
    }

    pub fn run(&self, cfg: &RunConfig) -> Result<SuiteReport> {
        let start = Instant::now();
        let items = match self {
            Suite::Crossratio => crossratio(cfg, 10_000)?,
            Suite::Measure => measure(cfg)?,
            Suite::Consistency => consistency(cfg)?,
            Suite::Connectivity => connectivity(cfg, 100)?,
            Suite::Convexity => convexity(cfg, 1000, 6)?,
            Suite::Contraction => contraction(cfg)?,
            Suite::Vanishing => vanishing(cfg, 10, 20)?,
            Suite::Combinatorics => combinatorics(cfg, 10, 10_000)?,
            Suite::Ergodicity => ergodicity(cfg, 2000)?,
            Suite::Singularity => singularity(cfg, 10_000)?,
            Suite::Markov => markov(cfg)?,
        };
        Ok(SuiteReport::new(self.name(), items, start.elapsed().as_secs_f64()))
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown suite {s:?}")))
    }
}

/// One measured check. `pass` compares `value` against `tolerance` in the direction
/// the check names; informational items never fail their suite.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckItem {
    pub name: String,
    pub pass: bool,
    pub value: f64,
    pub tolerance: f64,
    pub informational: bool,
    pub detail: String,
}

impl CheckItem {
    /// Passes when `value ≤ tolerance`.
    pub fn at_most(name: &str, value: f64, tolerance: f64, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            pass: value <= tolerance,
            value,
            tolerance,
            informational: false,
            detail: detail.into(),
        }
    }

    /// Passes when `value > threshold`.
    pub fn above(name: &str, value: f64, threshold: f64, detail: impl Into<String>) -> Self {
        Self {
            pass: value > threshold,
            ..Self::at_most(name, value, threshold, detail)
        }
    }

    pub fn informational(mut self) -> Self {
        self.informational = true;
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub name: String,
    pub pass: bool,
    pub items: Vec<CheckItem>,
    #[serde(skip)]
    pub seconds: f64,
}

impl SuiteReport {
    pub fn new(name: &str, items: Vec<CheckItem>, seconds: f64) -> Self {
        Self {
            name: name.into(),
            pass: items.iter().all(|i| i.pass || i.informational),
            items,
            seconds,
        }
    }

    pub fn item(&self, name: &str) -> Option<&CheckItem> {
        self.items.iter().find(|i| i.name == name)
    }
}

fn gaussian_point<R: Rng + ?Sized>(rng: &mut R) -> CP1Point {
    CP1Point::from_re_im(StandardNormal.sample(rng), StandardNormal.sample(rng))
}

fn random_mobius<R: Rng + ?Sized>(rng: &mut R) -> Mobius {
    loop {
        let mut e = || Complex64::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
        if let Ok(m) = Mobius::new(e(), e(), e(), e()) {
            if m.max_abs_entry() < 10.0 {
                return m;
            }
        }
    }
}

fn random_quadruple<R: Rng + ?Sized>(rng: &mut R, k: usize) -> [CP1Point; 4] {
    let mut q = [gaussian_point(rng), gaussian_point(rng), gaussian_point(rng), gaussian_point(rng)];
    if k % 10 == 0 {
        q[k / 10 % 4] = CP1Point::infinity();
    }
    q
}

/// Normalization, Möbius invariance, the sign table of `S₄`, and the permutation action.
pub fn crossratio(cfg: &RunConfig, n: usize) -> Result<Vec<CheckItem>> {
    let mut rng = stream(cfg.seed, "check-crossratio");
    let (zero, one, inf) = (CP1Point::from_re_im(0.0, 0.0), CP1Point::from_re_im(1.0, 0.0), CP1Point::infinity());
    let mut norm_err = 0.0f64;
    let mut inv_err = 0.0f64;
    let mut sign_bad = 0usize;
    let mut action_err = 0.0f64;
    let mut skipped = 0usize;
    let perms = Perm4::all();
    for k in 0..n {
        let z = Complex64::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng));
        let chi = cross_ratio(&zero, &one, &inf, &CP1Point::finite(z))?;
        norm_err = norm_err.max((chi.value().expect("finite") - z).norm());

        let q = random_quadruple(&mut rng, k);
        let Ok(chi) = cross_ratio(&q[0], &q[1], &q[2], &q[3]) else {
            skipped += 1;
            continue;
        };
        let m = random_mobius(&mut rng);
        let mq = q.map(|p| m.apply(&p));
        inv_err = inv_err.max(cross_ratio(&mq[0], &mq[1], &mq[2], &mq[3])?.point().chordal(chi.point()));
        let s = im_sign(&chi);
        if s == 0 {
            skipped += 1;
            continue;
        }
        for sigma in &perms {
            let [a, b, c, d] = sigma.apply(&q);
            let psi = cross_ratio(&a, &b, &c, &d)?;
            let expected = if sigma.is_even() { s } else { -s };
            if im_sign(&psi) != expected {
                sign_bad += 1;
            }
            action_err = action_err.max(permutation_action(*sigma, &chi).point().chordal(psi.point()));
        }
    }
    let tol = cfg.tol_identity;
    Ok(vec![
        CheckItem::at_most("normalization", norm_err, 1e-14, format!("max |[0;1;∞;z] − z| over {n} draws")),
        CheckItem::at_most("mobius_invariance", inv_err, tol, format!("max chordal error over {n} quadruples")),
        CheckItem::at_most(
            "s4_sign_table",
            sign_bad as f64,
            0.0,
            format!("sign mismatches over 24 permutations; {skipped} degenerate quadruples skipped"),
        ),
        CheckItem::at_most("permutation_action", action_err, tol, "max chordal error of the closed-form action"),
    ])
}

fn random_h3<R: Rng + ?Sized>(rng: &mut R) -> H3Point {
    H3Point::new(
        Complex64::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)),
        (rng.random_range(-1.5f64..1.5)).exp(),
    )
}

/// `∫ p_x dA` by polar quadrature around the foot of `x`.
fn polar_mass<F: EquivariantFamily + ?Sized>(fam: &F, x: &H3Point, n: usize) -> f64 {
    let h = PI / 2.0 / n as f64;
    (0..n)
        .map(|k| {
            let phi = (k as f64 + 0.5) * h;
            let r = x.t * phi.tan();
            let dr = x.t / phi.cos().powi(2) * h;
            let eta = CP1Point::finite(x.z + Complex64::new(r, 0.0));
            2.0 * PI * r * fam.log_density(x, &eta).exp() * dr
        })
        .sum()
}

/// Busemann cocycle and limit, ratio law, normalization, barycenter equivariance,
/// basepoint independence of `ρ₃`.
pub fn measure(cfg: &RunConfig) -> Result<Vec<CheckItem>> {
    let mut rng = stream(cfg.seed, "check-measure");
    let vis = VisualFamily;
    let trials = 2000;
    let (mut cocycle, mut limit, mut ratio, mut bary, mut basepoint) = (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for _ in 0..trials {
        let (x, y, z) = (random_h3(&mut rng), random_h3(&mut rng), random_h3(&mut rng));
        let eta = gaussian_point(&mut rng);
        let (bxy, byz, bxz) = (busemann(&eta, &x, &y), busemann(&eta, &y, &z), busemann(&eta, &x, &z));
        cocycle = cocycle.max((bxy + byz - bxz).abs() / (1.0 + bxz.abs()));

        // d(x, w) − d(y, w) for w close to η on the vertical geodesic above it
        let w = H3Point::new(eta.to_complex().expect("finite"), 1e-6);
        limit = limit.max((x.distance(&w) - y.distance(&w) - bxy).abs());

        let r = (vis.log_density(&x, &eta) - vis.log_density(&y, &eta)).exp();
        ratio = ratio.max((r / (-2.0 * bxy).exp() - 1.0).abs());

        let (a, b, c) = (gaussian_point(&mut rng), gaussian_point(&mut rng), gaussian_point(&mut rng));
        let m = random_mobius(&mut rng);
        let lhs = barycenter(&m.apply(&a), &m.apply(&b), &m.apply(&c))?;
        let rhs = poincare_extension(&m, &barycenter(&a, &b, &c)?);
        bary = bary.max(lhs.distance(&rhs));

        let direct = log_rho3_with(&vis, &a, &b, &c)?;
        let via = log_rho3_via_basepoint(&vis, &x, &a, &b, &c)?;
        basepoint = basepoint.max(((via - direct) / direct.abs().max(1.0)).abs());
    }
    let power = PowerFamily::new(2.0)?;
    let mut mass = 0.0f64;
    for _ in 0..5 {
        let x = random_h3(&mut rng);
        mass = mass.max((polar_mass(&vis, &x, 200_000) - 1.0).abs());
        mass = mass.max((polar_mass(&power, &x, 200_000) - 1.0).abs());
    }
    Ok(vec![
        CheckItem::at_most("busemann_cocycle", cocycle, 1e-10, "max |B(x,y) + B(y,z) − B(x,z)| / (1 + |B(x,z)|)"),
        CheckItem::at_most("busemann_limit", limit, 1e-6, "distance difference at height 1e-6 above η"),
        CheckItem::at_most("ratio_law", ratio, 1e-10, "max relative error of p_x/p_y = exp(−2B)"),
        CheckItem::at_most("density_normalization", mass, 1e-6, "polar quadrature of visual and power:2 densities"),
        CheckItem::at_most("barycenter_equivariance", bary, 1e-10, "max hyperbolic distance"),
        CheckItem::at_most("rho3_basepoint", basepoint, 1e-9, "max relative difference"),
    ])
}

/// Restriction prefixes, the sym-mode pushforward of `μ⁴`, and two-root agreement.
pub fn consistency(cfg: &RunConfig) -> Result<Vec<CheckItem>> {
    let mut items = Vec::new();
    let mut mismatches = 0usize;
    for mode in [Mode::Raw, Mode::Sym] {
        let md = cfg.measured_data()?.with_mode(mode);
        let big = grow_ball(&md, cfg.seed, cfg.depth.max(1))?;
        for k in 0..cfg.depth.max(1) {
            let small = grow_ball(&md, cfg.seed, k)?;
            if big.restrict(&ball(&root_tribone(), k)).assignments != small.assignments {
                mismatches += 1;
            }
        }
    }
    items.push(CheckItem::at_most(
        "restriction_prefix",
        mismatches as f64,
        0.0,
        format!("balls of radius < {} against the radius-{} ball, both modes", cfg.depth.max(1), cfg.depth.max(1)),
    ));

    let sym = cfg.measured_data()?.with_mode(Mode::Sym);
    let (quads, qstats) = sym.sample_quads(cfg.samples, &mut stream(cfg.seed, "pushforward-quads"))?;
    let (roots, rstats) = sym.sample_roots(cfg.samples, &mut stream(cfg.seed, "pushforward-roots"))?;
    let feat = |t: &[CP1Point]| crate::grow::sphere_features(t);
    let mut rng = stream(cfg.seed, "pushforward-test");
    let mut a: Vec<Vec<f64>> = quads.iter().map(|q| feat(&q[..3])).collect();
    let mut b: Vec<Vec<f64>> = roots.iter().map(|t| feat(t)).collect();
    use rand::seq::SliceRandom;
    a.shuffle(&mut rng);
    b.shuffle(&mut rng);
    let push = blocked_energy_test(&a, &b, cfg.block, cfg.permutations, &mut rng);
    items.push(CheckItem::above(
        "sym_pushforward",
        push.combined_p,
        cfg.alpha,
        format!(
            "energy test, {} blocks of {}; acceptance {:.3} (quads) {:.3} (roots)",
            push.blocks.len(),
            cfg.block,
            qstats.acceptance(),
            rstats.acceptance()
        ),
    ));

    for mode in [Mode::Sym, Mode::Raw] {
        let md = cfg.measured_data()?.with_mode(mode);
        let rep = two_root_agreement_test(&md, cfg.samples, 1, cfg.seed, cfg.block, cfg.permutations)?;
        let item = CheckItem::above(
            &format!("{mode}_two_root"),
            rep.test.combined_p,
            cfg.alpha,
            format!("{} quadribones, {} blocks; {}", rep.quadribones, rep.test.blocks.len(), rep.note),
        );
        items.push(if rep.applicable { item } else { item.informational() });
    }
    Ok(items)
}

fn random_triple<R: Rng + ?Sized>(rng: &mut R) -> [CP1Point; 3] {
    loop {
        let t = [gaussian_point(rng), gaussian_point(rng), gaussian_point(rng)];
        if in_o3(&t[0], &t[1], &t[2]) {
            return t;
        }
    }
}

/// Chains between random admissible triples, validated independently.
pub fn connectivity(cfg: &RunConfig, pairs: usize) -> Result<Vec<CheckItem>> {
    let mut rng = stream(cfg.seed, "check-connect");
    let (mut ok, mut longest, mut total) = (0usize, 0usize, 0usize);
    let mut failures = Vec::new();
    for k in 0..pairs {
        let (t1, t2) = (random_triple(&mut rng), random_triple(&mut rng));
        match connect(&t1, &t2, cfg.convention, &mut rng) {
            Ok(chain) if validate_chain(&chain, cfg.convention).valid && chain.len() <= MAX_CHAIN => {
                ok += 1;
                longest = longest.max(chain.len());
                total += chain.len();
            }
            Ok(_) => failures.push(format!("pair {k}: invalid chain")),
            Err(e) => failures.push(format!("pair {k}: {e}")),
        }
    }
    let mut detail = format!("{ok}/{pairs} valid; max length {longest}, mean {:.1}", total as f64 / ok.max(1) as f64);
    if !failures.is_empty() {
        detail += &format!("; {}", failures.join(", "));
    }
    Ok(vec![
        CheckItem::at_most("chain_failures", (pairs - ok) as f64, 0.0, detail),
        CheckItem::at_most("max_chain_length", longest as f64, MAX_CHAIN as f64, "longest validated chain"),
    ])
}

/// Local convexity of grown configurations, bending range, and the hyperboloid oracle.
/// Modes alternate between raw and sym.
pub fn convexity(cfg: &RunConfig, count: usize, depth: usize) -> Result<Vec<CheckItem>> {
    let mut seeds = stream(cfg.seed, "check-convexity");
    let (mut not_convex, mut out_of_range, mut oracle, mut edges) = (0usize, 0usize, 0.0f64, 0usize);
    let (mut min_bend, mut max_bend) = (f64::INFINITY, 0.0f64);
    for k in 0..count {
        let mode = if k % 2 == 0 { Mode::Raw } else { Mode::Sym };
        let md = cfg.measured_data()?.with_mode(mode);
        let c = grow_ball(&md, seeds.next_u64(), depth)?;
        let p = match certify(&c) {
            Ok(p) => p,
            Err(_) => {
                not_convex += 1;
                continue;
            }
        };
        for bend in &p.bends {
            edges += 1;
            min_bend = min_bend.min(bend.bending);
            max_bend = max_bend.max(bend.bending);
            if !(bend.bending > 0.0 && bend.bending < PI) {
                out_of_range += 1;
            }
            let [x, l, r, n] = bend.oriented.clone().map(|b| *c.value(&b).expect("grown"));
            let h = dihedral_angle_hyperboloid(&x, &l, &r, &n).unwrap_or(f64::NAN);
            let d = (h - bend.dihedral).abs();
            oracle = if d.is_nan() { f64::INFINITY } else { oracle.max(d) };
        }
    }
    Ok(vec![
        CheckItem::at_most("locally_convex", not_convex as f64, 0.0, format!("{count} configurations of depth {depth}")),
        CheckItem::at_most(
            "bending_in_range",
            out_of_range as f64,
            0.0,
            format!("{edges} edges; bending angles in [{min_bend:.3e}, {max_bend:.6}]"),
        ),
        CheckItem::at_most("hyperboloid_oracle", oracle, cfg.tol_oracle, "max dihedral disagreement"),
    ])
}

pub fn cat_map() -> TreeIsometry {
    TreeIsometry::new(2, 1, 1, 1).expect("unimodular")
}

/// Decay of `d(γᵖf, γᵖg)` for fields agreeing on `U₃⁺`, against an independent control.
pub fn contraction(cfg: &RunConfig) -> Result<Vec<CheckItem>> {
    let md = cfg.measured_data()?;
    let threshold = 2f64.powi(-8);
    let rep = contraction_experiment(&md, &cat_map(), 3, 40, 10, cfg.seed, false)?;
    let first = rep.rows.iter().find(|r| r.d_value < threshold).map(|r| r.p);
    let d: Vec<f64> = rep.rows.iter().map(|r| r.d_value).collect();
    let control = contraction_experiment(&md, &cat_map(), 3, 40, 10, cfg.seed, true)?;
    let floor = control.rows.iter().map(|r| r.d_value).fold(f64::INFINITY, f64::min);
    Ok(vec![
        CheckItem::at_most(
            "decay_step",
            first.map_or(f64::INFINITY, f64::from),
            40.0,
            format!("first p with d < 2^-8; exact absorption at p = {:?}", rep.absorbed_at),
        ),
        CheckItem::at_most("decay_trend", kendall_trend(&d), 0.0, "Kendall tau of d against p"),
        CheckItem::above(
            "control_no_decay",
            floor,
            threshold,
            format!(
                "min d over {} control steps; precision limit at p = {:?}",
                control.rows.len(),
                control.precision_limit
            ),
        ),
    ])
}

/// Vanishing-sequence axioms for random hyperbolic elements, exactly.
pub fn vanishing(cfg: &RunConfig, elements: usize, terms: usize) -> Result<Vec<CheckItem>> {
    let mut rng = stream(cfg.seed, "check-vanishing");
    let k: Vec<BElement> = ball(&root_tribone(), 2).elements.into_iter().collect();
    let mut failures = Vec::new();
    let mut traces = Vec::new();
    for _ in 0..elements {
        let g = random_hyperbolic(&mut rng, 50);
        traces.push(g.trace().to_string());
        let rep = vanishing_sets(&g, terms)?.check(&k, 400);
        if !rep.holds() {
            failures.push(format!("{g}: {rep:?}"));
        }
    }
    Ok(vec![CheckItem::at_most(
        "axioms",
        failures.len() as f64,
        0.0,
        format!("{elements} elements with traces [{}], {terms} terms; {}", traces.join(", "), failures.join("; ")),
    )])
}

fn random_psl2z<R: Rng + ?Sized>(rng: &mut R) -> TreeIsometry {
    let mut g = TreeIsometry::identity();
    for _ in 0..rng.random_range(1..12) {
        let k: i64 = rng.random_range(-4..=4);
        g = g.compose(&TreeIsometry::new(1, k, 0, 1).expect("unimodular")).compose(&TreeIsometry::inversion());
    }
    g
}

/// Ball sizes and preservation of Farey adjacency under the modular group.
pub fn combinatorics(cfg: &RunConfig, max_radius: usize, actions: usize) -> Result<Vec<CheckItem>> {
    let v0 = root_tribone();
    let bad_sizes: Vec<usize> = (0..=max_radius)
        .filter(|&n| ball(&v0, n).len() != 3 << n || ball_vertices(&v0, n).len() != 3 * (1 << n) - 2)
        .collect();
    let mut rng = stream(cfg.seed, "check-combinatorics");
    let pool: Vec<Tribone> = ball_vertices(&v0, 6).into_iter().map(|v| v.tribone).collect();
    let mut broken = 0usize;
    for _ in 0..actions {
        let g = random_psl2z(&mut rng);
        let t = &pool[rng.random_range(0..pool.len())];
        let [a, b, c] = t.elements().clone().map(|x| g.act(&x));
        let adjacent = a.is_adjacent(&b) && b.is_adjacent(&c) && a.is_adjacent(&c);
        if !adjacent || Tribone::new(a, b, c).is_err() {
            broken += 1;
        }
    }
    Ok(vec![
        CheckItem::at_most(
            "ball_sizes",
            bad_sizes.len() as f64,
            0.0,
            format!("|B_n| = 3·2^n for n ≤ {max_radius}; failing radii {bad_sizes:?}"),
        ),
        CheckItem::at_most("adjacency", broken as f64, 0.0, format!("{actions} random modular actions on tribones")),
    ])
}

/// Birkhoff averages of the root bending angle for two seeds.
pub fn ergodicity(cfg: &RunConfig, steps: usize) -> Result<Vec<CheckItem>> {
    let md = cfg.measured_data()?;
    let seeds = [cfg.seed, cfg.seed.wrapping_add(1)];
    let cmp = birkhoff_compare(&md, &cat_map(), Observable::RootBend, steps, &seeds, 50, 1000)?;
    let finals: Vec<String> = cmp
        .traces
        .iter()
        .zip(&cmp.intervals)
        .map(|(t, (lo, hi))| format!("seed {}: {:.4} [{lo:.4}, {hi:.4}]", t.seed, t.running.last().copied().unwrap_or(f64::NAN)))
        .collect();
    Ok(vec![CheckItem::at_most(
        "intervals_overlap",
        if cmp.overlap { 0.0 } else { 1.0 },
        0.0,
        format!("N = {steps}; {}", finals.join("; ")),
    )])
}

/// Variance of `log ρ₃` differences between the visual and power families.
pub fn singularity(cfg: &RunConfig, n: usize) -> Result<Vec<CheckItem>> {
    let mut rng = stream(cfg.seed, "check-singularity");
    let power = Family::Power(PowerFamily::new(2.0)?);
    let vis = Family::Visual(VisualFamily);
    let j = H3Point::j();
    let mut diffs = Vec::with_capacity(n);
    while diffs.len() < n {
        let (a, b, c) = (sample_visual(&j, &mut rng), sample_visual(&j, &mut rng), sample_visual(&j, &mut rng));
        if let (Ok(x), Ok(y)) = (log_rho3_with(&vis, &a, &b, &c), log_rho3_with(&power, &a, &b, &c)) {
            if x.is_finite() && y.is_finite() {
                diffs.push(x - y);
            }
        }
    }
    Ok(vec![CheckItem::above(
        "log_density_variance",
        variance(&diffs),
        0.1,
        format!("visual against power:2 over {n} triples drawn from μ_j"),
    )])
}

/// Correlation of root-edge shape with the shape of an edge at tree distance `d`,
/// along the axis of the cat map.
pub fn markov(cfg: &RunConfig) -> Result<Vec<CheckItem>> {
    let md: MeasuredData = cfg.measured_data()?;
    let v0 = root_tribone();
    let target = cat_map().pow(12).act_tribone(&v0);
    let path = tree_path(&v0, &target);
    let distances: Vec<usize> = [1usize, 2, 4, 8, 16].into_iter().filter(|&d| d + 1 < path.len()).collect();
    let far = *distances.last().expect("path is long");
    let obs = Observable::RootIm;
    let edge = |f: &LazyField, d: usize| -> Result<f64> {
        let (quad, _) = crate::grow::glue_step(&path[d], &path[d + 1]);
        let v = quad.map(|b| f.get(&b).expect("grown"));
        obs.eval(&v)
    };
    let mut seeds = stream(cfg.seed, "check-markov");
    let mut root = Vec::with_capacity(cfg.samples);
    let mut at: Vec<Vec<f64>> = vec![Vec::with_capacity(cfg.samples); distances.len()];
    for _ in 0..cfg.samples {
        let mut f = LazyField::new(md, seeds.next_u64())?;
        f.ensure_vertex(&path[far + 1])?;
        root.push(edge(&f, 0)?);
        for (slot, &d) in at.iter_mut().zip(&distances) {
            slot.push(edge(&f, d)?);
        }
    }
    let rho: Vec<f64> = at.iter().map(|x| correlation(&root, x)).collect();
    let threshold = distances.iter().zip(&rho).find(|(_, r)| r.abs() < 0.05).map(|(d, _)| *d);
    let table: Vec<String> = distances.iter().zip(&rho).map(|(d, r)| format!("d={d}: {r:+.4}")).collect();
    Ok(vec![CheckItem::at_most(
        "far_correlation",
        rho.last().copied().unwrap_or(f64::NAN).abs(),
        0.05,
        format!(
            "{} fields; {}; empirical threshold {:?}; nominal separation 1000",
            cfg.samples,
            table.join(", "),
            threshold
        ),
    )])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick() -> RunConfig {
        RunConfig {
            seed: 5,
            samples: 200,
            block: 100,
            permutations: 49,
            depth: 3,
            ..RunConfig::default()
        }
    }

    #[test]
    fn fast_suites_pass() {
        let cfg = quick();
        for items in [
            crossratio(&cfg, 500).unwrap(),
            measure(&cfg).unwrap(),
            connectivity(&cfg, 5).unwrap(),
            convexity(&cfg, 10, 4).unwrap(),
            vanishing(&cfg, 3, 12).unwrap(),
            combinatorics(&cfg, 6, 500).unwrap(),
            singularity(&cfg, 2000).unwrap(),
        ] {
            let r = SuiteReport::new("t", items, 0.0);
            assert!(r.pass, "{r:#?}");
        }
    }

    #[test]
    fn suite_names_roundtrip() {
        for s in Suite::ALL {
            assert_eq!(s.name().parse::<Suite>().unwrap(), s);
        }
        assert!("nope".parse::<Suite>().is_err());
    }

    #[test]
    fn informational_items_do_not_fail() {
        let bad = CheckItem::above("x", 0.0, 0.01, "").informational();
        assert!(!bad.pass);
        assert!(SuiteReport::new("s", vec![bad], 0.0).pass);
        assert!(!SuiteReport::new("s", vec![CheckItem::at_most("y", 2.0, 1.0, "")], 0.0).pass);
    }
}
