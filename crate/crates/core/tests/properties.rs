//! Randomized invariants across the modules.

use std::f64::consts::PI;

use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use ksample_core::configdata::{ConfigData, MeasuredData, Mode};
use ksample_core::cp1::{cross_ratio, in_o3, in_o4, o4_verdict, CP1Point, Mobius, Perm4, SignConvention, Verdict};
use ksample_core::dynamics::{act, metric_d};
use ksample_core::grow::{grow_ball, Field, LazyField};
use ksample_core::h3measure::{barycenter, log_rho3, poincare_extension, H3Point};
use ksample_core::pleat::{bending_angle, dihedral_angle};
use ksample_core::tree::{ball, neighbor_across, root_tribone, BElement, Quadribone, TreeIsometry, Tribone};

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn point() -> impl Strategy<Value = CP1Point> {
    (-4.0..4.0f64, -4.0..4.0f64).prop_map(|(x, y)| CP1Point::from_re_im(x, y))
}

fn mobius() -> impl Strategy<Value = Mobius> {
    prop::array::uniform8(-2.0..2.0f64)
        .prop_filter_map("singular", |v| Mobius::new(c(v[0], v[1]), c(v[2], v[3]), c(v[4], v[5]), c(v[6], v[7])).ok())
        .prop_filter("ill-conditioned", |m| m.max_abs_entry() < 20.0)
}

/// A tribone reached by a walk from the root.
fn tribone() -> impl Strategy<Value = Tribone> {
    prop::collection::vec(0usize..3, 0..12).prop_map(|steps| {
        steps
            .into_iter()
            .fold(root_tribone(), |t, i| t.neighbors()[i].clone())
    })
}

fn isometry() -> impl Strategy<Value = TreeIsometry> {
    prop::collection::vec(-3i32..=3, 0..6).prop_map(|ks| {
        ks.into_iter().fold(TreeIsometry::identity(), |g, k| {
            let t = if k >= 0 {
                TreeIsometry::translation().pow(k as u32)
            } else {
                TreeIsometry::translation().inverse().pow((-k) as u32)
            };
            g.compose(&t).compose(&TreeIsometry::inversion())
        })
    })
}

fn collides(a: &CP1Point, b: &CP1Point, c: &CP1Point, d: &CP1Point) -> bool {
    let p = [a, b, c, d];
    (0..4).any(|i| (i + 1..4).any(|j| p[i].approx_eq(p[j])))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn neighbor_across_is_an_involution(t in tribone(), i in 0usize..3) {
        let [a, b, cc] = t.elements().clone();
        let (u, v, w) = [(&a, &b, &cc), (&b, &cc, &a), (&a, &cc, &b)][i];
        let d = neighbor_across(u, v, w).unwrap();
        prop_assert!(d != *w);
        prop_assert!(d.is_adjacent(u) && d.is_adjacent(v));
        prop_assert_eq!(&neighbor_across(u, v, &d).unwrap(), w);
    }

    #[test]
    fn quadribone_has_two_tribones_sharing_an_edge(t in tribone(), i in 0usize..3) {
        let far = t.elements()[i].clone();
        let q = Quadribone::glued(&t, &far).unwrap();
        let (t1, t2) = q.tribones();
        prop_assert!(t1 == t || t2 == t);
        prop_assert!(t1 != t2);
        let (l, r) = q.edge();
        prop_assert!(t1.contains(l) && t1.contains(r) && t2.contains(l) && t2.contains(r));
    }

    #[test]
    fn isometries_act_as_a_group(g in isometry(), h in isometry(), t in tribone()) {
        for b in t.elements() {
            prop_assert_eq!(g.compose(&h).act(b), g.act(&h.act(b)));
            prop_assert_eq!(&g.inverse().act(&g.act(b)), b);
        }
        let q = Quadribone::glued(&t, &t.elements()[0]).unwrap();
        let gq = g.act_quadribone(&q);
        let (g1, g2) = gq.tribones();
        let (t1, t2) = q.tribones();
        let images = [g.act_tribone(&t1), g.act_tribone(&t2)];
        prop_assert!(images.contains(&g1) && images.contains(&g2));
    }

    #[test]
    fn ball_sizes_everywhere(t in tribone(), n in 0usize..6) {
        let b = ball(&t, n);
        prop_assert_eq!(b.len(), 3 << n);
        prop_assert!(b.is_subset(&ball(&t, n + 1)));
    }

    #[test]
    fn cross_ratio_is_mobius_invariant(a in point(), b in point(), cc in point(), d in point(), m in mobius()) {
        prop_assume!(!collides(&a, &b, &cc, &d));
        let x = cross_ratio(&a, &b, &cc, &d).unwrap().value().unwrap();
        let y = cross_ratio(&m.apply(&a), &m.apply(&b), &m.apply(&cc), &m.apply(&d)).unwrap().value();
        if let Some(y) = y {
            prop_assert!((x - y).norm() <= 1e-6 * (1.0 + x.norm()), "{x} vs {y}");
        }
    }

    #[test]
    fn cross_ratio_special_values_only_at_collisions(a in point(), b in point(), cc in point(), d in point()) {
        prop_assume!(in_o3(&a, &b, &cc));
        let chi = cross_ratio(&a, &b, &cc, &d).unwrap();
        let special = match chi.value() {
            None => true,
            Some(z) => z.norm() < 1e-12 || (z - 1.0).norm() < 1e-12,
        };
        let close = d.chordal(&a) < 1e-9 || d.chordal(&b) < 1e-9 || d.chordal(&cc) < 1e-9;
        prop_assert_eq!(special, close);
        let coincide = cross_ratio(&a, &b, &cc, &a).unwrap().value().unwrap();
        prop_assert!(coincide.norm() < 1e-12);
    }

    #[test]
    fn o4_symmetries(a in point(), b in point(), cc in point(), d in point()) {
        let q = [a, b, cc, d];
        for conv in [SignConvention::Negative, SignConvention::Nonzero] {
            let v = o4_verdict(&a, &b, &cc, &d, conv);
            if v == Verdict::Degenerate {
                continue;
            }
            let r = o4_verdict(&d, &cc, &b, &a, conv);
            prop_assert_eq!(v, r);
            for p in Perm4::even() {
                let [x, y, z, w] = p.apply(&q);
                prop_assert_eq!(o4_verdict(&x, &y, &z, &w, conv), v);
            }
            if in_o4(&a, &b, &cc, &d, conv) {
                prop_assert!(in_o3(&a, &b, &cc) && in_o3(&b, &cc, &d));
            }
        }
    }

    #[test]
    fn barycenter_is_equivariant(a in point(), b in point(), cc in point(), m in mobius()) {
        prop_assume!(a.chordal(&b) > 1e-2 && b.chordal(&cc) > 1e-2 && a.chordal(&cc) > 1e-2);
        let x = barycenter(&a, &b, &cc).unwrap();
        for y in [barycenter(&b, &cc, &a).unwrap(), barycenter(&cc, &a, &b).unwrap(), barycenter(&b, &a, &cc).unwrap()] {
            prop_assert!(x.distance(&y) < 1e-8);
        }
        let (ma, mb, mc) = (m.apply(&a), m.apply(&b), m.apply(&cc));
        prop_assume!(ma.chordal(&mb) > 1e-2 && mb.chordal(&mc) > 1e-2 && ma.chordal(&mc) > 1e-2);
        let mx = barycenter(&ma, &mb, &mc).unwrap();
        prop_assert!(poincare_extension(&m, &x).distance(&mx) < 1e-6);
    }

    #[test]
    fn rho3_is_cyclically_invariant(a in point(), b in point(), cc in point()) {
        prop_assume!(a.chordal(&b) > 1e-3 && b.chordal(&cc) > 1e-3 && a.chordal(&cc) > 1e-3);
        let r = log_rho3(&a, &b, &cc).unwrap();
        prop_assert!((r - log_rho3(&b, &cc, &a).unwrap()).abs() < 1e-9);
        prop_assert!((r - log_rho3(&cc, &a, &b).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn extension_meets_boundary_action(m in mobius(), z in point()) {
        let zc = z.to_complex().unwrap();
        let image = m.apply(&z);
        prop_assume!(!image.is_infinite() && image.to_complex().unwrap().norm() < 1e3);
        let x = poincare_extension(&m, &H3Point::new(zc, 1e-9));
        let w = image.to_complex().unwrap();
        prop_assert!((x.z - w).norm() < 1e-5 * (1.0 + w.norm()), "{} vs {w}", x.z);
    }

    #[test]
    fn rho4_sym_even_permutations_and_support(a in point(), b in point(), cc in point(), d in point()) {
        let md = MeasuredData::visual(Mode::Sym);
        let cd = ConfigData::new(SignConvention::Negative);
        let q = [a, b, cc, d];
        let v = md.log_rho4_sym(&q);
        if !cd.in_o4(&q) {
            prop_assert_eq!(v, f64::NEG_INFINITY);
            prop_assert_eq!(md.log_rho4_raw(&q), f64::NEG_INFINITY);
            return Ok(());
        }
        for p in Perm4::even() {
            let w = md.log_rho4_sym(&p.apply(&q));
            prop_assert!((v - w).abs() <= 1e-9 * (1.0 + v.abs()), "{v} vs {w}");
        }
    }

    #[test]
    fn dihedral_range_and_flatness(a in point(), b in point(), cc in point(), d in point()) {
        prop_assume!(!collides(&a, &b, &cc, &d));
        let chi = cross_ratio(&a, &b, &cc, &d).unwrap().value().unwrap();
        let theta = dihedral_angle(&a, &b, &cc, &d).unwrap();
        prop_assert!((0.0..=PI).contains(&theta));
        prop_assert!((bending_angle(&a, &b, &cc, &d).unwrap() - (PI - theta)).abs() < 1e-15);
        let real = chi.im.abs() < 1e-12 * (1.0 + chi.norm());
        prop_assert_eq!(real, theta < 1e-9 || PI - theta < 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn growth_is_deterministic_and_order_free(seed in any::<u64>(), order in Just(vec![0usize, 1, 2]).prop_shuffle()) {
        let md = MeasuredData::visual(Mode::Raw);
        let full = grow_ball(&md, seed, 3).unwrap();
        prop_assert!(full.replay(&md).unwrap());
        let mut lazy = LazyField::new(md.clone(), seed).unwrap();
        let root = root_tribone();
        for i in order {
            let t = root.neighbors()[i].neighbors()[(i + 1) % 3].clone();
            lazy.ensure_vertex(&t).unwrap();
        }
        lazy.grow_ball(3).unwrap();
        prop_assert_eq!(&lazy.configuration().assignments, &full.assignments);
        let certs = full.certificates().unwrap();
        prop_assert_eq!(certs.tribones.len(), full.domain_tribones().unwrap().len());
        prop_assert_eq!(certs.quadribones.len(), full.domain_quadribones().unwrap().len());
        prop_assert!(certs.all_hold());
    }

    #[test]
    fn metric_agreement_bound(seed in any::<u64>(), k in 0usize..5, n in 5usize..8) {
        let md = MeasuredData::visual(Mode::Raw);
        let f = grow_ball(&md, seed, n).unwrap();
        let mut g = f.clone();
        // perturb one element just outside the radius-k ball
        let inner = ball(&root_tribone(), k);
        let outer = ball(&root_tribone(), k + 1);
        let b: BElement = outer.elements.iter().find(|b| !inner.contains(b)).unwrap().clone();
        let v = f.value(&b).unwrap();
        g = g.with_value(&b, CP1Point::finite(v.to_complex().unwrap_or(c(0.0, 0.0)) + c(0.0, 1e-3)));
        let d = metric_d(&f, &g, n).unwrap();
        prop_assert!(d <= 2f64.powi(-(k as i32)) + 2f64.powi(-(n as i32)) + 1e-15, "d = {d}");
        prop_assert_eq!(metric_d(&f, &f, n).unwrap(), 0.0);
    }

    #[test]
    fn field_action_is_a_right_action(seed in any::<u64>(), g in isometry(), h in isometry(), t in tribone()) {
        let md = MeasuredData::visual(Mode::Raw);
        let mut f = LazyField::new(md, seed).unwrap();
        let gh = g.compose(&h);
        for b in t.elements() {
            let lhs = act(&gh, &mut f).value(b).unwrap();
            // (h·(g·f))(b) = (g·f)(h b) = f(g h b)
            let mut gf = act(&g, &mut f);
            let rhs = act(&h, &mut gf).value(b).unwrap();
            prop_assert_eq!(lhs, rhs);
        }
    }
}

#[test]
fn grown_root_quadruple_matches_direct_sampling() {
    use ksample_core::stats::blocked_energy_test;
    let features = |q: &[CP1Point; 4]| q.iter().flat_map(|p| p.to_sphere()).collect::<Vec<f64>>();
    let md = MeasuredData::visual(Mode::Raw);
    let n = 400;
    let q = Quadribone::glued(&root_tribone(), &root_tribone().elements()[0]).unwrap();
    let o = q.oriented_from(&root_tribone().elements()[0]).unwrap();
    let grown: Vec<[CP1Point; 4]> = (0..n as u64)
        .map(|s| {
            let mut f = LazyField::new(md.clone(), 1000 + s).unwrap();
            let v = f.values(&o).unwrap();
            [v[0], v[1], v[2], v[3]]
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (direct, _) = md.sample_quads(n, &mut rng).unwrap();
    let x: Vec<Vec<f64>> = grown.iter().map(features).collect();
    let y: Vec<Vec<f64>> = direct.iter().map(features).collect();
    let p = blocked_energy_test(&x, &y, 100, 199, &mut rng).combined_p;
    assert!(p > 0.001, "p = {p}");
}
