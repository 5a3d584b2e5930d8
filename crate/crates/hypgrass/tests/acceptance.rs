//! Acceptance suite: one test per criterion, each printing a pass line and
//! pinning its tolerance in code. Criterion 12 (command-line goldens) lives
//! with the CLI crate.

mod common;

use hypgrass::boundary::{
    boundary_from_flag, busemann, flag_of, ray_point, stabilizer_check, tits_angle, BoundaryPoint,
    IsotropicFlag,
};
use hypgrass::cat0::{
    center_of_directions, circumcenter, comparison_angle, jung_probe, nested_intersection,
    project, ConvexSet, NestedChain,
};
use hypgrass::kfields::{distance_k, realify_point, KKind, KStructure};
use hypgrass::linalg;
use hypgrass::{Point, Xpq};
use nalgebra::{DMatrix, DVector};
use rand_chacha::ChaCha8Rng;
use rand_core::SeedableRng;

fn random_dims(rng: &mut ChaCha8Rng) -> (usize, usize) {
    let p = 1 + (rng.next_u64() % 4) as usize;
    let q = p + (rng.next_u64() % (9 - p as u64)) as usize;
    (p, q.max(p))
}

use rand_core::RngCore;

fn random_lambda(rng: &mut ChaCha8Rng, p: usize) -> DVector<f64> {
    DVector::from_fn(p, |_, _| linalg::standard_normal(rng))
}

fn sorted_abs(lambda: &DVector<f64>) -> Vec<f64> {
    let mut v: Vec<f64> = lambda.iter().map(|x| x.abs()).collect();
    v.sort_by(|a, b| b.partial_cmp(a).unwrap());
    v
}

#[test]
fn criterion_01_angle_lambda_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    for _ in 0..100 {
        let (p, q) = random_dims(&mut rng);
        let space = Xpq::new(p, q).unwrap();
        let lambda = random_lambda(&mut rng, p);
        let m = space.standard_transvection_matrix(&lambda);
        let f = space.point_from_frame(m * space.base_point().frame()).unwrap();
        let spec = space.principal_angles(&space.base_point(), &f).unwrap();
        let expect = sorted_abs(&lambda);
        for (a, b) in spec.alphas().iter().zip(expect.iter()) {
            assert!(
                (a - b).abs() <= 1e-8,
                "angle {a} vs |lambda| {b} at (p,q)=({p},{q})"
            );
        }
    }
    println!("ACCEPT 1: angle/lambda identity pass (100 samples, 1e-8)");
}

#[test]
fn criterion_02_distance_formula_and_linearity() {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    for _ in 0..100 {
        let (p, q) = random_dims(&mut rng);
        let space = Xpq::new(p, q).unwrap();
        let lambda = random_lambda(&mut rng, p);
        let m = space.standard_transvection_matrix(&lambda);
        let f = space.point_from_frame(m * space.base_point().frame()).unwrap();
        let d = space.distance(&space.base_point(), &f).unwrap();
        let expect = (2.0 * lambda.norm_squared()).sqrt();
        assert!((d - expect).abs() <= 1e-8, "distance {d} vs {expect}");
    }
    // Linearity along the flat direction.
    let mut rng = ChaCha8Rng::seed_from_u64(203);
    for _ in 0..10 {
        let (p, q) = random_dims(&mut rng);
        let space = Xpq::new(p, q).unwrap();
        let lambda = random_lambda(&mut rng, p) * 0.4;
        let base = space.base_point();
        let unit = {
            let m = space.standard_transvection_matrix(&lambda);
            let f = space.point_from_frame(m * base.frame()).unwrap();
            space.distance(&base, &f).unwrap()
        };
        for t in [0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0] {
            let scaled = &lambda * t;
            let m = space.standard_transvection_matrix(&scaled);
            let f = space.point_from_frame(m * base.frame()).unwrap();
            let d = space.distance(&base, &f).unwrap();
            assert!(
                (d - t * unit).abs() <= 1e-7,
                "linearity at t={t}: {d} vs {}",
                t * unit
            );
        }
    }
    println!("ACCEPT 2: distance formula + linearity pass (1e-8 / 1e-7)");
}

#[test]
fn criterion_03_oracle_equivalence() {
    let mut count = 0;
    for (p, q) in [(2usize, 4usize), (3, 5)] {
        let space = Xpq::new(p, q).unwrap();
        for k in 0..25u64 {
            let e = space.random_point(300 + 7 * k, 1.0);
            let f = space.random_point(600 + 11 * k, 1.0);
            let spec = space.principal_angles(&e, &f).unwrap();
            let oracle = common::greedy_cosh_oracle(&space, &e, &f);
            for (alpha, c) in spec.alphas().iter().zip(oracle.iter()) {
                let alpha_oracle = c.max(1.0).acosh();
                assert!(
                    (alpha - alpha_oracle).abs() <= 1e-6,
                    "eigen {alpha} vs greedy {alpha_oracle} at p={p} sample {k}"
                );
            }
            count += 1;
        }
    }
    assert_eq!(count, 50);
    println!("ACCEPT 3: greedy oracle equivalence pass (50 pairs, 1e-6)");
}

#[test]
fn criterion_04_cat0_suite() {
    // Bruhat-Tits on 1000 random midpoint triples.
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    for i in 0..1000u64 {
        let (p, q) = random_dims(&mut rng);
        let space = Xpq::new(p, q).unwrap();
        let x = space.random_point(3 * i + 1, 0.9);
        let y = space.random_point(3 * i + 2, 0.9);
        let z = space.random_point(3 * i + 3, 0.9);
        let m = space.midpoint(&y, &z).unwrap();
        let dxm = space.distance(&x, &m).unwrap();
        let dxy = space.distance(&x, &y).unwrap();
        let dxz = space.distance(&x, &z).unwrap();
        let dyz = space.distance(&y, &z).unwrap();
        let slack = 0.5 * (dxy * dxy + dxz * dxz) - 0.25 * dyz * dyz - dxm * dxm;
        assert!(slack >= -1e-7, "Bruhat-Tits slack {slack} at sample {i}");
    }

    // Obtuse-angle projection property on 200 samples across set kinds.
    let space = Xpq::new(2, 4).unwrap();
    let xi = BoundaryPoint::new(
        &space,
        space.standard_chart(),
        DVector::from_vec(vec![1.0, 0.45]),
    )
    .unwrap();
    let sets = [
        ConvexSet::Ball {
            center: space.random_point(41, 0.5),
            radius: 0.8,
        },
        ConvexSet::Horoball { xi, level: -0.4 },
        ConvexSet::TotallyGeodesic { q_inner: 2 },
        ConvexSet::Subflat {
            chart: space.standard_chart(),
            offset: DVector::zeros(2),
            directions: DMatrix::from_column_slice(2, 1, &[1.0, 0.0]),
        },
    ];
    let mut checked = 0usize;
    let mut sample = 0u64;
    while checked < 200 {
        sample += 1;
        let set = &sets[(sample % 4) as usize];
        let x = space.random_point(9000 + sample, 1.0);
        let y = project(&space, set, &x).unwrap();
        if space.distance(&x, &y).unwrap() < 1e-3 {
            continue;
        }
        let raw = space.random_point(12_000 + sample, 0.9);
        let z = project(&space, set, &raw).unwrap();
        if space.distance(&y, &z).unwrap() < 1e-4 {
            continue;
        }
        let ang = comparison_angle(&space, &y, &x, &z).unwrap();
        assert!(
            ang >= std::f64::consts::FRAC_PI_2 - 1e-4,
            "obtuse property failed on {}: {ang}",
            set.kind()
        );
        checked += 1;
    }

    // Circumcenter-difference inequality audited along nested runs.
    let space = Xpq::new(2, 3).unwrap();
    for run in 0..5u64 {
        let anchor = space.random_point(500 + run, 0.5);
        let target = space.random_point(600 + run, 0.5);
        let geo = space.geodesic(&anchor, &target).unwrap();
        let mut sets = Vec::new();
        let mut radius = 2.0;
        for k in 0..6 {
            let center = geo.at(&space, k as f64 * 0.02).unwrap();
            sets.push(ConvexSet::Ball {
                center,
                radius,
            });
            radius = 0.7 * radius - 0.02;
        }
        let chain = NestedChain::new(&space, sets).unwrap();
        let out = nested_intersection(&space, &chain).unwrap();
        assert!(
            out.cauchy_violation <= 1e-9,
            "Cauchy audit violated: {}",
            out.cauchy_violation
        );
    }
    println!("ACCEPT 4: CAT(0) suite pass (BT 1000, obtuse 200, Cauchy audits)");
}

#[test]
fn criterion_05_isometry_invariance_and_witt() {
    let space = Xpq::new(3, 5).unwrap();
    let e = space.random_point(51, 1.0);
    let f = space.random_point(52, 1.0);
    let spec = space.principal_angles(&e, &f).unwrap();
    for seed in 0..100u64 {
        let g = space.random_isometry(5000 + seed);
        let ge = space.apply(&g, &e).unwrap();
        let gf = space.apply(&g, &f).unwrap();
        let moved = space.principal_angles(&ge, &gf).unwrap();
        assert!(
            spec.max_abs_diff(&moved) <= 1e-7,
            "spectrum moved by {} under isometry {seed}",
            spec.max_abs_diff(&moved)
        );
    }
    // Witt on generator-based quadruples.
    for seed in 0..20u64 {
        let a = space.random_point(7000 + seed, 0.9);
        let b = space.random_point(7100 + seed, 0.9);
        let h = space.random_isometry(7200 + seed);
        let a2 = space.apply(&h, &a).unwrap();
        let b2 = space.apply(&h, &b).unwrap();
        let g = space.witt_isometry(&a, &b, &a2, &b2).unwrap();
        assert!(g.residual() <= 1e-7, "form residual {}", g.residual());
        let ga = space.apply(&g, &a).unwrap();
        let gb = space.apply(&g, &b).unwrap();
        assert!(space.subspace_gap(&ga, &a2).unwrap() <= 1e-7);
        assert!(space.subspace_gap(&gb, &b2).unwrap() <= 1e-7);
    }
    println!("ACCEPT 5: isometry invariance (100) + witt residuals (20) pass (1e-7)");
}

#[test]
fn criterion_06_norm_lemma() {
    // The lemma's value is the norm of the restriction to the base point:
    // for M in O(p,q) with M E_0 at top angle a1 from E_0,
    // ||M|_{E_0}|| = sqrt(cosh^2 a1 + sinh^2 a1).
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    for k in 0..30u64 {
        let (p, q) = random_dims(&mut rng);
        let space = Xpq::new(p, q).unwrap();
        let f = space.random_point(660 + k, 0.9);
        let base = space.base_point();
        if space.distance(&base, &f).unwrap() < 1e-6 {
            continue;
        }
        let t = 0.3 + (k as f64) * 0.1;
        let g = space.transvection(&base, &f, t).unwrap();
        let gb = space.apply(&g, &base).unwrap();
        let alpha1 = space.principal_angles(&base, &gb).unwrap().max();
        let expect = (alpha1.cosh().powi(2) + alpha1.sinh().powi(2)).sqrt();
        let restricted = g
            .matrix()
            .columns(0, space.p())
            .into_owned()
            .singular_values()
            .max();
        assert!(
            (restricted - expect).abs() <= 1e-8 * expect.max(1.0),
            "norm lemma: {restricted} vs {expect} at sample {k}"
        );
    }
    println!("ACCEPT 6: norm lemma pass (30 transvections, 1e-8)");
}

#[test]
fn criterion_07_busemann() {
    let space = Xpq::new(2, 3).unwrap();
    let xi = BoundaryPoint::new(
        &space,
        space.standard_chart(),
        DVector::from_vec(vec![0.9, 0.35]),
    )
    .unwrap();
    let base = space.base_point();
    // Along-ray identity to 1e-6.
    for s in [0.5, 2.0, 7.5] {
        let x = ray_point(&space, &xi, s).unwrap();
        let rep = busemann(&space, &xi, &x, &base, 1e4).unwrap();
        assert!(
            (rep.value + s).abs() <= 1e-6,
            "along-ray: {} vs {}",
            rep.value,
            -s
        );
        assert!(rep.converged);
    }
    // Cocycle on 50 random triples with t_max = 1e4, with the asymptotic
    // angle formula agreeing as an independent second route.
    for k in 0..50u64 {
        let x = space.random_point(800 + 3 * k, 0.8);
        let y = space.random_point(801 + 3 * k, 0.8);
        let z = space.random_point(802 + 3 * k, 0.8);
        let rep_xy = busemann(&space, &xi, &x, &y, 1e4).unwrap();
        assert!(
            rep_xy.aaf_residual <= 1e-6,
            "angle-formula route disagrees by {} at triple {k}",
            rep_xy.aaf_residual
        );
        let xy = rep_xy.value;
        let yz = busemann(&space, &xi, &y, &z, 1e4).unwrap().value;
        let xz = busemann(&space, &xi, &x, &z, 1e4).unwrap().value;
        let resid = (xy + yz - xz).abs();
        assert!(resid <= 1e-5, "cocycle residual {resid} at triple {k}");
    }
    println!("ACCEPT 7: Busemann along-ray (1e-6) + cocycle (50 triples, 1e-5) + angle formula pass");
}

#[test]
fn criterion_08_jung_probe() {
    for &p in &[2usize, 3usize] {
        let space = Xpq::new(p, 2 * p).unwrap();
        let bound = (p as f64 / (2.0 * (p as f64 + 1.0))).sqrt() + 0.05;
        for cloud in 0..10u64 {
            let pts = common::spread_cloud(&space, 81_000 + cloud * 97 + p as u64, 50, 10.0);
            let rep = jung_probe(&space, &pts, p, 0.05).unwrap();
            assert!(rep.diameter >= 10.0);
            assert!(
                rep.pass && rep.ratio <= bound,
                "Jung ratio {} exceeds bound {bound} (p={p}, cloud {cloud})",
                rep.ratio
            );
        }
    }
    // Closed forms: two points and the equilateral triple.
    let space = Xpq::new(2, 2).unwrap();
    let a = space.random_point(82_001, 0.8);
    let b = space.random_point(82_002, 0.8);
    let two = jung_probe(&space, &[a, b], 1, 0.05).unwrap();
    assert!((two.ratio - 0.5).abs() <= 1e-9, "two-point ratio {}", two.ratio);
    let chart = space.standard_chart();
    let s = 1.1f64;
    let tri = [
        space.exp_map(&chart, &DVector::from_vec(vec![0.0, 0.0])).unwrap(),
        space.exp_map(&chart, &DVector::from_vec(vec![s, 0.0])).unwrap(),
        space
            .exp_map(&chart, &DVector::from_vec(vec![s / 2.0, s * 3f64.sqrt() / 2.0]))
            .unwrap(),
    ];
    let eq = jung_probe(&space, &tri, 2, 0.05).unwrap();
    assert!(
        (eq.ratio - 1.0 / 3f64.sqrt()).abs() <= 1e-9,
        "equilateral ratio {} vs {}",
        eq.ratio,
        1.0 / 3f64.sqrt()
    );
    println!("ACCEPT 8: Jung probe pass (20 clouds + closed forms at 1e-9)");
}

#[test]
fn criterion_09_center_of_directions() {
    let space = Xpq::new(2, 2).unwrap();
    let eta = BoundaryPoint::new(
        &space,
        space.standard_chart(),
        DVector::from_vec(vec![1.0, 0.4]),
    )
    .unwrap();
    let mk_chain = |offset: f64| -> NestedChain {
        let sets: Vec<ConvexSet> = (1..=8)
            .map(|k| ConvexSet::Horoball {
                xi: eta.clone(),
                level: -150.0 * k as f64 - offset,
            })
            .collect();
        NestedChain::new(&space, sets).unwrap()
    };
    let base = space.base_point();
    let grid = [1.0, 10.0, 100.0, 1000.0];
    let out = center_of_directions(&space, &mk_chain(0.0), &base, &grid, 5).unwrap();
    let t = tits_angle(&space, &out.xi, &eta, &base, 1e3).unwrap();
    assert!(t.value <= 1e-3, "center of directions off by {}", t.value);

    // Interleaved chains with mutual inclusions agree.
    let base2 = space.random_point(91_001, 0.4);
    let a = center_of_directions(&space, &mk_chain(0.0), &base2, &grid, 5).unwrap();
    let b = center_of_directions(&space, &mk_chain(70.0), &base2, &grid, 5).unwrap();
    let gap = tits_angle(&space, &a.xi, &b.xi, &base2, 1e3).unwrap();
    assert!(gap.value <= 1e-3, "interleaved chains disagree by {}", gap.value);

    // The direction stays within pi/2 of each set's own boundary point.
    let t2 = tits_angle(&space, &out.xi, &eta, &base, 1e3).unwrap();
    assert!(t2.value <= std::f64::consts::FRAC_PI_2 + 1e-2);
    println!("ACCEPT 9: center of directions pass (tits <= 1e-3, independence <= 1e-3)");
}

/// All strictly increasing dimension patterns with maximum <= p.
fn flag_patterns(p: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let total = 1usize << p;
    for mask in 1..total {
        let dims: Vec<usize> = (0..p).filter(|i| mask & (1 << i) != 0).map(|i| i + 1).collect();
        out.push(dims);
    }
    out
}

fn standard_flag(space: &Xpq, dims: &[usize]) -> IsotropicFlag {
    let p = space.p();
    let w = |j: usize| {
        let mut v = DVector::zeros(space.dim());
        v[j] = 1.0;
        v[p + j] = 1.0;
        v
    };
    let frames: Vec<DMatrix<f64>> = dims
        .iter()
        .map(|&d| {
            let cols: Vec<DVector<f64>> = (0..d).map(w).collect();
            DMatrix::from_columns(&cols)
        })
        .collect();
    IsotropicFlag::new(*space.form(), frames).unwrap()
}

#[test]
fn criterion_10_flags_and_stabilizers() {
    // Round trips over every flag type for p <= 4, plus isometry-moved copies.
    for p in 2..=4usize {
        let space = Xpq::new(p, p).unwrap();
        for dims in flag_patterns(p) {
            let flag = standard_flag(&space, &dims);
            let xi = boundary_from_flag(&space, &flag).unwrap();
            let back = flag_of(&space, &xi).unwrap();
            assert!(
                flag.subspace_gap(&back) <= 1e-8,
                "flag round trip failed for dims {dims:?} at p={p}"
            );
            // Moved copy.
            let g = space.random_isometry(10_000 + p as u64 * 31 + dims.len() as u64);
            let moved_frames: Vec<DMatrix<f64>> = flag
                .subspaces()
                .iter()
                .map(|f| g.matrix() * f.matrix())
                .collect();
            let moved = IsotropicFlag::new(*space.form(), moved_frames).unwrap();
            let xi2 = boundary_from_flag(&space, &moved).unwrap();
            let back2 = flag_of(&space, &xi2).unwrap();
            assert!(
                moved.subspace_gap(&back2) <= 1e-8,
                "moved flag round trip failed for dims {dims:?} at p={p}"
            );
        }
    }

    // Stabilizer suite: 15 elements in the parabolic, 15 outside; the block
    // and sampled-growth verdicts must agree on all of them.
    let space = Xpq::new(2, 4).unwrap();
    let xi = BoundaryPoint::new(
        &space,
        space.standard_chart(),
        DVector::from_vec(vec![3.0, 1.0]),
    )
    .unwrap();
    let ts = [0.0, 1.0, 2.0, 4.0, 8.0];
    let ray_target = ray_point(&space, &xi, 2.0).unwrap();
    let transvect = |t: f64| space.transvection(&space.base_point(), &ray_target, t).unwrap();
    let flat = |mu: [f64; 2]| {
        let m = space.standard_transvection_matrix(&DVector::from_vec(mu.to_vec()));
        hypgrass::Isometry::new(*space.form(), m, 1e-9).unwrap()
    };
    let qrot = |theta: f64, i: usize, j: usize| {
        let mut r = DMatrix::identity(4, 4);
        r[(i, i)] = theta.cos();
        r[(j, j)] = theta.cos();
        r[(i, j)] = -theta.sin();
        r[(j, i)] = theta.sin();
        space.block_rotation(&DMatrix::identity(2, 2), &r)
    };
    let prot = |theta: f64| {
        let r = DMatrix::from_row_slice(
            2,
            2,
            &[theta.cos(), -theta.sin(), theta.sin(), theta.cos()],
        );
        space.block_rotation(&r, &DMatrix::identity(4, 4))
    };
    let mixrot = |theta: f64| {
        let r = DMatrix::from_row_slice(
            2,
            2,
            &[theta.cos(), -theta.sin(), theta.sin(), theta.cos()],
        );
        let mut rq = DMatrix::identity(4, 4);
        rq[(0, 0)] = theta.cos();
        rq[(1, 1)] = theta.cos();
        rq[(0, 1)] = -theta.sin();
        rq[(1, 0)] = theta.sin();
        space.block_rotation(&r, &rq)
    };

    let inside = vec![
        space.block_rotation(&DMatrix::identity(2, 2), &DMatrix::identity(4, 4)),
        transvect(0.5),
        transvect(1.1),
        transvect(2.3),
        flat([1.0, 0.0]),
        flat([0.0, 1.0]),
        flat([0.7, -0.4]),
        qrot(0.6, 2, 3),
        qrot(1.2, 2, 3),
        qrot(-0.4, 2, 3),
        transvect(0.8).compose(&flat([0.5, 0.2])),
        flat([1.5, 0.3]).compose(&qrot(0.9, 2, 3)),
        transvect(0.25).compose(&qrot(0.3, 2, 3)),
        transvect(0.6).compose(&flat([2.0, 1.0])).compose(&qrot(0.5, 2, 3)),
        flat([-0.8, 0.1]),
    ];
    let outside = vec![
        mixrot(0.3),
        mixrot(0.7),
        mixrot(1.2),
        prot(0.3),
        prot(0.8),
        prot(-0.5),
        qrot(0.4, 0, 2),
        qrot(0.9, 0, 3),
        qrot(-0.7, 0, 2),
        space.transvection(&space.random_point(10_101, 0.6), &space.random_point(10_102, 0.6), 1.0).unwrap(),
        space.transvection(&space.random_point(10_103, 0.6), &space.random_point(10_104, 0.6), 1.5).unwrap(),
        space.transvection(&space.random_point(10_105, 0.6), &space.random_point(10_106, 0.6), 0.7).unwrap(),
        mixrot(0.5).compose(&transvect(0.4)),
        prot(0.6).compose(&flat([1.0, 0.5])),
        qrot(0.8, 0, 2).compose(&transvect(0.9)),
    ];
    assert_eq!(inside.len(), 15);
    assert_eq!(outside.len(), 15);
    for (k, h) in inside.iter().enumerate() {
        let rep = stabilizer_check(&space, h, &xi, &ts).unwrap();
        assert!(
            rep.block_verdict && rep.bounded_verdict,
            "inside element {k} misclassified: {rep:?}"
        );
    }
    for (k, h) in outside.iter().enumerate() {
        let rep = stabilizer_check(&space, h, &xi, &ts).unwrap();
        assert!(
            !rep.block_verdict && !rep.bounded_verdict,
            "outside element {k} misclassified: {rep:?}"
        );
    }
    println!("ACCEPT 10: flag round trips (all types, p<=4) + stabilizer suite (30, zero disagreements) pass");
}

#[test]
fn criterion_11_kfields() {
    // Complex pairs: duplicated spectra and isometric realification.
    let ks = KStructure::new(KKind::C, 2, 3).unwrap();
    let space = ks.real_space();
    let mut done = 0;
    let mut seed = 0u64;
    while done < 50 {
        seed += 1;
        let e = common::random_kframe(&ks, 11_000 + seed, 0.35);
        let f = common::random_kframe(&ks, 12_000 + seed, 0.35);
        let (pe, pf) = match (realify_point(&ks, &e), realify_point(&ks, &f)) {
            (Ok(a), Ok(b)) => (a, b),
            _ => continue,
        };
        let real_spec = space.principal_angles(&pe, &pf).unwrap();
        let alphas = real_spec.alphas();
        for g in 0..ks.p() {
            let width = alphas[2 * g] - alphas[2 * g + 1];
            assert!(
                width <= 1e-7 * (1.0 + alphas[2 * g]),
                "multiplicity cluster width {width} at pair {seed}"
            );
        }
        let dk = distance_k(&ks, &e, &f).unwrap();
        let dr = space.distance(&pe, &pf).unwrap();
        assert!((dk - dr).abs() <= 1e-8, "d_K {dk} vs d_R {dr}");
        done += 1;
    }
    // Quaternionic pairs.
    let ks = KStructure::new(KKind::H, 1, 2).unwrap();
    let space = ks.real_space();
    let mut done = 0;
    let mut seed = 0u64;
    while done < 20 {
        seed += 1;
        let e = common::random_kframe(&ks, 13_000 + seed, 0.3);
        let f = common::random_kframe(&ks, 14_000 + seed, 0.3);
        let (pe, pf) = match (realify_point(&ks, &e), realify_point(&ks, &f)) {
            (Ok(a), Ok(b)) => (a, b),
            _ => continue,
        };
        let real_spec = space.principal_angles(&pe, &pf).unwrap();
        let alphas = real_spec.alphas();
        let width = alphas[0] - alphas[3];
        assert!(width <= 1e-7 * (1.0 + alphas[0]), "H multiplicity width {width}");
        let dk = distance_k(&ks, &e, &f).unwrap();
        let dr = space.distance(&pe, &pf).unwrap();
        assert!((dk - dr).abs() <= 1e-8);
        done += 1;
    }
    println!("ACCEPT 11: K-fields multiplicity + isometric realification pass (50 C, 20 H)");
}

/// Convergence guard: all heavy criteria rely on the circumcenter solver;
/// keep one cross-check that its minimax certificate holds on a hard cloud.
#[test]
fn criterion_support_circumcenter_certificate() {
    let space = Xpq::new(3, 6).unwrap();
    let pts: Vec<Point> = (0..12).map(|k| space.random_point(77_000 + k, 1.1)).collect();
    let cc = circumcenter(&space, &pts).unwrap();
    // No nudge toward any farthest point improves the max distance.
    for x in &pts {
        if space.distance(&cc.center, x).unwrap() > cc.radius - 1e-7 {
            let nudged = space.geodesic(&cc.center, x).unwrap().at(&space, 5e-4).unwrap();
            let worst = pts
                .iter()
                .map(|y| space.distance(&nudged, y).unwrap())
                .fold(0.0f64, f64::max);
            assert!(worst >= cc.radius - 1e-6);
        }
    }
    println!("ACCEPT support: circumcenter minimax certificate pass");
}
