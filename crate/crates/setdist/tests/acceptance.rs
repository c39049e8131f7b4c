//! Acceptance suite: every library-level criterion runs at its stated
//! tolerance and prints one PASS line. Run with
//! `cargo test -p setdist --test acceptance -- --nocapture` to see them.
//! (The one CLI-level criterion, byte-identical study output across runs
//! and thread counts, lives in the CLI crate's acceptance suite.)

mod quad;

use rand::prelude::*;
use setdist::geometry::{support_disc, support_polygon, AngleGrid, ConvexBody, Disc, Point, SupportVector};
use setdist::hyptest::permutation_test;
use setdist::kernels::{
    exp_weighted_l, kernel_eval, orthant_recursion, subsets_up_to, KernelSpec,
};
use setdist::nstat::{kernel_matrix, nhat, Group, SampleSet};
use setdist::pipeline::{
    poisson_disc_cover, two_realisation_test, voronoi, MethodSpec, TwoRealisationConfig,
};
use setdist::pointproc::{rasterize, sim_boolean, sim_cluster, RadiusLaw, RasterMask, Window};
use std::time::Instant;

fn rel_err(got: f64, want: f64) -> f64 {
    (got - want).abs() / want.abs().max(1e-12)
}

/// Criterion 1: the product closed form of the subset-integrated
/// exponential-weight kernel and the orthant recursion both match adaptive
/// numerical quadrature of the defining integrals within 1e-6 relative,
/// over 100 random (a, w) with k in {1,2,3}. Runtime < 1 min.
#[test]
fn criterion_1_kernel_integral_oracle() {
    let start = Instant::now();
    let mut rng = StdRng::seed_from_u64(0xC1);
    let mut worst_closed = 0.0f64;
    let mut worst_orthant = 0.0f64;
    for case in 0..100 {
        let k = case % 3 + 1;
        let a: Vec<f64> = (0..k)
            .map(|_| rng.random_range(0.3..1.5) * if rng.random::<bool>() { 1.0 } else { -1.0 })
            .collect();
        let w: Vec<f64> = (0..k).map(|_| rng.random_range(0.5..1.5)).collect();

        // Defining integral of L_(k,k): sum over every nonempty subset of
        // the (1 - cos) integral, each evaluated by nested quadrature.
        let mut oracle = 0.0;
        for subset in subsets_up_to(k, k).unwrap() {
            let sa: Vec<f64> = subset.iter().map(|&i| a[i]).collect();
            let sw: Vec<f64> = subset.iter().map(|&i| w[i]).collect();
            oracle += quad::one_minus_cos_integral(&sa, &sw);
        }
        let closed = exp_weighted_l(&a, &w, k).unwrap();
        worst_closed = worst_closed.max(rel_err(closed, oracle));
        assert!(
            rel_err(closed, oracle) <= 1e-6,
            "case {case}: closed {closed} vs quadrature {oracle} (a {a:?}, w {w:?})"
        );

        // Orthant recursion against tensor quadrature over [0, inf)^k.
        let (ic, is) = orthant_recursion(&a, &w).unwrap();
        let (qic, qis) = quad::orthant_cos_sin(&a, &w);
        let scale = w.iter().map(|&x| x).product::<f64>();
        let ec = (ic - qic).abs() / qic.abs().max(1e-3 * scale);
        let es = (is - qis).abs() / qis.abs().max(1e-3 * scale);
        worst_orthant = worst_orthant.max(ec.max(es));
        assert!(
            ec <= 1e-6 && es <= 1e-6,
            "case {case}: recursion ({ic}, {is}) vs quadrature ({qic}, {qis})"
        );
    }
    let elapsed = start.elapsed();
    assert!(
        elapsed.as_secs() < 60,
        "criterion 1 exceeded 1 min: {elapsed:?}"
    );
    println!(
        "criterion 1 PASS: closed form vs quadrature over 100 cases, worst rel err {worst_closed:.2e} (subset sums), {worst_orthant:.2e} (orthants), {elapsed:?}"
    );
}

/// Criterion 2: the corrected orthant base case. At k=1, a=1, w=2 the
/// cosine integral is 2/5 = 0.4 (quadrature-verified), not the 0.2 a
/// missing w factor would give.
#[test]
fn criterion_2_base_case_regression() {
    let (ic, _) = orthant_recursion(&[1.0], &[2.0]).unwrap();
    assert!((ic - 0.4).abs() < 1e-15, "recursion gives {ic}");
    let (qic, _) = quad::orthant_cos_sin(&[1.0], &[2.0]);
    assert!(
        (qic - 0.4).abs() < 1e-6,
        "quadrature confirms 0.4, got {qic}"
    );
    assert!((ic - 0.2).abs() > 0.19, "must not match the uncorrected value");
    println!("criterion 2 PASS: I_c(1; a=1, w=2) = {ic} (quadrature {qic:.9}), not 0.2");
}

/// Criterion 3: the cached-matrix U-statistic equals an independent
/// triple-loop evaluation of the defining formula on 50 random small
/// sample sets, within 1e-12 absolute.
#[test]
fn criterion_3_u_statistic_oracle() {
    let start = Instant::now();
    let mut rng = StdRng::seed_from_u64(0xC3);
    let mut worst = 0.0f64;
    for case in 0..50 {
        let n = 4;
        let m1 = rng.random_range(2..7);
        let m2 = rng.random_range(2..7);
        let draw = |rng: &mut StdRng, m: usize| -> Vec<SupportVector> {
            (0..m)
                .map(|_| {
                    SupportVector::new(
                        (0..n).map(|_| rng.random_range(-2.0..2.0)).collect(),
                    )
                    .unwrap()
                })
                .collect()
        };
        let group_a = draw(&mut rng, m1);
        let group_b = draw(&mut rng, m2);
        let set = SampleSet::new(group_a.clone(), group_b.clone()).unwrap();
        for spec in KernelSpec::study_defaults(n) {
            let matrix = kernel_matrix(&set, &spec).unwrap();
            let labels: Vec<Group> = (0..m1 + m2)
                .map(|i| if i < m1 { Group::A } else { Group::B })
                .collect();
            let fast = nhat(&matrix, &labels).unwrap();

            // Triple-loop oracle straight from the definition.
            let l = |x: &SupportVector, y: &SupportVector| kernel_eval(&spec, x, y).unwrap();
            let mut cross = 0.0;
            for x in &group_a {
                for y in &group_b {
                    cross += l(x, y);
                }
            }
            let mut aa = 0.0;
            for x in &group_a {
                for y in &group_a {
                    aa += l(x, y);
                }
            }
            let mut bb = 0.0;
            for x in &group_b {
                for y in &group_b {
                    bb += l(x, y);
                }
            }
            let slow = 2.0 / (m1 as f64 * m2 as f64) * cross
                - aa / (m1 as f64 * (m1 as f64 - 1.0))
                - bb / (m2 as f64 * (m2 as f64 - 1.0));
            worst = worst.max((fast - slow).abs());
            assert!(
                (fast - slow).abs() < 1e-12,
                "case {case} kernel {}: {fast} vs {slow}",
                spec.kind_str()
            );
        }
    }
    println!(
        "criterion 3 PASS: N-hat matches the triple-loop oracle on 50 sample sets x 5 kernels, worst abs err {worst:.2e}, {:?}",
        start.elapsed()
    );
}

/// Criterion 4: empirical negative definiteness. For every kernel spec
/// and 1000 random (vectors, centered coefficients), the quadratic form
/// never exceeds 1e-9 times the coefficient mass.
#[test]
fn criterion_4_negative_definiteness() {
    let start = Instant::now();
    let mut rng = StdRng::seed_from_u64(0xC4);
    let n = 5;
    let mut worst = f64::NEG_INFINITY;
    for spec in KernelSpec::study_defaults(n) {
        for trial in 0..1000 {
            let k = rng.random_range(2..9);
            let vectors: Vec<SupportVector> = (0..k)
                .map(|_| {
                    SupportVector::new(
                        (0..n).map(|_| rng.random_range(-3.0..3.0)).collect(),
                    )
                    .unwrap()
                })
                .collect();
            let mut c: Vec<f64> = (0..k).map(|_| rng.random_range(-1.0..1.0)).collect();
            let mean = c.iter().sum::<f64>() / k as f64;
            for v in c.iter_mut() {
                *v -= mean;
            }
            let mut form = 0.0;
            let mut mass = 0.0;
            for i in 0..k {
                for j in 0..k {
                    let lij = kernel_eval(&spec, &vectors[i], &vectors[j]).unwrap();
                    form += lij * c[i] * c[j];
                    mass += (c[i] * c[j]).abs();
                }
            }
            let normalized = form / mass;
            worst = worst.max(normalized);
            assert!(
                form <= 1e-9 * mass,
                "kernel {} trial {trial}: form {form} vs mass {mass}",
                spec.kind_str()
            );
        }
    }
    println!(
        "criterion 4 PASS: 5 kernels x 1000 centered quadratic forms all <= 1e-9 of the coefficient mass (worst normalized value {worst:.2e}), {:?}",
        start.elapsed()
    );
}

/// Criterion 5: null calibration. 200 permutation tests (m=30, s=199) on
/// two groups drawn from one synthetic convex-body law: empirical
/// rejection at alpha = 0.05 lies in [0.01, 0.10] and the p-values pass a
/// KS uniformity check at alpha = 0.01. Runtime < 10 min.
#[test]
fn criterion_5_null_calibration() {
    let start = Instant::now();
    let grid = AngleGrid::new(10).unwrap();
    let spec = KernelSpec::exp_weighted_default(10);
    let replications = 200;
    let m = 30;
    let s = 199;
    let mut p_values = Vec::with_capacity(replications);

    for rep in 0..replications as u64 {
        let mut rng = StdRng::seed_from_u64(0xC500 + rep);
        let mut draw_group = |rng: &mut StdRng| -> Vec<SupportVector> {
            (0..m)
                .map(|_| {
                    let disc = Disc::new(
                        Point::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)),
                        rng.random_range(0.5..1.5),
                    )
                    .unwrap();
                    support_disc(&disc, &grid)
                })
                .collect()
        };
        let set = SampleSet::new(draw_group(&mut rng), draw_group(&mut rng)).unwrap();
        let result = permutation_test(&set, &spec, s, 0xC5000 + rep).unwrap();
        p_values.push(result.p_value);
    }

    let rejections = p_values.iter().filter(|&&p| p <= 0.05).count();
    let rate = rejections as f64 / replications as f64;
    assert!(
        (0.01..=0.10).contains(&rate),
        "null rejection rate {rate} outside [0.01, 0.10]"
    );

    // One-sample KS against U(0,1) with the asymptotic Kolmogorov tail.
    let mut sorted = p_values.clone();
    sorted.sort_by(f64::total_cmp);
    let nf = sorted.len() as f64;
    let mut d = 0.0f64;
    for (i, &p) in sorted.iter().enumerate() {
        d = d.max(((i + 1) as f64 / nf - p).abs());
        d = d.max((p - i as f64 / nf).abs());
    }
    let lambda = nf.sqrt() * d;
    let mut tail = 0.0;
    let mut sign = 1.0;
    for kk in 1..500 {
        let term = (-2.0 * (kk as f64 * lambda).powi(2)).exp();
        tail += sign * term;
        if term < 1e-12 {
            break;
        }
        sign = -sign;
    }
    let ks_p = (2.0 * tail).clamp(0.0, 1.0);
    assert!(
        ks_p >= 0.01,
        "p-values fail uniformity: KS D {d}, p {ks_p}"
    );
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() < 600, "criterion 5 exceeded 10 min");
    println!(
        "criterion 5 PASS: 200 null permutation tests, rejection rate {rate:.3} in [0.01, 0.10], KS uniformity p {ks_p:.3}, {elapsed:?}"
    );
}

fn study_boolean(window: &Window, seed: u64) -> RasterMask {
    let law = RadiusLaw::Uniform { lo: 8.0, hi: 16.0 };
    rasterize(&sim_boolean(window, 7.6e-4, &law, seed).unwrap())
}

fn study_cluster(window: &Window, seed: u64) -> RasterMask {
    let law = RadiusLaw::Uniform { lo: 8.0, hi: 16.0 };
    rasterize(&sim_cluster(window, 5.0e-4, 6.0, 40.0, &law, seed).unwrap())
}

/// Criterion 6: pipeline power and null behavior at study scale.
/// Boolean vs cluster (shared radius 7 px, m=100, s=199, 50 replications)
/// rejects at alpha = 0.05 in at least 80% of runs for the ExpWeighted
/// and RadialPower kernels; Boolean vs Boolean stays in the null band.
/// Runtime < 30 min.
#[test]
fn criterion_6_power_and_null() {
    let start = Instant::now();
    let window = Window::square_pixels(400).unwrap();
    let replications = 50u64;
    let alpha = 0.05;

    let kernels = [
        ("expweighted", KernelSpec::exp_weighted_default(10)),
        ("radialpower", KernelSpec::radial_power_default()),
    ];
    let mut power_rates = Vec::new();
    for (name, kernel) in &kernels {
        let mut rejections = 0;
        for rep in 0..replications {
            let mask_b = study_boolean(&window, 0x61_0000 + rep);
            let mask_c = study_cluster(&window, 0x62_0000 + rep);
            let cfg = TwoRealisationConfig::new(
                7.0, // boolean-cluster pairing radius
                100,
                10,
                kernel.clone(),
                MethodSpec::Permutation { s: 199 },
                0x63_0000 + rep,
            );
            let result = two_realisation_test(&mask_b, &mask_c, &cfg).unwrap();
            if result.test.p_value <= alpha {
                rejections += 1;
            }
        }
        let rate = rejections as f64 / replications as f64;
        power_rates.push((name, rate));
        assert!(
            rate >= 0.8,
            "power for {name} kernel is {rate}, below 0.8"
        );
    }

    // Same-process pairs stay in the null band.
    let mut null_rejections = 0;
    for rep in 0..replications {
        let mask_1 = study_boolean(&window, 0x64_0000 + rep);
        let mask_2 = study_boolean(&window, 0x65_0000 + rep);
        let cfg = TwoRealisationConfig::new(
            7.0,
            100,
            10,
            KernelSpec::exp_weighted_default(10),
            MethodSpec::Permutation { s: 199 },
            0x66_0000 + rep,
        );
        let result = two_realisation_test(&mask_1, &mask_2, &cfg).unwrap();
        if result.test.p_value <= alpha {
            null_rejections += 1;
        }
    }
    let null_rate = null_rejections as f64 / replications as f64;
    assert!(
        (0.01..=0.10).contains(&null_rate),
        "same-process rejection rate {null_rate} outside the null band"
    );
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() < 1800, "criterion 6 exceeded 30 min");
    println!(
        "criterion 6 PASS: boolean-vs-cluster power {:?} (both >= 0.8), boolean-vs-boolean null rate {null_rate:.3}, {elapsed:?}",
        power_rates
    );
}

/// Criterion 7: geometry exactness against the two reference shapes: a
/// disc has constant support R, a centered square of half-side a has
/// h(theta) = a(|cos| + |sin|), both at every grid angle to 1e-12.
#[test]
fn criterion_7_geometry_exactness() {
    let grid = AngleGrid::new(360).unwrap();
    let radius = 2.75;
    let disc = Disc::new(Point::new(0.0, 0.0), radius).unwrap();
    let h_disc = support_disc(&disc, &grid);
    for &v in h_disc.values() {
        assert!((v - radius).abs() < 1e-12);
    }

    let a = 1.3;
    let square = ConvexBody::new(vec![
        Point::new(-a, -a),
        Point::new(a, -a),
        Point::new(a, a),
        Point::new(-a, a),
    ])
    .unwrap();
    let h_square = support_polygon(&square, &grid);
    let mut worst = 0.0f64;
    for (i, &theta) in grid.angles().iter().enumerate() {
        let expect = a * (theta.cos().abs() + theta.sin().abs());
        worst = worst.max((h_square.values()[i] - expect).abs());
        assert!(
            (h_square.values()[i] - expect).abs() < 1e-12,
            "angle {theta}: {} vs {expect}",
            h_square.values()[i]
        );
    }
    println!(
        "criterion 7 PASS: disc support constant to 1e-12, square support matches a(|cos|+|sin|) to {worst:.2e} over 360 angles"
    );
}

/// Criterion 8: tessellation oracles. Voronoi cells agree with per-pixel
/// nearest-center brute force on >= 99.9% of non-boundary pixels over 20
/// random configurations; the cover satisfies inhibition and coverage
/// exactly on every seeded run.
#[test]
fn criterion_8_tessellation_oracle() {
    let start = Instant::now();
    // Voronoi against brute force.
    let mut worst_fraction = 1.0f64;
    for config in 0..20u64 {
        let mut rng = StdRng::seed_from_u64(0xC800 + config);
        let count = rng.random_range(5..60);
        let mut centers: Vec<Point> = Vec::new();
        while centers.len() < count {
            let p = Point::new(rng.random_range(0.0..1.0), rng.random_range(0.0..1.0));
            if centers.iter().all(|c| c.dist(p) > 1e-6) {
                centers.push(p);
            }
        }
        let t = voronoi(&centers, 1.0, 1.0).unwrap();
        let res = 200;
        let mut agree = 0usize;
        let mut considered = 0usize;
        for iy in 0..res {
            for ix in 0..res {
                let p = Point::new(
                    (ix as f64 + 0.5) / res as f64,
                    (iy as f64 + 0.5) / res as f64,
                );
                let mut best = (f64::INFINITY, usize::MAX);
                let mut second = f64::INFINITY;
                for (i, c) in centers.iter().enumerate() {
                    let d = c.dist(p);
                    if d < best.0 {
                        second = best.0;
                        best = (d, i);
                    } else if d < second {
                        second = d;
                    }
                }
                if second - best.0 < 1e-6 {
                    continue; // boundary pixel
                }
                considered += 1;
                if t.cells[best.1].contains(p, 1e-9) {
                    agree += 1;
                }
            }
        }
        let fraction = agree as f64 / considered as f64;
        worst_fraction = worst_fraction.min(fraction);
        assert!(
            fraction >= 0.999,
            "config {config}: only {fraction} of pixels agree"
        );
    }

    // Cover inhibition + coverage, exactly, on every seeded run.
    let window = Window::square_pixels(120).unwrap();
    let law = RadiusLaw::Uniform { lo: 4.0, hi: 9.0 };
    for seed in 0..10u64 {
        let mask = rasterize(&sim_boolean(&window, 2.0e-3, &law, seed).unwrap());
        let radius = 5.0;
        let centers = poisson_disc_cover(&mask, radius, seed).unwrap();
        for (i, a) in centers.iter().enumerate() {
            for b in &centers[i + 1..] {
                assert!(a.dist(*b) >= radius, "inhibition violated");
            }
        }
        for (ix, iy) in mask.foreground() {
            let p = Point::new(ix as f64 + 0.5, iy as f64 + 0.5);
            let nearest = centers
                .iter()
                .map(|c| c.dist(p))
                .fold(f64::INFINITY, f64::min);
            assert!(nearest <= radius, "coverage violated at {p:?}");
        }
    }
    println!(
        "criterion 8 PASS: 20 Voronoi brute-force checks (worst agreement {worst_fraction:.5}), 10 seeded covers with exact inhibition + coverage, {:?}",
        start.elapsed()
    );
}
