//! Algebraic invariants of the feature extractors, regression tools and scans.

use ndarray::{Array1, Array2, Axis};
use neuromamba::baselines::{alff, fcm, group_ica_features, vectorize_upper, IcaConfig};
use neuromamba::dataio::{
    generate_synthetic, ParcellatedTimeseries, SyntheticMode, SyntheticSpec,
};
use neuromamba::linalg::smallest_eigenvalue;
use neuromamba::regression::{krr_fit, pearson_r, pearson_r_p, rbf_kernel, roc_auc, KernelConfig};
use neuromamba::ssm::{selective_scan, ScanMode, SsmParams};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random(shape: (usize, usize), lo: f64, hi: f64, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Array2::from_shape_fn(shape, |_| rng.random_range(lo..hi))
}

fn series(values: Array2<f64>, tr: f64) -> ParcellatedTimeseries {
    let labels = (0..values.ncols()).map(|j| format!("r{j}")).collect();
    ParcellatedTimeseries::new("s", values, tr, labels).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 32, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn fcm_ignores_positive_affine_maps(seed in 0u64..10_000, alpha in 0.1f64..10.0, beta in -5.0f64..5.0, region in 0usize..4) {
        let x = random((30, 4), -1.0, 1.0, seed);
        let mut y = x.clone();
        y.column_mut(region).mapv_inplace(|v| alpha * v + beta);
        let a = fcm(&series(x, 1.0)).unwrap().values;
        let b = fcm(&series(y, 1.0)).unwrap().values;
        for (p, q) in a.iter().zip(b.iter()) {
            prop_assert!((p - q).abs() < 1e-10);
        }
    }

    #[test]
    fn fcm_features_follow_region_permutations(seed in 0u64..10_000, rot in 1usize..5) {
        let b = 5;
        let x = random((25, b), -1.0, 1.0, seed);
        let order: Vec<usize> = (0..b).map(|j| (j + rot) % b).collect();
        let y = x.select(Axis(1), &order);
        let fx = fcm(&series(x, 1.0)).unwrap();
        let fy = vectorize_upper(&fcm(&series(y, 1.0)).unwrap());
        // Feature (i, j) of the permuted data is pair (order[i], order[j]) of the original.
        let mut k = 0;
        for i in 0..b {
            for j in i + 1..b {
                prop_assert!((fy[k] - fx.values[[order[i], order[j]]]).abs() < 1e-12);
                k += 1;
            }
        }
    }

    #[test]
    fn alff_ignores_constant_offsets(seed in 0u64..10_000, offset in -50.0f64..50.0) {
        let x = random((128, 3), -1.0, 1.0, seed);
        let a = alff(&series(x.clone(), 0.8), 0.008, 0.09).unwrap();
        let b = alff(&series(x.mapv(|v| v + offset), 0.8), 0.008, 0.09).unwrap();
        for (p, q) in a.iter().zip(b.iter()) {
            prop_assert!((p - q).abs() < 1e-5 * p.max(1.0));
        }
    }

    #[test]
    fn krr_ignores_training_row_order(seed in 0u64..10_000, n in 3usize..15, shift in 1usize..14) {
        let x = random((n, 4), -1.0, 1.0, seed);
        let y = random((n, 2), -2.0, 2.0, seed + 1);
        let query = random((5, 4), -1.0, 1.0, seed + 2);
        let order: Vec<usize> = (0..n).map(|i| (i * 7 + shift) % n).collect();
        let mut seen = order.clone();
        seen.sort();
        seen.dedup();
        prop_assume!(seen.len() == n);
        let cfg = KernelConfig::new(0.7, 0.1).unwrap();
        let a = krr_fit(x.view(), y.view(), cfg).unwrap().predict(query.view()).unwrap();
        let b = krr_fit(x.select(Axis(0), &order).view(), y.select(Axis(0), &order).view(), cfg)
            .unwrap()
            .predict(query.view())
            .unwrap();
        for (p, q) in a.iter().zip(b.iter()) {
            prop_assert!((p - q).abs() < 1e-10);
        }
    }

    #[test]
    fn rbf_kernel_is_symmetric_psd(seed in 0u64..10_000, n in 1usize..=20, gamma in 1e-3f64..10.0) {
        let p = random((n, 3), -2.0, 2.0, seed);
        let k = rbf_kernel(p.view(), p.view(), gamma).unwrap();
        prop_assert_eq!(&k, &k.t().to_owned());
        prop_assert!(smallest_eigenvalue(k.view()) >= -1e-8);
    }

    #[test]
    fn pearson_r_is_affine_invariant(seed in 0u64..10_000, a in 0.01f64..100.0, b in -10.0f64..10.0) {
        let v = random((20, 2), -1.0, 1.0, seed);
        let (x, y) = (v.column(0), v.column(1));
        let r = pearson_r(x, y).unwrap();
        let r_scaled = pearson_r(x.mapv(|t| a * t + b).view(), y).unwrap();
        let r_flipped = pearson_r(x, y.mapv(|t| -a * t + b).view()).unwrap();
        prop_assert!((r - r_scaled).abs() < 1e-12);
        prop_assert!((r + r_flipped).abs() < 1e-12);
    }

    #[test]
    fn auc_ignores_increasing_transforms(seed in 0u64..10_000, n in 2usize..30) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let labels: Vec<bool> = (0..n).map(|i| i % 2 == 0 || rng.random_bool(0.3)).collect();
        prop_assume!(labels.iter().any(|l| !*l));
        // Coarse scores so ties occur.
        let scores: Vec<f64> = (0..n).map(|_| (rng.random_range(-3.0f64..3.0) * 2.0).round()).collect();
        let warped: Vec<f64> = scores.iter().map(|s| (s * 0.7).exp() + s.powi(3)).collect();
        let a = roc_auc(&labels, &scores).unwrap().auc;
        let b = roc_auc(&labels, &warped).unwrap().auc;
        prop_assert_eq!(a, b);
    }

    #[test]
    fn scan_is_linear_in_the_input(seed in 0u64..10_000, alpha in -3.0f64..3.0, beta in -3.0f64..3.0) {
        let (t, e, l) = (40, 3, 4);
        let a = random((e, l), -2.0, -0.1, seed);
        let delta = random((t, e), 0.01, 0.5, seed + 1);
        let bm = random((t, l), -1.0, 1.0, seed + 2);
        let cm = random((t, l), -1.0, 1.0, seed + 3);
        let x1 = random((t, e), -1.0, 1.0, seed + 4);
        let x2 = random((t, e), -1.0, 1.0, seed + 5);
        let p = SsmParams { a_diag: a.view(), delta: delta.view(), b_in: bm.view(), c_out: cm.view() };
        let run = |x: &Array2<f64>| selective_scan(p, x.view(), ScanMode::Parallel, false).unwrap().y;
        let lhs = run(&(&x1 * alpha + &x2 * beta));
        let rhs = run(&x1) * alpha + run(&x2) * beta;
        for (u, v) in lhs.iter().zip(rhs.iter()) {
            prop_assert!((u - v).abs() < 1e-10);
        }
    }
}

#[test]
fn scan_state_respects_the_stability_bound() {
    // Constant parameters: |h_t| <= |bbar x|_inf / (1 - abar).
    let (t, l) = (300, 3);
    let a = Array2::from_shape_vec((1, l), vec![-0.5, -1.0, -4.0]).unwrap();
    let delta = Array2::from_elem((t, 1), 0.2);
    let b = Array2::from_elem((t, l), 0.7);
    let c = Array2::from_elem((t, l), 1.0);
    let x = random((t, 1), -1.0, 1.0, 3);
    let p = SsmParams { a_diag: a.view(), delta: delta.view(), b_in: b.view(), c_out: c.view() };
    let out = selective_scan(p, x.view(), ScanMode::Sequential, true).unwrap();
    let tape = out.saved.unwrap();
    for k in 0..l {
        let abar = (0.2 * a[[0, k]]).exp();
        let bbar = 0.2 * 0.7 * (abar - 1.0) / (0.2 * a[[0, k]]);
        let bound = bbar * 1.0 / (1.0 - abar);
        for s in 0..t {
            assert!(tape.h[s * l + k].abs() <= bound + 1e-12);
        }
    }
}

#[test]
fn permutation_p_value_is_calibrated_under_the_null() {
    let mut rejections = 0;
    let trials = 100;
    for s in 0..trials {
        let v = random((200, 2), -1.0, 1.0, 1000 + s);
        let (_, p) = pearson_r_p(v.column(0), v.column(1), 1000, s).unwrap();
        if p <= 0.05 {
            rejections += 1;
        }
    }
    // P(p > 0.05) should be about 0.95; allow two binomial standard errors.
    let keep = 1.0 - rejections as f64 / trials as f64;
    assert!(keep >= 0.95 - 2.0 * (0.05f64 * 0.95 / trials as f64).sqrt(), "kept {keep}");
}

#[test]
fn group_ica_gives_identical_rows_for_identical_subjects() {
    let x = random((200, 4), -1.0, 1.0, 4).mapv(|v: f64| v.powi(3));
    let subjects: Vec<ParcellatedTimeseries> = (0..3)
        .map(|i| {
            let mut s = series(x.clone(), 1.0);
            s.subject_id = format!("s{i}");
            s
        })
        .collect();
    let (features, _) = group_ica_features(&subjects, &IcaConfig::new(3)).unwrap();
    for i in 1..3 {
        for (p, q) in features.values.row(0).iter().zip(features.values.row(i).iter()) {
            assert!((p - q).abs() < 1e-10);
        }
    }
}

#[test]
fn dynamics_only_signal_is_absent_from_static_correlation() {
    let spec = SyntheticSpec {
        n_subjects: 40,
        n_regions: 8,
        n_timepoints: 1024,
        tr_seconds: 2.0,
        informative_regions: vec![0, 1, 2],
        coupling: 0.4,
        mode: SyntheticMode::DynamicsOnly,
        seed: 21,
    };
    let (cohort, truth) = generate_synthetic(&spec).unwrap();
    let mut order: Vec<usize> = (0..spec.n_subjects).collect();
    order.sort_by(|&a, &b| truth.latent_scores[a].total_cmp(&truth.latent_scores[b]));
    let q = spec.n_subjects / 4;
    let mean_fcm = |idx: &[usize]| {
        let mut acc = Array2::<f64>::zeros((spec.n_regions, spec.n_regions));
        for &i in idx {
            acc += &fcm(&cohort.timeseries[i]).unwrap().values;
        }
        acc / idx.len() as f64
    };
    let low = mean_fcm(&order[..q]);
    let high = mean_fcm(&order[spec.n_subjects - q..]);
    for &r in &spec.informative_regions {
        let diff: Array1<f64> = (&high.row(r) - &low.row(r)).mapv(f64::abs);
        assert!(diff.iter().all(|d| *d < 0.05), "region {r}: {diff}");
    }
}
