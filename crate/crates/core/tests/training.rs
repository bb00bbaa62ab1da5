use ndarray::Array2;
use neuromamba::dataio::{generate_synthetic, zscore_scores, SyntheticMode, SyntheticSpec};
use neuromamba::model::{HeadKind, ModelConfig, NeuroMamba, ParamInfo, Params};
use neuromamba::training::{adam_step, examples_from_cohort, train, AdamState, Example, TrainConfig};

fn planted(seed: u64, n_regions: usize, n_subjects: usize, n_timepoints: usize) -> Vec<Example<f32>> {
    let spec = SyntheticSpec {
        n_subjects,
        n_regions,
        n_timepoints,
        tr_seconds: 2.0,
        informative_regions: (0..n_regions / 2).collect(),
        coupling: 0.4,
        mode: SyntheticMode::DynamicsOnly,
        seed,
    };
    let (cohort, _) = generate_synthetic(&spec).unwrap();
    let z = zscore_scores(&cohort.manifest).unwrap();
    let cohort = cohort.with_manifest(z).unwrap();
    examples_from_cohort(&cohort, HeadKind::Regression).unwrap()
}

#[test]
fn training_halves_the_loss_in_most_seeds() {
    let mut passed = 0;
    let mut ratios = Vec::new();
    for seed in 0..5 {
        let examples = planted(seed, 8, 32, 64);
        let model = NeuroMamba::<f32>::new(ModelConfig::new(8), seed).unwrap();
        let cfg = TrainConfig::default().with_seed(seed);
        let out = train(model, &examples, &cfg).unwrap();
        assert_eq!(out.loss_curve.len(), 50);
        let ratio = out.loss_curve[49] / out.loss_curve[0];
        ratios.push(ratio);
        if ratio <= 0.5 {
            passed += 1;
        }
    }
    assert!(passed >= 4, "final/initial loss ratios {ratios:?}");
}

#[test]
fn full_batch_unclipped_runs_repeat_exactly() {
    let examples = planted(2, 4, 10, 24);
    let cfg = TrainConfig {
        epochs: 4,
        batch_size: examples.len(),
        clip_norm: None,
        seed: 9,
        ..Default::default()
    };
    let run = |threads| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            let model = NeuroMamba::<f64>::new(ModelConfig::new(4), 1).unwrap();
            let ex: Vec<Example<f64>> = examples
                .iter()
                .map(|e| Example {
                    subject_id: e.subject_id.clone(),
                    x: e.x.mapv(f64::from),
                    target: e.target.clone(),
                })
                .collect();
            train(model, &ex, &cfg).unwrap()
        })
    };
    let (a, b) = (run(1), run(3));
    assert_eq!(a.loss_curve, b.loss_curve);
    assert_eq!(a.model.to_flat(), b.model.to_flat());
}

#[test]
fn zero_beta1_steps_against_the_current_gradient() {
    let n = 6;
    let layout = vec![ParamInfo {
        name: "w".into(),
        shape: vec![n],
        offset: 0,
    }];
    let cfg = TrainConfig {
        clip_norm: None,
        learning_rate: 0.01,
        ..Default::default()
    };
    let mut params = vec![0.0f64; n];
    let mut state = AdamState::new(n);
    // Constant-magnitude stream whose sign flips every step.
    let base = [0.5, -1.0, 2.0, -0.25, 1.5, -3.0];
    for step in 0..20 {
        let sign = if step % 3 == 0 { -1.0 } else { 1.0 };
        let mut g: Vec<f64> = base.iter().map(|v| v * sign).collect();
        let before = params.clone();
        adam_step(&mut params, &mut g.clone(), &mut state, &cfg, &layout).unwrap();
        g.iter_mut().for_each(|v| *v = -v.signum());
        for i in 0..n {
            assert_eq!((params[i] - before[i]).signum(), g[i], "step {step} element {i}");
        }
    }
}

#[test]
fn time_reversal_changes_the_output_but_not_the_input_mean() {
    let x = Array2::from_shape_fn((20, 4), |(t, j)| ((t * 3 + j * 5) % 7) as f64 / 7.0 - 0.3 * j as f64);
    let mut reversed = x.clone();
    reversed.invert_axis(ndarray::Axis(0));
    let model = NeuroMamba::<f64>::new(ModelConfig::new(4), 5).unwrap();
    let a = model.predict(x.view(), None).unwrap();
    let b = model.predict(reversed.view(), None).unwrap();
    assert!(a.iter().zip(b.iter()).any(|(p, q)| (p - q).abs() > 1e-9));
    let ma = x.mean_axis(ndarray::Axis(0)).unwrap();
    let mb = reversed.mean_axis(ndarray::Axis(0)).unwrap();
    for (p, q) in ma.iter().zip(mb.iter()) {
        assert!((p - q).abs() < 1e-12);
    }
}
