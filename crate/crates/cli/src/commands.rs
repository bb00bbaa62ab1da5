use std::path::{Path, PathBuf};

use ndarray::{Array2, Axis};
use neuromamba::analysis::{self, assemble_report, embed_cohort, scatter_csv, RegionMetadata, ReportInputs};
use neuromamba::baselines::{extract_features, FeatureMatrix, FeatureMethod};
use neuromamba::dataio::{generate_synthetic, load_cohort, write_synthetic, Cohort, SyntheticSpec};
use neuromamba::model::{
    gradcheck_suite, load_checkpoint, save_checkpoint, GradcheckConfig, HeadKind, ModelConfig,
    NeuroMamba,
};
use neuromamba::regression::{
    grid_search, krr_fit, krr_loocv, roc_auc, EvaluationReport, GridSearch, KernelConfig,
    LogisticModel, RocCurve,
};
use neuromamba::training::{
    adapt, examples_from_cohort, loocv, loocv_from, predict_examples, train, Shots, TrainConfig,
};
use neuromamba::{Error, Real};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::session::{read_json, CliError, CliResult, Session};
use crate::{Command, FeatureKind, HeadArg, Precision};

macro_rules! with_precision {
    ($session:expr, $f:ident($($arg:expr),* $(,)?)) => {
        match $session.precision {
            Precision::F32 => $f::<f32>($($arg),*),
            Precision::F64 => $f::<f64>($($arg),*),
        }
    };
}

pub fn dispatch(s: &Session, command: Command) -> CliResult {
    match command {
        Command::Synth { spec, out } => synth(s, &spec, &out),
        Command::Features {
            method,
            cohort,
            out,
            components,
            band_lo,
            band_hi,
        } => features(s, method, &cohort, &out, components, (band_lo, band_hi)),
        Command::Krr {
            features,
            cohort,
            gamma,
            ridge,
            loocv,
            report,
            scatter,
            permutations,
        } => krr(s, &features, &cohort, gamma.zip(ridge), loocv, &report, scatter.as_deref(), permutations),
        Command::Train {
            cohort,
            config,
            checkpoint,
            head,
            log,
        } => {
            let head = match head {
                HeadArg::Regression => HeadKind::Regression,
                HeadArg::Bce => HeadKind::Bce,
            };
            with_precision!(s, train_cmd(s, &cohort, config.as_deref(), &checkpoint, head, log.as_deref()))
        }
        Command::Loocv {
            cohort,
            config,
            report,
            scatter,
            permutations,
        } => with_precision!(s, loocv_cmd(s, &cohort, config.as_deref(), &report, scatter.as_deref(), permutations)),
        Command::Pfi {
            checkpoint,
            cohort,
            trials,
            report,
            ranking,
            regions,
        } => with_precision!(s, pfi_cmd(s, &checkpoint, &cohort, trials, &report, ranking.as_deref(), regions.as_deref())),
        Command::Classify {
            checkpoint,
            cohort,
            roc,
            loocv,
            config,
            report,
        } => with_precision!(s, classify_cmd(s, &checkpoint, &cohort, &roc, loocv, config.as_deref(), report.as_deref())),
        Command::Adapt {
            checkpoint,
            cohort,
            shots,
            config,
            report,
            scatter,
            out_checkpoint,
            permutations,
        } => {
            let shots: Shots = shots.parse().map_err(|e: Error| CliError::usage("usage", e.to_string()))?;
            let paths = AdaptPaths {
                report: &report,
                scatter: scatter.as_deref(),
                out_checkpoint: out_checkpoint.as_deref(),
            };
            with_precision!(s, adapt_cmd(s, &checkpoint, &cohort, shots, config.as_deref(), paths, permutations))
        }
        Command::Gradcheck {
            config,
            timepoints,
            report,
        } => gradcheck_cmd(s, config.as_deref(), timepoints, report.as_deref()),
    }
}

/// Seed used when neither --seed nor a config file gives one.
const DEFAULT_SEED: u64 = 0;

fn synth(s: &Session, spec_path: &Path, out: &Path) -> CliResult {
    let mut spec: SyntheticSpec = read_json(spec_path)?;
    if let Some(seed) = s.seed {
        spec.seed = seed;
    }
    let (cohort, truth) = generate_synthetic(&spec)?;
    let dir = s.output(out);
    write_synthetic(&cohort, &truth, &dir)?;
    println!("wrote {}", dir.join("manifest.json").display());
    Ok(())
}

fn features(
    s: &Session,
    kind: FeatureKind,
    cohort_path: &Path,
    out: &Path,
    components: usize,
    band: (f64, f64),
) -> CliResult {
    let cohort = load_cohort(cohort_path)?;
    let seed = s.seed_or(DEFAULT_SEED);
    let method = match kind {
        FeatureKind::Fcm => FeatureMethod::Fcm,
        FeatureKind::Iica => FeatureMethod::IndividualIca {
            n_components: components,
            seed,
        },
        FeatureKind::Gica => FeatureMethod::GroupIca {
            n_components: components,
            seed,
        },
        FeatureKind::Alff => FeatureMethod::Alff {
            f_lo: band.0,
            f_hi: band.1,
        },
    };
    let features = extract_features(&cohort, method)?;
    let path = s.output(out);
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    features.write_csv(&path)?;
    println!("wrote {} ({} x {})", path.display(), features.n_subjects(), features.n_features());
    Ok(())
}

fn report_inputs<'a>(
    method: &'a str,
    cohort: &'a Cohort,
    ids: &'a [String],
    diagnoses: &'a [Option<neuromamba::dataio::Diagnosis>],
    truth: &'a Array2<f64>,
    pred: &'a Array2<f64>,
    permutations: usize,
    seed: u64,
) -> ReportInputs<'a> {
    ReportInputs {
        method,
        score_names: &cohort.manifest.score_names,
        subject_ids: ids,
        diagnoses: Some(diagnoses),
        truth: truth.view(),
        predicted: pred.view(),
        n_permutations: permutations,
        seed,
    }
}

fn write_report(s: &Session, report: &EvaluationReport, path: &Path, scatter: Option<&Path>) -> CliResult {
    let written = s.write(path, report.to_json_string())?;
    println!("wrote {}", written.display());
    if let Some(scatter) = scatter {
        s.write(scatter, scatter_csv(report))?;
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn krr(
    s: &Session,
    features_path: &Path,
    cohort_path: &Path,
    fixed: Option<(f64, f64)>,
    loo: bool,
    report: &Path,
    scatter: Option<&Path>,
    permutations: usize,
) -> CliResult {
    let cohort = s.cohort(cohort_path)?;
    let ids = cohort.subject_ids();
    let features = FeatureMatrix::read_csv(features_path)?.aligned_to(&ids)?;
    let truth = cohort.score_matrix()?;
    let seed = s.seed_or(DEFAULT_SEED);
    let config = match fixed {
        Some((gamma, ridge)) => KernelConfig::new(gamma, ridge)?,
        None => grid_search(features.values.view(), truth.view(), &GridSearch::default(), seed)?.best,
    };
    let pred = if loo {
        krr_loocv(features.values.view(), truth.view(), config)?
    } else {
        krr_fit(features.values.view(), truth.view(), config)?.predict(features.values.view())?
    };
    let method = format!(
        "krr_{}(gamma={}, ridge={})",
        if loo { "loocv" } else { "in_sample" },
        config.gamma,
        config.ridge
    );
    let diag = cohort.diagnoses();
    let rep = assemble_report(
        &report_inputs(&method, &cohort, &ids, &diag, &truth, &pred, permutations, seed),
        None,
        None,
    )?;
    write_report(s, &rep, report, scatter)
}

#[derive(Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
struct RunConfigFile {
    model: Value,
    train: Value,
}

/// Overlay the fields given in `overrides` on the serialized `base`.
fn merged<T: Serialize + serde::de::DeserializeOwned>(base: &T, overrides: &Value, path: &Path) -> CliResult<T> {
    let mut value = serde_json::to_value(base).expect("config serializes");
    match overrides {
        Value::Null => {}
        Value::Object(fields) => {
            let target = value.as_object_mut().expect("configs are objects");
            for (k, v) in fields {
                target.insert(k.clone(), v.clone());
            }
        }
        _ => {
            return Err(Error::Json {
                path: path.into(),
                message: "config sections must be objects".into(),
            }
            .into())
        }
    }
    serde_json::from_value(value).map_err(|e| {
        Error::Json {
            path: path.into(),
            message: e.to_string(),
        }
        .into()
    })
}

/// Model and training configs from an optional `{"model": {...}, "train":
/// {...}}` file, with the region count taken from the cohort.
fn run_config(
    s: &Session,
    path: Option<&Path>,
    n_regions: usize,
    base_train: TrainConfig,
) -> CliResult<(ModelConfig, TrainConfig)> {
    let (file, path) = match path {
        Some(p) => (read_json::<RunConfigFile>(p)?, p),
        None => (RunConfigFile::default(), Path::new("<defaults>")),
    };
    let mut model: ModelConfig = merged(&ModelConfig::new(n_regions), &file.model, path)?;
    if model.n_regions != n_regions {
        return Err(Error::Shape(format!(
            "config has {} regions, cohort has {n_regions}",
            model.n_regions
        ))
        .into());
    }
    model.n_regions = n_regions;
    model.validate()?;
    let mut train: TrainConfig = merged(&base_train, &file.train, path)?;
    if let Some(seed) = s.seed {
        train.seed = seed;
    }
    train.validate()?;
    Ok((model, train))
}

fn dump_embeddings<F: Real>(s: &Session, model: &NeuroMamba<F>, cohort: &Cohort) -> CliResult {
    if !s.dump_intermediate {
        return Ok(());
    }
    let h = embed_cohort(model, cohort)?;
    let fm = FeatureMatrix::from_rows(
        h.outer_iter().map(|r| r.to_owned()).collect(),
        cohort.region_labels(),
        cohort.subject_ids(),
    )?;
    let path = s.output(Path::new("h_vectors.csv"));
    std::fs::create_dir_all(&s.out_dir).map_err(|e| Error::io(&s.out_dir, e))?;
    fm.write_csv(&path)?;
    Ok(())
}

fn train_cmd<F: Real>(
    s: &Session,
    cohort_path: &Path,
    config: Option<&Path>,
    checkpoint: &Path,
    head: HeadKind,
    log: Option<&Path>,
) -> CliResult {
    let cohort = s.cohort(cohort_path)?;
    let (mut model_config, train_config) = run_config(s, config, cohort.n_regions(), TrainConfig::default())?;
    model_config.head = head;
    let examples = examples_from_cohort::<F>(&cohort, head)?;
    let model = NeuroMamba::<F>::new(model_config, train_config.seed)?;
    let outcome = train(model, &examples, &train_config)?;
    let path = s.output(checkpoint);
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    save_checkpoint(&outcome.model, &path)?;
    println!("wrote {}", path.display());
    if let Some(log) = log {
        let text = serde_json::to_string_pretty(&serde_json::json!({ "loss_curve": outcome.loss_curve }))
            .expect("loss curve serializes");
        s.write(log, text)?;
    }
    dump_embeddings(s, &outcome.model, &cohort)
}

fn loocv_cmd<F: Real>(
    s: &Session,
    cohort_path: &Path,
    config: Option<&Path>,
    report: &Path,
    scatter: Option<&Path>,
    permutations: usize,
) -> CliResult {
    let cohort = s.cohort(cohort_path)?;
    let (model_config, train_config) = run_config(s, config, cohort.n_regions(), TrainConfig::default())?;
    let examples = examples_from_cohort::<F>(&cohort, HeadKind::Regression)?;
    let outcome = loocv(&examples, model_config, &train_config)?;
    let truth = cohort.score_matrix()?;
    let ids = cohort.subject_ids();
    let diag = cohort.diagnoses();
    let rep = assemble_report(
        &report_inputs(
            "neuromamba_loocv",
            &cohort,
            &ids,
            &diag,
            &truth,
            &outcome.predictions,
            permutations,
            train_config.seed,
        ),
        None,
        None,
    )?;
    write_report(s, &rep, report, scatter)?;
    if s.dump_intermediate {
        let text = serde_json::to_string_pretty(&outcome.folds).expect("folds serialize");
        s.write(Path::new("loocv_folds.json"), text)?;
    }
    Ok(())
}

fn pfi_cmd<F: Real>(
    s: &Session,
    checkpoint: &Path,
    cohort_path: &Path,
    trials: usize,
    report: &Path,
    ranking: Option<&Path>,
    regions: Option<&Path>,
) -> CliResult {
    let model = load_checkpoint::<F>(checkpoint)?;
    let cohort = s.cohort(cohort_path)?;
    if trials == 0 {
        return Err(CliError::usage("usage", "--trials must be at least 1"));
    }
    let rep = analysis::pfi(&model, &cohort, trials, s.seed_or(DEFAULT_SEED))?;
    let written = s.write(report, rep.to_json_string())?;
    println!("wrote {}", written.display());
    if let Some(ranking) = ranking {
        let metadata = match regions {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                Some(RegionMetadata::from_csv(&text, p)?)
            }
            None => None,
        };
        s.write(ranking, rep.ranking_csv(metadata.as_ref()))?;
    }
    dump_embeddings(s, &model, &cohort)
}

#[derive(Serialize)]
struct ClassifierResult {
    method: String,
    auc: f64,
    roc: RocCurve,
}

#[derive(Serialize)]
struct ClassificationReport {
    positive_class: String,
    n_subjects: usize,
    n_positive: usize,
    methods: Vec<ClassifierResult>,
}

fn roc_csv(curve: &RocCurve) -> String {
    let mut out = String::from("fpr,tpr,threshold\n");
    for p in &curve.points {
        let threshold = p.threshold.map(|t| t.to_string()).unwrap_or_default();
        out.push_str(&format!("{},{},{}\n", p.fpr, p.tpr, threshold));
    }
    out
}

/// Leave-one-out logits of a logistic model on the MoCA score alone.
fn moca_logistic_logits(moca: &[f64], labels: &[bool]) -> CliResult<Vec<f64>> {
    let n = moca.len();
    (0..n)
        .map(|i| {
            let keep: Vec<usize> = (0..n).filter(|&j| j != i).collect();
            let x = Array2::from_shape_fn((n - 1, 1), |(r, _)| moca[keep[r]]);
            let y: Vec<bool> = keep.iter().map(|&j| labels[j]).collect();
            let fit = LogisticModel::fit(x.view(), &y, 1e-6)?;
            Ok(fit.intercept + fit.weights[0] * moca[i])
        })
        .collect()
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("roc");
    let ext = path.extension().and_then(|s| s.to_str()).unwrap_or("csv");
    path.with_file_name(format!("{stem}_{suffix}.{ext}"))
}

fn classify_cmd<F: Real>(
    s: &Session,
    checkpoint: &Path,
    cohort_path: &Path,
    roc: &Path,
    loo: bool,
    config: Option<&Path>,
    report: Option<&Path>,
) -> CliResult {
    let model = load_checkpoint::<F>(checkpoint)?;
    let cohort = s.cohort(cohort_path)?;
    let examples = examples_from_cohort::<F>(&cohort, HeadKind::Bce)?;
    let labels: Vec<bool> = cohort
        .diagnoses()
        .iter()
        .map(|d| d.expect("BCE examples require diagnoses").is_impaired())
        .collect();
    let moca: Vec<f64> = cohort.score_matrix()?.column(0).to_vec();

    let logits: Vec<f64> = if loo {
        let (_, train_config) = run_config(s, config, cohort.n_regions(), TrainConfig::default())?;
        let out = loocv_from(&examples, &train_config, |seed| Ok(model.with_head(HeadKind::Bce, seed)))?;
        out.predictions.column(0).to_vec()
    } else {
        if model.config.head != HeadKind::Bce {
            return Err(CliError::usage(
                "usage",
                "checkpoint has a regression head; train with --head bce or pass --loocv",
            ));
        }
        predict_examples(&model, &examples)?.column(0).to_vec()
    };
    let nm = roc_auc(&labels, &logits)?;
    let baseline = roc_auc(&labels, &moca_logistic_logits(&moca, &labels)?)?;
    let written = s.write(roc, roc_csv(&nm))?;
    s.write(&sibling(roc, "moca_logistic"), roc_csv(&baseline))?;
    println!("wrote {} (AUC {:.4}; MoCA-only {:.4})", written.display(), nm.auc, baseline.auc);
    if let Some(report) = report {
        let rep = ClassificationReport {
            positive_class: "impaired (aMCI or DAT) vs CN".into(),
            n_subjects: labels.len(),
            n_positive: labels.iter().filter(|l| **l).count(),
            methods: vec![
                ClassifierResult {
                    method: if loo { "neuromamba_bce_loocv" } else { "neuromamba_bce" }.into(),
                    auc: nm.auc,
                    roc: nm,
                },
                ClassifierResult {
                    method: "moca_logistic_loocv".into(),
                    auc: baseline.auc,
                    roc: baseline,
                },
            ],
        };
        s.write(report, serde_json::to_string_pretty(&rep).expect("report serializes"))?;
    }
    Ok(())
}

struct AdaptPaths<'a> {
    report: &'a Path,
    scatter: Option<&'a Path>,
    out_checkpoint: Option<&'a Path>,
}

/// Finetuning epochs when the config does not say otherwise.
const ADAPT_EPOCHS: usize = 10;

fn adapt_cmd<F: Real>(
    s: &Session,
    checkpoint: &Path,
    cohort_path: &Path,
    shots: Shots,
    config: Option<&Path>,
    paths: AdaptPaths,
    permutations: usize,
) -> CliResult {
    let model = load_checkpoint::<F>(checkpoint)?;
    let cohort = s.cohort(cohort_path)?;
    let base = TrainConfig {
        epochs: ADAPT_EPOCHS,
        ..TrainConfig::default()
    };
    let (_, train_config) = run_config(s, config, cohort.n_regions(), base)?;
    let examples = examples_from_cohort::<F>(&cohort, HeadKind::Regression)?;
    let outcome = adapt(&model, &cohort, &examples, shots, &train_config)?;

    let idx = &outcome.test_indices;
    let truth = cohort.score_matrix()?.select(Axis(0), idx);
    let all_ids = cohort.subject_ids();
    let ids: Vec<String> = idx.iter().map(|&i| all_ids[i].clone()).collect();
    let all_diag = cohort.diagnoses();
    let diag: Vec<_> = idx.iter().map(|&i| all_diag[i]).collect();
    let method = match shots {
        Shots::PerClass(0) => "neuromamba_zero_shot".to_string(),
        Shots::PerClass(k) => format!("neuromamba_{k}_shot"),
        Shots::All => "neuromamba_all_shot_loocv".to_string(),
    };
    let rep = assemble_report(
        &report_inputs(
            &method,
            &cohort,
            &ids,
            &diag,
            &truth,
            &outcome.predictions,
            permutations,
            train_config.seed,
        ),
        None,
        None,
    )?;
    write_report(s, &rep, paths.report, paths.scatter)?;
    if let Some(out) = paths.out_checkpoint {
        let path = s.output(out);
        save_checkpoint(&outcome.model, &path)?;
    }
    dump_embeddings(s, &outcome.model, &cohort)
}

fn gradcheck_cmd(s: &Session, config: Option<&Path>, timepoints: usize, report: Option<&Path>) -> CliResult {
    if s.precision != Precision::F64 {
        return Err(CliError::usage(
            "precision",
            "gradcheck needs 64-bit arithmetic; pass --precision f64",
        ));
    }
    let base = ModelConfig {
        state_size: 4,
        ..ModelConfig::new(4)
    };
    let model_config: ModelConfig = match config {
        Some(p) => merged(&base, &read_json::<Value>(p)?, p)?,
        None => base,
    };
    model_config.validate()?;
    if timepoints == 0 {
        return Err(CliError::usage("usage", "--timepoints must be at least 1"));
    }
    let results = gradcheck_suite(model_config, timepoints, s.seed_or(DEFAULT_SEED), GradcheckConfig::default())?;
    let failed: Vec<String> = results
        .iter()
        .flat_map(|(head, r)| {
            r.tensors
                .iter()
                .filter(|t| !t.passed)
                .map(move |t| format!("{head:?}:{}", t.name))
        })
        .collect();
    if let Some(report) = report {
        let value: Vec<Value> = results
            .iter()
            .map(|(head, r)| serde_json::json!({ "head": head, "report": r }))
            .collect();
        s.write(report, serde_json::to_string_pretty(&value).expect("serializes"))?;
    }
    let worst = results.iter().map(|(_, r)| r.max_rel_error).fold(0.0, f64::max);
    if !failed.is_empty() {
        return Err(CliError::numeric(
            "gradcheck",
            format!("{} tensors failed (worst relative error {worst:.3e}): {}", failed.len(), failed.join(", ")),
        ));
    }
    let n: usize = results.iter().map(|(_, r)| r.tensors.len()).sum();
    println!("gradcheck passed: {n} tensors, worst relative error {worst:.3e}");
    Ok(())
}
