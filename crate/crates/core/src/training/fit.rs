use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::adam::{adam_step, AdamState};
use crate::dataio::Cohort;
use crate::error::{Error, Result};
use crate::model::{HeadKind, ModelConfig, NeuroMamba, Params, Target};
use crate::real::Real;
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    /// Global gradient-norm threshold; `None` disables clipping.
    pub clip_norm: Option<f64>,
    pub lambda_sparse: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 50,
            batch_size: 4,
            learning_rate: 1e-3,
            beta1: 0.0,
            beta2: 0.95,
            adam_eps: 1e-8,
            clip_norm: Some(1.0),
            lambda_sparse: 1e-3,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Invalid("epochs and batch_size must be at least 1".into()));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(Error::Invalid(format!("{name} must lie in [0, 1), got {b}")));
            }
        }
        if !(self.learning_rate > 0.0) || !(self.adam_eps > 0.0) || !(self.lambda_sparse >= 0.0) {
            return Err(Error::Invalid(
                "learning_rate and adam_eps must be positive, lambda_sparse nonnegative".into(),
            ));
        }
        if self.clip_norm.is_some_and(|c| !(c > 0.0)) {
            return Err(Error::Invalid("clip_norm must be positive".into()));
        }
        Ok(())
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        TrainConfig {
            seed,
            ..self.clone()
        }
    }
}

/// One subject's input and target.
#[derive(Debug, Clone)]
pub struct Example<F> {
    pub subject_id: String,
    pub x: Array2<F>,
    pub target: Target,
}

/// Training examples for the given head: scores for regression, diagnosis
/// (impaired vs CN) and the first score (MoCA) for BCE.
pub fn examples_from_cohort<F: Real>(cohort: &Cohort, head: HeadKind) -> Result<Vec<Example<F>>> {
    cohort
        .manifest
        .subjects
        .iter()
        .zip(&cohort.timeseries)
        .map(|(s, ts)| {
            let scores = s.scores.ok_or_else(|| {
                Error::Invalid(format!("subject '{}' has no scores", s.subject_id))
            })?;
            let target = match head {
                HeadKind::Regression => Target::Scores(scores.to_vec()),
                HeadKind::Bce => {
                    let d = s.diagnosis.ok_or_else(|| {
                        Error::Invalid(format!("subject '{}' has no diagnosis", s.subject_id))
                    })?;
                    Target::Label {
                        impaired: d.is_impaired(),
                        moca: scores[0],
                    }
                }
            };
            Ok(Example {
                subject_id: s.subject_id.clone(),
                x: ts.values.mapv(F::of),
                target,
            })
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<F> {
    pub model: NeuroMamba<F>,
    /// Mean training loss of every epoch, as seen during that epoch.
    pub loss_curve: Vec<f64>,
}

/// Train with shuffled mini-batches; the batch order of each epoch is fixed
/// by `(config.seed, epoch)`.
pub fn train<F: Real>(
    mut model: NeuroMamba<F>,
    examples: &[Example<F>],
    config: &TrainConfig,
) -> Result<TrainOutcome<F>> {
    config.validate()?;
    if examples.is_empty() {
        return Err(Error::Invalid("no training examples".into()));
    }
    let layout = model.layout();
    let mut params = model.to_flat();
    let mut state = AdamState::new(params.len());
    let mut loss_curve = Vec::with_capacity(config.epochs);
    let mut order: Vec<usize> = (0..examples.len()).collect();
    for epoch in 0..config.epochs {
        let mut shuffle_rng = rng::seeded(rng::tagged(config.seed, rng::tags::SHUFFLE, epoch as u64));
        order.sort_unstable();
        order.shuffle(&mut shuffle_rng);
        let mut epoch_loss = 0.0;
        for (batch_idx, chunk) in order.chunks(config.batch_size).enumerate() {
            let wrap = |e: Error| Error::Training {
                epoch,
                batch: batch_idx,
                source: Box::new(e),
            };
            let batch: Vec<_> = chunk
                .iter()
                .map(|&i| (examples[i].x.view(), &examples[i].target))
                .collect();
            let (loss, grads) = model
                .batch_loss_and_grad(&batch, config.lambda_sparse)
                .map_err(wrap)?;
            if !loss.is_finite() {
                return Err(wrap(Error::Numeric("non-finite training loss".into())));
            }
            epoch_loss += loss.f64() * chunk.len() as f64;
            let mut g = grads.to_flat();
            adam_step(&mut params, &mut g, &mut state, config, &layout).map_err(wrap)?;
            model.assign_flat(&params);
        }
        loss_curve.push(epoch_loss / examples.len() as f64);
    }
    Ok(TrainOutcome { model, loss_curve })
}

/// Head outputs for every example, in order (N x outputs).
pub fn predict_examples<F: Real>(model: &NeuroMamba<F>, examples: &[Example<F>]) -> Result<Array2<f64>> {
    let rows: Vec<Vec<f64>> = examples
        .par_iter()
        .map(|ex| {
            let moca = match &ex.target {
                Target::Label { moca, .. } => Some(*moca),
                Target::Scores(_) => None,
            };
            Ok(model.predict(ex.x.view(), moca)?.iter().map(|v| v.f64()).collect())
        })
        .collect::<Result<_>>()?;
    let width = rows.first().map_or(0, |r| r.len());
    Ok(Array2::from_shape_fn((rows.len(), width), |(i, j)| rows[i][j]))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub held_out_subject: String,
    /// Predicted scores, or the single logit of the BCE head.
    pub predictions: Vec<f64>,
    pub train_loss_curve: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct LoocvOutcome {
    pub folds: Vec<FoldResult>,
    /// N x outputs, one row per subject in cohort order.
    pub predictions: Array2<f64>,
}

/// Leave-one-out: fold `i` initializes a model with seed `seed ^ i`, trains
/// on the other subjects and predicts subject `i`. Folds run in parallel;
/// the result does not depend on scheduling.
pub fn loocv<F: Real>(
    examples: &[Example<F>],
    model_config: ModelConfig,
    config: &TrainConfig,
) -> Result<LoocvOutcome> {
    loocv_from(examples, config, |fold_seed| NeuroMamba::new(model_config, fold_seed))
}

/// Leave-one-out with a caller-supplied starting model per fold seed.
pub fn loocv_from<F: Real>(
    examples: &[Example<F>],
    config: &TrainConfig,
    start: impl Fn(u64) -> Result<NeuroMamba<F>> + Sync,
) -> Result<LoocvOutcome> {
    config.validate()?;
    let n = examples.len();
    if n < 3 {
        return Err(Error::Invalid(format!("leave-one-out needs at least 3 subjects, got {n}")));
    }
    let folds: Vec<FoldResult> = (0..n)
        .into_par_iter()
        .map(|fold| {
            let run = || -> Result<FoldResult> {
                let fold_seed = rng::substream(config.seed, fold as u64);
                let train_set: Vec<Example<F>> = examples
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| *j != fold)
                    .map(|(_, e)| e.clone())
                    .collect();
                let outcome = train(start(fold_seed)?, &train_set, &config.with_seed(fold_seed))?;
                let pred = predict_examples(&outcome.model, std::slice::from_ref(&examples[fold]))?;
                Ok(FoldResult {
                    fold,
                    held_out_subject: examples[fold].subject_id.clone(),
                    predictions: pred.row(0).to_vec(),
                    train_loss_curve: outcome.loss_curve,
                })
            };
            run().map_err(|e| Error::Fold {
                fold,
                subject: examples[fold].subject_id.clone(),
                source: Box::new(e),
            })
        })
        .collect::<Result<_>>()?;
    let rows: Vec<_> = folds
        .iter()
        .map(|f| ndarray::ArrayView1::from(&f.predictions[..]))
        .collect();
    let predictions = ndarray::stack(Axis(0), &rows).map_err(|e| Error::Shape(e.to_string()))?;
    Ok(LoocvOutcome { folds, predictions })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::{generate_synthetic, SyntheticMode, SyntheticSpec};

    fn cohort(n: usize, seed: u64) -> Cohort {
        let spec = SyntheticSpec {
            n_subjects: n,
            n_regions: 3,
            n_timepoints: 12,
            tr_seconds: 2.0,
            informative_regions: vec![0],
            coupling: 0.4,
            mode: SyntheticMode::Mixed,
            seed,
        };
        generate_synthetic(&spec).unwrap().0
    }

    fn small_config() -> ModelConfig {
        ModelConfig {
            n_layers: 1,
            state_size: 2,
            ..ModelConfig::new(3)
        }
    }

    #[test]
    fn same_seed_same_curve() {
        let examples = examples_from_cohort::<f64>(&cohort(6, 1), HeadKind::Regression).unwrap();
        let cfg = TrainConfig {
            epochs: 3,
            seed: 5,
            ..Default::default()
        };
        let run = || {
            let m = NeuroMamba::new(small_config(), 2).unwrap();
            train(m, &examples, &cfg).unwrap()
        };
        let (a, b) = (run(), run());
        assert_eq!(a.loss_curve, b.loss_curve);
        assert_eq!(a.model, b.model);
        assert_eq!(a.loss_curve.len(), 3);
    }

    #[test]
    fn three_subjects_three_folds() {
        let examples = examples_from_cohort::<f32>(&cohort(4, 2), HeadKind::Regression).unwrap();
        let cfg = TrainConfig {
            epochs: 2,
            ..Default::default()
        };
        let out = loocv(&examples[..3], small_config(), &cfg).unwrap();
        assert_eq!(out.folds.len(), 3);
        assert_eq!(out.predictions.dim(), (3, 3));
        for (i, f) in out.folds.iter().enumerate() {
            assert_eq!(f.held_out_subject, examples[i].subject_id);
            assert_eq!(f.train_loss_curve.len(), 2);
        }
    }

    #[test]
    fn loocv_ignores_thread_count() {
        let examples = examples_from_cohort::<f32>(&cohort(5, 3), HeadKind::Regression).unwrap();
        let cfg = TrainConfig {
            epochs: 2,
            batch_size: 2,
            ..Default::default()
        };
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| loocv(&examples, small_config(), &cfg).unwrap())
        };
        assert_eq!(run(1).predictions, run(3).predictions);
    }

    #[test]
    fn invalid_configs() {
        assert!(TrainConfig { epochs: 0, ..Default::default() }.validate().is_err());
        assert!(TrainConfig { beta2: 1.0, ..Default::default() }.validate().is_err());
    }
}
