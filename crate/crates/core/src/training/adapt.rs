use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::fit::{loocv_from, predict_examples, train, Example, TrainConfig};
use crate::dataio::{Cohort, Diagnosis};
use crate::error::{Error, Result};
use crate::model::NeuroMamba;
use crate::real::Real;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shots {
    PerClass(usize),
    All,
}

impl std::str::FromStr for Shots {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "all" {
            return Ok(Shots::All);
        }
        s.parse()
            .map(Shots::PerClass)
            .map_err(|_| Error::Invalid(format!("shots must be a count or 'all', got '{s}'")))
    }
}

/// Pick `k` subjects of every diagnosis present in the cohort, seeded.
/// Returns (finetuning indices, held-out indices), both ascending.
pub fn select_shots(cohort: &Cohort, k: usize, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    let mut by_class: BTreeMap<&'static str, Vec<usize>> = BTreeMap::new();
    for (i, s) in cohort.manifest.subjects.iter().enumerate() {
        let d = s.diagnosis.ok_or_else(|| {
            Error::Invalid(format!("subject '{}' has no diagnosis for shot selection", s.subject_id))
        })?;
        by_class.entry(d.as_str()).or_default().push(i);
    }
    let mut chosen = Vec::new();
    for class in Diagnosis::ALL {
        let Some(members) = by_class.get(class.as_str()) else {
            continue;
        };
        if members.len() < k {
            return Err(Error::Shots {
                class: class.as_str().into(),
                available: members.len(),
                requested: k,
            });
        }
        let mut members = members.clone();
        let tag = Diagnosis::ALL.iter().position(|c| *c == class).unwrap() as u64;
        members.shuffle(&mut rng::seeded(rng::tagged(seed, rng::tags::SHOTS, tag)));
        chosen.extend_from_slice(&members[..k]);
    }
    chosen.sort_unstable();
    let rest = (0..cohort.len()).filter(|i| !chosen.contains(i)).collect();
    Ok((chosen, rest))
}

#[derive(Debug, Clone)]
pub struct AdaptOutcome<F> {
    /// The finetuned model; the pretrained one for zero shots and for
    /// `Shots::All`, whose evaluation is leave-one-out.
    pub model: NeuroMamba<F>,
    pub finetune_subjects: Vec<String>,
    /// Cohort indices of the evaluated subjects.
    pub test_indices: Vec<usize>,
    /// One row per evaluated subject.
    pub predictions: ndarray::Array2<f64>,
    pub loss_curve: Vec<f64>,
}

/// Finetune a pretrained model on `k` subjects per diagnosis and evaluate on
/// the rest. Zero shots evaluates the pretrained model on every subject;
/// `Shots::All` finetunes leave-one-out from the pretrained weights.
pub fn adapt<F: Real>(
    pretrained: &NeuroMamba<F>,
    cohort: &Cohort,
    examples: &[Example<F>],
    shots: Shots,
    config: &TrainConfig,
) -> Result<AdaptOutcome<F>> {
    if cohort.n_regions() != pretrained.config.n_regions {
        return Err(Error::Shape(format!(
            "model has {} regions, target cohort {}",
            pretrained.config.n_regions,
            cohort.n_regions()
        )));
    }
    match shots {
        Shots::PerClass(0) => Ok(AdaptOutcome {
            model: pretrained.clone(),
            finetune_subjects: vec![],
            test_indices: (0..examples.len()).collect(),
            predictions: predict_examples(pretrained, examples)?,
            loss_curve: vec![],
        }),
        Shots::PerClass(k) => {
            let (train_idx, test_idx) = select_shots(cohort, k, config.seed)?;
            let train_set: Vec<Example<F>> = train_idx.iter().map(|&i| examples[i].clone()).collect();
            let test_set: Vec<Example<F>> = test_idx.iter().map(|&i| examples[i].clone()).collect();
            let outcome = train(pretrained.clone(), &train_set, config)?;
            let predictions = predict_examples(&outcome.model, &test_set)?;
            Ok(AdaptOutcome {
                model: outcome.model,
                finetune_subjects: train_set.iter().map(|e| e.subject_id.clone()).collect(),
                test_indices: test_idx,
                predictions,
                loss_curve: outcome.loss_curve,
            })
        }
        Shots::All => {
            let out = loocv_from(examples, config, |_| Ok(pretrained.clone()))?;
            Ok(AdaptOutcome {
                model: pretrained.clone(),
                finetune_subjects: examples.iter().map(|e| e.subject_id.clone()).collect(),
                test_indices: (0..examples.len()).collect(),
                predictions: out.predictions,
                loss_curve: vec![],
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::{generate_synthetic, SyntheticMode, SyntheticSpec};
    use crate::model::{HeadKind, ModelConfig};
    use crate::training::examples_from_cohort;

    fn cohort() -> Cohort {
        let spec = SyntheticSpec {
            n_subjects: 24,
            n_regions: 3,
            n_timepoints: 10,
            tr_seconds: 2.0,
            informative_regions: vec![1],
            coupling: 0.4,
            mode: SyntheticMode::Mixed,
            seed: 8,
        };
        generate_synthetic(&spec).unwrap().0
    }

    #[test]
    fn shots_are_disjoint_and_balanced() {
        let c = cohort();
        let (train, test) = select_shots(&c, 2, 1).unwrap();
        assert_eq!(train.len() + test.len(), c.len());
        assert!(train.iter().all(|i| !test.contains(i)));
        let classes: std::collections::BTreeSet<_> = c.diagnoses().into_iter().collect();
        assert_eq!(train.len(), 2 * classes.len());
    }

    #[test]
    fn too_many_shots_is_an_error() {
        assert!(matches!(select_shots(&cohort(), 100, 1), Err(Error::Shots { .. })));
    }

    #[test]
    fn zero_shot_is_direct_evaluation() {
        let c = cohort();
        let examples = examples_from_cohort::<f64>(&c, HeadKind::Regression).unwrap();
        let config = ModelConfig {
            n_layers: 1,
            state_size: 2,
            ..ModelConfig::new(3)
        };
        let model = NeuroMamba::new(config, 4).unwrap();
        let out = adapt(&model, &c, &examples, Shots::PerClass(0), &TrainConfig::default()).unwrap();
        assert_eq!(out.predictions, predict_examples(&model, &examples).unwrap());
    }

    #[test]
    fn parse_shots() {
        assert_eq!("all".parse::<Shots>().unwrap(), Shots::All);
        assert_eq!("5".parse::<Shots>().unwrap(), Shots::PerClass(5));
        assert!("five".parse::<Shots>().is_err());
    }
}
