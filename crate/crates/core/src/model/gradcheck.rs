use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use ndarray::Array2;
use rand::Rng as _;

use super::net::{HeadKind, ModelConfig, NeuroMamba, Target};
use super::params::Params;
use crate::error::Result;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradcheckConfig {
    /// Central-difference step.
    pub step: f64,
    pub tolerance: f64,
    /// Gradients smaller than this are compared in absolute terms, where
    /// the difference quotient is dominated by round-off.
    pub floor: f64,
}

impl Default for GradcheckConfig {
    fn default() -> Self {
        GradcheckConfig {
            step: 1e-5,
            tolerance: 1e-4,
            floor: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorCheck {
    pub name: String,
    pub n_elements: usize,
    pub max_rel_error: f64,
    pub worst_index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradcheckReport {
    pub config: GradcheckConfig,
    pub tensors: Vec<TensorCheck>,
    pub max_rel_error: f64,
    pub passed: bool,
}

pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

/// Compare backpropagated gradients with central differences on every
/// scalar parameter.
pub fn gradcheck(
    model: &NeuroMamba<f64>,
    x: ArrayView2<f64>,
    target: &Target,
    lambda_sparse: f64,
    config: GradcheckConfig,
) -> Result<GradcheckReport> {
    let mut grads = model.zeros_like();
    model.loss_and_grad(x, target, lambda_sparse, &mut grads)?;
    let analytic = grads.to_flat();
    let base = model.to_flat();
    let mut probe = model.clone();
    let mut loss_at = |flat: &[f64]| -> Result<f64> {
        probe.assign_flat(flat);
        probe.loss(x, target, lambda_sparse)
    };

    let mut tensors = Vec::new();
    let mut work = base.clone();
    for info in model.layout() {
        let mut check = TensorCheck {
            name: info.name.clone(),
            n_elements: info.len(),
            max_rel_error: 0.0,
            worst_index: 0,
            analytic: 0.0,
            numeric: 0.0,
            passed: true,
        };
        for i in 0..info.len() {
            let k = info.offset + i;
            work[k] = base[k] + config.step;
            let plus = loss_at(&work)?;
            work[k] = base[k] - config.step;
            let minus = loss_at(&work)?;
            work[k] = base[k];
            let numeric = (plus - minus) / (2.0 * config.step);
            let err = relative_error(analytic[k], numeric, config.floor);
            if err > check.max_rel_error || i == 0 {
                check.max_rel_error = err;
                check.worst_index = i;
                check.analytic = analytic[k];
                check.numeric = numeric;
            }
        }
        check.passed = check.max_rel_error <= config.tolerance;
        tensors.push(check);
    }
    let max_rel_error = tensors.iter().map(|t| t.max_rel_error).fold(0.0, f64::max);
    Ok(GradcheckReport {
        config,
        passed: tensors.iter().all(|t| t.passed),
        tensors,
        max_rel_error,
    })
}

/// Move a freshly initialized model to a generic point. At initialization
/// the block outputs are tiny, so the RMSNorm input sits inside its epsilon
/// and the loss is too curved for a finite-difference step of 1e-5.
pub fn jitter_output_biases(model: &mut NeuroMamba<f64>, seed: u64) {
    let mut r = rng::seeded(seed);
    for layer in &mut model.layers {
        for block in [&mut layer.forward_block, &mut layer.backward_block] {
            block.out_b.mapv_inplace(|_| r.random_range(-0.5..0.5));
        }
    }
}

/// Gradient check of both heads on random input of `n_timepoints` steps.
pub fn gradcheck_suite(
    config: ModelConfig,
    n_timepoints: usize,
    seed: u64,
    check: GradcheckConfig,
) -> Result<Vec<(HeadKind, GradcheckReport)>> {
    let mut r = rng::seeded(rng::substream(seed, 1));
    let x = Array2::from_shape_fn((n_timepoints, config.n_regions), |_| r.random_range(-1.0..1.0));
    let mut out = Vec::new();
    for (head, target) in [
        (HeadKind::Regression, Target::Scores((0..config.n_scores).map(|i| 0.5 - 0.4 * i as f64).collect())),
        (HeadKind::Bce, Target::Label { impaired: true, moca: -0.7 }),
    ] {
        let mut model = NeuroMamba::<f64>::new(ModelConfig { head, ..config }, seed)?;
        jitter_output_biases(&mut model, rng::substream(seed, 2));
        out.push((head, gradcheck(&model, x.view(), &target, 1e-3, check)?));
    }
    Ok(out)
}
