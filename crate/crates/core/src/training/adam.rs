use crate::error::{Error, Result};
use crate::model::ParamInfo;
use crate::real::Real;

use super::TrainConfig;

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<F> {
    pub m: Vec<F>,
    pub v: Vec<F>,
    /// Number of completed steps.
    pub t: u64,
}

impl<F: Real> AdamState<F> {
    pub fn new(n: usize) -> Self {
        AdamState {
            m: vec![F::zero(); n],
            v: vec![F::zero(); n],
            t: 0,
        }
    }
}

/// Rescale `grads` to norm `max_norm` when it is larger; returns the norm
/// before clipping.
pub fn clip_global_norm<F: Real>(grads: &mut [F], max_norm: Option<f64>) -> f64 {
    let norm = grads.iter().map(|g| g.f64() * g.f64()).sum::<f64>().sqrt();
    if let Some(max) = max_norm {
        if norm > max {
            let scale = F::of(max / norm);
            grads.iter_mut().for_each(|g| *g *= scale);
        }
    }
    norm
}

/// One Adam update with bias correction. Gradients are clipped first;
/// a non-finite gradient is reported with the name of its tensor.
pub fn adam_step<F: Real>(
    params: &mut [F],
    grads: &mut [F],
    state: &mut AdamState<F>,
    config: &TrainConfig,
    layout: &[ParamInfo],
) -> Result<f64> {
    if let Some(k) = grads.iter().position(|g| !g.is_finite()) {
        let info = layout
            .iter()
            .rev()
            .find(|p| p.offset <= k)
            .expect("layout covers the parameters");
        return Err(Error::Divergence {
            param: info.name.clone(),
            index: k - info.offset,
        });
    }
    let norm = clip_global_norm(grads, config.clip_norm);
    state.t += 1;
    let t = state.t as i32;
    let (b1, b2) = (F::of(config.beta1), F::of(config.beta2));
    let c1 = F::one() - F::of(config.beta1.powi(t));
    let c2 = F::one() - F::of(config.beta2.powi(t));
    let lr = F::of(config.learning_rate);
    let eps = F::of(config.adam_eps);
    for i in 0..params.len() {
        let g = grads[i];
        state.m[i] = b1 * state.m[i] + (F::one() - b1) * g;
        state.v[i] = b2 * state.v[i] + (F::one() - b2) * g * g;
        let m_hat = state.m[i] / c1;
        let v_hat = state.v[i] / c2;
        params[i] -= lr * m_hat / (v_hat.sqrt() + eps);
    }
    Ok(norm)
}
