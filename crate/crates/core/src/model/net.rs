use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::block::{uniform, BlockConfig};
use super::layer::{LayerCache, MambaPlusLayer};
use super::params::{join, Params};
use crate::error::{Error, Result};
use crate::real::{sigmoid, Real};
use crate::rng::{self, Rng};
use crate::ssm::ScanMode;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeadKind {
    #[default]
    Regression,
    Bce,
}

/// Architecture hyperparameters. Fields left out of a JSON config take the
/// defaults of [`ModelConfig::new`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub n_regions: usize,
    pub n_layers: usize,
    pub state_size: usize,
    pub expand: usize,
    pub conv_width: usize,
    /// `None` resolves to `max(1, n_regions / 16)`.
    pub delta_rank: Option<usize>,
    pub n_scores: usize,
    pub head: HeadKind,
    pub scan_mode: ScanMode,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            n_regions: 0,
            n_layers: 2,
            state_size: 16,
            expand: 2,
            conv_width: 4,
            delta_rank: None,
            n_scores: 3,
            head: HeadKind::Regression,
            scan_mode: ScanMode::Sequential,
        }
    }
}

impl ModelConfig {
    pub fn new(n_regions: usize) -> Self {
        ModelConfig {
            n_regions,
            ..Default::default()
        }
    }

    pub fn block(&self) -> BlockConfig {
        BlockConfig {
            model_dim: self.n_regions,
            state_size: self.state_size,
            expand: self.expand,
            conv_width: self.conv_width,
            delta_rank: self.delta_rank.unwrap_or((self.n_regions / 16).max(1)),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.block().validate()?;
        if self.n_layers == 0 || self.n_scores == 0 {
            return Err(Error::Invalid("n_layers and n_scores must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Head<F> {
    /// `g = weight . h + bias`, weight n_scores x B.
    Regression { weight: Array2<F>, bias: Array1<F> },
    /// `logit = weight . [h; moca] + bias`, weight of length B + 1.
    Bce { weight: Array1<F>, bias: Array1<F> },
}

/// What a training example is scored against.
#[derive(Debug, Clone, PartialEq)]
pub enum Target {
    Scores(Vec<f64>),
    Label { impaired: bool, moca: f64 },
}

impl Target {
    fn moca(&self) -> Option<f64> {
        match self {
            Target::Scores(_) => None,
            Target::Label { moca, .. } => Some(*moca),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NeuroMamba<F> {
    pub config: ModelConfig,
    pub layers: Vec<MambaPlusLayer<F>>,
    pub head: Head<F>,
}

impl<F: Real> Params<F> for NeuroMamba<F> {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(String, &[usize], &[F])) {
        for (i, layer) in self.layers.iter().enumerate() {
            layer.visit(&join(prefix, &format!("layers.{i}")), f);
        }
        let (weight, bias) = match &self.head {
            Head::Regression { weight, bias } => (weight.view().into_dyn(), bias),
            Head::Bce { weight, bias } => (weight.view().into_dyn(), bias),
        };
        f(join(prefix, "head.weight"), weight.shape(), weight.as_slice().unwrap());
        f(join(prefix, "head.bias"), bias.shape(), bias.as_slice().unwrap());
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(String, &[usize], &mut [F])) {
        for (i, layer) in self.layers.iter_mut().enumerate() {
            layer.visit_mut(&join(prefix, &format!("layers.{i}")), f);
        }
        match &mut self.head {
            Head::Regression { weight, bias } => {
                let shape = weight.shape().to_vec();
                f(join(prefix, "head.weight"), &shape, weight.as_slice_mut().unwrap());
                f(join(prefix, "head.bias"), &[bias.len()], bias.as_slice_mut().unwrap());
            }
            Head::Bce { weight, bias } => {
                f(join(prefix, "head.weight"), &[weight.len()], weight.as_slice_mut().unwrap());
                f(join(prefix, "head.bias"), &[bias.len()], bias.as_slice_mut().unwrap());
            }
        }
    }
}

pub struct ModelCache<F> {
    layers: Vec<LayerCache<F>>,
    t_len: usize,
    h: Array1<F>,
}

impl<F: Real> NeuroMamba<F> {
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = rng::seeded(rng::tagged(seed, rng::tags::INIT, 0));
        let block = config.block();
        let layers = (0..config.n_layers)
            .map(|_| MambaPlusLayer::init(&block, &mut rng))
            .collect();
        let head = Self::init_head(&config, &mut rng);
        Ok(NeuroMamba {
            config,
            layers,
            head,
        })
    }

    fn init_head(config: &ModelConfig, rng: &mut Rng) -> Head<F> {
        let b = config.n_regions;
        match config.head {
            HeadKind::Regression => Head::Regression {
                weight: uniform(rng, (config.n_scores, b), 1.0 / (b as f64).sqrt()),
                bias: Array1::zeros(config.n_scores),
            },
            HeadKind::Bce => Head::Bce {
                weight: uniform(rng, (b + 1, 1), 1.0 / ((b + 1) as f64).sqrt())
                    .remove_axis(Axis(1)),
                bias: Array1::zeros(1),
            },
        }
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        z.fill_zero();
        z
    }

    /// Same backbone with a freshly initialized head of another kind.
    pub fn with_head(&self, kind: HeadKind, seed: u64) -> Self {
        let mut config = self.config;
        config.head = kind;
        let mut rng = rng::seeded(rng::tagged(seed, rng::tags::INIT, 1));
        NeuroMamba {
            config,
            layers: self.layers.clone(),
            head: Self::init_head(&config, &mut rng),
        }
    }

    /// Parameters in another float type.
    pub fn cast<G: Real>(&self) -> NeuroMamba<G> {
        let mut out = NeuroMamba::<G>::new(self.config, 0).expect("validated config");
        let flat: Vec<G> = self.to_flat().into_iter().map(|v| G::of(v.f64())).collect();
        out.assign_flat(&flat);
        out
    }

    fn check_input(&self, x: ArrayView2<F>) -> Result<()> {
        if x.ncols() != self.config.n_regions || x.nrows() == 0 {
            return Err(Error::Shape(format!(
                "model expects T x {} input, got {:?}",
                self.config.n_regions,
                x.dim()
            )));
        }
        Ok(())
    }

    /// Pooled region vector `h`: time mean of the last layer's output.
    pub fn embed(&self, x: ArrayView2<F>) -> Result<Array1<F>> {
        self.check_input(x)?;
        let mut cur = x.to_owned();
        for layer in &self.layers {
            cur = layer.forward(cur.view(), self.config.scan_mode, false)?.0;
        }
        Ok(cur.mean_axis(Axis(0)).expect("nonempty"))
    }

    fn embed_cached(&self, x: ArrayView2<F>) -> Result<ModelCache<F>> {
        self.check_input(x)?;
        let mut cur = x.to_owned();
        let mut caches = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let (out, cache) = layer.forward(cur.view(), self.config.scan_mode, true)?;
            caches.push(cache.expect("kept"));
            cur = out;
        }
        Ok(ModelCache {
            layers: caches,
            t_len: x.nrows(),
            h: cur.mean_axis(Axis(0)).expect("nonempty"),
        })
    }

    /// Head output for a pooled vector: scores, or a one-element logit.
    pub fn head_output(&self, h: ArrayView1<F>, moca: Option<f64>) -> Result<Array1<F>> {
        match &self.head {
            Head::Regression { weight, bias } => Ok(weight.dot(&h) + bias),
            Head::Bce { weight, bias } => {
                let moca = moca.ok_or_else(|| {
                    Error::MissingInput("the BCE head needs the MoCA score".into())
                })?;
                let b = h.len();
                let logit = weight.slice(ndarray::s![..b]).dot(&h) + weight[b] * F::of(moca) + bias[0];
                Ok(Array1::from_elem(1, logit))
            }
        }
    }

    pub fn predict(&self, x: ArrayView2<F>, moca: Option<f64>) -> Result<Array1<F>> {
        let h = self.embed(x)?;
        self.head_output(h.view(), moca)
    }

    /// Data term of the loss and its gradient with respect to the head output.
    fn data_loss(&self, out: &Array1<F>, target: &Target) -> Result<(F, Array1<F>)> {
        match (&self.head, target) {
            (Head::Regression { .. }, Target::Scores(s)) => {
                if s.len() != out.len() {
                    return Err(Error::Shape(format!("{} scores for {} outputs", s.len(), out.len())));
                }
                let resid: Array1<F> = out.iter().zip(s).map(|(g, s)| *g - F::of(*s)).collect();
                let loss = resid.iter().map(|r| *r * *r).sum::<F>() * F::of(0.5);
                Ok((loss, resid))
            }
            (Head::Bce { .. }, Target::Label { impaired, .. }) => {
                let l = out[0];
                let y = if *impaired { F::one() } else { F::zero() };
                let loss = l.max(F::zero()) - l * y + (-l.abs()).exp().ln_1p();
                Ok((loss, Array1::from_elem(1, sigmoid(l) - y)))
            }
            (Head::Regression { .. }, _) => Err(Error::MissingInput(
                "the regression head needs behavior scores".into(),
            )),
            (Head::Bce { .. }, _) => Err(Error::MissingInput(
                "the BCE head needs a diagnosis label and MoCA".into(),
            )),
        }
    }

    fn l1(h: &Array1<F>, lambda: f64) -> F {
        h.iter().map(|v| v.abs()).sum::<F>() * F::of(lambda)
    }

    pub fn loss(&self, x: ArrayView2<F>, target: &Target, lambda_sparse: f64) -> Result<F> {
        let h = self.embed(x)?;
        let out = self.head_output(h.view(), target.moca())?;
        Ok(self.data_loss(&out, target)?.0 + Self::l1(&h, lambda_sparse))
    }

    /// Loss of one example; parameter gradients are added into `grads`.
    pub fn loss_and_grad(
        &self,
        x: ArrayView2<F>,
        target: &Target,
        lambda_sparse: f64,
        grads: &mut NeuroMamba<F>,
    ) -> Result<F> {
        let cache = self.embed_cached(x)?;
        let h = &cache.h;
        let out = self.head_output(h.view(), target.moca())?;
        let (data, dout) = self.data_loss(&out, target)?;
        let loss = data + Self::l1(h, lambda_sparse);

        let mut dh: Array1<F> = h.mapv(|v| {
            if v > F::zero() {
                F::of(lambda_sparse)
            } else if v < F::zero() {
                -F::of(lambda_sparse)
            } else {
                F::zero()
            }
        });
        match (&self.head, &mut grads.head) {
            (Head::Regression { weight, .. }, Head::Regression { weight: gw, bias: gb }) => {
                for (i, d) in dout.iter().enumerate() {
                    gw.row_mut(i).scaled_add(*d, h);
                }
                *gb += &dout;
                dh += &weight.t().dot(&dout);
            }
            (Head::Bce { weight, .. }, Head::Bce { weight: gw, bias: gb }) => {
                let d = dout[0];
                let b = h.len();
                gw.slice_mut(ndarray::s![..b]).scaled_add(d, h);
                gw[b] += d * F::of(target.moca().expect("checked by head_output"));
                gb[0] += d;
                dh.scaled_add(d, &weight.slice(ndarray::s![..b]));
            }
            _ => return Err(Error::Shape("gradient buffer has a different head".into())),
        }

        let scale = F::one() / F::of(cache.t_len as f64);
        let mut dcur = Array2::from_shape_fn((cache.t_len, h.len()), |(_, b)| dh[b] * scale);
        for ((layer, lc), lg) in self
            .layers
            .iter()
            .zip(&cache.layers)
            .zip(grads.layers.iter_mut())
            .rev()
        {
            dcur = layer.backward(lc, dcur.view(), self.config.scan_mode, lg)?;
        }
        Ok(loss)
    }

    /// Mean loss over a batch and the mean gradient. Members are evaluated in
    /// parallel and reduced in batch order.
    pub fn batch_loss_and_grad(
        &self,
        batch: &[(ArrayView2<F>, &Target)],
        lambda_sparse: f64,
    ) -> Result<(F, NeuroMamba<F>)> {
        let members: Vec<(F, NeuroMamba<F>)> = batch
            .par_iter()
            .map(|(x, target)| {
                let mut g = self.zeros_like();
                let loss = self.loss_and_grad(*x, target, lambda_sparse, &mut g)?;
                Ok((loss, g))
            })
            .collect::<Result<_>>()?;
        let mut total = self.zeros_like();
        let mut loss = F::zero();
        for (l, g) in &members {
            loss += *l;
            total.add_assign(g);
        }
        let inv = F::one() / F::of(batch.len() as f64);
        total.scale(inv);
        Ok((loss * inv, total))
    }
}
