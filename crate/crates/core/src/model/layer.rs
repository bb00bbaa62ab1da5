use ndarray::{Array1, Array2, ArrayView2, Axis};

use super::block::{BlockCache, BlockConfig, MambaBlock};
use super::params::{join, Params};
use crate::error::{Error, Result};
use crate::real::Real;
use crate::rng::Rng;
use crate::ssm::ScanMode;

const RMS_EPS: f64 = 1e-6;

/// Bidirectional differential layer:
/// `out = lambda2 * rmsnorm(lambda1 * fwd(F) - flip(bwd(flip(F)))) + F`.
#[derive(Debug, Clone, PartialEq)]
pub struct MambaPlusLayer<F> {
    pub forward_block: MambaBlock<F>,
    pub backward_block: MambaBlock<F>,
    pub lambda1: Array1<F>,
    pub lambda2: Array1<F>,
    pub gain: Array1<F>,
}

impl<F: Real> Params<F> for MambaPlusLayer<F> {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(String, &[usize], &[F])) {
        self.forward_block.visit(&join(prefix, "forward"), f);
        self.backward_block.visit(&join(prefix, "backward"), f);
        for (name, v) in [("lambda1", &self.lambda1), ("lambda2", &self.lambda2), ("gain", &self.gain)] {
            f(join(prefix, name), v.shape(), v.as_slice().expect("standard layout"));
        }
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(String, &[usize], &mut [F])) {
        self.forward_block.visit_mut(&join(prefix, "forward"), f);
        self.backward_block.visit_mut(&join(prefix, "backward"), f);
        for (name, v) in [
            ("lambda1", &mut self.lambda1),
            ("lambda2", &mut self.lambda2),
            ("gain", &mut self.gain),
        ] {
            let shape = v.shape().to_vec();
            f(join(prefix, name), &shape, v.as_slice_mut().expect("standard layout"));
        }
    }
}

#[derive(Debug, Clone)]
pub struct LayerCache<F> {
    fwd: BlockCache<F>,
    bwd: BlockCache<F>,
    ff: Array2<F>,
    diff: Array2<F>,
    /// Per-timestep RMS of `diff`.
    rms: Array1<F>,
    normed: Array2<F>,
}

/// Divide each row by `sqrt(mean(row^2) + eps)`; returns the rows and the
/// divisors.
pub fn rms_normalize<F: Real>(x: ArrayView2<F>) -> (Array2<F>, Array1<F>) {
    let b = F::of(x.ncols() as f64);
    let rms = x.map_axis(Axis(1), |row| {
        (row.iter().map(|v| *v * *v).sum::<F>() / b + F::of(RMS_EPS)).sqrt()
    });
    (&x / &rms.view().insert_axis(Axis(1)), rms)
}

fn flip<F: Real>(x: ArrayView2<F>) -> Array2<F> {
    let mut out = x.to_owned();
    out.invert_axis(Axis(0));
    out.as_standard_layout().to_owned()
}

impl<F: Real> MambaPlusLayer<F> {
    pub fn init(config: &BlockConfig, rng: &mut Rng) -> Self {
        let b = config.model_dim;
        MambaPlusLayer {
            forward_block: MambaBlock::init(config, rng),
            backward_block: MambaBlock::init(config, rng),
            lambda1: Array1::ones(b),
            lambda2: Array1::ones(b),
            gain: Array1::ones(b),
        }
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        z.fill_zero();
        z
    }

    pub fn forward(
        &self,
        x: ArrayView2<F>,
        mode: ScanMode,
        keep: bool,
    ) -> Result<(Array2<F>, Option<LayerCache<F>>)> {
        let b = self.lambda1.len();
        if x.ncols() != b {
            return Err(Error::Shape(format!("layer expects {b} channels, got {}", x.ncols())));
        }
        let (ff, fwd) = self.forward_block.forward(x, mode, keep)?;
        let (fb_rev, bwd) = self.backward_block.forward(flip(x).view(), mode, keep)?;
        let fb = flip(fb_rev.view());
        let diff = &ff * &self.lambda1 - &fb;
        let (normed, rms) = rms_normalize(diff.view());
        let out = &normed * &self.gain * &self.lambda2 + x;
        let cache = keep.then(|| LayerCache {
            fwd: fwd.expect("kept"),
            bwd: bwd.expect("kept"),
            ff,
            diff,
            rms,
            normed,
        });
        Ok((out, cache))
    }

    pub fn backward(
        &self,
        cache: &LayerCache<F>,
        dout: ArrayView2<F>,
        mode: ScanMode,
        grads: &mut MambaPlusLayer<F>,
    ) -> Result<Array2<F>> {
        let b = F::of(self.lambda1.len() as f64);
        let scaled = &cache.normed * &self.gain;
        grads.lambda2 += &(&dout * &scaled).sum_axis(Axis(0));
        let dscaled = &dout * &self.lambda2;
        grads.gain += &(&dscaled * &cache.normed).sum_axis(Axis(0));
        let dnormed = &dscaled * &self.gain;

        // RMSNorm backward, per timestep.
        let mut ddiff = Array2::zeros(cache.diff.dim());
        for (t, mut row) in ddiff.outer_iter_mut().enumerate() {
            let r = cache.rms[t];
            let d = cache.diff.row(t);
            let g = dnormed.row(t);
            let dot: F = g.iter().zip(d.iter()).map(|(a, b)| *a * *b).sum();
            let coef = dot / (b * r * r * r);
            for ((o, gi), di) in row.iter_mut().zip(g.iter()).zip(d.iter()) {
                *o = *gi / r - *di * coef;
            }
        }
        grads.lambda1 += &(&ddiff * &cache.ff).sum_axis(Axis(0));
        let dff = &ddiff * &self.lambda1;
        let dfb_rev = flip(ddiff.mapv(|v| -v).view());

        let mut dx = dout.to_owned();
        dx += &self
            .forward_block
            .backward(&cache.fwd, dff.view(), mode, &mut grads.forward_block)?;
        let dx_rev = self.backward_block.backward(
            &cache.bwd,
            dfb_rev.view(),
            mode,
            &mut grads.backward_block,
        )?;
        dx += &flip(dx_rev.view());
        Ok(dx)
    }
}
