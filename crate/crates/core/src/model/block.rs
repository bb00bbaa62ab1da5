use ndarray::{concatenate, s, Array1, Array2, ArrayView2, Axis};
use rand::Rng as _;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use super::params::impl_params;
use crate::error::{Error, Result};
use crate::real::{sigmoid, silu, silu_grad, softplus, softplus_inv, Real};
use crate::rng::Rng;
use crate::ssm::{scan_backward, selective_scan, ScanMode, ScanOutput, SsmParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockConfig {
    pub model_dim: usize,
    pub state_size: usize,
    pub expand: usize,
    pub conv_width: usize,
    pub delta_rank: usize,
}

impl BlockConfig {
    pub fn inner_dim(&self) -> usize {
        self.expand * self.model_dim
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("model_dim", self.model_dim),
            ("state_size", self.state_size),
            ("expand", self.expand),
            ("conv_width", self.conv_width),
            ("delta_rank", self.delta_rank),
        ];
        for (name, v) in fields {
            if v == 0 {
                return Err(Error::Invalid(format!("{name} must be positive")));
            }
        }
        Ok(())
    }
}

/// One Mamba block: gated selective SSM between two linear projections.
///
/// Shapes, with `B` model channels, `E = expand * B`, conv width `K`,
/// delta rank `R` and state size `L`:
/// `in_w` B x 2E, `conv_w` E x K, `x_proj` E x (R + 2L), `dt_w` R x E,
/// `a_log` E x L, `out_w` E x B.
#[derive(Debug, Clone, PartialEq)]
pub struct MambaBlock<F> {
    pub in_w: Array2<F>,
    pub in_b: Array1<F>,
    pub conv_w: Array2<F>,
    pub conv_b: Array1<F>,
    pub x_proj: Array2<F>,
    pub dt_w: Array2<F>,
    pub dt_b: Array1<F>,
    pub a_log: Array2<F>,
    pub out_w: Array2<F>,
    pub out_b: Array1<F>,
}

impl_params!(MambaBlock {
    in_w, in_b, conv_w, conv_b, x_proj, dt_w, dt_b, a_log, out_w, out_b
});

/// Forward intermediates kept for the backward pass.
#[derive(Debug, Clone)]
pub struct BlockCache<F> {
    x: Array2<F>,
    xi: Array2<F>,
    z: Array2<F>,
    conv: Array2<F>,
    hidden: Array2<F>,
    dt_low: Array2<F>,
    b_t: Array2<F>,
    c_t: Array2<F>,
    dt_pre: Array2<F>,
    delta: Array2<F>,
    a: Array2<F>,
    scan: ScanOutput<F>,
    gate: Array2<F>,
    gated: Array2<F>,
}

pub(crate) fn uniform<F: Real>(rng: &mut Rng, shape: (usize, usize), bound: f64) -> Array2<F> {
    let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
    Array2::from_shape_fn(shape, |_| F::of(dist.sample(rng)))
}

impl<F: Real> MambaBlock<F> {
    pub fn init(config: &BlockConfig, rng: &mut Rng) -> Self {
        let b = config.model_dim;
        let e = config.inner_dim();
        let k = config.conv_width;
        let r = config.delta_rank;
        let l = config.state_size;
        let (lo, hi) = (0.001f64.ln(), 0.1f64.ln());
        let dt_b = Array1::from_shape_fn(e, |_| {
            F::of(softplus_inv(rng.random_range(lo..hi).exp()))
        });
        MambaBlock {
            in_w: uniform(rng, (b, 2 * e), 1.0 / (b as f64).sqrt()),
            in_b: Array1::zeros(2 * e),
            conv_w: uniform(rng, (e, k), 1.0 / (k as f64).sqrt()),
            conv_b: uniform(rng, (e, 1), 1.0 / (k as f64).sqrt()).remove_axis(Axis(1)),
            x_proj: uniform(rng, (e, r + 2 * l), 1.0 / (e as f64).sqrt()),
            dt_w: uniform(rng, (r, e), 1.0 / (r as f64).sqrt()),
            dt_b,
            a_log: Array2::from_shape_fn((e, l), |(_, n)| F::of(((n + 1) as f64).ln())),
            out_w: uniform(rng, (e, b), 1.0 / (e as f64).sqrt()),
            out_b: Array1::zeros(b),
        }
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        super::Params::fill_zero(&mut z);
        z
    }

    pub fn model_dim(&self) -> usize {
        self.in_w.nrows()
    }

    fn inner_dim(&self) -> usize {
        self.conv_w.nrows()
    }

    fn state_size(&self) -> usize {
        self.a_log.ncols()
    }

    fn delta_rank(&self) -> usize {
        self.dt_w.nrows()
    }

    /// Diagonal state matrix `A = -exp(a_log)`.
    pub fn a_diag(&self) -> Array2<F> {
        self.a_log.mapv(|v| -v.exp())
    }

    pub fn forward(
        &self,
        x: ArrayView2<F>,
        mode: ScanMode,
        keep: bool,
    ) -> Result<(Array2<F>, Option<BlockCache<F>>)> {
        let (t_len, b) = x.dim();
        if b != self.model_dim() {
            return Err(Error::Shape(format!(
                "block expects {} channels, got {b}",
                self.model_dim()
            )));
        }
        let e = self.inner_dim();
        let r = self.delta_rank();
        let l = self.state_size();
        let k_w = self.conv_w.ncols();

        let xz = x.dot(&self.in_w) + &self.in_b;
        let xi = xz.slice(s![.., ..e]).to_owned();
        let z = xz.slice(s![.., e..]).to_owned();

        // Causal depthwise convolution; tap k sees time t - (K - 1) + k.
        let mut conv = Array2::from_shape_fn((t_len, e), |(_, c)| self.conv_b[c]);
        for t in 0..t_len {
            for k in 0..k_w {
                let Some(src) = (t + k).checked_sub(k_w - 1) else {
                    continue;
                };
                for c in 0..e {
                    conv[[t, c]] += self.conv_w[[c, k]] * xi[[src, c]];
                }
            }
        }
        let hidden = conv.mapv(silu);

        let proj = hidden.dot(&self.x_proj);
        let dt_low = proj.slice(s![.., ..r]).to_owned();
        let b_t = proj.slice(s![.., r..r + l]).to_owned();
        let c_t = proj.slice(s![.., r + l..]).to_owned();
        let dt_pre = dt_low.dot(&self.dt_w) + &self.dt_b;
        let delta = dt_pre.mapv(softplus);
        let a = self.a_diag();

        let scan = selective_scan(
            SsmParams {
                a_diag: a.view(),
                delta: delta.view(),
                b_in: b_t.view(),
                c_out: c_t.view(),
            },
            hidden.view(),
            mode,
            keep,
        )?;
        let gate = z.mapv(silu);
        let gated = &scan.y * &gate;
        let out = gated.dot(&self.out_w) + &self.out_b;
        let cache = keep.then(|| BlockCache {
            x: x.to_owned(),
            xi,
            z,
            conv,
            hidden,
            dt_low,
            b_t,
            c_t,
            dt_pre,
            delta,
            a,
            scan,
            gate,
            gated,
        });
        Ok((out, cache))
    }

    /// Accumulate parameter gradients into `grads` and return `dL/dx`.
    pub fn backward(
        &self,
        cache: &BlockCache<F>,
        dout: ArrayView2<F>,
        mode: ScanMode,
        grads: &mut MambaBlock<F>,
    ) -> Result<Array2<F>> {
        let t_len = cache.x.nrows();
        let e = self.inner_dim();
        let k_w = self.conv_w.ncols();

        grads.out_w += &cache.gated.t().dot(&dout);
        grads.out_b += &dout.sum_axis(Axis(0));
        let dgated = dout.dot(&self.out_w.t());
        let dy = &dgated * &cache.gate;
        let mut dz = &dgated * &cache.scan.y;
        ndarray::Zip::from(&mut dz)
            .and(&cache.z)
            .for_each(|d, &z| *d *= silu_grad(z));

        let sg = scan_backward(
            SsmParams {
                a_diag: cache.a.view(),
                delta: cache.delta.view(),
                b_in: cache.b_t.view(),
                c_out: cache.c_t.view(),
            },
            cache.hidden.view(),
            &cache.scan,
            dy.view(),
            mode,
        )?;
        grads.a_log += &(&sg.da * &cache.a);
        let mut ddt_pre = sg.ddelta;
        ndarray::Zip::from(&mut ddt_pre)
            .and(&cache.dt_pre)
            .for_each(|d, &p| *d *= sigmoid(p));
        grads.dt_w += &cache.dt_low.t().dot(&ddt_pre);
        grads.dt_b += &ddt_pre.sum_axis(Axis(0));
        let ddt_low = ddt_pre.dot(&self.dt_w.t());
        let dproj = concatenate![Axis(1), ddt_low, sg.db, sg.dc];
        grads.x_proj += &cache.hidden.t().dot(&dproj);
        let mut dconv = sg.dx + dproj.dot(&self.x_proj.t());
        ndarray::Zip::from(&mut dconv)
            .and(&cache.conv)
            .for_each(|d, &c| *d *= silu_grad(c));

        grads.conv_b += &dconv.sum_axis(Axis(0));
        let mut dxi = Array2::zeros((t_len, e));
        for t in 0..t_len {
            for k in 0..k_w {
                let Some(src) = (t + k).checked_sub(k_w - 1) else {
                    continue;
                };
                for c in 0..e {
                    grads.conv_w[[c, k]] += dconv[[t, c]] * cache.xi[[src, c]];
                    dxi[[src, c]] += dconv[[t, c]] * self.conv_w[[c, k]];
                }
            }
        }
        let dxz = concatenate![Axis(1), dxi, dz];
        grads.in_w += &cache.x.t().dot(&dxz);
        grads.in_b += &dxz.sum_axis(Axis(0));
        Ok(dxz.dot(&self.in_w.t()))
    }
}
