//! Pre-norm transformer encoder over an [`EncodedInput`], with the
//! hand-written backward pass.
//!
//! Per layer:
//! ```text
//! h  = LN1(x)
//! x' = x  + drop(concat_h softmax(scale·Q_h K_hᵀ + M) V_h · Wo + bo)
//! x''= x' + drop(gelu(LN2(x') W1 + b1) W2 + b2)
//! ```
//! The `[CLS]` row of the last layer goes through a final layer norm and a
//! `d_model × 3` head; the three logits are squashed independently.

use ndarray::{s, Array1, Array2, ArrayView1, Axis, Zip};
use rand::Rng;

use crate::encode::{EncodedInput, MASKED};
use crate::scalar::Scalar;

use super::params::{Body, Layer, ModelConfig, ModelParams};
use super::ModelError;

const LN_EPS: f64 = 1e-5;

pub(crate) struct LnCache<T> {
    xhat: Array2<T>,
    rstd: Array1<T>,
}

fn layer_norm<T: Scalar>(x: &Array2<T>, g: &Array1<T>, b: &Array1<T>) -> (Array2<T>, LnCache<T>) {
    let n = T::of(x.ncols() as f64);
    let eps = T::of(LN_EPS);
    let mut xhat = x.clone();
    let mut rstd = Array1::zeros(x.nrows());
    for (mut row, r) in xhat.rows_mut().into_iter().zip(rstd.iter_mut()) {
        let mean = row.sum() / n;
        row.mapv_inplace(|v| v - mean);
        let var = row.iter().map(|&v| v * v).sum::<T>() / n;
        *r = T::one() / (var + eps).sqrt();
        let rs = *r;
        row.mapv_inplace(|v| v * rs);
    }
    let y = &xhat * g + b;
    (y, LnCache { xhat, rstd })
}

fn layer_norm_backward<T: Scalar>(
    dy: &Array2<T>,
    c: &LnCache<T>,
    g: &Array1<T>,
    dg: &mut Array1<T>,
    db: &mut Array1<T>,
) -> Array2<T> {
    *dg += &(dy * &c.xhat).sum_axis(Axis(0));
    *db += &dy.sum_axis(Axis(0));
    let n = T::of(dy.ncols() as f64);
    let mut dx = dy * g;
    for ((mut row, xh), &rs) in dx.rows_mut().into_iter().zip(c.xhat.rows()).zip(&c.rstd) {
        let sum = row.sum();
        let dot = row.iter().zip(xh).map(|(&a, &b)| a * b).sum::<T>();
        Zip::from(&mut row).and(&xh).for_each(|d, &xv| {
            *d = rs * (*d * n - sum - xv * dot) / n;
        });
    }
    dx
}

const GELU_A: f64 = 0.044715;

fn gelu<T: Scalar>(x: T) -> T {
    let c = T::of((2.0 / std::f64::consts::PI).sqrt());
    let half = T::of(0.5);
    half * x * (T::one() + (c * (x + T::of(GELU_A) * x * x * x)).tanh())
}

fn gelu_grad<T: Scalar>(x: T) -> T {
    let c = T::of((2.0 / std::f64::consts::PI).sqrt());
    let half = T::of(0.5);
    let t = (c * (x + T::of(GELU_A) * x * x * x)).tanh();
    half * (T::one() + t) + half * x * (T::one() - t * t) * c * (T::one() + T::of(3.0 * GELU_A) * x * x)
}

pub fn sigmoid<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

/// Row-wise softmax of `scores + mask`. Masked entries come out as exact
/// zeros because `exp(−1e9 − max)` underflows.
pub fn masked_softmax<T: Scalar>(scores: &Array2<T>, mask: &Array2<T>) -> Array2<T> {
    let mut a = scores + mask;
    for mut row in a.rows_mut() {
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
    a
}

fn add_row<T: Scalar>(m: &mut Array2<T>, b: &Array1<T>) {
    *m += &b.view().insert_axis(Axis(0));
}

fn dropout_mask<T: Scalar>(shape: (usize, usize), rate: f64, rng: &mut dyn rand::RngCore) -> Array2<T> {
    let keep = T::of(1.0 / (1.0 - rate));
    Array2::from_shape_fn(shape, |_| if rng.gen::<f64>() < rate { T::zero() } else { keep })
}

pub(crate) struct LayerCache<T> {
    ln1: LnCache<T>,
    h1: Array2<T>,
    q: Array2<T>,
    k: Array2<T>,
    v: Array2<T>,
    /// Attention probabilities, one `L × L` matrix per head.
    pub(crate) attn: Vec<Array2<T>>,
    o: Array2<T>,
    drop1: Option<Array2<T>>,
    ln2: LnCache<T>,
    h2: Array2<T>,
    f_pre: Array2<T>,
    f_act: Array2<T>,
    drop2: Option<Array2<T>>,
}

/// Intermediate values kept for the backward pass.
pub struct ForwardCache<T> {
    pub(crate) layers: Vec<LayerCache<T>>,
    cls_xhat: Array1<T>,
    cls_rstd: T,
    cls: Array1<T>,
    ids: Vec<u32>,
    positions: Vec<u32>,
}

impl<T: Scalar> ForwardCache<T> {
    /// Attention probabilities of `layer`, `head`.
    pub fn attention(&self, layer: usize, head: usize) -> &Array2<T> {
        &self.layers[layer].attn[head]
    }

    /// Final-layer-normed `[CLS]` state fed to the head.
    pub fn cls_state(&self) -> &Array1<T> {
        &self.cls
    }

    /// Value projection of `layer`, rows = positions.
    pub fn values(&self, layer: usize) -> &Array2<T> {
        &self.layers[layer].v
    }

    /// Attention output before the `Wo` projection.
    pub fn attention_output(&self, layer: usize) -> &Array2<T> {
        &self.layers[layer].o
    }
}

pub struct ForwardOutput<T> {
    pub logits: [T; 3],
    pub probs: [T; 3],
    pub cache: ForwardCache<T>,
}

/// Runs the encoder. With `rng` present dropout is active (training mode);
/// without it the pass is deterministic.
pub fn forward<T: Scalar>(
    params: &ModelParams<T>,
    cfg: &ModelConfig,
    input: &EncodedInput,
    rng: Option<&mut dyn rand::RngCore>,
) -> Result<ForwardOutput<T>, ModelError> {
    let mask: Array2<T> = Array2::from_shape_vec((input.len(), input.len()), input.mask.additive())
        .map_err(|e| ModelError::Shape(e.to_string()))?;
    forward_with_mask(params, cfg, &input.ids, &input.positions, &mask, rng)
}

/// Same as [`forward`] but with an explicit additive mask.
pub fn forward_with_mask<T: Scalar>(
    params: &ModelParams<T>,
    cfg: &ModelConfig,
    ids: &[u32],
    positions: &[u32],
    mask: &Array2<T>,
    mut rng: Option<&mut dyn rand::RngCore>,
) -> Result<ForwardOutput<T>, ModelError> {
    let l = ids.len();
    let d = cfg.d_model;
    if l == 0 || positions.len() != l || mask.dim() != (l, l) {
        return Err(ModelError::Shape(format!(
            "{} ids, {} positions, mask {:?}",
            l,
            positions.len(),
            mask.dim()
        )));
    }
    if l > cfg.max_len {
        return Err(ModelError::Shape(format!(
            "input length {l} exceeds max_len {}",
            cfg.max_len
        )));
    }
    if params.tok_emb.dim() != (cfg.vocab_size, d) || params.body.layers.len() != cfg.n_layers {
        return Err(ModelError::Shape("parameters do not match config".into()));
    }
    if let Some(&bad) = ids.iter().find(|&&i| i as usize >= cfg.vocab_size) {
        return Err(ModelError::Shape(format!("token id {bad} outside vocabulary")));
    }
    if let Some(&bad) = positions.iter().find(|&&p| p as usize >= cfg.max_len) {
        return Err(ModelError::Shape(format!("position {bad} outside max_len")));
    }

    let mut x = Array2::zeros((l, d));
    for (i, mut row) in x.rows_mut().into_iter().enumerate() {
        row.assign(&params.tok_emb.row(ids[i] as usize));
        row += &params.pos_emb.row(positions[i] as usize);
    }

    let scale = T::of(cfg.score_scale());
    let dh = cfg.d_head();
    let rate = cfg.dropout_rate;
    let mut caches = Vec::with_capacity(cfg.n_layers);
    for layer in &params.body.layers {
        let (h1, ln1) = layer_norm(&x, &layer.ln1_g, &layer.ln1_b);
        let mut q = h1.dot(&layer.wq);
        add_row(&mut q, &layer.bq);
        let mut k = h1.dot(&layer.wk);
        add_row(&mut k, &layer.bk);
        let mut v = h1.dot(&layer.wv);
        add_row(&mut v, &layer.bv);
        let mut o = Array2::zeros((l, d));
        let mut attn = Vec::with_capacity(cfg.n_heads);
        for h in 0..cfg.n_heads {
            let cols = s![.., h * dh..(h + 1) * dh];
            let scores = q.slice(cols).dot(&k.slice(cols).t()) * scale;
            let a = masked_softmax(&scores, mask);
            o.slice_mut(cols).assign(&a.dot(&v.slice(cols)));
            attn.push(a);
        }
        let mut branch = o.dot(&layer.wo);
        add_row(&mut branch, &layer.bo);
        let drop1 = match rng.as_deref_mut() {
            Some(r) if rate > 0.0 => Some(dropout_mask((l, d), rate, r)),
            _ => None,
        };
        if let Some(m) = &drop1 {
            branch *= m;
        }
        x += &branch;

        let (h2, ln2) = layer_norm(&x, &layer.ln2_g, &layer.ln2_b);
        let mut f_pre = h2.dot(&layer.w1);
        add_row(&mut f_pre, &layer.b1);
        let f_act = f_pre.mapv(gelu);
        let mut branch = f_act.dot(&layer.w2);
        add_row(&mut branch, &layer.b2);
        let drop2 = match rng.as_deref_mut() {
            Some(r) if rate > 0.0 => Some(dropout_mask((l, d), rate, r)),
            _ => None,
        };
        if let Some(m) = &drop2 {
            branch *= m;
        }
        x += &branch;

        caches.push(LayerCache {
            ln1,
            h1,
            q,
            k,
            v,
            attn,
            o,
            drop1,
            ln2,
            h2,
            f_pre,
            f_act,
            drop2,
        });
    }

    // final layer norm on the [CLS] row only
    let row = x.row(0);
    let n = T::of(d as f64);
    let mean = row.sum() / n;
    let centered = row.mapv(|v| v - mean);
    let var = centered.iter().map(|&v| v * v).sum::<T>() / n;
    let rstd = T::one() / (var + T::of(LN_EPS)).sqrt();
    let xhat = centered * rstd;
    let cls = &xhat * &params.body.lnf_g + &params.body.lnf_b;
    let z = cls.dot(&params.body.head_w) + &params.body.head_b;
    let logits = [z[0], z[1], z[2]];
    let probs = logits.map(sigmoid);
    Ok(ForwardOutput {
        logits,
        probs,
        cache: ForwardCache {
            layers: caches,
            cls_xhat: xhat,
            cls_rstd: rstd,
            cls,
            ids: ids.to_vec(),
            positions: positions.to_vec(),
        },
    })
}

pub const PROB_CLAMP: f64 = 1e-7;

/// Mean binary cross-entropy over the three labels, with probabilities
/// clamped to `[1e-7, 1 − 1e-7]`.
pub fn compute_loss<T: Scalar>(probs: &[T; 3], labels: &[bool; 3]) -> T {
    let lo = T::of(PROB_CLAMP);
    let hi = T::one() - lo;
    let total: T = probs
        .iter()
        .zip(labels)
        .map(|(&p, &y)| {
            let p = p.max(lo).min(hi);
            if y {
                -p.ln()
            } else {
                -(T::one() - p).ln()
            }
        })
        .sum();
    total / T::of(3.0)
}

/// `∂loss/∂logit` for [`compute_loss`] composed with the sigmoid. Zero where
/// the clamp is active, matching the clamped loss exactly.
pub fn loss_grad<T: Scalar>(probs: &[T; 3], labels: &[bool; 3]) -> [T; 3] {
    let lo = T::of(PROB_CLAMP);
    let hi = T::one() - lo;
    let third = T::of(1.0 / 3.0);
    let mut g = [T::zero(); 3];
    for i in 0..3 {
        let p = probs[i];
        if p > lo && p < hi {
            let y = if labels[i] { T::one() } else { T::zero() };
            g[i] = (p - y) * third;
        }
    }
    g
}

/// Gradient of one sample. The embedding tables are represented by the
/// gradient of the summed input embeddings so that per-sample gradients
/// stay small; [`SampleGrads::accumulate_into`] scatters them.
pub struct SampleGrads<T> {
    pub body: Body<T>,
    pub d_embed: Array2<T>,
    pub ids: Vec<u32>,
    pub positions: Vec<u32>,
}

impl<T: Scalar> SampleGrads<T> {
    pub fn accumulate_into(&self, g: &mut ModelParams<T>) {
        g.body.add_assign(&self.body);
        for (i, row) in self.d_embed.rows().into_iter().enumerate() {
            let mut t = g.tok_emb.row_mut(self.ids[i] as usize);
            t += &row;
            let mut p = g.pos_emb.row_mut(self.positions[i] as usize);
            p += &row;
        }
    }
}

fn outer_acc<T: Scalar>(acc: &mut Array2<T>, a: &Array2<T>, b: &Array2<T>) {
    // acc += aᵀ b
    ndarray::linalg::general_mat_mul(T::one(), &a.t(), b, T::one(), acc);
}

fn layer_backward<T: Scalar>(
    layer: &Layer<T>,
    c: &LayerCache<T>,
    g: &mut Layer<T>,
    dx_out: Array2<T>,
    mask_scale: T,
    n_heads: usize,
) -> Array2<T> {
    let dh = layer.wq.ncols() / n_heads;
    // feed-forward branch
    let mut d_f2 = dx_out.clone();
    if let Some(m) = &c.drop2 {
        d_f2 *= m;
    }
    outer_acc(&mut g.w2, &c.f_act, &d_f2);
    g.b2 += &d_f2.sum_axis(Axis(0));
    let mut d_f = d_f2.dot(&layer.w2.t());
    Zip::from(&mut d_f)
        .and(&c.f_pre)
        .for_each(|d, &x| *d *= gelu_grad(x));
    outer_acc(&mut g.w1, &c.h2, &d_f);
    g.b1 += &d_f.sum_axis(Axis(0));
    let d_h2 = d_f.dot(&layer.w1.t());
    let mut dx = dx_out;
    dx += &layer_norm_backward(&d_h2, &c.ln2, &layer.ln2_g, &mut g.ln2_g, &mut g.ln2_b);

    // attention branch
    let mut d_branch = dx.clone();
    if let Some(m) = &c.drop1 {
        d_branch *= m;
    }
    outer_acc(&mut g.wo, &c.o, &d_branch);
    g.bo += &d_branch.sum_axis(Axis(0));
    let d_o = d_branch.dot(&layer.wo.t());
    let mut dq = Array2::zeros(c.q.raw_dim());
    let mut dk = Array2::zeros(c.k.raw_dim());
    let mut dv = Array2::zeros(c.v.raw_dim());
    for (h, a) in c.attn.iter().enumerate() {
        let cols = s![.., h * dh..(h + 1) * dh];
        let d_oh = d_o.slice(cols);
        dv.slice_mut(cols).assign(&a.t().dot(&d_oh));
        let da = d_oh.dot(&c.v.slice(cols).t());
        // softmax backward: dS = A ⊙ (dA − rowsum(dA ⊙ A))
        let mut ds = &da * a;
        for (mut row, arow) in ds.rows_mut().into_iter().zip(a.rows()) {
            let sum = row.sum();
            Zip::from(&mut row).and(&arow).for_each(|d, &p| *d -= p * sum);
        }
        ds *= mask_scale;
        dq.slice_mut(cols).assign(&ds.dot(&c.k.slice(cols)));
        dk.slice_mut(cols).assign(&ds.t().dot(&c.q.slice(cols)));
    }
    outer_acc(&mut g.wq, &c.h1, &dq);
    outer_acc(&mut g.wk, &c.h1, &dk);
    outer_acc(&mut g.wv, &c.h1, &dv);
    g.bq += &dq.sum_axis(Axis(0));
    g.bk += &dk.sum_axis(Axis(0));
    g.bv += &dv.sum_axis(Axis(0));
    let mut d_h1 = dq.dot(&layer.wq.t());
    d_h1 += &dk.dot(&layer.wk.t());
    d_h1 += &dv.dot(&layer.wv.t());
    dx += &layer_norm_backward(&d_h1, &c.ln1, &layer.ln1_g, &mut g.ln1_g, &mut g.ln1_b);
    dx
}

/// Backpropagates `d_logits` through the cached forward pass.
pub fn backward<T: Scalar>(
    params: &ModelParams<T>,
    cfg: &ModelConfig,
    cache: &ForwardCache<T>,
    d_logits: &[T; 3],
) -> SampleGrads<T> {
    let mut g = Body::zeros(cfg);
    let dz = ArrayView1::from(&d_logits[..]);
    // head
    for (i, &zi) in cache.cls.iter().enumerate() {
        for j in 0..3 {
            g.head_w[[i, j]] += zi * dz[j];
        }
    }
    g.head_b += &dz;
    let d_cls = params.body.head_w.dot(&dz);
    // final layer norm on the CLS row
    g.lnf_g += &(&d_cls * &cache.cls_xhat);
    g.lnf_b += &d_cls;
    let dxhat = &d_cls * &params.body.lnf_g;
    let n = T::of(cfg.d_model as f64);
    let sum = dxhat.sum();
    let dot = dxhat.dot(&cache.cls_xhat);
    let d_row = Zip::from(&dxhat)
        .and(&cache.cls_xhat)
        .map_collect(|&d, &xh| cache.cls_rstd * (d * n - sum - xh * dot) / n);

    let l = cache.ids.len();
    let mut dx = Array2::zeros((l, cfg.d_model));
    dx.row_mut(0).assign(&d_row);
    let scale = T::of(cfg.score_scale());
    for (li, (layer, c)) in params.body.layers.iter().zip(&cache.layers).enumerate().rev() {
        dx = layer_backward(layer, c, &mut g.layers[li], dx, scale, cfg.n_heads);
    }
    SampleGrads {
        body: g,
        d_embed: dx,
        ids: cache.ids.clone(),
        positions: cache.positions.clone(),
    }
}

/// Forward + loss + backward for one sample.
pub fn sample_gradient<T: Scalar>(
    params: &ModelParams<T>,
    cfg: &ModelConfig,
    input: &EncodedInput,
    rng: Option<&mut dyn rand::RngCore>,
) -> Result<(T, SampleGrads<T>), ModelError> {
    let out = forward(params, cfg, input, rng)?;
    let loss = compute_loss(&out.probs, &input.labels);
    let dl = loss_grad(&out.probs, &input.labels);
    Ok((loss, backward(params, cfg, &out.cache, &dl)))
}

/// Additive mask matrix of an input.
pub fn mask_matrix<T: Scalar>(input: &EncodedInput) -> Array2<T> {
    Array2::from_shape_vec((input.len(), input.len()), input.mask.additive())
        .expect("mask is L×L")
}

/// `MASKED` in the element type.
pub fn masked_value<T: Scalar>() -> T {
    T::of(MASKED)
}
