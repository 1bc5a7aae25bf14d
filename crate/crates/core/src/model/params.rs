use ndarray::{Array1, Array2};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

use super::ModelError;

/// Divisor applied to `QKᵀ` before the mask is added.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttentionScale {
    /// `√d_head`, the usual transformer scaling.
    #[default]
    SqrtDHead,
    /// `d_head`, read literally from `QK/d`.
    DHead,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub d_model: usize,
    pub n_heads: usize,
    pub n_layers: usize,
    pub d_ff: usize,
    pub max_len: usize,
    pub dropout_rate: f64,
    pub vocab_size: usize,
    pub seed: u64,
    #[serde(default)]
    pub scale: AttentionScale,
}

impl ModelConfig {
    pub fn new(vocab_size: usize, max_len: usize, seed: u64) -> Self {
        ModelConfig {
            d_model: 64,
            n_heads: 4,
            n_layers: 2,
            d_ff: 256,
            max_len,
            dropout_rate: 0.1,
            vocab_size,
            seed,
            scale: AttentionScale::SqrtDHead,
        }
    }

    /// Tiny dimensions for gradient checks and quick tests.
    pub fn small(vocab_size: usize, max_len: usize, seed: u64) -> Self {
        ModelConfig {
            d_model: 8,
            n_heads: 2,
            n_layers: 2,
            d_ff: 16,
            dropout_rate: 0.0,
            ..ModelConfig::new(vocab_size, max_len, seed)
        }
    }

    pub fn d_head(&self) -> usize {
        self.d_model / self.n_heads
    }

    pub fn score_scale(&self) -> f64 {
        let dh = self.d_head() as f64;
        match self.scale {
            AttentionScale::SqrtDHead => 1.0 / dh.sqrt(),
            AttentionScale::DHead => 1.0 / dh,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let dims = [
            ("d_model", self.d_model),
            ("n_heads", self.n_heads),
            ("n_layers", self.n_layers),
            ("d_ff", self.d_ff),
            ("max_len", self.max_len),
            ("vocab_size", self.vocab_size),
        ];
        if let Some((name, _)) = dims.iter().find(|(_, v)| *v == 0) {
            return Err(ModelError::Config(format!("{name} must be at least 1")));
        }
        if self.d_model % self.n_heads != 0 {
            return Err(ModelError::Config(format!(
                "d_model {} not divisible by n_heads {}",
                self.d_model, self.n_heads
            )));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(ModelError::Config(format!(
                "dropout rate {} outside [0, 1)",
                self.dropout_rate
            )));
        }
        Ok(())
    }
}

/// Weights of one pre-norm encoder block.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer<T> {
    pub ln1_g: Array1<T>,
    pub ln1_b: Array1<T>,
    pub wq: Array2<T>,
    pub bq: Array1<T>,
    pub wk: Array2<T>,
    pub bk: Array1<T>,
    pub wv: Array2<T>,
    pub bv: Array1<T>,
    pub wo: Array2<T>,
    pub bo: Array1<T>,
    pub ln2_g: Array1<T>,
    pub ln2_b: Array1<T>,
    pub w1: Array2<T>,
    pub b1: Array1<T>,
    pub w2: Array2<T>,
    pub b2: Array1<T>,
}

pub const LAYER_TENSORS: [&str; 16] = [
    "ln1_g", "ln1_b", "wq", "bq", "wk", "bk", "wv", "bv", "wo", "bo", "ln2_g", "ln2_b", "w1", "b1",
    "w2", "b2",
];

fn flat<T, D: ndarray::Dimension>(a: &ndarray::Array<T, D>) -> &[T] {
    a.as_slice().expect("parameters are contiguous")
}

fn flat_mut<T, D: ndarray::Dimension>(a: &mut ndarray::Array<T, D>) -> &mut [T] {
    a.as_slice_mut().expect("parameters are contiguous")
}

impl<T: Scalar> Layer<T> {
    fn zeros(d: usize, ff: usize) -> Self {
        let v = |n| Array1::zeros(n);
        let m = |r, c| Array2::zeros((r, c));
        Layer {
            ln1_g: v(d),
            ln1_b: v(d),
            wq: m(d, d),
            bq: v(d),
            wk: m(d, d),
            bk: v(d),
            wv: m(d, d),
            bv: v(d),
            wo: m(d, d),
            bo: v(d),
            ln2_g: v(d),
            ln2_b: v(d),
            w1: m(d, ff),
            b1: v(ff),
            w2: m(ff, d),
            b2: v(d),
        }
    }

    pub fn tensors(&self) -> [&[T]; 16] {
        [
            flat(&self.ln1_g),
            flat(&self.ln1_b),
            flat(&self.wq),
            flat(&self.bq),
            flat(&self.wk),
            flat(&self.bk),
            flat(&self.wv),
            flat(&self.bv),
            flat(&self.wo),
            flat(&self.bo),
            flat(&self.ln2_g),
            flat(&self.ln2_b),
            flat(&self.w1),
            flat(&self.b1),
            flat(&self.w2),
            flat(&self.b2),
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut [T]; 16] {
        [
            flat_mut(&mut self.ln1_g),
            flat_mut(&mut self.ln1_b),
            flat_mut(&mut self.wq),
            flat_mut(&mut self.bq),
            flat_mut(&mut self.wk),
            flat_mut(&mut self.bk),
            flat_mut(&mut self.wv),
            flat_mut(&mut self.bv),
            flat_mut(&mut self.wo),
            flat_mut(&mut self.bo),
            flat_mut(&mut self.ln2_g),
            flat_mut(&mut self.ln2_b),
            flat_mut(&mut self.w1),
            flat_mut(&mut self.b1),
            flat_mut(&mut self.w2),
            flat_mut(&mut self.b2),
        ]
    }
}

/// Everything above the embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct Body<T> {
    pub layers: Vec<Layer<T>>,
    pub lnf_g: Array1<T>,
    pub lnf_b: Array1<T>,
    pub head_w: Array2<T>,
    pub head_b: Array1<T>,
}

impl<T: Scalar> Body<T> {
    pub fn zeros(cfg: &ModelConfig) -> Self {
        Body {
            layers: (0..cfg.n_layers)
                .map(|_| Layer::zeros(cfg.d_model, cfg.d_ff))
                .collect(),
            lnf_g: Array1::zeros(cfg.d_model),
            lnf_b: Array1::zeros(cfg.d_model),
            head_w: Array2::zeros((cfg.d_model, 3)),
            head_b: Array1::zeros(3),
        }
    }

    fn tensors(&self) -> Vec<(String, &[T])> {
        let mut out = Vec::new();
        for (l, layer) in self.layers.iter().enumerate() {
            for (name, t) in LAYER_TENSORS.iter().zip(layer.tensors()) {
                out.push((format!("layer{l}.{name}"), t));
            }
        }
        out.push(("lnf_g".into(), flat(&self.lnf_g)));
        out.push(("lnf_b".into(), flat(&self.lnf_b)));
        out.push(("head_w".into(), flat(&self.head_w)));
        out.push(("head_b".into(), flat(&self.head_b)));
        out
    }

    fn tensors_mut(&mut self) -> Vec<&mut [T]> {
        let mut out: Vec<&mut [T]> = Vec::new();
        for layer in &mut self.layers {
            out.extend(layer.tensors_mut());
        }
        out.push(flat_mut(&mut self.lnf_g));
        out.push(flat_mut(&mut self.lnf_b));
        out.push(flat_mut(&mut self.head_w));
        out.push(flat_mut(&mut self.head_b));
        out
    }

    pub fn add_assign(&mut self, other: &Body<T>) {
        for (a, b) in self.tensors_mut().into_iter().zip(other.tensors()) {
            for (x, y) in a.iter_mut().zip(b.1) {
                *x += *y;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<T> {
    pub tok_emb: Array2<T>,
    pub pos_emb: Array2<T>,
    pub body: Body<T>,
}

impl<T: Scalar> ModelParams<T> {
    pub fn zeros(cfg: &ModelConfig) -> Self {
        ModelParams {
            tok_emb: Array2::zeros((cfg.vocab_size, cfg.d_model)),
            pos_emb: Array2::zeros((cfg.max_len, cfg.d_model)),
            body: Body::zeros(cfg),
        }
    }

    /// Embeddings ~ N(0, 0.02²); projections ~ N(0, 1/fan_in); layer-norm
    /// gains 1; biases 0.
    pub fn init(cfg: &ModelConfig, rng: &mut ChaCha8Rng) -> Result<Self, ModelError> {
        cfg.validate()?;
        let mut p = Self::zeros(cfg);
        let fill = |a: &mut [T], std: f64, rng: &mut ChaCha8Rng| {
            let dist = Normal::new(0.0, std).expect("positive std");
            for x in a.iter_mut() {
                *x = T::of(dist.sample(rng));
            }
        };
        fill(flat_mut(&mut p.tok_emb), 0.02, rng);
        fill(flat_mut(&mut p.pos_emb), 0.02, rng);
        let d = cfg.d_model as f64;
        let ff = cfg.d_ff as f64;
        for layer in &mut p.body.layers {
            layer.ln1_g.fill(T::one());
            layer.ln2_g.fill(T::one());
            fill(flat_mut(&mut layer.wq), d.powf(-0.5), rng);
            fill(flat_mut(&mut layer.wk), d.powf(-0.5), rng);
            fill(flat_mut(&mut layer.wv), d.powf(-0.5), rng);
            fill(flat_mut(&mut layer.wo), d.powf(-0.5), rng);
            fill(flat_mut(&mut layer.w1), d.powf(-0.5), rng);
            fill(flat_mut(&mut layer.w2), ff.powf(-0.5), rng);
        }
        p.body.lnf_g.fill(T::one());
        fill(flat_mut(&mut p.body.head_w), d.powf(-0.5), rng);
        Ok(p)
    }

    /// Replaces every parameter with an independent draw, including gains
    /// and biases. Used by gradient checks so no group sits at a special
    /// value.
    pub fn randomize(&mut self, std: f64, rng: &mut impl Rng) {
        let dist = Normal::new(0.0, std).expect("positive std");
        for t in self.tensors_mut() {
            for x in t.iter_mut() {
                *x = T::of(dist.sample(rng));
            }
        }
    }

    /// Named parameter groups in declaration order.
    pub fn tensors(&self) -> Vec<(String, &[T])> {
        let mut out = vec![
            ("tok_emb".to_string(), flat(&self.tok_emb)),
            ("pos_emb".to_string(), flat(&self.pos_emb)),
        ];
        out.extend(self.body.tensors());
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [T]> {
        let mut out = vec![flat_mut(&mut self.tok_emb), flat_mut(&mut self.pos_emb)];
        out.extend(self.body.tensors_mut());
        out
    }

    pub fn n_params(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.tensors()
            .iter()
            .all(|(_, t)| t.iter().all(|x| x.is_finite()))
    }

    pub fn fill_zero(&mut self) {
        for t in self.tensors_mut() {
            t.fill(T::zero());
        }
    }

    pub fn scale(&mut self, k: T) {
        for t in self.tensors_mut() {
            for x in t.iter_mut() {
                *x *= k;
            }
        }
    }

    /// Converts element type, e.g. to check an `f32` model in `f64`.
    pub fn cast<U: Scalar>(&self) -> ModelParams<U> {
        let c1 = |a: &Array1<T>| a.mapv(|x| U::of(x.f64()));
        let c2 = |a: &Array2<T>| a.mapv(|x| U::of(x.f64()));
        ModelParams {
            tok_emb: c2(&self.tok_emb),
            pos_emb: c2(&self.pos_emb),
            body: Body {
                layers: self
                    .body
                    .layers
                    .iter()
                    .map(|l| Layer {
                        ln1_g: c1(&l.ln1_g),
                        ln1_b: c1(&l.ln1_b),
                        wq: c2(&l.wq),
                        bq: c1(&l.bq),
                        wk: c2(&l.wk),
                        bk: c1(&l.bk),
                        wv: c2(&l.wv),
                        bv: c1(&l.bv),
                        wo: c2(&l.wo),
                        bo: c1(&l.bo),
                        ln2_g: c1(&l.ln2_g),
                        ln2_b: c1(&l.ln2_b),
                        w1: c2(&l.w1),
                        b1: c1(&l.b1),
                        w2: c2(&l.w2),
                        b2: c1(&l.b2),
                    })
                    .collect(),
                lnf_g: c1(&self.body.lnf_g),
                lnf_b: c1(&self.body.lnf_b),
                head_w: c2(&self.body.head_w),
                head_b: c1(&self.body.head_b),
            },
        }
    }
}
