use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::augment::{augment_corpus, epoch_seed, AugMode};
use crate::corpus::Sample;
use crate::encode::{encode_all, EncodeOptions, EncodedInput, Vocabulary};
use crate::scalar::Scalar;

use super::forward::{compute_loss, forward, sample_gradient, SampleGrads};
use super::params::{ModelConfig, ModelParams};
use super::ModelError;

const SHUFFLE_SALT: u64 = 0x5348_5546;
const DROPOUT_SALT: u64 = 0x4452_4f50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainOptions {
    pub epochs: u32,
    pub aug: AugMode,
    pub lr: f64,
    pub batch_size: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Worker threads for per-sample gradients. Results do not depend on it.
    pub threads: usize,
    pub encode: EncodeOptions,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            epochs: 10,
            aug: AugMode::Curriculum,
            lr: 1e-3,
            batch_size: 32,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            threads: 1,
            encode: EncodeOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: u32,
    pub rename_fraction: f64,
    pub train_loss: f64,
    pub valid_loss: f64,
    /// Mean of the three per-label accuracies.
    pub valid_accuracy: f64,
    pub valid_label_accuracy: [f64; 3],
}

/// Adam with bias correction.
#[derive(Debug, Clone)]
pub struct Adam<T> {
    m: ModelParams<T>,
    v: ModelParams<T>,
    t: i32,
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
}

impl<T: Scalar> Adam<T> {
    pub fn new(cfg: &ModelConfig, opts: &TrainOptions) -> Self {
        Adam {
            m: ModelParams::zeros(cfg),
            v: ModelParams::zeros(cfg),
            t: 0,
            lr: opts.lr,
            beta1: opts.beta1,
            beta2: opts.beta2,
            eps: opts.eps,
        }
    }

    pub fn step(&mut self, params: &mut ModelParams<T>, grads: &ModelParams<T>) {
        self.t += 1;
        let b1 = T::of(self.beta1);
        let b2 = T::of(self.beta2);
        let one = T::one();
        let c1 = T::of(1.0 - self.beta1.powi(self.t));
        let c2 = T::of(1.0 - self.beta2.powi(self.t));
        let lr = T::of(self.lr);
        let eps = T::of(self.eps);
        let gs = grads.tensors();
        for (((p, m), v), (_, g)) in params
            .tensors_mut()
            .into_iter()
            .zip(self.m.tensors_mut())
            .zip(self.v.tensors_mut())
            .zip(gs)
        {
            for i in 0..p.len() {
                m[i] = b1 * m[i] + (one - b1) * g[i];
                v[i] = b2 * v[i] + (one - b2) * g[i] * g[i];
                let mh = m[i] / c1;
                let vh = v[i] / c2;
                p[i] -= lr * mh / (vh.sqrt() + eps);
            }
        }
    }
}

/// Parameters plus optimizer state; one [`Trainer::step`] per minibatch.
pub struct Trainer<T> {
    pub params: ModelParams<T>,
    pub cfg: ModelConfig,
    adam: Adam<T>,
    grads: ModelParams<T>,
    pool: Option<rayon::ThreadPool>,
}

impl<T: Scalar> Trainer<T> {
    pub fn new(cfg: &ModelConfig, opts: &TrainOptions) -> Result<Self, ModelError> {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let params = ModelParams::init(cfg, &mut rng)?;
        Self::from_params(params, cfg, opts)
    }

    pub fn from_params(
        params: ModelParams<T>,
        cfg: &ModelConfig,
        opts: &TrainOptions,
    ) -> Result<Self, ModelError> {
        cfg.validate()?;
        let pool = if opts.threads > 1 {
            Some(
                rayon::ThreadPoolBuilder::new()
                    .num_threads(opts.threads)
                    .build()
                    .map_err(|e| ModelError::Config(e.to_string()))?,
            )
        } else {
            None
        };
        Ok(Trainer {
            params,
            cfg: cfg.clone(),
            adam: Adam::new(cfg, opts),
            grads: ModelParams::zeros(cfg),
            pool,
        })
    }

    /// One Adam update on the mean loss of `batch`. `dropout_seeds` gives one
    /// seed per sample; `None` trains without dropout. Returns the mean loss.
    pub fn step(&mut self, batch: &[&EncodedInput], dropout_seeds: Option<&[u64]>) -> Result<f64, ModelError> {
        if batch.is_empty() {
            return Ok(0.0);
        }
        let params = &self.params;
        let cfg = &self.cfg;
        let one = |i: usize| -> Result<(T, SampleGrads<T>), ModelError> {
            match dropout_seeds {
                Some(seeds) => {
                    let mut rng = ChaCha8Rng::seed_from_u64(seeds[i]);
                    sample_gradient(params, cfg, batch[i], Some(&mut rng))
                }
                None => sample_gradient(params, cfg, batch[i], None),
            }
        };
        let results: Vec<Result<(T, SampleGrads<T>), ModelError>> = match &self.pool {
            Some(pool) => pool.install(|| (0..batch.len()).into_par_iter().map(one).collect()),
            None => (0..batch.len()).map(one).collect(),
        };
        // reduce in sample order regardless of how the work was scheduled
        self.grads.fill_zero();
        let mut loss = 0.0;
        for r in results {
            let (l, g) = r?;
            loss += l.f64();
            g.accumulate_into(&mut self.grads);
        }
        self.grads.scale(T::of(1.0 / batch.len() as f64));
        let loss = loss / batch.len() as f64;
        if !loss.is_finite() {
            return Err(ModelError::Diverged {
                epoch: 0,
                step: self.adam.t as usize + 1,
                loss,
            });
        }
        self.adam.step(&mut self.params, &self.grads);
        Ok(loss)
    }
}

/// Mean loss and per-label accuracy at threshold 0.5, dropout off.
pub fn evaluate_inputs<T: Scalar>(
    params: &ModelParams<T>,
    cfg: &ModelConfig,
    inputs: &[EncodedInput],
) -> Result<(f64, [f64; 3]), ModelError> {
    if inputs.is_empty() {
        return Err(ModelError::EmptySplit("evaluation"));
    }
    let mut loss = 0.0;
    let mut correct = [0usize; 3];
    for input in inputs {
        let out = forward(params, cfg, input, None)?;
        loss += compute_loss(&out.probs, &input.labels).f64();
        for k in 0..3 {
            if (out.probs[k].f64() >= 0.5) == input.labels[k] {
                correct[k] += 1;
            }
        }
    }
    let n = inputs.len() as f64;
    Ok((loss / n, correct.map(|c| c as f64 / n)))
}

/// Trains a fresh model. Each epoch renames variables in the training set
/// according to `opts.aug`, shuffles, and runs minibatch Adam; the history
/// gets one record per epoch, passed to `on_epoch` as it is produced.
pub fn train<T: Scalar>(
    train_set: &[Sample],
    valid_set: &[Sample],
    vocab: &Vocabulary,
    cfg: &ModelConfig,
    opts: &TrainOptions,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<(ModelParams<T>, Vec<EpochRecord>), ModelError> {
    if train_set.is_empty() {
        return Err(ModelError::EmptySplit("train"));
    }
    if valid_set.is_empty() {
        return Err(ModelError::EmptySplit("valid"));
    }
    if cfg.vocab_size != vocab.len() {
        return Err(ModelError::Config(format!(
            "config vocab_size {} but vocabulary has {} entries",
            cfg.vocab_size,
            vocab.len()
        )));
    }
    if cfg.max_len < opts.encode.max_len() {
        return Err(ModelError::Config(format!(
            "max_len {} shorter than encoded inputs ({})",
            cfg.max_len,
            opts.encode.max_len()
        )));
    }
    let (valid, _) = encode_all(valid_set, vocab, &opts.encode)?;
    let mut trainer = Trainer::<T>::new(cfg, opts)?;
    let mut history = Vec::new();
    let batch_size = opts.batch_size.max(1);
    let mut step = 0usize;
    for epoch in 1..=opts.epochs {
        let fraction = opts.aug.fraction(epoch)?;
        let epoch_samples = if fraction > 0.0 {
            augment_corpus(train_set, opts.aug, epoch, cfg.seed)?
        } else {
            train_set.to_vec()
        };
        let (inputs, _) = encode_all(&epoch_samples, vocab, &opts.encode)?;
        let mut order: Vec<usize> = (0..inputs.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(epoch_seed(
            cfg.seed ^ SHUFFLE_SALT,
            epoch,
            0,
        )));
        let mut total = 0.0;
        for (b, chunk) in order.chunks(batch_size).enumerate() {
            let batch: Vec<&EncodedInput> = chunk.iter().map(|&i| &inputs[i]).collect();
            let seeds: Vec<u64> = (0..chunk.len())
                .map(|j| epoch_seed(cfg.seed ^ DROPOUT_SALT, epoch, b * batch_size + j))
                .collect();
            step += 1;
            let loss = trainer.step(&batch, Some(&seeds)).map_err(|e| match e {
                ModelError::Diverged { loss, .. } => ModelError::Diverged { epoch, step, loss },
                e => e,
            })?;
            total += loss * chunk.len() as f64;
        }
        let (valid_loss, acc) = evaluate_inputs(&trainer.params, cfg, &valid)?;
        if !valid_loss.is_finite() || !trainer.params.all_finite() {
            return Err(ModelError::Diverged {
                epoch,
                step,
                loss: valid_loss,
            });
        }
        let rec = EpochRecord {
            epoch,
            rename_fraction: fraction,
            train_loss: total / inputs.len() as f64,
            valid_loss,
            valid_accuracy: acc.iter().sum::<f64>() / 3.0,
            valid_label_accuracy: acc,
        };
        on_epoch(&rec);
        history.push(rec);
    }
    Ok((trainer.params, history))
}
