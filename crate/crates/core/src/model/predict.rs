use serde::{Deserialize, Serialize};

use crate::corpus::{context_code, find_loops, loop_code, Labels, Sample};
use crate::encode::{encode_sample, EncodeOptions, Vocabulary};
use crate::scalar::Scalar;
use crate::syntax::parse_source;

use super::forward::forward;
use super::params::{ModelConfig, ModelParams};
use super::ModelError;

pub const THRESHOLD: f64 = 0.5;

/// Thresholded output for one loop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub probs: [f64; 3],
    pub labels: [bool; 3],
    /// Clause labels were forced to 0 because the pragma label is 0.
    pub gated: bool,
}

impl Prediction {
    pub fn from_probs(probs: [f64; 3], gate: bool) -> Self {
        let raw = probs.map(|p| p >= THRESHOLD);
        let gated = gate && !raw[0];
        let labels = if gated { [false; 3] } else { raw };
        Prediction {
            probs,
            labels,
            gated,
        }
    }

    /// Labels before gating.
    pub fn raw_labels(&self) -> [bool; 3] {
        self.probs.map(|p| p >= THRESHOLD)
    }
}

pub fn predict_sample<T: Scalar>(
    params: &ModelParams<T>,
    cfg: &ModelConfig,
    vocab: &Vocabulary,
    opts: &EncodeOptions,
    sample: &Sample,
    gate: bool,
) -> Result<Prediction, ModelError> {
    let (input, _) = encode_sample(sample, vocab, opts)?;
    let out = forward(params, cfg, &input, None)?;
    Ok(Prediction::from_probs(out.probs.map(|p| p.f64()), gate))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoopPrediction {
    pub line: u32,
    pub loop_code: String,
    pub prediction: Prediction,
}

/// Predicts every `for` loop in a C source file, in program order.
pub fn predict_source<T: Scalar>(
    params: &ModelParams<T>,
    cfg: &ModelConfig,
    vocab: &Vocabulary,
    opts: &EncodeOptions,
    with_scope: bool,
    source: &str,
    gate: bool,
) -> Result<Vec<LoopPrediction>, ModelError> {
    let (unit, tokens) = parse_source(source)?;
    let mut out = Vec::new();
    for site in find_loops(&unit) {
        let code = loop_code(&site);
        let context = if with_scope {
            context_code(&site)
        } else {
            String::new()
        };
        let sample = Sample::new("<input>", code.clone(), context, None, Labels::default())?;
        let prediction = predict_sample(params, cfg, vocab, opts, &sample, gate)?;
        out.push(LoopPrediction {
            line: tokens.get(site.node.span.start).map_or(0, |t| t.line),
            loop_code: code,
            prediction,
        });
    }
    Ok(out)
}
