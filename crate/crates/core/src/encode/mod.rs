//! Model input: vocabulary ids for `[CLS] code [SEP] dfg-nodes`, position
//! indices and the graph-guided attention mask.

mod mask;
mod vocab;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Sample;
use crate::syntax::{tokenize, SyntaxError};

pub use mask::{build_attention_mask, AttentionMask, MASKED};
pub use vocab::{VocabFile, Vocabulary, CLS, PAD, RESERVED, SEP, UNK};

#[derive(Debug, Error)]
pub enum EncodeError {
    #[error("cannot build a vocabulary from an empty corpus")]
    EmptyCorpus,
    #[error("vocabulary ids are not dense or reserved tokens are missing")]
    BadVocabulary,
    #[error("DFG node {node} aligned to code token {index}, but only {n_code} code tokens")]
    AlignmentOutOfRange {
        node: usize,
        index: usize,
        n_code: usize,
    },
    #[error("DFG edge {edge:?} outside {n_dfg} nodes")]
    EdgeOutOfRange { edge: (usize, usize), n_dfg: usize },
    #[error("sample {id}: {source}")]
    Parse {
        id: String,
        #[source]
        source: SyntaxError,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncodeOptions {
    pub max_code: usize,
    pub max_dfg: usize,
}

impl Default for EncodeOptions {
    fn default() -> Self {
        EncodeOptions {
            max_code: 256,
            max_dfg: 32,
        }
    }
}

impl EncodeOptions {
    /// Longest sequence these options can produce.
    pub fn max_len(&self) -> usize {
        self.max_code + self.max_dfg + 2
    }
}

pub const DEFAULT_MIN_FREQ: usize = 2;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedInput {
    pub ids: Vec<u32>,
    pub positions: Vec<u32>,
    pub mask: AttentionMask,
    pub n_code: usize,
    /// Code-token index (0-based, before the `[CLS]` shift) of each DFG slot.
    pub dfg_alignment: Vec<usize>,
    /// Surviving DFG edges as `(to, from)` node indices.
    pub edges: Vec<(usize, usize)>,
    pub labels: [bool; 3],
}

impl EncodedInput {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn n_dfg(&self) -> usize {
        self.dfg_alignment.len()
    }

    pub fn sep_slot(&self) -> usize {
        self.n_code + 1
    }

    pub fn dfg_slot(&self, node: usize) -> usize {
        self.n_code + 2 + node
    }
}

/// Truncation counters written to `encode_stats.json`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncodeStats {
    pub samples: usize,
    pub code_truncated: usize,
    pub code_tokens_dropped: usize,
    pub dfg_truncated: usize,
    pub dfg_nodes_dropped: usize,
    pub dfg_edges_dropped: usize,
    pub max_len_seen: usize,
}

impl EncodeStats {
    pub fn merge(&mut self, other: &EncodeStats) {
        self.samples += other.samples;
        self.code_truncated += other.code_truncated;
        self.code_tokens_dropped += other.code_tokens_dropped;
        self.dfg_truncated += other.dfg_truncated;
        self.dfg_nodes_dropped += other.dfg_nodes_dropped;
        self.dfg_edges_dropped += other.dfg_edges_dropped;
        self.max_len_seen = self.max_len_seen.max(other.max_len_seen);
    }
}

/// Encodes one sample. Code is truncated from the tail; DFG nodes whose
/// token was cut, and nodes beyond `max_dfg`, are dropped along with their
/// edges.
pub fn encode_sample(
    s: &Sample,
    v: &Vocabulary,
    opts: &EncodeOptions,
) -> Result<(EncodedInput, EncodeStats), EncodeError> {
    let tokens = tokenize(&s.code_text()).map_err(|source| EncodeError::Parse {
        id: s.id.clone(),
        source,
    })?;
    let mut stats = EncodeStats {
        samples: 1,
        ..Default::default()
    };
    let n_code = tokens.len().min(opts.max_code);
    if tokens.len() > n_code {
        stats.code_truncated = 1;
        stats.code_tokens_dropped = tokens.len() - n_code;
    }

    // old node index -> new node index
    let mut remap = vec![None; s.dfg.nodes.len()];
    let mut kept: Vec<(&str, usize)> = Vec::new();
    for (k, (name, align)) in s.dfg.nodes.iter().enumerate() {
        if *align < n_code && kept.len() < opts.max_dfg {
            remap[k] = Some(kept.len());
            kept.push((name, *align));
        }
    }
    if kept.len() < s.dfg.nodes.len() {
        stats.dfg_truncated = 1;
        stats.dfg_nodes_dropped = s.dfg.nodes.len() - kept.len();
    }
    let mut edges = Vec::with_capacity(s.dfg.edges.len());
    for &(to, from) in &s.dfg.edges {
        match (remap.get(to).copied().flatten(), remap.get(from).copied().flatten()) {
            (Some(a), Some(b)) => edges.push((a, b)),
            _ => stats.dfg_edges_dropped += 1,
        }
    }

    let mut ids = Vec::with_capacity(n_code + kept.len() + 2);
    let mut positions = Vec::with_capacity(ids.capacity());
    ids.push(CLS);
    positions.push(0);
    for (i, t) in tokens[..n_code].iter().enumerate() {
        ids.push(v.id(&t.lexeme));
        positions.push(i as u32 + 1);
    }
    ids.push(SEP);
    positions.push(0);
    for (name, _) in &kept {
        ids.push(v.id(name));
        positions.push(0);
    }
    let dfg_alignment: Vec<usize> = kept.iter().map(|(_, a)| *a).collect();
    let mask = build_attention_mask(n_code, &dfg_alignment, &edges)?;
    stats.max_len_seen = ids.len();
    let labels = s.labels().as_array();
    Ok((
        EncodedInput {
            ids,
            positions,
            mask,
            n_code,
            dfg_alignment,
            edges,
            labels,
        },
        stats,
    ))
}

/// Encodes many samples, in order, accumulating stats.
pub fn encode_all<'a>(
    samples: impl IntoIterator<Item = &'a Sample>,
    v: &Vocabulary,
    opts: &EncodeOptions,
) -> Result<(Vec<EncodedInput>, EncodeStats), EncodeError> {
    let mut out = Vec::new();
    let mut stats = EncodeStats::default();
    for s in samples {
        let (e, st) = encode_sample(s, v, opts)?;
        stats.merge(&st);
        out.push(e);
    }
    Ok((out, stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Labels;

    fn sample(code: &str) -> Sample {
        Sample::new("t.c", code.to_string(), String::new(), None, Labels::default()).unwrap()
    }

    #[test]
    fn assignment_fixture() {
        let s = sample("x = y;");
        let v = Vocabulary::build([&s], 1).unwrap();
        let (e, _) = encode_sample(&s, &v, &EncodeOptions::default()).unwrap();
        assert_eq!(e.len(), 8);
        assert_eq!(e.positions, [0, 1, 2, 3, 4, 0, 0, 0]);
        // hand-built: CLS x = y ; SEP d(x) d(y)
        let z = true;
        let o = false;
        #[rustfmt::skip]
        let expect = [
            [z, z, z, z, z, z, z, z],
            [z, z, z, z, z, z, z, o],
            [z, z, z, z, z, z, o, o],
            [z, z, z, z, z, z, o, z],
            [z, z, z, z, z, z, o, o],
            [z, z, z, z, z, z, z, z],
            [z, z, o, o, o, z, z, z],
            [z, o, o, z, o, z, z, z],
        ];
        for (i, row) in expect.iter().enumerate() {
            for (j, &want) in row.iter().enumerate() {
                assert_eq!(e.mask.allowed(i, j), want, "({i},{j})");
            }
        }
    }

    #[test]
    fn empty_dfg() {
        let s = sample("f();");
        let v = Vocabulary::build([&s], 1).unwrap();
        let (e, _) = encode_sample(&s, &v, &EncodeOptions::default()).unwrap();
        assert_eq!(e.len(), 1 + 4 + 1);
        assert!(e.mask.additive::<f32>().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn truncation() {
        // 100 statements of 3 tokens each = 300 code tokens
        let code: String = (0..100).map(|_| "x ++;\n").collect();
        let s = sample(code.trim_end());
        let v = Vocabulary::build([&s], 1).unwrap();
        let (e, st) = encode_sample(&s, &v, &EncodeOptions::default()).unwrap();
        assert_eq!(e.n_code, 256);
        assert!(e.dfg_alignment.iter().all(|&a| a < 256));
        assert_eq!(e.n_dfg(), 32);
        assert_eq!(st.code_tokens_dropped, 44);
        assert_eq!(st.dfg_nodes_dropped, 100 - 32);
        assert!(e.edges.iter().all(|&(a, b)| a < 32 && b < 32));
    }
}
