use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::corpus::Sample;
use crate::syntax::tokenize;

use super::EncodeError;

pub const PAD: u32 = 0;
pub const CLS: u32 = 1;
pub const SEP: u32 = 2;
pub const UNK: u32 = 3;
pub const RESERVED: [&str; 4] = ["[PAD]", "[CLS]", "[SEP]", "[UNK]"];

/// Token-to-id map. Ids are dense; the four reserved tokens take 0..4 and
/// the rest follow in (descending frequency, lexeme) order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    ids: HashMap<String, u32>,
    tokens: Vec<String>,
    pub min_freq: usize,
}

impl Vocabulary {
    pub fn build<'a>(
        samples: impl IntoIterator<Item = &'a Sample>,
        min_freq: usize,
    ) -> Result<Vocabulary, EncodeError> {
        let mut freq: HashMap<String, usize> = HashMap::new();
        let mut n = 0;
        for s in samples {
            n += 1;
            let tokens = tokenize(&s.code_text()).map_err(|e| EncodeError::Parse {
                id: s.id.clone(),
                source: e,
            })?;
            for t in tokens {
                *freq.entry(t.lexeme).or_default() += 1;
            }
            for name in s.dfg.names() {
                *freq.entry(name.to_string()).or_default() += 1;
            }
        }
        if n == 0 {
            return Err(EncodeError::EmptyCorpus);
        }
        let mut entries: Vec<(String, usize)> = freq
            .into_iter()
            .filter(|(tok, c)| *c >= min_freq.max(1) && !RESERVED.contains(&tok.as_str()))
            .collect();
        entries.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let tokens: Vec<String> = RESERVED
            .iter()
            .map(|s| s.to_string())
            .chain(entries.into_iter().map(|(t, _)| t))
            .collect();
        Ok(Vocabulary::from_tokens(tokens, min_freq))
    }

    fn from_tokens(tokens: Vec<String>, min_freq: usize) -> Vocabulary {
        let ids = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        Vocabulary {
            ids,
            tokens,
            min_freq,
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> u32 {
        self.ids.get(token).copied().unwrap_or(UNK)
    }

    pub fn get(&self, token: &str) -> Option<u32> {
        self.ids.get(token).copied()
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    /// Serialized form for `vocab.json`: token -> id, ordered by id.
    pub fn to_json(&self) -> VocabFile {
        VocabFile {
            min_freq: self.min_freq,
            tokens: self
                .tokens
                .iter()
                .enumerate()
                .map(|(i, t)| (t.clone(), i as u32))
                .collect(),
        }
    }

    pub fn from_json(file: VocabFile) -> Result<Vocabulary, EncodeError> {
        let mut by_id: Vec<(u32, String)> = file.tokens.into_iter().map(|(t, i)| (i, t)).collect();
        by_id.sort();
        let dense = by_id.iter().enumerate().all(|(i, (id, _))| *id as usize == i);
        let reserved_ok = RESERVED
            .iter()
            .enumerate()
            .all(|(i, r)| by_id.get(i).is_some_and(|(_, t)| t == r));
        if !dense || !reserved_ok {
            return Err(EncodeError::BadVocabulary);
        }
        Ok(Vocabulary::from_tokens(
            by_id.into_iter().map(|(_, t)| t).collect(),
            file.min_freq,
        ))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VocabFile {
    pub min_freq: usize,
    /// BTreeMap keeps the JSON stable; ids are recovered from the values.
    pub tokens: BTreeMap<String, u32>,
}
