use serde::{Deserialize, Serialize};

use crate::dfg::{build_dfg, SerializedDfg};
use crate::syntax::{parse_statements, SyntaxError};

use super::normalize::normalized_hash;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Valid,
    Test,
    None,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Valid => "valid",
            Split::Test => "test",
            Split::None => "none",
        }
    }
}

/// The three targets: does the loop carry a worksharing pragma, and does
/// that pragma need `private` / `reduction`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Labels {
    pub pragma: bool,
    pub private: bool,
    pub reduction: bool,
}

impl Labels {
    pub fn new(pragma: bool, private: bool, reduction: bool) -> Self {
        Labels {
            pragma,
            private,
            reduction,
        }
    }

    pub fn as_array(self) -> [bool; 3] {
        [self.pragma, self.private, self.reduction]
    }

    pub fn from_array(a: [bool; 3]) -> Self {
        Labels::new(a[0], a[1], a[2])
    }

    /// Clause labels only make sense on a pragma-positive loop.
    pub fn is_consistent(self) -> bool {
        self.pragma || (!self.private && !self.reduction)
    }
}

/// One labeled loop.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sample {
    pub id: String,
    pub path: String,
    pub loop_code: String,
    pub context_code: String,
    pub pragma_raw: Option<String>,
    pub label_pragma: u8,
    pub label_private: u8,
    pub label_reduction: u8,
    pub dfg: SerializedDfg,
    pub split: Split,
    /// Token offset of the loop in its source file, used for ordering.
    #[serde(skip)]
    pub offset: usize,
}

impl Sample {
    /// Builds a sample from rendered code, computing the id and the DFG.
    pub fn new(
        path: impl Into<String>,
        loop_code: String,
        context_code: String,
        pragma_raw: Option<String>,
        labels: Labels,
    ) -> Result<Sample, SyntaxError> {
        let mut s = Sample {
            id: normalized_hash(&loop_code)?,
            path: path.into(),
            loop_code,
            context_code,
            pragma_raw,
            label_pragma: labels.pragma as u8,
            label_private: labels.private as u8,
            label_reduction: labels.reduction as u8,
            dfg: SerializedDfg::default(),
            split: Split::None,
            offset: 0,
        };
        s.rebuild_dfg()?;
        Ok(s)
    }

    pub fn labels(&self) -> Labels {
        Labels::new(
            self.label_pragma == 1,
            self.label_private == 1,
            self.label_reduction == 1,
        )
    }

    /// The code the model sees: context statements (if any) followed by the
    /// loop. DFG token indices refer to the tokens of this text.
    pub fn code_text(&self) -> String {
        if self.context_code.is_empty() {
            self.loop_code.clone()
        } else {
            format!("{}\n{}", self.context_code, self.loop_code)
        }
    }

    pub fn rebuild_dfg(&mut self) -> Result<(), SyntaxError> {
        let (block, tokens) = parse_statements(&self.code_text())?;
        self.dfg = build_dfg(&block, &tokens).serialize();
        Ok(())
    }
}
