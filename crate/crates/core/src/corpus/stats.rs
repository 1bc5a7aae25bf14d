use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::sample::Sample;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PragmaCounts {
    pub with_pragma: usize,
    pub without_pragma: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClauseCounts {
    pub private: usize,
    pub reduction: usize,
}

/// Loop length in lines of canonical code. The first bucket holds loops of
/// up to 15 lines.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LengthBuckets {
    #[serde(rename = "<15")]
    pub short: usize,
    #[serde(rename = "16-50")]
    pub medium: usize,
    #[serde(rename = ">50")]
    pub long: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub total: usize,
    pub languages: BTreeMap<String, PragmaCounts>,
    pub clauses: ClauseCounts,
    pub length: LengthBuckets,
}

pub fn language_of(path: &str) -> &'static str {
    match path.rsplit_once('.').map(|(_, ext)| ext) {
        Some("c") | Some("h") => "C",
        Some("cc") | Some("cpp") | Some("cxx") | Some("hpp") => "C++",
        _ => "other",
    }
}

impl CorpusStats {
    pub fn from_samples(samples: &[Sample]) -> Self {
        let mut st = CorpusStats::default();
        for s in samples {
            st.total += 1;
            let lang = st.languages.entry(language_of(&s.path).to_string()).or_default();
            if s.label_pragma == 1 {
                lang.with_pragma += 1;
            } else {
                lang.without_pragma += 1;
            }
            st.clauses.private += s.label_private as usize;
            st.clauses.reduction += s.label_reduction as usize;
            match s.loop_code.lines().count() {
                0..=15 => st.length.short += 1,
                16..=50 => st.length.medium += 1,
                _ => st.length.long += 1,
            }
        }
        st
    }

    pub fn is_consistent(&self) -> bool {
        let with: usize = self.languages.values().map(|c| c.with_pragma).sum();
        let without: usize = self.languages.values().map(|c| c.without_pragma).sum();
        with + without == self.total
            && self.length.short + self.length.medium + self.length.long == self.total
            && self.clauses.private <= with
            && self.clauses.reduction <= with
    }

    /// Plain-text tables: per-language pragma counts, clause counts, and the
    /// loop length histogram.
    pub fn render_tables(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "(a) loops per language");
        let _ = writeln!(out, "{:<10}{:>14}{:>17}{:>10}", "language", "with pragma", "without pragma", "total");
        for (lang, c) in &self.languages {
            let _ = writeln!(
                out,
                "{:<10}{:>14}{:>17}{:>10}",
                lang,
                c.with_pragma,
                c.without_pragma,
                c.with_pragma + c.without_pragma
            );
        }
        let _ = writeln!(out);
        let _ = writeln!(out, "(b) clauses");
        let _ = writeln!(out, "{:<10}{:>10}", "private", self.clauses.private);
        let _ = writeln!(out, "{:<10}{:>10}", "reduction", self.clauses.reduction);
        let _ = writeln!(out);
        let _ = writeln!(out, "(c) loop length (lines)");
        let _ = writeln!(out, "{:<10}{:>10}", "< 15", self.length.short);
        let _ = writeln!(out, "{:<10}{:>10}", "16-50", self.length.medium);
        let _ = writeln!(out, "{:<10}{:>10}", "> 50", self.length.long);
        let _ = writeln!(out);
        let _ = writeln!(out, "total {}", self.total);
        out
    }
}
