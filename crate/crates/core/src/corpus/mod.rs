//! Labeled loop corpus: extraction from source trees, deduplication,
//! 80/10/10 splitting, statistics and JSONL storage.

mod extract;
mod normalize;
mod sample;
mod split;
mod stats;

use std::collections::HashSet;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;
use walkdir::WalkDir;

pub use extract::{
    context_code, context_statements, extract_samples, find_loops, labels_for, loop_code,
    variables_in, Extraction, LoopSite, Reject, RejectReason,
};
pub use normalize::{fnv1a64, is_variable_token, normalized_hash, normalized_tokens};
pub use sample::{Labels, Sample, Split};
pub use split::{deduplicate, split_corpus, split_sizes};
pub use stats::{language_of, ClauseCounts, CorpusStats, LengthBuckets, PragmaCounts};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {source}")]
    Json {
        path: PathBuf,
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("{path}: not valid UTF-8")]
    Encoding { path: PathBuf },
    #[error("failed to start worker pool: {0}")]
    Pool(String),
}

pub(crate) fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CorpusError + '_ {
    move |source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct BuildOptions {
    pub with_scope: bool,
    pub seed: u64,
    pub benchmarks: Option<PathBuf>,
    pub threads: usize,
}

#[derive(Debug, Clone, Default)]
pub struct CorpusBuild {
    pub samples: Vec<Sample>,
    pub rejects: Vec<Reject>,
    pub benchmark_samples: Vec<Sample>,
    pub benchmark_rejects: Vec<Reject>,
    pub stats: CorpusStats,
}

/// Source files under `root`, sorted, as (relative path with `/`, absolute).
pub fn source_files(root: &Path, skip: Option<&Path>) -> Result<Vec<(String, PathBuf)>, CorpusError> {
    let mut files = Vec::new();
    for entry in WalkDir::new(root).sort_by_file_name() {
        let entry = entry.map_err(|e| CorpusError::Io {
            path: root.to_path_buf(),
            source: e.into(),
        })?;
        let p = entry.path();
        if skip.is_some_and(|s| p.starts_with(s)) {
            continue;
        }
        if entry.file_type().is_file() && p.extension().is_some_and(|e| e == "c") {
            let rel = p
                .strip_prefix(root)
                .unwrap_or(p)
                .components()
                .map(|c| c.as_os_str().to_string_lossy().into_owned())
                .collect::<Vec<_>>()
                .join("/");
            files.push((rel, p.to_path_buf()));
        }
    }
    files.sort();
    Ok(files)
}

/// Extracts samples from every `.c` file under `root`. Files are processed
/// on `threads` workers; results are ordered by (path, token offset).
pub fn extract_tree(
    root: &Path,
    with_scope: bool,
    threads: usize,
    skip: Option<&Path>,
) -> Result<Extraction, CorpusError> {
    let files = source_files(root, skip)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| CorpusError::Pool(e.to_string()))?;
    let per_file: Vec<Result<Extraction, CorpusError>> = pool.install(|| {
        files
            .par_iter()
            .map(|(rel, abs)| {
                let bytes = fs::read(abs).map_err(io_err(abs))?;
                let text = String::from_utf8(bytes)
                    .map_err(|_| CorpusError::Encoding { path: abs.clone() })?;
                Ok(extract_samples(rel, &text, with_scope))
            })
            .collect()
    });
    let mut all = Extraction::default();
    for ex in per_file {
        let ex = ex?;
        all.samples.extend(ex.samples);
        all.rejects.extend(ex.rejects);
    }
    all.samples
        .sort_by(|a, b| (&a.path, a.offset).cmp(&(&b.path, b.offset)));
    Ok(all)
}

pub fn build_corpus(src_dir: &Path, opts: &BuildOptions) -> Result<CorpusBuild, CorpusError> {
    let mut build = CorpusBuild::default();
    let mut holdout = HashSet::new();
    if let Some(bench) = &opts.benchmarks {
        let ex = extract_tree(bench, opts.with_scope, opts.threads, None)?;
        let mut bench_samples = deduplicate(ex.samples);
        for s in &mut bench_samples {
            s.split = Split::Test;
            holdout.insert(s.id.clone());
        }
        build.benchmark_samples = bench_samples;
        build.benchmark_rejects = ex.rejects;
    }
    let ex = extract_tree(src_dir, opts.with_scope, opts.threads, opts.benchmarks.as_deref())?;
    build.rejects = ex.rejects;
    build.samples = split_corpus(deduplicate(ex.samples), opts.seed, &holdout);
    build.stats = CorpusStats::from_samples(&build.samples);
    Ok(build)
}

pub fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), CorpusError> {
    let file = fs::File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    for row in rows {
        let line = serde_json::to_string(row).map_err(|source| CorpusError::Json {
            path: path.to_path_buf(),
            line: 0,
            source,
        })?;
        writeln!(w, "{line}").map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CorpusError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|source| CorpusError::Json {
        path: path.to_path_buf(),
        line: 0,
        source,
    })?;
    text.push('\n');
    fs::write(path, text).map_err(io_err(path))
}

/// Reads samples from a JSONL file, or from `corpus.jsonl` inside a directory.
pub fn read_samples(path: &Path) -> Result<Vec<Sample>, CorpusError> {
    let path = if path.is_dir() {
        path.join("corpus.jsonl")
    } else {
        path.to_path_buf()
    };
    let file = fs::File::open(&path).map_err(io_err(&path))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(&path))?;
        if line.trim().is_empty() {
            continue;
        }
        let mut s: Sample = serde_json::from_str(&line).map_err(|source| CorpusError::Json {
            path: path.clone(),
            line: i + 1,
            source,
        })?;
        s.offset = i;
        out.push(s);
    }
    Ok(out)
}

/// Writes `corpus.jsonl`, `rejects.jsonl`, `stats.json` and, when
/// benchmarks were given, `benchmarks.jsonl` and `benchmark_rejects.jsonl`.
pub fn write_corpus(build: &CorpusBuild, out_dir: &Path) -> Result<(), CorpusError> {
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    write_jsonl(&out_dir.join("corpus.jsonl"), &build.samples)?;
    write_jsonl(&out_dir.join("rejects.jsonl"), &build.rejects)?;
    write_json(&out_dir.join("stats.json"), &build.stats)?;
    if !build.benchmark_samples.is_empty() || !build.benchmark_rejects.is_empty() {
        write_jsonl(&out_dir.join("benchmarks.jsonl"), &build.benchmark_samples)?;
        write_jsonl(&out_dir.join("benchmark_rejects.jsonl"), &build.benchmark_rejects)?;
    }
    Ok(())
}
