//! Corpus statistics and sequence-length statistics.

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::encode::EncodedPair;
use crate::model::TaggedExample;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum StatsError {
    #[error("dataset is empty")]
    EmptyDataset,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DatasetStats {
    pub n_examples: u64,
    pub tokens_per_example: f64,
    pub spans_per_example: f64,
    pub pct_tokens_tagged: f64,
    pub n_tag_classes: usize,
    /// Shannon entropy in bits of the span-tag distribution.
    pub tag_entropy: f64,
}

/// Streaming, mergeable counts behind [`DatasetStats`].
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StatsAccumulator {
    n_examples: u64,
    n_tokens: u64,
    n_tagged_tokens: u64,
    spans_per_tag: BTreeMap<String, u64>,
}

impl StatsAccumulator {
    pub fn push(&mut self, example: &TaggedExample) {
        self.n_examples += 1;
        self.n_tokens += example.len() as u64;
        for span in example.spans() {
            self.n_tagged_tokens += span.width() as u64;
            *self.spans_per_tag.entry(span.tag.to_string()).or_default() += 1;
        }
    }

    pub fn merge(&mut self, other: &StatsAccumulator) {
        self.n_examples += other.n_examples;
        self.n_tokens += other.n_tokens;
        self.n_tagged_tokens += other.n_tagged_tokens;
        for (tag, n) in &other.spans_per_tag {
            *self.spans_per_tag.entry(tag.clone()).or_default() += n;
        }
    }

    pub fn finish(&self) -> Result<DatasetStats, StatsError> {
        if self.n_examples == 0 {
            return Err(StatsError::EmptyDataset);
        }
        let n = self.n_examples as f64;
        let n_spans: u64 = self.spans_per_tag.values().sum();
        let pct = if self.n_tokens == 0 {
            0.0
        } else {
            100.0 * self.n_tagged_tokens as f64 / self.n_tokens as f64
        };
        Ok(DatasetStats {
            n_examples: self.n_examples,
            tokens_per_example: self.n_tokens as f64 / n,
            spans_per_example: n_spans as f64 / n,
            pct_tokens_tagged: pct,
            n_tag_classes: self.spans_per_tag.len(),
            tag_entropy: entropy_bits(self.spans_per_tag.values().copied()),
        })
    }
}

/// Entropy in bits of the distribution given by `counts`.
pub fn entropy_bits(counts: impl IntoIterator<Item = u64>) -> f64 {
    let counts: Vec<u64> = counts.into_iter().filter(|&c| c > 0).collect();
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return 0.0;
    }
    let total = total as f64;
    let h: f64 = counts
        .iter()
        .map(|&c| {
            let p = c as f64 / total;
            -p * p.log2()
        })
        .sum();
    // a single class gives -1 * log2(1) = -0.0
    h.max(0.0)
}

pub fn dataset_stats<'a>(
    examples: impl IntoIterator<Item = &'a TaggedExample>,
) -> Result<DatasetStats, StatsError> {
    let mut acc = StatsAccumulator::default();
    for ex in examples {
        acc.push(ex);
    }
    acc.finish()
}

/// Counts model tokens in a string.
pub trait LengthTokenizer: Send + Sync {
    fn name(&self) -> &str;
    fn count(&self, text: &str) -> usize;
}

/// Maximal runs of non-whitespace.
#[derive(Debug, Clone, Copy, Default)]
pub struct WhitespaceTokenizer;

impl LengthTokenizer for WhitespaceTokenizer {
    fn name(&self) -> &str {
        "whitespace"
    }

    fn count(&self, text: &str) -> usize {
        text.split_whitespace().count()
    }
}

/// Byte-fallback upper bound: every UTF-8 byte of every word is a token.
#[derive(Debug, Clone, Copy, Default)]
pub struct ByteTokenizer;

impl LengthTokenizer for ByteTokenizer {
    fn name(&self) -> &str {
        "bytes"
    }

    fn count(&self, text: &str) -> usize {
        text.split_whitespace().map(str::len).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LengthSummary {
    pub mean: f64,
    pub p99: usize,
    pub max: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LengthStats {
    pub tokenizer: String,
    pub n: usize,
    pub input: LengthSummary,
    pub target: LengthSummary,
}

/// Smallest value such that at least 99% of the observations are `<=` it.
pub fn nearest_rank_p99(sorted: &[usize]) -> usize {
    percentile_nearest_rank(sorted, 99)
}

/// Nearest-rank percentile of an ascending slice; panics on empty input.
pub fn percentile_nearest_rank(sorted: &[usize], pct: u32) -> usize {
    assert!(!sorted.is_empty(), "percentile of an empty sample");
    let n = sorted.len();
    let rank = (pct as usize * n).div_ceil(100).max(1);
    sorted[rank - 1]
}

fn summarize(mut lengths: Vec<usize>) -> LengthSummary {
    lengths.sort_unstable();
    let total: usize = lengths.iter().sum();
    LengthSummary {
        mean: total as f64 / lengths.len() as f64,
        p99: nearest_rank_p99(&lengths),
        max: *lengths.last().expect("non-empty"),
    }
}

pub fn length_stats(
    pairs: &[EncodedPair],
    tok: &dyn LengthTokenizer,
) -> Result<LengthStats, StatsError> {
    if pairs.is_empty() {
        return Err(StatsError::EmptyDataset);
    }
    let input = pairs.iter().map(|p| tok.count(&p.input)).collect();
    let target = pairs.iter().map(|p| tok.count(&p.target)).collect();
    Ok(LengthStats {
        tokenizer: tok.name().to_string(),
        n: pairs.len(),
        input: summarize(input),
        target: summarize(target),
    })
}
