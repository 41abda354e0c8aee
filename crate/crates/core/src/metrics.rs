//! Perfect-match, CoNLL-style span F1, hit@K and hallucination rate.
//!
//! All aggregation is done on integer counts; floating point only appears
//! when a [`MetricsReport`] is produced, so partial tallies can be merged in
//! any order without changing the result.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::decode::{HallucinationReport, Prediction};
use crate::model::{Phrase, Span};

/// True iff the two span sets are equal.
pub fn perfect_metric(gold: &[Span], pred: &[Span]) -> bool {
    let mut g: Vec<&Span> = gold.iter().collect();
    let mut p: Vec<&Span> = pred.iter().collect();
    g.sort();
    g.dedup();
    p.sort();
    p.dedup();
    g == p
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Counts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl Counts {
    pub fn merge(&mut self, other: Counts) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.fn_ += other.fn_;
    }

    /// Precision; with no predictions it is 1 if there was nothing to find
    /// and 0 otherwise.
    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp, self.fn_ == 0)
    }

    /// Recall; with no gold items it is 1 if nothing was predicted and 0
    /// otherwise.
    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_, self.fp == 0)
    }

    pub fn f1(&self) -> f64 {
        let (p, r) = (self.precision(), self.recall());
        if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        }
    }
}

fn ratio(num: u64, den: u64, empty_is_perfect: bool) -> f64 {
    if den == 0 {
        if empty_is_perfect {
            1.0
        } else {
            0.0
        }
    } else {
        num as f64 / den as f64
    }
}

/// Per-tag exact-match counts.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SpanTally {
    per_tag: BTreeMap<String, Counts>,
}

impl SpanTally {
    /// Adds one example's exact-match counts over `(start, end, tag)`.
    pub fn add(&mut self, gold: &[Span], pred: &[Span]) {
        let mut gold: Vec<&Span> = gold.iter().collect();
        let mut pred: Vec<&Span> = pred.iter().collect();
        gold.sort();
        gold.dedup();
        pred.sort();
        pred.dedup();
        let (mut i, mut j) = (0, 0);
        while i < gold.len() || j < pred.len() {
            match (gold.get(i), pred.get(j)) {
                (Some(g), Some(p)) if g == p => {
                    self.entry(g.tag.as_str()).tp += 1;
                    i += 1;
                    j += 1;
                }
                (Some(g), Some(p)) if g < p => {
                    self.entry(g.tag.as_str()).fn_ += 1;
                    i += 1;
                }
                (Some(g), None) => {
                    self.entry(g.tag.as_str()).fn_ += 1;
                    i += 1;
                }
                (_, Some(p)) => {
                    self.entry(p.tag.as_str()).fp += 1;
                    j += 1;
                }
                (None, None) => unreachable!(),
            }
        }
    }

    /// Adds one example's counts over a phrase multiset: identical
    /// `(tag, text)` items are matched one-to-one.
    pub fn add_phrases(&mut self, gold: &[Phrase], pred: &[Phrase]) {
        let mut remaining: BTreeMap<&Phrase, usize> = BTreeMap::new();
        for g in gold {
            *remaining.entry(g).or_default() += 1;
        }
        for p in pred {
            match remaining.get_mut(p) {
                Some(c) if *c > 0 => {
                    *c -= 1;
                    self.entry(p.tag.as_str()).tp += 1;
                }
                _ => self.entry(p.tag.as_str()).fp += 1,
            }
        }
        for (g, left) in remaining {
            self.entry(g.tag.as_str()).fn_ += left as u64;
        }
    }

    /// Counts a prediction that cannot be credited, e.g. a span whose words
    /// were not copied faithfully.
    pub fn add_false_positive(&mut self, tag: &str) {
        self.entry(tag).fp += 1;
    }

    fn entry(&mut self, tag: &str) -> &mut Counts {
        if !self.per_tag.contains_key(tag) {
            self.per_tag.insert(tag.to_string(), Counts::default());
        }
        self.per_tag.get_mut(tag).expect("just inserted")
    }

    pub fn merge(&mut self, other: &SpanTally) {
        for (tag, c) in &other.per_tag {
            self.entry(tag).merge(*c);
        }
    }

    pub fn micro(&self) -> Counts {
        let mut total = Counts::default();
        for c in self.per_tag.values() {
            total.merge(*c);
        }
        total
    }

    /// Unweighted mean F1 over tags that occur in gold. Falls back to micro
    /// F1 when gold holds no spans at all.
    pub fn macro_f1(&self) -> f64 {
        let f1s: Vec<f64> = self
            .per_tag
            .values()
            .filter(|c| c.tp + c.fn_ > 0)
            .map(Counts::f1)
            .collect();
        if f1s.is_empty() {
            self.micro().f1()
        } else {
            f1s.iter().sum::<f64>() / f1s.len() as f64
        }
    }

    pub fn per_tag(&self) -> &BTreeMap<String, Counts> {
        &self.per_tag
    }
}

/// Scores a list of `(gold, pred)` span pairs.
pub fn span_f1<'a, I>(pairs: I) -> SpanTally
where
    I: IntoIterator<Item = (&'a [Span], &'a [Span])>,
{
    let mut tally = SpanTally::default();
    for (gold, pred) in pairs {
        tally.add(gold, pred);
    }
    tally
}

/// Scores a list of `(gold, pred)` phrase multisets.
pub fn extractive_f1<'a, I>(pairs: I) -> SpanTally
where
    I: IntoIterator<Item = (&'a [Phrase], &'a [Phrase])>,
{
    let mut tally = SpanTally::default();
    for (gold, pred) in pairs {
        tally.add_phrases(gold, pred);
    }
    tally
}

/// True iff one of the first `k` candidates matches gold exactly. Fewer than
/// `k` candidates is fine; all of them are checked.
pub fn hit_at_k(gold: &Prediction, candidates: &[Prediction], k: usize) -> bool {
    candidates.iter().take(k).any(|c| c.matches(gold))
}

/// Fraction of flagged reports; 0 for an empty list.
pub fn hallucination_rate(reports: &[HallucinationReport]) -> f64 {
    if reports.is_empty() {
        log::warn!("hallucination rate over zero reports is reported as 0");
        return 0.0;
    }
    let flagged = reports.iter().filter(|r| r.flagged).count();
    flagged as f64 / reports.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TagScore {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub f1: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HitAtK {
    pub k: usize,
    pub value: f64,
}

/// Corpus-level scores. Serialized as the versioned JSON report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub schema: u32,
    pub n_examples: u64,
    pub perfect: f64,
    pub precision: f64,
    pub recall: f64,
    pub micro_f1: f64,
    pub macro_f1: f64,
    pub hallucination_rate: f64,
    pub hit_at_k: Option<HitAtK>,
    pub per_tag: BTreeMap<String, TagScore>,
}

pub const REPORT_SCHEMA: u32 = 1;

impl MetricsReport {
    /// `key<TAB>value` lines, per-tag rows last.
    pub fn to_kv_text(&self) -> String {
        let mut out = String::new();
        let mut line = |k: &str, v: String| {
            out.push_str(k);
            out.push('\t');
            out.push_str(&v);
            out.push('\n');
        };
        line("schema", self.schema.to_string());
        line("n_examples", self.n_examples.to_string());
        line("perfect", format!("{:.6}", self.perfect));
        line("precision", format!("{:.6}", self.precision));
        line("recall", format!("{:.6}", self.recall));
        line("micro_f1", format!("{:.6}", self.micro_f1));
        line("macro_f1", format!("{:.6}", self.macro_f1));
        line(
            "hallucination_rate",
            format!("{:.6}", self.hallucination_rate),
        );
        if let Some(h) = self.hit_at_k {
            line(&format!("hit_at_{}", h.k), format!("{:.6}", h.value));
        }
        for (tag, s) in &self.per_tag {
            line(
                &format!("tag.{tag}"),
                format!("tp={} fp={} fn={} f1={:.6}", s.tp, s.fp, s.fn_, s.f1),
            );
        }
        out
    }
}

/// Mergeable per-example accumulator behind [`MetricsReport`].
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MetricsAccumulator {
    n_examples: u64,
    n_perfect: u64,
    n_flagged: u64,
    hits: Option<(usize, u64)>,
    tally: SpanTally,
}

/// What one example contributes.
#[derive(Debug, Clone)]
pub struct ExampleScore {
    pub perfect: bool,
    pub flagged: bool,
    pub hit: Option<bool>,
    pub tally: SpanTally,
}

impl MetricsAccumulator {
    pub fn new(k: Option<usize>) -> Self {
        MetricsAccumulator {
            hits: k.map(|k| (k, 0)),
            ..Default::default()
        }
    }

    pub fn push(&mut self, score: &ExampleScore) {
        self.n_examples += 1;
        self.n_perfect += u64::from(score.perfect);
        self.n_flagged += u64::from(score.flagged);
        if let (Some((_, hits)), Some(true)) = (self.hits.as_mut(), score.hit) {
            *hits += 1;
        }
        self.tally.merge(&score.tally);
    }

    pub fn merge(&mut self, other: &MetricsAccumulator) {
        self.n_examples += other.n_examples;
        self.n_perfect += other.n_perfect;
        self.n_flagged += other.n_flagged;
        if let (Some((_, a)), Some((_, b))) = (self.hits.as_mut(), other.hits) {
            *a += b;
        }
        self.tally.merge(&other.tally);
    }

    pub fn tally(&self) -> &SpanTally {
        &self.tally
    }

    pub fn report(&self) -> MetricsReport {
        let frac = |num: u64| {
            if self.n_examples == 0 {
                0.0
            } else {
                num as f64 / self.n_examples as f64
            }
        };
        let micro = self.tally.micro();
        MetricsReport {
            schema: REPORT_SCHEMA,
            n_examples: self.n_examples,
            perfect: frac(self.n_perfect),
            precision: micro.precision(),
            recall: micro.recall(),
            micro_f1: micro.f1(),
            macro_f1: self.tally.macro_f1(),
            hallucination_rate: frac(self.n_flagged),
            hit_at_k: self.hits.map(|(k, hits)| HitAtK {
                k,
                value: frac(hits),
            }),
            per_tag: self
                .tally
                .per_tag()
                .iter()
                .map(|(tag, c)| {
                    let score = TagScore {
                        tp: c.tp,
                        fp: c.fp,
                        fn_: c.fn_,
                        f1: c.f1(),
                    };
                    (tag.clone(), score)
                })
                .collect(),
        }
    }
}
