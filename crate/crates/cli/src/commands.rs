use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use rand::rngs::StdRng;
use rand::SeedableRng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;
use tagcast::dataio::{write_encoded, OutputMode, PredictionRecord};
use tagcast::metrics::{ExampleScore, MetricsAccumulator, SpanTally, REPORT_SCHEMA};
use tagcast::stats::{
    dataset_stats, length_stats, ByteTokenizer, LengthStats, LengthTokenizer, WhitespaceTokenizer,
};
use tagcast::{
    decode as decode_one, encode as encode_one, perfect_metric, Category, DecodeResult,
    EncodedPair, FormatSpec, Perturbation, Prediction, Span, TaggedExample,
};

use crate::io::{output, read_corpus, read_predictions, write_failed};
use crate::{Failure, InputArgs, TokenizerKind};

fn encode_all(
    examples: &[TaggedExample],
    format: &FormatSpec,
) -> Result<Vec<EncodedPair>, Failure> {
    examples
        .par_iter()
        .map(|ex| {
            encode_one(ex, format)
                .map_err(|e| Failure::Data(format!("{} ({format}): {e}", ex.id())))
        })
        .collect()
}

fn nonempty(examples: &[TaggedExample]) -> Result<(), Failure> {
    if examples.is_empty() {
        Err(Failure::Data("dataset is empty".into()))
    } else {
        Ok(())
    }
}

fn length_line(l: &LengthStats) -> String {
    format!(
        "input mean {:.2} p99 {} max {}; target mean {:.2} p99 {} max {} ({} tokens)",
        l.input.mean,
        l.input.p99,
        l.input.max,
        l.target.mean,
        l.target.p99,
        l.target.max,
        l.tokenizer
    )
}

pub fn encode(io: &InputArgs, format: &FormatSpec, mode: OutputMode) -> Result<(), Failure> {
    let examples = read_corpus(io, format.markup())?;
    nonempty(&examples)?;
    let pairs = encode_all(&examples, format)?;
    let mut out = output(io.output.as_deref())?;
    write_encoded(&pairs, mode, &mut out)
        .and_then(|()| out.flush())
        .map_err(write_failed)?;
    let lengths = length_stats(&pairs, &WhitespaceTokenizer).expect("non-empty");
    eprintln!("encoded {} examples as {format}", pairs.len());
    eprintln!("{}", length_line(&lengths));
    Ok(())
}

/// Matches predictions to gold examples by id, in gold order.
fn pair_up(
    gold: &[TaggedExample],
    preds: Vec<PredictionRecord>,
) -> Result<Vec<(&TaggedExample, PredictionRecord)>, Failure> {
    let mut by_id: HashMap<String, PredictionRecord> =
        preds.into_iter().map(|r| (r.id.clone(), r)).collect();
    let mut out = Vec::with_capacity(gold.len());
    for ex in gold {
        let rec = by_id
            .remove(ex.id())
            .ok_or_else(|| Failure::Data(format!("no prediction for id {:?}", ex.id())))?;
        out.push((ex, rec));
    }
    if let Some(extra) = by_id.keys().min() {
        return Err(Failure::Data(format!(
            "prediction id {extra:?} is not in the gold corpus"
        )));
    }
    Ok(out)
}

#[derive(Serialize)]
struct DecodedLine<'a> {
    id: &'a str,
    rank: usize,
    #[serde(flatten)]
    result: DecodeResult,
}

pub fn decode(io: &InputArgs, format: &FormatSpec, pred: &Path) -> Result<(), Failure> {
    let gold = read_corpus(io, format.markup())?;
    let pairs = pair_up(&gold, read_predictions(pred)?)?;
    let lines: Vec<Vec<DecodedLine>> = pairs
        .par_iter()
        .map(|(ex, rec)| {
            rec.candidates
                .iter()
                .enumerate()
                .map(|(rank, c)| DecodedLine {
                    id: ex.id(),
                    rank,
                    result: decode_one(ex, c, format),
                })
                .collect()
        })
        .collect();
    let mut out = output(io.output.as_deref())?;
    let mut flagged = 0;
    for line in lines.iter().flatten() {
        flagged += usize::from(line.rank == 0 && line.result.hallucination.flagged);
        serde_json::to_writer(&mut out, line).map_err(|e| write_failed(e.into()))?;
        writeln!(out).map_err(write_failed)?;
    }
    out.flush().map_err(write_failed)?;
    eprintln!("decoded {} examples, {flagged} flagged", pairs.len());
    Ok(())
}

/// Splits predicted spans into those whose copied words match the input
/// and those that do not. Families that do not copy the input have nothing
/// to compare, so all their spans count as faithful.
fn split_faithful(
    ex: &TaggedExample,
    result: &DecodeResult,
    spans: &[Span],
) -> (Vec<Span>, Vec<Span>) {
    let Some(words) = &result.reconstructed_tokens else {
        return (spans.to_vec(), Vec::new());
    };
    spans.iter().cloned().partition(|s| {
        (s.start..=s.end).all(|i| words.get(i).map(String::as_str) == Some(ex.tokens()[i].as_str()))
    })
}

/// Whether the candidate is exact, and its span counts.
fn judge(ex: &TaggedExample, result: &DecodeResult, index_eval: bool) -> (bool, SpanTally) {
    let mut tally = SpanTally::default();
    match &result.prediction {
        Prediction::Spans(pred) => {
            let gold = ex.spans();
            let (kept, unfaithful) = if index_eval {
                (pred.clone(), Vec::new())
            } else {
                split_faithful(ex, result, pred)
            };
            tally.add(&gold, &kept);
            for s in &unfaithful {
                tally.add_false_positive(s.tag.as_str());
            }
            (unfaithful.is_empty() && perfect_metric(&gold, &kept), tally)
        }
        Prediction::Phrases(pred) => {
            tally.add_phrases(&ex.phrases(), pred);
            let gold = Prediction::Phrases(ex.phrases());
            (result.prediction.matches(&gold), tally)
        }
    }
}

fn score(
    ex: &TaggedExample,
    rec: &PredictionRecord,
    format: &FormatSpec,
    k: Option<usize>,
    index_eval: bool,
) -> ExampleScore {
    let results: Vec<DecodeResult> = rec
        .candidates
        .iter()
        .take(k.unwrap_or(1).max(1))
        .map(|c| decode_one(ex, c, format))
        .collect();
    let (perfect, tally) = judge(ex, &results[0], index_eval);
    let hit = k.map(|_| perfect || results[1..].iter().any(|r| judge(ex, r, index_eval).0));
    ExampleScore {
        perfect,
        flagged: results[0].hallucination.flagged,
        hit,
        tally,
    }
}

pub fn eval(
    io: &InputArgs,
    format: &FormatSpec,
    pred: &Path,
    k: Option<usize>,
    index_eval: bool,
) -> Result<(), Failure> {
    let gold = read_corpus(io, format.markup())?;
    nonempty(&gold)?;
    let pairs = pair_up(&gold, read_predictions(pred)?)?;
    let scores: Vec<ExampleScore> = pairs
        .par_iter()
        .map(|(ex, rec)| score(ex, rec, format, k, index_eval))
        .collect();
    let mut acc = MetricsAccumulator::new(k);
    for s in &scores {
        acc.push(s);
    }
    let report = acc.report();
    let mut out = output(io.output.as_deref())?;
    serde_json::to_writer(&mut out, &report).map_err(|e| write_failed(e.into()))?;
    writeln!(out)
        .and_then(|()| out.flush())
        .map_err(write_failed)?;
    eprint!("{}", report.to_kv_text());
    Ok(())
}

pub fn stats(
    io: &InputArgs,
    formats: &[FormatSpec],
    tokenizer: TokenizerKind,
) -> Result<(), Failure> {
    let examples = read_corpus(io, formats[0].markup())?;
    let dataset = dataset_stats(&examples).map_err(|e| Failure::Data(e.to_string()))?;
    let tok: &dyn LengthTokenizer = match tokenizer {
        TokenizerKind::Whitespace => &WhitespaceTokenizer,
        TokenizerKind::Bytes => &ByteTokenizer,
    };
    let mut lengths = Vec::new();
    for f in formats {
        let pairs = encode_all(&examples, f)?;
        let l = length_stats(&pairs, tok).expect("non-empty");
        eprintln!("{:<28} {}", f.name(), length_line(&l));
        lengths.push(json!({ "format": f.name(), "lengths": l }));
    }
    eprintln!(
        "examples {}  tokens/ex {:.2}  spans/ex {:.2}  tagged {:.2}%  tags {}  entropy {:.3} bits",
        dataset.n_examples,
        dataset.tokens_per_example,
        dataset.spans_per_example,
        dataset.pct_tokens_tagged,
        dataset.n_tag_classes,
        dataset.tag_entropy
    );
    let report = json!({ "schema": REPORT_SCHEMA, "dataset": dataset, "formats": lengths });
    let mut out = output(io.output.as_deref())?;
    serde_json::to_writer(&mut out, &report).map_err(|e| write_failed(e.into()))?;
    writeln!(out)
        .and_then(|()| out.flush())
        .map_err(write_failed)?;
    Ok(())
}

#[derive(Serialize)]
struct RoundtripFailure {
    id: String,
    format: String,
    spans_match: bool,
    categories: Vec<Category>,
}

/// Seed for one (example, format) cell, independent of scheduling.
fn cell_seed(seed: u64, example: usize, format: usize) -> u64 {
    seed ^ (example as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15)
        ^ (format as u64).wrapping_mul(0xc2b2_ae3d_27d4_eb4f)
}

pub fn roundtrip(
    io: &InputArgs,
    formats: &[FormatSpec],
    inject: Option<Perturbation>,
    seed: u64,
) -> Result<(), Failure> {
    let formats: Vec<&FormatSpec> = match inject {
        Some(p) => formats
            .iter()
            .filter(|f| p.applies_to(f.family()))
            .collect(),
        None => formats.iter().collect(),
    };
    if formats.is_empty() {
        return Err(Failure::Usage(format!(
            "--inject {} does not apply to the selected formats",
            inject.map(|p| p.name()).unwrap_or_default()
        )));
    }
    let examples = read_corpus(io, formats[0].markup())?;
    nonempty(&examples)?;

    let mut failures = Vec::new();
    let mut per_format = Vec::new();
    for (fi, format) in formats.iter().enumerate() {
        let pairs = encode_all(&examples, format)?;
        let cells: Vec<Option<Option<RoundtripFailure>>> = examples
            .par_iter()
            .zip(&pairs)
            .enumerate()
            .map(|(i, (ex, pair))| {
                let target = match inject {
                    Some(p) => {
                        let mut rng = StdRng::seed_from_u64(cell_seed(seed, i, fi));
                        p.apply(&pair.target, format, &mut rng)?
                    }
                    None => pair.target.clone(),
                };
                let out = decode_one(ex, &target, format);
                let spans_match = out
                    .prediction
                    .matches(&Prediction::gold(ex, format.family()));
                if spans_match && !out.hallucination.flagged {
                    return Some(None);
                }
                Some(Some(RoundtripFailure {
                    id: ex.id().to_string(),
                    format: format.name(),
                    spans_match,
                    categories: out.hallucination.hallucinations().collect(),
                }))
            })
            .collect();
        let checked = cells.iter().filter(|c| c.is_some()).count();
        let before = failures.len();
        failures.extend(cells.into_iter().flatten().flatten());
        let failed = failures.len() - before;
        eprintln!(
            "{:<28} checked {checked:>6}  failed {failed:>6}",
            format.name()
        );
        per_format.push(json!({ "format": format.name(), "checked": checked, "failed": failed }));
    }

    for f in &failures {
        let cats: Vec<String> = f.categories.iter().map(ToString::to_string).collect();
        eprintln!(
            "FAIL {} {}: spans {}; hallucination [{}]",
            f.id,
            f.format,
            if f.spans_match { "match" } else { "differ" },
            cats.join(", ")
        );
    }
    let report = json!({
        "schema": REPORT_SCHEMA,
        "inject": inject.map(|p| p.name()),
        "seed": seed,
        "formats": per_format,
        "failures": failures,
    });
    let mut out = output(io.output.as_deref())?;
    serde_json::to_writer(&mut out, &report).map_err(|e| write_failed(e.into()))?;
    writeln!(out)
        .and_then(|()| out.flush())
        .map_err(write_failed)?;

    if failures.is_empty() {
        Ok(())
    } else {
        Err(Failure::Check(format!(
            "{} roundtrip failures",
            failures.len()
        )))
    }
}
