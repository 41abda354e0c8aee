mod common;

use proptest::prelude::*;
use proptest::sample::Index;
use tagcast::align::{edit_script, Edit};
use tagcast::dataio::{read_conll, write_conll};
use tagcast::metrics::{hit_at_k, span_f1, SpanTally};
use tagcast::model::repair_iob2;
use tagcast::stats::{dataset_stats, nearest_rank_p99, percentile_nearest_rank, StatsAccumulator};
use tagcast::{
    decode, encode_target, labels_to_spans, spans_to_labels, FormatSpec, Label, Markup, Prediction,
    Span, Tag, TaggedExample, Token,
};

fn example() -> impl Strategy<Value = TaggedExample> {
    (
        prop::collection::vec(prop::sample::select(common::VOCAB.to_vec()), 1..=40),
        1..=80usize,
        prop::collection::vec((any::<Index>(), 0..4usize, any::<Index>()), 0..=8),
    )
        .prop_map(|(words, n_tags, raw)| {
            let n = words.len();
            let mut taken = vec![false; n];
            let mut spans = Vec::new();
            for (start, width, tag) in raw {
                let start = start.index(n);
                let end = (start + width).min(n - 1);
                if taken[start..=end].iter().any(|&t| t) {
                    continue;
                }
                taken[start..=end].iter_mut().for_each(|t| *t = true);
                spans.push(Span::new(
                    start,
                    end,
                    Tag::new(common::tag_name(tag.index(n_tags))).unwrap(),
                ));
            }
            let tokens: Vec<Token> = words.iter().map(|w| Token::new(*w).unwrap()).collect();
            TaggedExample::from_spans("p", tokens, &spans).unwrap()
        })
}

fn label() -> impl Strategy<Value = Label> {
    let tag = prop::sample::select(vec!["A", "B", "C"]).prop_map(|t| Tag::new(t).unwrap());
    prop_oneof![
        Just(Label::Outside),
        tag.clone().prop_map(Label::Begin),
        tag.prop_map(Label::Inside),
    ]
}

/// Spans read off a label sequence by scanning for run boundaries, written
/// independently of the library.
fn oracle_spans(labels: &[Label]) -> Vec<(usize, usize, String)> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < labels.len() {
        let tag = match &labels[i] {
            Label::Outside => {
                i += 1;
                continue;
            }
            Label::Begin(t) | Label::Inside(t) => t.to_string(),
        };
        let mut j = i + 1;
        while j < labels.len() && labels[j] == Label::Inside(Tag::new(tag.clone()).unwrap()) {
            j += 1;
        }
        out.push((i, j - 1, tag));
        i = j;
    }
    out
}

fn levenshtein(a: &[&str], b: &[&str]) -> usize {
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    for (i, x) in a.iter().enumerate() {
        let mut cur = vec![i + 1];
        for (j, y) in b.iter().enumerate() {
            let v = (prev[j] + usize::from(x != y))
                .min(prev[j + 1] + 1)
                .min(cur[j] + 1);
            cur.push(v);
        }
        prev = cur;
    }
    prev[b.len()]
}

fn word_count(s: &str) -> usize {
    s.split_whitespace().count()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn round_trip_every_format(ex in example()) {
        for f in FormatSpec::all() {
            let target = encode_target(&ex, &f).unwrap();
            let out = decode(&ex, &target, &f);
            prop_assert!(out.prediction.matches(&Prediction::gold(&ex, f.family())), "{f}: {target}");
            prop_assert!(!out.hallucination.flagged, "{f}: {target}");
            prop_assert!(out.warnings.is_empty(), "{f}: {target} {:?}", out.warnings);
        }
    }

    #[test]
    fn spans_agree_with_oracle(mut labels in prop::collection::vec(label(), 0..30)) {
        repair_iob2(&mut labels);
        let spans: Vec<(usize, usize, String)> = labels_to_spans(&labels)
            .into_iter()
            .map(|s| (s.start, s.end, s.tag.to_string()))
            .collect();
        prop_assert_eq!(spans, oracle_spans(&labels));
        let back = spans_to_labels(&labels_to_spans(&labels), labels.len()).unwrap();
        prop_assert_eq!(back, labels);
    }

    #[test]
    fn repair_is_idempotent_and_keeps_begins(mut labels in prop::collection::vec(label(), 0..30)) {
        let before = labels.clone();
        let changed = repair_iob2(&mut labels);
        for &i in &changed {
            prop_assert!(matches!(before[i], Label::Inside(_)));
            prop_assert!(matches!(labels[i], Label::Begin(_)));
        }
        let mut again = labels.clone();
        prop_assert!(repair_iob2(&mut again).is_empty());
    }

    #[test]
    fn shrinkage(ex in example()) {
        let len = |name: &str| word_count(&encode_target(&ex, &name.parse().unwrap()).unwrap());
        let bytes = |name: &str| encode_target(&ex, &name.parse().unwrap()).unwrap().len();
        let pairs = [
            ("tagged-spans+so", "tagged-spans"),
            ("input-tag+si", "input-tag"),
            ("input-tag+si+so", "input-tag+si"),
            ("tag-only+si", "tag-only"),
            ("sentinel-tag+si", "sentinel-tag"),
            ("sentinel-tag+si+so", "sentinel-tag+si"),
            ("extractive-tagged-spans", "tagged-spans"),
            ("extractive-sentinel-tag", "sentinel-tag"),
            ("extractive-sentinel-tag+s", "extractive-sentinel-tag"),
        ];
        for (small, big) in pairs {
            prop_assert!(len(small) <= len(big), "{small} vs {big}");
            prop_assert!(bytes(small) <= bytes(big), "{small} vs {big}");
        }
    }

    #[test]
    fn decode_is_total(ex in example(), text in ".{0,200}") {
        for f in FormatSpec::all() {
            let out = decode(&ex, &text, &f);
            if let Some(spans) = out.prediction.spans() {
                prop_assert!(spans.iter().all(|s| s.start <= s.end && s.end < ex.len()));
            }
        }
    }

    #[test]
    fn edit_script_is_minimal(
        a in prop::collection::vec(prop::sample::select(vec!["a", "b", "c"]), 0..12),
        b in prop::collection::vec(prop::sample::select(vec!["a", "b", "c"]), 0..12),
    ) {
        let script = edit_script(&a, &b);
        prop_assert_eq!(script.len(), levenshtein(&a, &b));
        let inserts = script.iter().filter(|e| matches!(e, Edit::Insert { .. })).count();
        let deletes = script.iter().filter(|e| matches!(e, Edit::Delete { .. })).count();
        prop_assert_eq!(inserts as isize - deletes as isize, a.len() as isize - b.len() as isize);
    }

    #[test]
    fn per_tag_counts_sum_to_micro(golds in prop::collection::vec(example(), 1..6), preds in prop::collection::vec(example(), 1..6)) {
        let mut tally = SpanTally::default();
        for (g, p) in golds.iter().zip(&preds) {
            tally.add(&g.spans(), &p.spans());
        }
        let micro = tally.micro();
        let (tp, fp, fn_) = tally.per_tag().values().fold((0, 0, 0), |acc, c| (acc.0 + c.tp, acc.1 + c.fp, acc.2 + c.fn_));
        prop_assert_eq!((tp, fp, fn_), (micro.tp, micro.fp, micro.fn_));
        let f1 = micro.f1();
        prop_assert!((0.0..=1.0).contains(&f1));
    }

    #[test]
    fn single_tag_macro_equals_micro(ex in example(), other in example()) {
        let one = |e: &TaggedExample| -> Vec<Span> {
            e.spans().into_iter().map(|s| Span::new(s.start, s.end, Tag::new("A").unwrap())).collect()
        };
        let (g, p) = (one(&ex), one(&other));
        let tally = span_f1([(&g[..], &p[..])]);
        if !g.is_empty() {
            prop_assert!((tally.macro_f1() - tally.micro().f1()).abs() < 1e-12);
        }
    }

    #[test]
    fn hit_at_k_monotone(ex in example(), others in prop::collection::vec(example(), 0..7)) {
        let gold = Prediction::Spans(ex.spans());
        let cands: Vec<Prediction> = others.iter().map(|o| Prediction::Spans(o.spans())).collect();
        let mut prev = false;
        for k in 0..=8 {
            let hit = hit_at_k(&gold, &cands, k);
            prop_assert!(hit || !prev);
            prev = hit;
        }
    }

    #[test]
    fn stats_merge_matches_sequential(a in prop::collection::vec(example(), 1..8), b in prop::collection::vec(example(), 1..8)) {
        let mut left = StatsAccumulator::default();
        a.iter().for_each(|e| left.push(e));
        let mut right = StatsAccumulator::default();
        b.iter().for_each(|e| right.push(e));
        left.merge(&right);
        let all = dataset_stats(a.iter().chain(&b)).unwrap();
        prop_assert_eq!(left.finish().unwrap(), all.clone());
        prop_assert!(all.tag_entropy >= 0.0);
        if all.n_tag_classes > 0 {
            prop_assert!(all.tag_entropy <= (all.n_tag_classes as f64).log2() + 1e-9);
        }
        prop_assert!((0.0..=100.0).contains(&all.pct_tokens_tagged));
    }

    #[test]
    fn p99_bounds(mut xs in prop::collection::vec(0..1000usize, 1..300)) {
        xs.sort_unstable();
        let p = nearest_rank_p99(&xs);
        prop_assert!(p <= *xs.last().unwrap());
        prop_assert!(p >= percentile_nearest_rank(&xs, 50));
        let at_most = xs.iter().filter(|&&x| x <= p).count();
        prop_assert!(at_most * 100 >= 99 * xs.len());
    }

    #[test]
    fn conll_round_trip(exs in prop::collection::vec(example(), 0..5)) {
        let exs: Vec<TaggedExample> = exs
            .into_iter()
            .enumerate()
            .map(|(i, e)| TaggedExample::new(format!("d{i}"), e.tokens().to_vec(), e.labels().to_vec()).unwrap())
            .collect();
        let mut buf = Vec::new();
        write_conll(&exs, &mut buf).unwrap();
        let back = read_conll(&buf[..], &Markup::default()).unwrap();
        prop_assert_eq!(back.examples, exs);
        prop_assert!(back.warnings.is_empty());
    }
}
