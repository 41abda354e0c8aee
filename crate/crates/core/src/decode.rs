//! Lenient parsing of generated targets back into span predictions.
//!
//! Decoding is total: whatever the model produced, the result is a prediction
//! plus a [`HallucinationReport`] and a list of parse warnings. What counts
//! as a hallucination depends on the family:
//!
//! * tagged spans / input+tag: the reconstructed words differ from the input
//!   (substituted, inserted or deleted tokens);
//! * tag only: the number of labels differs from the number of tokens;
//! * sentinel+tag: a sentinel is missing, repeated or out of range;
//! * extractive sentinel+tag: a sentinel is repeated or out of range;
//! * extractive tagged spans: a phrase cannot be found in the input.
//!
//! Spans of the input-repeating families are assigned by position: the i-th
//! reconstructed word is taken to be input token i, whatever its text.

use std::collections::BTreeSet;
use std::fmt;

use serde::Serialize;

use crate::align::{edit_script, Edit};
use crate::format::{Family, FormatSpec};
use crate::model::{labels_to_spans, repair_iob2, Label, Phrase, Span, Tag, TagSet, TaggedExample};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Category {
    ModifiedToken,
    InsertedToken,
    DeletedToken,
    TagCountMismatch,
    MissingSentinel,
    DuplicateSentinel,
    OutOfRangeSentinel,
    UnknownLabel,
    MalformedMarkup,
}

impl Category {
    /// `UnknownLabel` and `MalformedMarkup` describe the markup, not the
    /// fidelity of the output, and never flag an example on their own.
    pub fn is_hallucination(self) -> bool {
        !matches!(self, Category::UnknownLabel | Category::MalformedMarkup)
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// One observation. `position` is the input token index for token edits,
/// the sentinel index for sentinel findings, the number of labels produced
/// for `TagCountMismatch`, and the generated-word index otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Finding {
    pub position: usize,
    pub category: Category,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct HallucinationReport {
    pub flagged: bool,
    pub categories: BTreeSet<Category>,
    pub detail: Vec<Finding>,
}

impl HallucinationReport {
    fn record(&mut self, position: usize, category: Category) {
        self.flagged |= category.is_hallucination();
        self.categories.insert(category);
        self.detail.push(Finding { position, category });
    }

    /// Hallucination categories only, without markup warnings.
    pub fn hallucinations(&self) -> impl Iterator<Item = Category> + '_ {
        self.categories
            .iter()
            .copied()
            .filter(|c| c.is_hallucination())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum WarningCode {
    /// Label word that is not `O`, `I`, `I-TAG` or a known tag.
    UnknownLabel,
    /// Close marker with no open group.
    StrayClose,
    /// A new group (or the end of text) arrived before the close marker.
    UnclosedGroup,
    /// Group with no words.
    EmptyGroup,
    /// Input word outside any group in a grammar that wraps every word.
    BareToken,
    /// Label marker not followed by a word.
    DanglingMarker,
    /// Label word before the first sentinel.
    OrphanLabel,
    /// More than one label word after a sentinel.
    ExtraLabel,
    /// Sentinel with no label in a grammar that requires one.
    MissingLabel,
    /// Bare inside symbol with no open span; read as outside.
    DanglingInside,
    /// Inside label that could not continue its predecessor; read as begin.
    RepairedInside,
}

impl WarningCode {
    fn category(self) -> Option<Category> {
        match self {
            WarningCode::UnknownLabel => Some(Category::UnknownLabel),
            WarningCode::DanglingInside | WarningCode::RepairedInside => None,
            _ => Some(Category::MalformedMarkup),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ParseWarning {
    pub position: usize,
    pub code: WarningCode,
}

/// Decoded prediction: token-indexed spans, or tagged phrases for the
/// extractive tagged-spans grammar, which cannot be mapped back to indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Prediction {
    Spans(Vec<Span>),
    Phrases(Vec<Phrase>),
}

impl Prediction {
    /// The gold prediction of `example` in the shape `family` decodes to.
    pub fn gold(example: &TaggedExample, family: Family) -> Self {
        if family == Family::ExtractiveTaggedSpans {
            Prediction::Phrases(example.phrases())
        } else {
            Prediction::Spans(example.spans())
        }
    }

    /// Exact agreement: equal span sets, or equal phrase multisets.
    pub fn matches(&self, other: &Prediction) -> bool {
        match (self, other) {
            (Prediction::Spans(a), Prediction::Spans(b)) => crate::metrics::perfect_metric(a, b),
            (Prediction::Phrases(a), Prediction::Phrases(b)) => {
                let (mut a, mut b) = (a.clone(), b.clone());
                a.sort();
                b.sort();
                a == b
            }
            _ => false,
        }
    }

    pub fn spans(&self) -> Option<&[Span]> {
        match self {
            Prediction::Spans(s) => Some(s),
            Prediction::Phrases(_) => None,
        }
    }

    pub fn phrases(&self) -> Option<&[Phrase]> {
        match self {
            Prediction::Phrases(p) => Some(p),
            Prediction::Spans(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DecodeResult {
    pub prediction: Prediction,
    /// Words recovered from the target, for the input-repeating families.
    pub reconstructed_tokens: Option<Vec<String>>,
    pub hallucination: HallucinationReport,
    pub warnings: Vec<ParseWarning>,
}

/// Decodes with an optional closed tag vocabulary. Tags outside the
/// vocabulary are reported as unknown labels and read as outside.
#[derive(Debug, Clone, Copy)]
pub struct Decoder<'a> {
    format: &'a FormatSpec,
    tagset: Option<&'a TagSet>,
}

pub fn decode(example: &TaggedExample, generated: &str, format: &FormatSpec) -> DecodeResult {
    Decoder::new(format).decode(example, generated)
}

/// Sentinel index, its word position, and the (position, word) labels
/// that follow it.
type SentinelEntry<'w> = (usize, usize, Vec<(usize, &'w str)>);

/// A label slot before inside-continuation is resolved.
#[derive(Debug, Clone, PartialEq, Eq)]
enum Slot {
    Outside,
    Begin(Tag),
    Inside(Tag),
    /// Bare `I`: continues whatever span is open.
    Continue,
}

#[derive(Default)]
struct Ctx {
    report: HallucinationReport,
    warnings: Vec<ParseWarning>,
}

impl Ctx {
    fn warn(&mut self, position: usize, code: WarningCode) {
        self.warnings.push(ParseWarning { position, code });
        if let Some(cat) = code.category() {
            self.report.categories.insert(cat);
            self.report.detail.push(Finding {
                position,
                category: cat,
            });
        }
    }
}

impl<'a> Decoder<'a> {
    pub fn new(format: &'a FormatSpec) -> Self {
        Decoder {
            format,
            tagset: None,
        }
    }

    pub fn with_tagset(mut self, tagset: &'a TagSet) -> Self {
        self.tagset = Some(tagset);
        self
    }

    pub fn decode(&self, example: &TaggedExample, generated: &str) -> DecodeResult {
        let eos = self.format.markup().eos.as_str();
        let text = generated.trim_end();
        let text = text.strip_suffix(eos).unwrap_or(text);
        let words: Vec<&str> = text.split_whitespace().collect();
        let mut ctx = Ctx::default();
        let n = example.len();

        let (prediction, reconstructed) = match self.format.family() {
            Family::TaggedSpans => {
                let (content, slots) = self.parse_tagged_spans(&words, &mut ctx);
                let spans = self.finish_slots(slots, n, &mut ctx);
                self.diff_tokens(&content, example, &mut ctx);
                (Prediction::Spans(spans), Some(content))
            }
            Family::InputTag => {
                let (content, slots) = self.parse_input_tag(&words, &mut ctx);
                let spans = self.finish_slots(slots, n, &mut ctx);
                self.diff_tokens(&content, example, &mut ctx);
                (Prediction::Spans(spans), Some(content))
            }
            Family::TagOnly => {
                let slots: Vec<Slot> = words
                    .iter()
                    .enumerate()
                    .map(|(i, w)| self.bare_slot(w, i, &mut ctx))
                    .collect();
                if slots.len() != n {
                    ctx.report.record(slots.len(), Category::TagCountMismatch);
                }
                (
                    Prediction::Spans(self.finish_slots(slots, n, &mut ctx)),
                    None,
                )
            }
            Family::SentinelTag | Family::ExtractiveSentinelTag => {
                let slots = self.parse_sentinels(&words, n, &mut ctx);
                (
                    Prediction::Spans(self.finish_slots(slots, n, &mut ctx)),
                    None,
                )
            }
            Family::ExtractiveTaggedSpans => {
                let phrases = self.parse_extractive_spans(&words, example, &mut ctx);
                (Prediction::Phrases(phrases), None)
            }
        };

        DecodeResult {
            prediction,
            reconstructed_tokens: reconstructed,
            hallucination: ctx.report,
            warnings: ctx.warnings,
        }
    }

    fn known_tag(&self, name: &str) -> Option<Tag> {
        if self.tagset.is_some_and(|ts| !ts.contains(name)) {
            return None;
        }
        Tag::new(name).ok()
    }

    /// `O`, `I`, `I-TAG` or `TAG`.
    fn bare_slot(&self, word: &str, pos: usize, ctx: &mut Ctx) -> Slot {
        let slot = match word {
            "O" => Some(Slot::Outside),
            "I" => Some(Slot::Continue),
            _ => match word.strip_prefix("I-") {
                Some(rest) => self.known_tag(rest).map(Slot::Inside),
                None => self.known_tag(word).map(Slot::Begin),
            },
        };
        slot.unwrap_or_else(|| {
            ctx.warn(pos, WarningCode::UnknownLabel);
            Slot::Outside
        })
    }

    /// Label carried by a markup word such as `<ARTIST>`, `<I-ARTIST>`,
    /// `<I>` or `<O>`; `None` for input words.
    fn marker_slot(&self, word: &str, pos: usize, ctx: &mut Ctx) -> Option<Slot> {
        let markup = self.format.markup();
        if let Some(inner) = markup.inside_tag.strip(word) {
            return Some(match self.known_tag(inner) {
                Some(t) => Slot::Inside(t),
                None => {
                    ctx.warn(pos, WarningCode::UnknownLabel);
                    Slot::Outside
                }
            });
        }
        let inner = markup.open_tag.strip(word)?;
        Some(self.bare_slot(inner, pos, ctx))
    }

    fn parse_tagged_spans(&self, words: &[&str], ctx: &mut Ctx) -> (Vec<String>, Vec<Slot>) {
        struct Group {
            tag: Option<Tag>,
            count: usize,
            pos: usize,
        }
        let markup = self.format.markup();
        let mut content = Vec::new();
        let mut slots = Vec::new();
        let mut group: Option<Group> = None;

        let close = |g: Group, ctx: &mut Ctx| {
            if g.count == 0 {
                ctx.warn(g.pos, WarningCode::EmptyGroup);
            }
        };

        for (i, &w) in words.iter().enumerate() {
            if w == markup.close_marker {
                match group.take() {
                    Some(g) => close(g, ctx),
                    None => ctx.warn(i, WarningCode::StrayClose),
                }
            } else if let Some(inner) = markup.open_tag.strip(w) {
                if let Some(g) = group.take() {
                    ctx.warn(i, WarningCode::UnclosedGroup);
                    close(g, ctx);
                }
                let tag = match inner {
                    "O" => None,
                    _ => {
                        let tag = self.known_tag(inner);
                        if tag.is_none() {
                            ctx.warn(i, WarningCode::UnknownLabel);
                        }
                        tag
                    }
                };
                group = Some(Group {
                    tag,
                    count: 0,
                    pos: i,
                });
            } else {
                let slot = match group.as_mut() {
                    Some(g) => {
                        g.count += 1;
                        match &g.tag {
                            Some(t) if g.count == 1 => Slot::Begin(t.clone()),
                            Some(t) => Slot::Inside(t.clone()),
                            None => Slot::Outside,
                        }
                    }
                    None => {
                        if !self.format.simplified_outside() {
                            ctx.warn(i, WarningCode::BareToken);
                        }
                        Slot::Outside
                    }
                };
                content.push(w.to_string());
                slots.push(slot);
            }
        }
        if let Some(g) = group {
            ctx.warn(words.len(), WarningCode::UnclosedGroup);
            close(g, ctx);
        }
        (content, slots)
    }

    fn parse_input_tag(&self, words: &[&str], ctx: &mut Ctx) -> (Vec<String>, Vec<Slot>) {
        let mut content = Vec::new();
        let mut slots = Vec::new();
        let mut pending: Option<(Slot, usize)> = None;
        for (i, &w) in words.iter().enumerate() {
            if let Some(slot) = self.marker_slot(w, i, ctx) {
                if let Some((_, at)) = pending.replace((slot, i)) {
                    ctx.warn(at, WarningCode::DanglingMarker);
                }
            } else {
                let slot = match pending.take() {
                    Some((slot, _)) => slot,
                    None => {
                        if !self.format.simplified_outside() {
                            ctx.warn(i, WarningCode::BareToken);
                        }
                        Slot::Outside
                    }
                };
                content.push(w.to_string());
                slots.push(slot);
            }
        }
        if let Some((_, at)) = pending {
            ctx.warn(at, WarningCode::DanglingMarker);
        }
        (content, slots)
    }

    fn parse_sentinels(&self, words: &[&str], n: usize, ctx: &mut Ctx) -> Vec<Slot> {
        let markup = self.format.markup();
        let full = self.format.family() == Family::SentinelTag;
        let label_optional = if full {
            self.format.simplified_outside()
        } else {
            self.format.extractive_simplified()
        };

        let mut entries: Vec<SentinelEntry> = Vec::new();
        for (i, &w) in words.iter().enumerate() {
            if let Some(k) = markup.sentinel_index(w) {
                entries.push((k, i, Vec::new()));
            } else if let Some(last) = entries.last_mut() {
                last.2.push((i, w));
            } else {
                ctx.warn(i, WarningCode::OrphanLabel);
            }
        }

        let mut slots = vec![Slot::Outside; n];
        let mut seen = vec![false; n];
        for (k, pos, labels) in entries {
            if let Some(&(extra, _)) = labels.get(1) {
                ctx.warn(extra, WarningCode::ExtraLabel);
            }
            if k >= n {
                ctx.report.record(k, Category::OutOfRangeSentinel);
                continue;
            }
            if seen[k] {
                ctx.report.record(k, Category::DuplicateSentinel);
                continue;
            }
            seen[k] = true;
            slots[k] = match labels.first() {
                Some(&(at, w)) => self.bare_slot(w, at, ctx),
                None => {
                    if !label_optional {
                        ctx.warn(pos, WarningCode::MissingLabel);
                    }
                    // a label-less sentinel is outside in the full grammar
                    // and a continuation in the extractive one
                    if full {
                        Slot::Outside
                    } else {
                        Slot::Continue
                    }
                }
            };
        }
        if full {
            for (k, _) in seen.iter().enumerate().filter(|(_, s)| !**s) {
                ctx.report.record(k, Category::MissingSentinel);
            }
        }
        slots
    }

    fn parse_extractive_spans(
        &self,
        words: &[&str],
        example: &TaggedExample,
        ctx: &mut Ctx,
    ) -> Vec<Phrase> {
        let markup = self.format.markup();
        // (tag, first word position, words)
        let mut groups: Vec<(Option<Tag>, usize, Vec<&str>)> = Vec::new();
        let mut open = false;
        for (i, &w) in words.iter().enumerate() {
            if w == markup.close_marker {
                if !open {
                    ctx.warn(i, WarningCode::StrayClose);
                }
                open = false;
            } else if let Some(inner) = markup.open_tag.strip(w) {
                let tag = self.known_tag(inner);
                if tag.is_none() {
                    ctx.warn(i, WarningCode::UnknownLabel);
                }
                groups.push((tag, i, Vec::new()));
                open = true;
            } else if open {
                groups.last_mut().expect("open group").2.push(w);
            } else {
                ctx.warn(i, WarningCode::BareToken);
            }
        }

        let input = example.token_texts();
        let mut phrases = Vec::new();
        for (tag, pos, phrase_words) in groups {
            let Some(tag) = tag else { continue };
            if phrase_words.is_empty() {
                ctx.warn(pos, WarningCode::EmptyGroup);
                continue;
            }
            if !input
                .windows(phrase_words.len())
                .any(|w| w == phrase_words.as_slice())
            {
                let mut any_new = false;
                for (j, w) in phrase_words.iter().enumerate() {
                    if !input.contains(w) {
                        ctx.report.record(pos + 1 + j, Category::InsertedToken);
                        any_new = true;
                    }
                }
                if !any_new {
                    ctx.report.record(pos, Category::ModifiedToken);
                }
            }
            phrases.push(Phrase::new(tag, phrase_words));
        }
        phrases
    }

    /// Resolves bare inside symbols, aligns slots to the input length, and
    /// reads off spans.
    fn finish_slots(&self, slots: Vec<Slot>, n: usize, ctx: &mut Ctx) -> Vec<Span> {
        let mut labels: Vec<Label> = Vec::with_capacity(slots.len());
        for (i, slot) in slots.into_iter().enumerate() {
            let label = match slot {
                Slot::Outside => Label::Outside,
                Slot::Begin(t) => Label::Begin(t),
                Slot::Inside(t) => Label::Inside(t),
                Slot::Continue => match labels.last().and_then(Label::tag) {
                    Some(t) => Label::Inside(t.clone()),
                    None => {
                        ctx.warn(i, WarningCode::DanglingInside);
                        Label::Outside
                    }
                },
            };
            labels.push(label);
        }
        labels.resize(n, Label::Outside);
        for pos in repair_iob2(&mut labels) {
            ctx.warn(pos, WarningCode::RepairedInside);
        }
        labels_to_spans(&labels)
    }

    fn diff_tokens(&self, content: &[String], example: &TaggedExample, ctx: &mut Ctx) {
        for edit in edit_script(content, &example.token_texts()) {
            match edit {
                Edit::Substitute { pos } => ctx.report.record(pos, Category::ModifiedToken),
                Edit::Insert { pos } => ctx.report.record(pos, Category::InsertedToken),
                Edit::Delete { pos } => ctx.report.record(pos, Category::DeletedToken),
            }
        }
    }
}
