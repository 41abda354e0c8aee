//! Tokens, BIO labels, spans and tagged examples.
//!
//! Everything here is an immutable value once constructed. Label sequences are
//! kept in IOB2 form: an `Inside(t)` whose predecessor is not `Begin(t)` or
//! `Inside(t)` is rewritten to `Begin(t)` on the way in.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ModelError {
    #[error("token is empty")]
    EmptyToken,
    #[error("token {0:?} contains whitespace")]
    WhitespaceInToken(String),
    #[error("invalid tag name {0:?}")]
    InvalidTag(String),
    #[error("duplicate tag {0:?}")]
    DuplicateTag(String),
    #[error("invalid label {0:?}")]
    LabelSyntax(String),
    #[error("{labels} labels for {tokens} tokens")]
    LengthMismatch { tokens: usize, labels: usize },
    #[error("spans {0} and {1} overlap")]
    OverlappingSpans(Span, Span),
    #[error("span {span} out of range for {n_tokens} tokens")]
    SpanOutOfRange { span: Span, n_tokens: usize },
}

/// A single whitespace-free word of an input sentence.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Token(String);

impl Token {
    pub fn new(text: impl Into<String>) -> Result<Self, ModelError> {
        let text = text.into();
        if text.is_empty() {
            return Err(ModelError::EmptyToken);
        }
        if text.chars().any(char::is_whitespace) {
            return Err(ModelError::WhitespaceInToken(text));
        }
        Ok(Token(text))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for Token {
    type Error = ModelError;
    fn try_from(value: String) -> Result<Self, Self::Error> {
        Token::new(value)
    }
}

impl From<Token> for String {
    fn from(t: Token) -> String {
        t.0
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Name of a span class such as `ARTIST`.
///
/// Tag names may not contain whitespace or angle brackets, may not be the
/// reserved symbols `O` / `I`, and may not start with `I-` (which would be
/// indistinguishable from an inside label in the bare-label grammars).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Tag(String);

impl Tag {
    pub fn new(name: impl Into<String>) -> Result<Self, ModelError> {
        let name = name.into();
        if Self::is_valid(&name) {
            Ok(Tag(name))
        } else {
            Err(ModelError::InvalidTag(name))
        }
    }

    pub fn is_valid(name: &str) -> bool {
        !name.is_empty()
            && name != "O"
            && name != "I"
            && !name.starts_with("I-")
            && !name
                .chars()
                .any(|c| c.is_whitespace() || c == '<' || c == '>')
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for Tag {
    type Error = ModelError;
    fn try_from(value: String) -> Result<Self, Self::Error> {
        Tag::new(value)
    }
}

impl From<Tag> for String {
    fn from(t: Tag) -> String {
        t.0
    }
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Ordered, duplicate-free collection of tag names.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TagSet {
    tags: Vec<Tag>,
}

impl TagSet {
    pub fn new<I, S>(names: I) -> Result<Self, ModelError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut tags: Vec<Tag> = Vec::new();
        for name in names {
            let tag = Tag::new(name)?;
            if tags.contains(&tag) {
                return Err(ModelError::DuplicateTag(tag.0));
            }
            tags.push(tag);
        }
        Ok(TagSet { tags })
    }

    /// Tags in order of first appearance across `examples`.
    pub fn from_examples<'a>(examples: impl IntoIterator<Item = &'a TaggedExample>) -> Self {
        let mut tags: Vec<Tag> = Vec::new();
        for ex in examples {
            for label in ex.labels() {
                if let Some(tag) = label.tag() {
                    if !tags.contains(tag) {
                        tags.push(tag.clone());
                    }
                }
            }
        }
        TagSet { tags }
    }

    pub fn contains(&self, name: &str) -> bool {
        self.tags.iter().any(|t| t.as_str() == name)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Tag> {
        self.tags.iter()
    }

    pub fn len(&self) -> usize {
        self.tags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tags.is_empty()
    }
}

/// A BIO label.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Label {
    Outside,
    Begin(Tag),
    Inside(Tag),
}

impl Label {
    pub fn tag(&self) -> Option<&Tag> {
        match self {
            Label::Outside => None,
            Label::Begin(t) | Label::Inside(t) => Some(t),
        }
    }

    pub fn is_outside(&self) -> bool {
        matches!(self, Label::Outside)
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Outside => f.write_str("O"),
            Label::Begin(t) => write!(f, "B-{t}"),
            Label::Inside(t) => write!(f, "I-{t}"),
        }
    }
}

impl FromStr for Label {
    type Err = ModelError;

    /// Parses the CoNLL spelling: `O`, `B-TAG` or `I-TAG`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "O" {
            return Ok(Label::Outside);
        }
        let syntax = || ModelError::LabelSyntax(s.to_string());
        let (prefix, rest) = s.split_once('-').ok_or_else(syntax)?;
        let tag = Tag::new(rest).map_err(|_| syntax())?;
        match prefix {
            "B" => Ok(Label::Begin(tag)),
            "I" => Ok(Label::Inside(tag)),
            _ => Err(syntax()),
        }
    }
}

impl Serialize for Label {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Label {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Inclusive token range `[start, end]` carrying a tag.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
    pub tag: Tag,
}

impl Span {
    pub fn new(start: usize, end: usize, tag: Tag) -> Self {
        Span { start, end, tag }
    }

    /// Number of tokens covered.
    pub fn width(&self) -> usize {
        self.end + 1 - self.start
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{},{})", self.start, self.end, self.tag)
    }
}

/// Rewrites every `Inside(t)` that cannot continue its predecessor into
/// `Begin(t)`. Returns the repaired positions.
pub fn repair_iob2(labels: &mut [Label]) -> Vec<usize> {
    let mut repaired = Vec::new();
    for i in 0..labels.len() {
        if let Label::Inside(tag) = &labels[i] {
            let continues = i > 0 && labels[i - 1].tag() == Some(tag);
            if !continues {
                labels[i] = Label::Begin(tag.clone());
                repaired.push(i);
            }
        }
    }
    repaired
}

/// Maximal spans of a label sequence, sorted by start.
///
/// Ill-formed input is handled by the IOB2 repair rule, so this never fails.
pub fn labels_to_spans(labels: &[Label]) -> Vec<Span> {
    let mut spans = Vec::new();
    let mut open: Option<(usize, &Tag)> = None;
    for (i, label) in labels.iter().enumerate() {
        match label {
            Label::Outside => {
                if let Some((start, tag)) = open.take() {
                    spans.push(Span::new(start, i - 1, tag.clone()));
                }
            }
            Label::Begin(tag) => {
                if let Some((start, prev)) = open.take() {
                    spans.push(Span::new(start, i - 1, prev.clone()));
                }
                open = Some((i, tag));
            }
            Label::Inside(tag) => match open {
                Some((_, prev)) if prev == tag => {}
                _ => {
                    if let Some((start, prev)) = open.take() {
                        spans.push(Span::new(start, i - 1, prev.clone()));
                    }
                    open = Some((i, tag));
                }
            },
        }
    }
    if let Some((start, tag)) = open {
        spans.push(Span::new(start, labels.len() - 1, tag.clone()));
    }
    spans
}

/// Checks that `spans` are in range and pairwise disjoint, returning them
/// sorted by start.
pub fn check_spans(spans: &[Span], n_tokens: usize) -> Result<Vec<Span>, ModelError> {
    for span in spans {
        if span.start > span.end || span.end >= n_tokens {
            return Err(ModelError::SpanOutOfRange {
                span: span.clone(),
                n_tokens,
            });
        }
    }
    let mut sorted = spans.to_vec();
    sorted.sort();
    for pair in sorted.windows(2) {
        if pair[1].start <= pair[0].end {
            return Err(ModelError::OverlappingSpans(
                pair[0].clone(),
                pair[1].clone(),
            ));
        }
    }
    Ok(sorted)
}

pub fn spans_to_labels(spans: &[Span], n_tokens: usize) -> Result<Vec<Label>, ModelError> {
    let sorted = check_spans(spans, n_tokens)?;
    let mut labels = vec![Label::Outside; n_tokens];
    for span in sorted {
        labels[span.start] = Label::Begin(span.tag.clone());
        for label in &mut labels[span.start + 1..=span.end] {
            *label = Label::Inside(span.tag.clone());
        }
    }
    Ok(labels)
}

/// One tagged phrase of an extractive target: the tag and its
/// single-space-joined words.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Phrase {
    pub tag: Tag,
    pub text: String,
}

impl Phrase {
    pub fn new<'a>(tag: Tag, words: impl IntoIterator<Item = &'a str>) -> Self {
        let text = words.into_iter().collect::<Vec<_>>().join(" ");
        Phrase { tag, text }
    }
}

/// Tokens with one BIO label each: the canonical in-memory record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawExample", into = "RawExample")]
pub struct TaggedExample {
    id: String,
    tokens: Vec<Token>,
    labels: Vec<Label>,
}

#[derive(Serialize, Deserialize)]
struct RawExample {
    id: String,
    tokens: Vec<Token>,
    labels: Vec<Label>,
}

impl TryFrom<RawExample> for TaggedExample {
    type Error = ModelError;
    fn try_from(raw: RawExample) -> Result<Self, Self::Error> {
        TaggedExample::new(raw.id, raw.tokens, raw.labels)
    }
}

impl From<TaggedExample> for RawExample {
    fn from(ex: TaggedExample) -> Self {
        RawExample {
            id: ex.id,
            tokens: ex.tokens,
            labels: ex.labels,
        }
    }
}

impl TaggedExample {
    /// Builds an example, silently applying IOB2 repair.
    pub fn new(
        id: impl Into<String>,
        tokens: Vec<Token>,
        labels: Vec<Label>,
    ) -> Result<Self, ModelError> {
        Self::with_repairs(id, tokens, labels).map(|(ex, _)| ex)
    }

    /// Like [`TaggedExample::new`], also returning the positions that IOB2
    /// repair rewrote.
    pub fn with_repairs(
        id: impl Into<String>,
        tokens: Vec<Token>,
        mut labels: Vec<Label>,
    ) -> Result<(Self, Vec<usize>), ModelError> {
        if tokens.len() != labels.len() {
            return Err(ModelError::LengthMismatch {
                tokens: tokens.len(),
                labels: labels.len(),
            });
        }
        let repaired = repair_iob2(&mut labels);
        let ex = TaggedExample {
            id: id.into(),
            tokens,
            labels,
        };
        Ok((ex, repaired))
    }

    pub fn from_spans(
        id: impl Into<String>,
        tokens: Vec<Token>,
        spans: &[Span],
    ) -> Result<Self, ModelError> {
        let labels = spans_to_labels(spans, tokens.len())?;
        Self::new(id, tokens, labels)
    }

    /// Convenience constructor from plain strings (`"O"`, `"B-X"`, `"I-X"`).
    pub fn parse(
        id: impl Into<String>,
        tokens: &[&str],
        labels: &[&str],
    ) -> Result<Self, ModelError> {
        let tokens = tokens
            .iter()
            .map(|t| Token::new(*t))
            .collect::<Result<Vec<_>, _>>()?;
        let labels = labels
            .iter()
            .map(|l| l.parse())
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(id, tokens, labels)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn tokens(&self) -> &[Token] {
        &self.tokens
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn token_texts(&self) -> Vec<&str> {
        self.tokens.iter().map(Token::as_str).collect()
    }

    pub fn spans(&self) -> Vec<Span> {
        labels_to_spans(&self.labels)
    }

    /// Gold phrases for the extractive grammars, in span order.
    pub fn phrases(&self) -> Vec<Phrase> {
        self.spans()
            .into_iter()
            .map(|s| {
                let words = self.tokens[s.start..=s.end].iter().map(Token::as_str);
                Phrase::new(s.tag.clone(), words)
            })
            .collect()
    }
}
