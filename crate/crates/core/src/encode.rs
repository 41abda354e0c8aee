//! Rendering a tagged example into its model input and target strings.

use serde::Serialize;
use thiserror::Error;

use crate::format::{Family, FormatSpec, SentinelSpacing};
use crate::model::{Label, TaggedExample, Token};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EncodeError {
    #[error("{n_tokens} tokens need sentinels up to {needed}, but the largest is {max}")]
    SentinelOverflow {
        n_tokens: usize,
        needed: usize,
        max: usize,
    },
    #[error("token {index} ({text:?}) collides with a markup literal")]
    ReservedToken { index: usize, text: String },
}

/// An (input, target) pair ready to be written out.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EncodedPair {
    pub id: String,
    pub input: String,
    pub target: String,
    #[serde(serialize_with = "serialize_format_name")]
    pub format: FormatSpec,
}

fn serialize_format_name<S: serde::Serializer>(f: &FormatSpec, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&f.name())
}

/// Space-joined word sink.
#[derive(Default)]
struct Words(String);

impl Words {
    fn push(&mut self, word: &str) {
        if word.is_empty() {
            return;
        }
        if !self.0.is_empty() {
            self.0.push(' ');
        }
        self.0.push_str(word);
    }
}

fn check(example: &TaggedExample, format: &FormatSpec) -> Result<(), EncodeError> {
    let markup = format.markup();
    if let Some((index, token)) = example
        .tokens()
        .iter()
        .enumerate()
        .find(|(_, t)| markup.is_reserved(t.as_str()))
    {
        return Err(EncodeError::ReservedToken {
            index,
            text: token.to_string(),
        });
    }
    if format.family().uses_sentinels() && example.len() > markup.max_sentinel + 1 {
        return Err(EncodeError::SentinelOverflow {
            n_tokens: example.len(),
            needed: example.len() - 1,
            max: markup.max_sentinel,
        });
    }
    Ok(())
}

pub fn encode_input(example: &TaggedExample, format: &FormatSpec) -> Result<String, EncodeError> {
    check(example, format)?;
    Ok(render_input(example.tokens(), format))
}

fn render_input(tokens: &[Token], format: &FormatSpec) -> String {
    let mut out = Words::default();
    if !format.family().uses_sentinels() {
        for t in tokens {
            out.push(t.as_str());
        }
        return out.0;
    }
    let markup = format.markup();
    for (k, t) in tokens.iter().enumerate() {
        let sentinel = markup.sentinel(k);
        match markup.spacing {
            SentinelSpacing::SpaceSeparated => {
                out.push(&sentinel);
                out.push(t.as_str());
            }
            SentinelSpacing::NoSpace => out.push(&format!("{sentinel}{t}")),
        }
    }
    out.0
}

/// Bare label word used by the tag-only and sentinel grammars: `O`, `TAG`,
/// `I-TAG`, or `I` under simplified inside.
fn bare_label(label: &Label, simplified_inside: bool) -> String {
    match label {
        Label::Outside => "O".to_string(),
        Label::Begin(t) => t.to_string(),
        Label::Inside(_) if simplified_inside => "I".to_string(),
        Label::Inside(t) => format!("I-{t}"),
    }
}

pub fn encode_target(example: &TaggedExample, format: &FormatSpec) -> Result<String, EncodeError> {
    check(example, format)?;
    Ok(render_target(example, format))
}

fn render_target(example: &TaggedExample, format: &FormatSpec) -> String {
    let markup = format.markup();
    let si = format.simplified_inside();
    let so = format.simplified_outside();
    let tokens = example.tokens();
    let labels = example.labels();
    let mut out = Words::default();

    match format.family() {
        Family::TaggedSpans => {
            let outside = markup.open_tag.render("O");
            let mut open = false;
            for (i, (tok, label)) in tokens.iter().zip(labels).enumerate() {
                match label {
                    Label::Outside => {
                        if so {
                            out.push(tok.as_str());
                        } else {
                            out.push(&outside);
                            out.push(tok.as_str());
                            out.push(&markup.close_marker);
                        }
                    }
                    Label::Begin(tag) | Label::Inside(tag) => {
                        if !open {
                            out.push(&markup.open_tag.render(tag.as_str()));
                            open = true;
                        }
                        out.push(tok.as_str());
                        let continues =
                            matches!(labels.get(i + 1), Some(Label::Inside(next)) if next == tag);
                        if !continues {
                            out.push(&markup.close_marker);
                            open = false;
                        }
                    }
                }
            }
        }
        Family::InputTag => {
            for (tok, label) in tokens.iter().zip(labels) {
                let marker = match label {
                    Label::Outside if so => None,
                    Label::Outside => Some(markup.open_tag.render("O")),
                    Label::Begin(t) => Some(markup.open_tag.render(t.as_str())),
                    Label::Inside(_) if si => Some(markup.open_tag.render("I")),
                    Label::Inside(t) => Some(markup.inside_tag.render(t.as_str())),
                };
                if let Some(m) = marker {
                    out.push(&m);
                }
                out.push(tok.as_str());
            }
        }
        Family::TagOnly => {
            for label in labels {
                out.push(&bare_label(label, si));
            }
        }
        Family::SentinelTag => {
            for (k, label) in labels.iter().enumerate() {
                out.push(&markup.sentinel(k));
                if !(so && label.is_outside()) {
                    out.push(&bare_label(label, si));
                }
            }
        }
        Family::ExtractiveTaggedSpans => {
            for (tok, label) in tokens.iter().zip(labels) {
                if let Label::Begin(t) = label {
                    out.push(&markup.open_tag.render(t.as_str()));
                }
                if !label.is_outside() {
                    out.push(tok.as_str());
                }
            }
        }
        Family::ExtractiveSentinelTag => {
            let simplified = format.extractive_simplified();
            for (k, label) in labels.iter().enumerate() {
                match label {
                    Label::Outside => {}
                    Label::Begin(t) => {
                        out.push(&markup.sentinel(k));
                        out.push(t.as_str());
                    }
                    Label::Inside(t) => {
                        out.push(&markup.sentinel(k));
                        if !simplified {
                            out.push(&format!("I-{t}"));
                        }
                    }
                }
            }
        }
    }
    out.0
}

pub fn encode(example: &TaggedExample, format: &FormatSpec) -> Result<EncodedPair, EncodeError> {
    check(example, format)?;
    Ok(EncodedPair {
        id: example.id().to_string(),
        input: render_input(example.tokens(), format),
        target: render_target(example, format),
        format: format.clone(),
    })
}
