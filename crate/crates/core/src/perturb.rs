//! Single-edit corruptions of well-formed targets, used to check that the
//! decoder flags each kind of hallucination.

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::decode::Category;
use crate::format::{Family, FormatSpec, Markup};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Perturbation {
    /// Replace one content word of a tagged-spans or input+tag target.
    SubstituteToken,
    /// Add one content word.
    InsertToken,
    /// Remove one content word.
    DeleteToken,
    /// Remove one sentinel together with its label.
    DropSentinelPair,
    /// Repeat one sentinel (with its label) elsewhere in the target.
    DuplicateSentinel,
    /// Remove one label from a tag-only target.
    DropLabel,
}

impl Perturbation {
    pub const ALL: [Perturbation; 6] = [
        Perturbation::SubstituteToken,
        Perturbation::InsertToken,
        Perturbation::DeleteToken,
        Perturbation::DropSentinelPair,
        Perturbation::DuplicateSentinel,
        Perturbation::DropLabel,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Perturbation::SubstituteToken => "substitute",
            Perturbation::InsertToken => "insert",
            Perturbation::DeleteToken => "delete",
            Perturbation::DropSentinelPair => "drop-sentinel",
            Perturbation::DuplicateSentinel => "duplicate-sentinel",
            Perturbation::DropLabel => "drop-label",
        }
    }

    /// The single hallucination category the decoder should report.
    pub fn expected(self) -> Category {
        match self {
            Perturbation::SubstituteToken => Category::ModifiedToken,
            Perturbation::InsertToken => Category::InsertedToken,
            Perturbation::DeleteToken => Category::DeletedToken,
            Perturbation::DropSentinelPair => Category::MissingSentinel,
            Perturbation::DuplicateSentinel => Category::DuplicateSentinel,
            Perturbation::DropLabel => Category::TagCountMismatch,
        }
    }

    pub fn applies_to(self, family: Family) -> bool {
        match self {
            Perturbation::SubstituteToken
            | Perturbation::InsertToken
            | Perturbation::DeleteToken => family.repeats_input(),
            Perturbation::DropSentinelPair => family == Family::SentinelTag,
            Perturbation::DuplicateSentinel => {
                matches!(family, Family::SentinelTag | Family::ExtractiveSentinelTag)
            }
            Perturbation::DropLabel => family == Family::TagOnly,
        }
    }

    /// Applies the edit to a clean `target` of `format`. Returns `None` when
    /// the family does not support it or the target has nothing to edit
    /// (for example no sentinel to duplicate).
    pub fn apply<R: Rng + ?Sized>(
        self,
        target: &str,
        format: &FormatSpec,
        rng: &mut R,
    ) -> Option<String> {
        if !self.applies_to(format.family()) {
            return None;
        }
        let markup = format.markup();
        let mut words: Vec<String> = target.split_whitespace().map(str::to_string).collect();
        match self {
            Perturbation::SubstituteToken => {
                let content = content_positions(&words, markup);
                let &i = pick(&content, rng)?;
                words[i] = fresh_word(&words[i], markup);
            }
            Perturbation::InsertToken => {
                let content = content_positions(&words, markup);
                let &i = pick(&content, rng)?;
                let word = fresh_word(&format!("w{}", rng.random_range(0..1000u32)), markup);
                words.insert(i + 1, word);
            }
            Perturbation::DeleteToken => {
                let content = content_positions(&words, markup);
                let &i = pick(&content, rng)?;
                words.remove(i);
            }
            Perturbation::DropSentinelPair => {
                let groups = sentinel_groups(&words, markup);
                let &(start, end) = pick(&groups, rng)?;
                words.drain(start..end);
            }
            Perturbation::DuplicateSentinel => {
                let groups = sentinel_groups(&words, markup);
                let &(start, end) = pick(&groups, rng)?;
                let copy: Vec<String> = words[start..end].to_vec();
                // insert at a group boundary other than right where it is
                let mut at: Vec<usize> = groups.iter().map(|g| g.0).collect();
                at.push(words.len());
                at.retain(|&b| b != start);
                let &pos = pick(&at, rng)?;
                words.splice(pos..pos, copy);
            }
            Perturbation::DropLabel => {
                if words.is_empty() {
                    return None;
                }
                let i = rng.random_range(0..words.len());
                words.remove(i);
            }
        }
        Some(words.join(" "))
    }
}

impl fmt::Display for Perturbation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Perturbation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Perturbation::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = Perturbation::ALL.iter().map(|p| p.name()).collect();
                format!(
                    "unknown perturbation {s:?}; expected one of {}",
                    names.join(", ")
                )
            })
    }
}

fn pick<'a, T, R: Rng + ?Sized>(items: &'a [T], rng: &mut R) -> Option<&'a T> {
    if items.is_empty() {
        None
    } else {
        Some(&items[rng.random_range(0..items.len())])
    }
}

fn is_marker(word: &str, markup: &Markup) -> bool {
    word == markup.close_marker
        || markup.open_tag.strip(word).is_some()
        || markup.inside_tag.strip(word).is_some()
        || markup.sentinel_index(word).is_some()
}

fn content_positions(words: &[String], markup: &Markup) -> Vec<usize> {
    (0..words.len())
        .filter(|&i| !is_marker(&words[i], markup))
        .collect()
}

/// `[start, end)` word ranges, each a sentinel and the words up to the next.
fn sentinel_groups(words: &[String], markup: &Markup) -> Vec<(usize, usize)> {
    let starts: Vec<usize> = (0..words.len())
        .filter(|&i| markup.sentinel_index(&words[i]).is_some())
        .collect();
    starts
        .iter()
        .enumerate()
        .map(|(g, &s)| (s, starts.get(g + 1).copied().unwrap_or(words.len())))
        .collect()
}

/// A word different from `base` that no markup pattern claims.
fn fresh_word(base: &str, markup: &Markup) -> String {
    let mut word = format!("{base}~");
    while is_marker(&word, markup) || markup.is_reserved(&word) {
        word.push('~');
    }
    word
}
