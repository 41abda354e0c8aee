#![allow(dead_code)]

use rand::Rng;
use tagcast::{Span, Tag, TaggedExample, Token};

pub const RUNNING_TOKENS: [&str; 7] = ["Add", "Kent", "James", "to", "the", "Disney", "soundtrack"];
pub const RUNNING_LABELS: [&str; 7] = ["O", "B-ARTIST", "I-ARTIST", "O", "O", "B-PLAYLIST", "O"];

pub fn running() -> TaggedExample {
    TaggedExample::parse("ex0", &RUNNING_TOKENS, &RUNNING_LABELS).unwrap()
}

/// Words a synthetic sentence is drawn from. Includes label look-alikes and
/// non-ASCII text on purpose.
pub const VOCAB: [&str; 16] = [
    "play", "the", "song", "by", "I", "O", "B", "a", "x1", "Zürich", "東京", "...", "-", "I-X",
    "42", "é",
];

pub fn tag_name(i: usize) -> String {
    // a few names that look like label syntax, the rest plain
    match i {
        0 => "B".to_string(),
        1 => "B-X".to_string(),
        2 => "PER".to_string(),
        _ => format!("T{i}"),
    }
}

/// Random example with 1..=40 tokens, 0..=8 spans and up to `n_tags` tag
/// classes (1..=80 when `None`).
pub fn random_example<R: Rng>(rng: &mut R, id: usize, n_tags: Option<usize>) -> TaggedExample {
    let n = rng.random_range(1..=40);
    let n_tags = n_tags.unwrap_or_else(|| rng.random_range(1..=80));
    let tokens: Vec<Token> = (0..n)
        .map(|_| Token::new(VOCAB[rng.random_range(0..VOCAB.len())]).unwrap())
        .collect();
    let want = rng.random_range(0..=8usize.min(n));
    let mut taken = vec![false; n];
    let mut spans = Vec::new();
    for _ in 0..want * 4 {
        if spans.len() == want {
            break;
        }
        let start = rng.random_range(0..n);
        let end = (start + rng.random_range(0..4)).min(n - 1);
        if taken[start..=end].iter().any(|&t| t) {
            continue;
        }
        taken[start..=end].iter_mut().for_each(|t| *t = true);
        let tag = Tag::new(tag_name(rng.random_range(0..n_tags))).unwrap();
        spans.push(Span::new(start, end, tag));
    }
    TaggedExample::from_spans(format!("ex{id}"), tokens, &spans).unwrap()
}
