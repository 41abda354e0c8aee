//! On-disk formats: CoNLL and JSONL corpora, encoded pair files, and
//! prediction files.
//!
//! Readers accept UTF-8 with an optional BOM and either LF or CRLF line
//! endings. Writers emit LF and are byte-stable for identical input.
//!
//! CoNLL: one `token<TAB>label` per line (a run of spaces is accepted in
//! place of the tab; the label is whatever follows the last run), blank
//! lines between examples, and an optional `# id: NAME` line before a block.
//! Blocks without an id line are named `ex{n}` by position.

use std::collections::HashSet;
use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::encode::EncodedPair;
use crate::format::{FormatSpec, Markup};
use crate::model::{Label, ModelError, TaggedExample, Token};

#[derive(Debug, Error)]
pub enum DataError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("line {line}: {reason}")]
    MalformedLine { line: usize, reason: String },
    #[error("line {line}: invalid label {label:?}")]
    LabelSyntax { line: usize, label: String },
    #[error("line {line}: token {token:?} collides with a markup literal")]
    ReservedTokenCollision { line: usize, token: String },
    #[error("line {line}: duplicate id {id:?}")]
    DuplicateId { line: usize, id: String },
    #[error("line {line}: record has no candidates")]
    EmptyCandidates { line: usize },
}

impl DataError {
    /// 1-based line the error refers to, when there is one.
    pub fn line(&self) -> Option<usize> {
        match self {
            DataError::Io(_) => None,
            DataError::MalformedLine { line, .. }
            | DataError::LabelSyntax { line, .. }
            | DataError::ReservedTokenCollision { line, .. }
            | DataError::DuplicateId { line, .. }
            | DataError::EmptyCandidates { line } => Some(*line),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DataWarning {
    pub line: usize,
    pub message: String,
}

/// Examples read from a corpus, plus the repairs applied on the way in.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    pub examples: Vec<TaggedExample>,
    pub warnings: Vec<DataWarning>,
}

/// Reads all lines, dropping a leading BOM and trailing CR.
fn read_lines(reader: impl BufRead) -> io::Result<Vec<String>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let mut line = line?;
        if i == 0 && line.starts_with('\u{feff}') {
            line.drain(..'\u{feff}'.len_utf8());
        }
        if line.ends_with('\r') {
            line.pop();
        }
        out.push(line);
    }
    Ok(out)
}

struct CorpusBuilder<'m> {
    markup: &'m Markup,
    corpus: Corpus,
    ids: HashSet<String>,
}

impl<'m> CorpusBuilder<'m> {
    fn new(markup: &'m Markup) -> Self {
        CorpusBuilder {
            markup,
            corpus: Corpus::default(),
            ids: HashSet::new(),
        }
    }

    fn token(&self, text: &str, line: usize) -> Result<Token, DataError> {
        let token = Token::new(text).map_err(|e| DataError::MalformedLine {
            line,
            reason: e.to_string(),
        })?;
        if self.markup.is_reserved(text) {
            return Err(DataError::ReservedTokenCollision {
                line,
                token: text.to_string(),
            });
        }
        Ok(token)
    }

    fn label(text: &str, line: usize) -> Result<Label, DataError> {
        text.parse().map_err(|_| DataError::LabelSyntax {
            line,
            label: text.to_string(),
        })
    }

    /// `lines[i]` is the source line of token `i`; `first_line` names the
    /// example for error reporting.
    fn push(
        &mut self,
        id: Option<String>,
        tokens: Vec<Token>,
        labels: Vec<Label>,
        lines: &[usize],
        first_line: usize,
    ) -> Result<(), DataError> {
        let id = id.unwrap_or_else(|| format!("ex{}", self.corpus.examples.len()));
        if !self.ids.insert(id.clone()) {
            return Err(DataError::DuplicateId {
                line: first_line,
                id,
            });
        }
        let (ex, repaired) = TaggedExample::with_repairs(id, tokens, labels).map_err(|e| {
            DataError::MalformedLine {
                line: first_line,
                reason: e.to_string(),
            }
        })?;
        for pos in repaired {
            let label = &ex.labels()[pos];
            self.corpus.warnings.push(DataWarning {
                line: lines.get(pos).copied().unwrap_or(first_line),
                message: format!("inside label repaired to {label} in {}", ex.id()),
            });
        }
        self.corpus.examples.push(ex);
        Ok(())
    }
}

/// Splits a CoNLL line into token and label.
fn split_conll_line(line: &str) -> Option<(&str, &str)> {
    if let Some((tok, label)) = line.split_once('\t') {
        return Some((tok, label));
    }
    let pos = line.rfind(' ')?;
    let tok = line[..pos].trim_end_matches(' ');
    Some((tok, &line[pos + 1..]))
}

pub fn read_conll(reader: impl BufRead, markup: &Markup) -> Result<Corpus, DataError> {
    let mut builder = CorpusBuilder::new(markup);
    let mut id: Option<String> = None;
    let mut tokens = Vec::new();
    let mut labels = Vec::new();
    let mut lines = Vec::new();

    let flush = |builder: &mut CorpusBuilder,
                 id: &mut Option<String>,
                 tokens: &mut Vec<Token>,
                 labels: &mut Vec<Label>,
                 lines: &mut Vec<usize>|
     -> Result<(), DataError> {
        if tokens.is_empty() {
            return Ok(());
        }
        let first = lines[0];
        builder.push(
            id.take(),
            std::mem::take(tokens),
            std::mem::take(labels),
            lines,
            first,
        )?;
        lines.clear();
        Ok(())
    };

    for (i, raw) in read_lines(reader)?.iter().enumerate() {
        let line_no = i + 1;
        let line = raw.trim_end();
        if line.is_empty() {
            flush(&mut builder, &mut id, &mut tokens, &mut labels, &mut lines)?;
            continue;
        }
        if let Some(rest) = line.strip_prefix("# id:") {
            flush(&mut builder, &mut id, &mut tokens, &mut labels, &mut lines)?;
            id = Some(rest.trim().to_string());
            continue;
        }
        let (tok, label) = split_conll_line(line).ok_or_else(|| DataError::MalformedLine {
            line: line_no,
            reason: "expected `token<TAB>label`".to_string(),
        })?;
        tokens.push(builder.token(tok, line_no)?);
        labels.push(CorpusBuilder::label(label.trim(), line_no)?);
        lines.push(line_no);
    }
    flush(&mut builder, &mut id, &mut tokens, &mut labels, &mut lines)?;
    Ok(builder.corpus)
}

#[derive(Deserialize)]
struct JsonExample {
    id: Option<String>,
    tokens: Vec<String>,
    labels: Vec<String>,
}

/// One `{"id": .., "tokens": [..], "labels": [..]}` object per line; `id`
/// may be omitted.
pub fn read_jsonl_examples(reader: impl BufRead, markup: &Markup) -> Result<Corpus, DataError> {
    let mut builder = CorpusBuilder::new(markup);
    for (i, line) in read_lines(reader)?.iter().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let raw: JsonExample =
            serde_json::from_str(line).map_err(|e| DataError::MalformedLine {
                line: line_no,
                reason: e.to_string(),
            })?;
        let tokens = raw
            .tokens
            .iter()
            .map(|t| builder.token(t, line_no))
            .collect::<Result<Vec<_>, _>>()?;
        let labels = raw
            .labels
            .iter()
            .map(|l| CorpusBuilder::label(l, line_no))
            .collect::<Result<Vec<_>, _>>()?;
        if tokens.is_empty() {
            return Err(DataError::MalformedLine {
                line: line_no,
                reason: ModelError::EmptyToken.to_string(),
            });
        }
        let lines = vec![line_no; tokens.len()];
        builder.push(raw.id, tokens, labels, &lines, line_no)?;
    }
    Ok(builder.corpus)
}

pub fn write_conll(examples: &[TaggedExample], mut w: impl Write) -> io::Result<()> {
    for (i, ex) in examples.iter().enumerate() {
        if i > 0 {
            writeln!(w)?;
        }
        writeln!(w, "# id: {}", ex.id())?;
        for (tok, label) in ex.tokens().iter().zip(ex.labels()) {
            writeln!(w, "{tok}\t{label}")?;
        }
    }
    Ok(())
}

pub fn write_jsonl_examples(examples: &[TaggedExample], mut w: impl Write) -> io::Result<()> {
    for ex in examples {
        serde_json::to_writer(&mut w, ex)?;
        writeln!(w)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OutputMode {
    /// `id<TAB>input<TAB>target`
    Tsv,
    /// `{"id","input","target","format"}`
    #[default]
    Jsonl,
}

pub fn write_encoded(pairs: &[EncodedPair], mode: OutputMode, mut w: impl Write) -> io::Result<()> {
    for pair in pairs {
        match mode {
            OutputMode::Tsv => writeln!(w, "{}\t{}\t{}", pair.id, pair.input, pair.target)?,
            OutputMode::Jsonl => {
                serde_json::to_writer(&mut w, pair)?;
                writeln!(w)?;
            }
        }
    }
    Ok(())
}

#[derive(Deserialize)]
struct JsonPair {
    id: String,
    input: String,
    target: String,
    format: String,
}

/// Reads pairs written in JSONL mode; the format name is resolved against
/// `markup`.
pub fn read_encoded_jsonl(
    reader: impl BufRead,
    markup: &Markup,
) -> Result<Vec<EncodedPair>, DataError> {
    let mut out = Vec::new();
    for (i, line) in read_lines(reader)?.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |reason: String| DataError::MalformedLine {
            line: i + 1,
            reason,
        };
        let raw: JsonPair = serde_json::from_str(line).map_err(|e| bad(e.to_string()))?;
        let format: FormatSpec = raw
            .format
            .parse()
            .map_err(|e: crate::format::FormatError| bad(e.to_string()))?;
        out.push(EncodedPair {
            id: raw.id,
            input: raw.input,
            target: raw.target,
            format: format.with_markup(markup.clone()),
        });
    }
    Ok(out)
}

/// Reads pairs written in TSV mode, which do not record their format.
pub fn read_encoded_tsv(
    reader: impl BufRead,
    format: &FormatSpec,
) -> Result<Vec<EncodedPair>, DataError> {
    let mut out = Vec::new();
    for (i, line) in read_lines(reader)?.iter().enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let [id, input, target] = fields[..] else {
            return Err(DataError::MalformedLine {
                line: i + 1,
                reason: format!("expected 3 tab-separated fields, found {}", fields.len()),
            });
        };
        out.push(EncodedPair {
            id: id.to_string(),
            input: input.to_string(),
            target: target.to_string(),
            format: format.clone(),
        });
    }
    Ok(out)
}

/// Candidate outputs for one example, best first.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub id: String,
    pub candidates: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PredictionSyntax {
    /// JSONL if the first non-blank line starts with `{`, text otherwise.
    #[default]
    Auto,
    Jsonl,
    /// One best candidate per line; ids `ex0`, `ex1`, ... by line.
    Text,
}

#[derive(Deserialize)]
struct JsonPrediction {
    id: Option<String>,
    candidates: Vec<String>,
}

pub fn read_predictions(
    reader: impl BufRead,
    syntax: PredictionSyntax,
) -> Result<Vec<PredictionRecord>, DataError> {
    let lines = read_lines(reader)?;
    let syntax = match syntax {
        PredictionSyntax::Auto => {
            let first = lines.iter().find(|l| !l.trim().is_empty());
            if first.is_some_and(|l| l.trim_start().starts_with('{')) {
                PredictionSyntax::Jsonl
            } else {
                PredictionSyntax::Text
            }
        }
        s => s,
    };

    let mut records = Vec::new();
    let mut ids = HashSet::new();
    for (i, line) in lines.iter().enumerate() {
        let line_no = i + 1;
        let record = match syntax {
            PredictionSyntax::Text => PredictionRecord {
                id: format!("ex{}", records.len()),
                candidates: vec![line.clone()],
            },
            _ => {
                if line.trim().is_empty() {
                    continue;
                }
                let raw: JsonPrediction =
                    serde_json::from_str(line).map_err(|e| DataError::MalformedLine {
                        line: line_no,
                        reason: e.to_string(),
                    })?;
                if raw.candidates.is_empty() {
                    return Err(DataError::EmptyCandidates { line: line_no });
                }
                PredictionRecord {
                    id: raw.id.unwrap_or_else(|| format!("ex{}", records.len())),
                    candidates: raw.candidates,
                }
            }
        };
        if !ids.insert(record.id.clone()) {
            return Err(DataError::DuplicateId {
                line: line_no,
                id: record.id,
            });
        }
        records.push(record);
    }
    Ok(records)
}

pub fn write_predictions(records: &[PredictionRecord], mut w: impl Write) -> io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        writeln!(w)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encode::encode;
    use crate::format::Family;

    const RUNNING: &str = "Add\tO\nKent\tB-ARTIST\nJames\tI-ARTIST\nto\tO\nthe\tO\nDisney\tB-PLAYLIST\nsoundtrack\tO\n";

    fn conll(text: &str) -> Result<Corpus, DataError> {
        read_conll(text.as_bytes(), &Markup::default())
    }

    #[test]
    fn running_example_block() {
        let c = conll(RUNNING).unwrap();
        assert_eq!(c.examples.len(), 1);
        assert_eq!(c.examples[0].id(), "ex0");
        assert_eq!(c.examples[0].spans().len(), 2);
        assert!(c.warnings.is_empty());
    }

    #[test]
    fn empty_file() {
        assert!(conll("").unwrap().examples.is_empty());
        assert!(conll("\n\n").unwrap().examples.is_empty());
    }

    #[test]
    fn leading_inside_repaired_with_warning() {
        let c = conll("Kent I-ARTIST\nJames I-ARTIST\n").unwrap();
        assert_eq!(c.examples[0].labels()[0].to_string(), "B-ARTIST");
        assert_eq!(c.warnings.len(), 1);
        assert_eq!(c.warnings[0].line, 1);
    }

    #[test]
    fn bom_crlf_spaces_and_ids() {
        let text = "\u{feff}# id: first\r\nAdd   O\r\nKent\tB-A\r\n\r\nx O\n\n\n# id: third\ny O\n";
        let c = conll(text).unwrap();
        let ids: Vec<&str> = c.examples.iter().map(|e| e.id()).collect();
        assert_eq!(ids, ["first", "ex1", "third"]);
        assert_eq!(c.examples[0].token_texts(), ["Add", "Kent"]);
    }

    #[test]
    fn conll_errors_carry_line_numbers() {
        let err = conll("Add O\nKent\n").unwrap_err();
        assert!(matches!(err, DataError::MalformedLine { line: 2, .. }));
        let err = conll("Add O\nKent B-\n").unwrap_err();
        assert!(matches!(err, DataError::LabelSyntax { line: 2, .. }));
        let err = conll("Add O\n</> O\n").unwrap_err();
        assert!(matches!(
            err,
            DataError::ReservedTokenCollision { line: 2, .. }
        ));
        let err = conll("# id: a\nx O\n\n# id: a\ny O\n").unwrap_err();
        assert!(matches!(err, DataError::DuplicateId { line: 5, .. }));
        assert_eq!(err.line(), Some(5));
    }

    #[test]
    fn conll_and_jsonl_round_trip() {
        let c = conll(&format!("{RUNNING}\nhi O\nthere B-X\n")).unwrap();
        let mut buf = Vec::new();
        write_conll(&c.examples, &mut buf).unwrap();
        assert_eq!(
            conll(std::str::from_utf8(&buf).unwrap()).unwrap().examples,
            c.examples
        );

        let mut buf = Vec::new();
        write_jsonl_examples(&c.examples, &mut buf).unwrap();
        let back = read_jsonl_examples(&buf[..], &Markup::default()).unwrap();
        assert_eq!(back.examples, c.examples);
    }

    #[test]
    fn jsonl_examples() {
        let text = r#"{"tokens":["Kent","James"],"labels":["I-ARTIST","I-ARTIST"]}
{"id":"b","tokens":["x"],"labels":["O","O"]}"#;
        let err = read_jsonl_examples(text.as_bytes(), &Markup::default()).unwrap_err();
        assert!(matches!(err, DataError::MalformedLine { line: 2, .. }));
        let c = read_jsonl_examples(text.lines().next().unwrap().as_bytes(), &Markup::default())
            .unwrap();
        assert_eq!(c.examples[0].id(), "ex0");
        assert_eq!(c.warnings.len(), 1);
    }

    #[test]
    fn encoded_tsv_line() {
        let c = conll(RUNNING).unwrap();
        let pair = encode(&c.examples[0], &FormatSpec::plain(Family::TaggedSpans)).unwrap();
        let mut buf = Vec::new();
        write_encoded(std::slice::from_ref(&pair), OutputMode::Tsv, &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf.clone()).unwrap(),
            "ex0\tAdd Kent James to the Disney soundtrack\t<O> Add </> <ARTIST> Kent James </> <O> to </> <O> the </> <PLAYLIST> Disney </> <O> soundtrack </>\n"
        );
        let back = read_encoded_tsv(&buf[..], &pair.format).unwrap();
        assert_eq!(back, vec![pair]);

        let mut empty = Vec::new();
        write_encoded(&[], OutputMode::Tsv, &mut empty).unwrap();
        assert!(empty.is_empty());
    }

    #[test]
    fn encoded_jsonl_round_trip() {
        let c = conll(RUNNING).unwrap();
        let pairs: Vec<EncodedPair> = FormatSpec::all()
            .iter()
            .map(|f| encode(&c.examples[0], f).unwrap())
            .collect();
        let mut buf = Vec::new();
        write_encoded(&pairs, OutputMode::Jsonl, &mut buf).unwrap();
        let back = read_encoded_jsonl(&buf[..], &Markup::default()).unwrap();
        assert_eq!(back, pairs);
    }

    #[test]
    fn predictions() {
        let recs = read_predictions("foo\n".as_bytes(), PredictionSyntax::Auto).unwrap();
        assert_eq!(
            recs,
            vec![PredictionRecord {
                id: "ex0".into(),
                candidates: vec!["foo".into()]
            }]
        );
        // an empty line is an empty one-best prediction
        let recs = read_predictions("a\n\nb\n".as_bytes(), PredictionSyntax::Text).unwrap();
        assert_eq!(recs.len(), 3);
        assert_eq!(recs[1].candidates, [""]);

        let jsonl = r#"{"id":"q","candidates":["a","b","c","d","e"]}"#;
        let recs = read_predictions(jsonl.as_bytes(), PredictionSyntax::Auto).unwrap();
        assert_eq!(recs[0].candidates.len(), 5);

        let dup = "{\"id\":\"q\",\"candidates\":[\"a\"]}\n{\"id\":\"q\",\"candidates\":[\"b\"]}\n";
        let err = read_predictions(dup.as_bytes(), PredictionSyntax::Auto).unwrap_err();
        assert!(matches!(err, DataError::DuplicateId { line: 2, .. }));

        let empty = "{\"id\":\"q\",\"candidates\":[]}\n";
        let err = read_predictions(empty.as_bytes(), PredictionSyntax::Jsonl).unwrap_err();
        assert!(matches!(err, DataError::EmptyCandidates { line: 1 }));

        let mut buf = Vec::new();
        write_predictions(&recs, &mut buf).unwrap();
        assert_eq!(
            read_predictions(&buf[..], PredictionSyntax::Auto).unwrap(),
            recs
        );
    }
}
