use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use tagcast::dataio::{self, Corpus, PredictionRecord, PredictionSyntax};
use tagcast::{Markup, TaggedExample};

use crate::{CorpusFormat, Failure, InputArgs};

pub const WORKERS_VAR: &str = "TAGCAST_WORKERS";

/// Worker pool sized by `TAGCAST_WORKERS`, or rayon's default.
pub fn worker_pool() -> Result<rayon::ThreadPool, Failure> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(raw) = std::env::var(WORKERS_VAR) {
        match raw.trim().parse::<usize>() {
            Ok(n) if n > 0 => builder = builder.num_threads(n),
            _ => {
                return Err(Failure::Usage(format!(
                    "{WORKERS_VAR} must be a positive integer, got {raw:?}"
                )))
            }
        }
    }
    builder.build().map_err(|e| Failure::Usage(e.to_string()))
}

fn open(path: &Path) -> Result<Box<dyn BufRead>, Failure> {
    if path.as_os_str() == "-" {
        return Ok(Box::new(BufReader::new(io::stdin())));
    }
    let file = File::open(path).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))?;
    Ok(Box::new(BufReader::new(file)))
}

pub fn output(path: Option<&Path>) -> Result<Box<dyn Write>, Failure> {
    match path {
        None => Ok(Box::new(BufWriter::new(io::stdout()))),
        Some(p) if p.as_os_str() == "-" => Ok(Box::new(BufWriter::new(io::stdout()))),
        Some(p) => {
            let file =
                File::create(p).map_err(|e| Failure::Data(format!("{}: {e}", p.display())))?;
            Ok(Box::new(BufWriter::new(file)))
        }
    }
}

pub fn write_failed(e: io::Error) -> Failure {
    Failure::Data(format!("write failed: {e}"))
}

/// Reads the corpus named by `--input`, reporting repairs as warnings.
pub fn read_corpus(args: &InputArgs, markup: &Markup) -> Result<Vec<TaggedExample>, Failure> {
    let path = &args.input;
    let format =
        args.input_format
            .unwrap_or_else(|| match path.extension().and_then(|e| e.to_str()) {
                Some("jsonl" | "json") => CorpusFormat::Jsonl,
                _ => CorpusFormat::Conll,
            });
    let reader = open(path)?;
    let corpus: Corpus = match format {
        CorpusFormat::Conll => dataio::read_conll(reader, markup),
        CorpusFormat::Jsonl => dataio::read_jsonl_examples(reader, markup),
    }
    .map_err(|e| Failure::Data(format!("{}: {e}", path.display())))?;
    for w in &corpus.warnings {
        log::warn!("{}:{}: {}", path.display(), w.line, w.message);
    }
    Ok(corpus.examples)
}

pub fn read_predictions(path: &Path) -> Result<Vec<PredictionRecord>, Failure> {
    dataio::read_predictions(open(path)?, PredictionSyntax::Auto)
        .map_err(|e| Failure::Data(format!("{}: {e}", path.display())))
}
