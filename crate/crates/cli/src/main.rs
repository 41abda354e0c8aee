use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use tagcast::dataio::OutputMode;
use tagcast::{Family, FormatSpec, Markup, Perturbation, SentinelSpacing};

mod commands;
mod io;

/// Encode BIO-tagged corpora into seq2seq pairs, decode model output, and
/// score it.
#[derive(Parser)]
#[command(name = "tagcast", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write (input, target) pairs for a corpus.
    Encode {
        #[command(flatten)]
        format: FormatArgs,
        #[command(flatten)]
        io: InputArgs,
        #[arg(long, value_enum, default_value_t = Mode::Jsonl)]
        output_mode: Mode,
    },
    /// Decode predictions against a gold corpus, one JSON line per candidate.
    Decode {
        #[command(flatten)]
        format: FormatArgs,
        #[command(flatten)]
        io: InputArgs,
        /// Predictions: JSONL {"id", "candidates"} or one target per line.
        #[arg(long)]
        pred: PathBuf,
    },
    /// Score predictions against a gold corpus.
    Eval {
        #[command(flatten)]
        format: FormatArgs,
        /// Gold corpus (CoNLL or JSONL).
        #[arg(long)]
        gold: PathBuf,
        #[arg(long, value_enum)]
        input_format: Option<CorpusFormat>,
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
        /// Also report whether any of the first K candidates is exact.
        #[arg(long)]
        k: Option<usize>,
        /// Score spans by token index (on) or also require the copied words
        /// to match the input (off).
        #[arg(long, value_enum, default_value_t = Switch::On)]
        index_eval: Switch,
    },
    /// Corpus statistics and encoded length statistics.
    Stats {
        #[command(flatten)]
        format: FormatArgs,
        #[command(flatten)]
        io: InputArgs,
        #[arg(long, value_enum, default_value_t = TokenizerKind::Whitespace)]
        tokenizer: TokenizerKind,
    },
    /// Check that decoding every encoded target gives back the gold spans.
    Roundtrip {
        #[command(flatten)]
        format: FormatArgs,
        #[command(flatten)]
        io: InputArgs,
        /// Corrupt each target before decoding, to exercise the checks.
        #[arg(long)]
        inject: Option<Perturbation>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Args)]
struct FormatArgs {
    /// Grammar family, for example sentinel-tag.
    #[arg(long, conflicts_with_all = ["format", "formats"])]
    family: Option<Family>,
    /// Complete format name, for example sentinel-tag+si+so.
    #[arg(long, conflicts_with = "formats")]
    format: Option<FormatSpec>,
    /// `all` selects every admissible format.
    #[arg(long, value_enum)]
    formats: Option<FormatSweep>,
    /// Simplified inside: bare `I` for inside labels.
    #[arg(long, requires = "family")]
    si: bool,
    /// Simplified outside: omit outside labels.
    #[arg(long, requires = "family")]
    so: bool,
    /// Extractive sentinel variant that drops inside labels.
    #[arg(long, requires = "family")]
    extractive_simplified: bool,
    #[arg(long)]
    sentinel_template: Option<String>,
    #[arg(long)]
    open_tag_template: Option<String>,
    #[arg(long)]
    inside_tag_template: Option<String>,
    #[arg(long)]
    close_marker: Option<String>,
    #[arg(long)]
    eos: Option<String>,
    /// Whether input sentinels are followed by a space.
    #[arg(long)]
    spacing: Option<SentinelSpacing>,
    #[arg(long)]
    max_sentinel: Option<usize>,
}

#[derive(Args)]
struct InputArgs {
    /// Corpus path, `-` for standard input.
    #[arg(long, default_value = "-")]
    input: PathBuf,
    /// Defaults to JSONL for `.jsonl`/`.json` paths and CoNLL otherwise.
    #[arg(long, value_enum)]
    input_format: Option<CorpusFormat>,
    /// Output path; standard output when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatSweep {
    All,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CorpusFormat {
    Conll,
    Jsonl,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Tsv,
    Jsonl,
}

impl From<Mode> for OutputMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Tsv => OutputMode::Tsv,
            Mode::Jsonl => OutputMode::Jsonl,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Switch {
    On,
    Off,
}

#[derive(Clone, Copy, ValueEnum)]
enum TokenizerKind {
    Whitespace,
    Bytes,
}

/// How a run ended; mapped onto the process exit status.
#[derive(Debug)]
pub enum Failure {
    /// A roundtrip or consistency check did not hold.
    Check(String),
    Usage(String),
    Data(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Check(_) => 1,
            Failure::Usage(_) => 2,
            Failure::Data(_) => 3,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Check(m) => write!(f, "check failed: {m}"),
            Failure::Usage(m) => write!(f, "usage: {m}"),
            Failure::Data(m) => write!(f, "data error: {m}"),
        }
    }
}

impl FormatArgs {
    fn markup(&self) -> Result<Markup, Failure> {
        let usage = |e: tagcast::FormatError| Failure::Usage(e.to_string());
        let mut m = Markup::default();
        if let Some(t) = &self.sentinel_template {
            m = m.with_sentinel_template(t).map_err(usage)?;
        }
        if let Some(t) = &self.open_tag_template {
            m = m.with_open_tag_template(t).map_err(usage)?;
        }
        if let Some(t) = &self.inside_tag_template {
            m = m.with_inside_tag_template(t).map_err(usage)?;
        }
        if let Some(t) = &self.close_marker {
            m = m.with_close_marker(t).map_err(usage)?;
        }
        if let Some(t) = &self.eos {
            m = m.with_eos(t).map_err(usage)?;
        }
        if let Some(s) = self.spacing {
            m = m.with_spacing(s);
        }
        if let Some(n) = self.max_sentinel {
            m = m.with_max_sentinel(n);
        }
        Ok(m)
    }

    /// Formats selected by the flags; `None` when none were given.
    fn selected(&self) -> Result<Option<Vec<FormatSpec>>, Failure> {
        let markup = self.markup()?;
        let specs = if let Some(family) = self.family {
            vec![
                FormatSpec::new(family, self.si, self.so, self.extractive_simplified)
                    .map_err(|e| Failure::Usage(e.to_string()))?,
            ]
        } else if let Some(f) = &self.format {
            vec![f.clone()]
        } else if self.formats.is_some() {
            FormatSpec::all()
        } else {
            return Ok(None);
        };
        Ok(Some(
            specs
                .into_iter()
                .map(|f| f.with_markup(markup.clone()))
                .collect(),
        ))
    }

    /// Exactly one format, for commands that work on a single grammar.
    fn single(&self) -> Result<FormatSpec, Failure> {
        match self.selected()? {
            Some(mut v) if v.len() == 1 => Ok(v.remove(0)),
            Some(_) => Err(Failure::Usage("this command takes a single format".into())),
            None => Err(Failure::Usage(
                "a format is required: pass --family or --format".into(),
            )),
        }
    }

    /// The selected formats, or all of them.
    fn sweep(&self) -> Result<Vec<FormatSpec>, Failure> {
        match self.selected()? {
            Some(v) => Ok(v),
            None => Ok(FormatSpec::all()
                .into_iter()
                .map(|f| f.with_markup(self.markup().expect("checked by selected")))
                .collect()),
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let pool = io::worker_pool()?;
    pool.install(|| match cli.command {
        Command::Encode {
            format,
            io,
            output_mode,
        } => {
            let format = format.single()?;
            commands::encode(&io, &format, output_mode.into())
        }
        Command::Decode { format, io, pred } => {
            let format = format.single()?;
            commands::decode(&io, &format, &pred)
        }
        Command::Eval {
            format,
            gold,
            input_format,
            pred,
            output,
            k,
            index_eval,
        } => {
            let format = format.single()?;
            if k == Some(0) {
                return Err(Failure::Usage("--k must be positive".into()));
            }
            let io = InputArgs {
                input: gold,
                input_format,
                output,
            };
            commands::eval(&io, &format, &pred, k, index_eval == Switch::On)
        }
        Command::Stats {
            format,
            io,
            tokenizer,
        } => {
            let formats = format.sweep()?;
            commands::stats(&io, &formats, tokenizer)
        }
        Command::Roundtrip {
            format,
            io,
            inject,
            seed,
        } => {
            let formats = format.sweep()?;
            commands::roundtrip(&io, &formats, inject, seed)
        }
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("tagcast: {failure}");
            ExitCode::from(failure.code())
        }
    }
}
