//! Sequence-to-sequence formats for BIO sequence tagging.
//!
//! A [`TaggedExample`] is rendered into an (input, target) string pair in one
//! of thirteen target formats ([`FormatSpec::all`]). Generated targets are
//! decoded back into spans leniently, with a report of any tokens or
//! sentinels the model invented, dropped or changed. Span-level metrics and
//! corpus statistics work on the decoded results.
//!
//! ```
//! use tagcast::{decode, encode, FormatSpec, TaggedExample};
//!
//! let ex = TaggedExample::parse(
//!     "ex0",
//!     &["Add", "Kent", "James", "to", "the", "Disney", "soundtrack"],
//!     &["O", "B-ARTIST", "I-ARTIST", "O", "O", "B-PLAYLIST", "O"],
//! )
//! .unwrap();
//! let format: FormatSpec = "tag-only".parse().unwrap();
//! let pair = encode(&ex, &format).unwrap();
//! assert_eq!(pair.target, "O ARTIST I-ARTIST O O PLAYLIST O");
//!
//! let result = decode(&ex, &pair.target, &format);
//! assert_eq!(result.prediction.spans().unwrap(), ex.spans());
//! assert!(!result.hallucination.flagged);
//! ```

pub mod align;
pub mod dataio;
pub mod decode;
pub mod encode;
pub mod format;
pub mod metrics;
pub mod model;
pub mod perturb;
pub mod stats;

pub use decode::{decode, Category, DecodeResult, Decoder, HallucinationReport, Prediction};
pub use encode::{encode, encode_input, encode_target, EncodeError, EncodedPair};
pub use format::{Family, FormatError, FormatSpec, Markup, SentinelSpacing};
pub use metrics::{perfect_metric, span_f1, MetricsReport};
pub use model::{
    labels_to_spans, spans_to_labels, Label, ModelError, Phrase, Span, Tag, TagSet, TaggedExample,
    Token,
};
pub use perturb::Perturbation;
pub use stats::{dataset_stats, length_stats, DatasetStats};
