//! The format taxonomy: six grammar families, their admissible
//! simplifications, and the markup literals they are rendered with.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FormatError {
    #[error("{family} does not support the variant {variant}")]
    Inadmissible { family: Family, variant: String },
    #[error("unknown format family {0:?}")]
    UnknownFamily(String),
    #[error("unknown format name {0:?}")]
    UnknownFormat(String),
    #[error("template {template:?} must contain the placeholder {placeholder} exactly once")]
    BadPlaceholder {
        template: String,
        placeholder: &'static str,
    },
    #[error("markup literal {0:?} must be non-empty and contain no whitespace")]
    BadLiteral(String),
    #[error("unknown sentinel spacing {0:?}")]
    UnknownSpacing(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    TaggedSpans,
    InputTag,
    TagOnly,
    SentinelTag,
    ExtractiveTaggedSpans,
    ExtractiveSentinelTag,
}

impl Family {
    pub const ALL: [Family; 6] = [
        Family::TaggedSpans,
        Family::InputTag,
        Family::TagOnly,
        Family::SentinelTag,
        Family::ExtractiveTaggedSpans,
        Family::ExtractiveSentinelTag,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::TaggedSpans => "tagged-spans",
            Family::InputTag => "input-tag",
            Family::TagOnly => "tag-only",
            Family::SentinelTag => "sentinel-tag",
            Family::ExtractiveTaggedSpans => "extractive-tagged-spans",
            Family::ExtractiveSentinelTag => "extractive-sentinel-tag",
        }
    }

    /// Whether the model input carries one sentinel per token.
    pub fn uses_sentinels(self) -> bool {
        matches!(self, Family::SentinelTag | Family::ExtractiveSentinelTag)
    }

    /// Whether the target repeats input tokens verbatim.
    pub fn repeats_input(self) -> bool {
        matches!(self, Family::TaggedSpans | Family::InputTag)
    }

    pub fn is_extractive(self) -> bool {
        matches!(
            self,
            Family::ExtractiveTaggedSpans | Family::ExtractiveSentinelTag
        )
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = FormatError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Family::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| FormatError::UnknownFamily(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SentinelSpacing {
    /// `<extra_id_0> Add`
    #[default]
    SpaceSeparated,
    /// `<extra_id_0>Add`
    NoSpace,
}

impl FromStr for SentinelSpacing {
    type Err = FormatError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "space" | "space-separated" => Ok(SentinelSpacing::SpaceSeparated),
            "none" | "no-space" => Ok(SentinelSpacing::NoSpace),
            _ => Err(FormatError::UnknownSpacing(s.to_string())),
        }
    }
}

/// A literal with one placeholder, split around it.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Template {
    prefix: String,
    suffix: String,
    placeholder: &'static str,
}

impl Template {
    pub fn parse(template: &str, placeholder: &'static str) -> Result<Self, FormatError> {
        let bad = || FormatError::BadPlaceholder {
            template: template.to_string(),
            placeholder,
        };
        let (prefix, suffix) = template.split_once(placeholder).ok_or_else(bad)?;
        if suffix.contains(placeholder) {
            return Err(bad());
        }
        if prefix.is_empty() && suffix.is_empty() {
            return Err(bad());
        }
        if template.chars().any(char::is_whitespace) {
            return Err(FormatError::BadLiteral(template.to_string()));
        }
        Ok(Template {
            prefix: prefix.to_string(),
            suffix: suffix.to_string(),
            placeholder,
        })
    }

    pub fn render(&self, value: &str) -> String {
        let mut out = String::with_capacity(self.prefix.len() + value.len() + self.suffix.len());
        out.push_str(&self.prefix);
        out.push_str(value);
        out.push_str(&self.suffix);
        out
    }

    /// The placeholder value if `word` is an instance of this template with a
    /// non-empty value.
    pub fn strip<'a>(&self, word: &'a str) -> Option<&'a str> {
        if word.len() <= self.prefix.len() + self.suffix.len() {
            return None;
        }
        word.strip_prefix(self.prefix.as_str())?
            .strip_suffix(self.suffix.as_str())
    }

    pub fn as_template_string(&self) -> String {
        self.render(self.placeholder)
    }
}

impl Serialize for Template {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.as_template_string())
    }
}

pub const SENTINEL_PLACEHOLDER: &str = "{k}";
pub const TAG_PLACEHOLDER: &str = "{tag}";

/// Literals the grammars are rendered with. The defaults reproduce the
/// `<extra_id_k>` / `<TAG>` / `</>` spelling.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct Markup {
    pub sentinel: Template,
    pub open_tag: Template,
    pub inside_tag: Template,
    pub close_marker: String,
    pub spacing: SentinelSpacing,
    /// Largest sentinel index the target vocabulary provides.
    pub max_sentinel: usize,
    /// End-of-sequence literal stripped from generated text before parsing.
    pub eos: String,
}

impl Default for Markup {
    fn default() -> Self {
        Markup {
            sentinel: Template::parse("<extra_id_{k}>", SENTINEL_PLACEHOLDER).unwrap(),
            open_tag: Template::parse("<{tag}>", TAG_PLACEHOLDER).unwrap(),
            inside_tag: Template::parse("<I-{tag}>", TAG_PLACEHOLDER).unwrap(),
            close_marker: "</>".to_string(),
            spacing: SentinelSpacing::SpaceSeparated,
            max_sentinel: 99,
            eos: "</s>".to_string(),
        }
    }
}

impl Markup {
    pub fn with_sentinel_template(mut self, template: &str) -> Result<Self, FormatError> {
        self.sentinel = Template::parse(template, SENTINEL_PLACEHOLDER)?;
        Ok(self)
    }

    pub fn with_open_tag_template(mut self, template: &str) -> Result<Self, FormatError> {
        self.open_tag = Template::parse(template, TAG_PLACEHOLDER)?;
        Ok(self)
    }

    pub fn with_inside_tag_template(mut self, template: &str) -> Result<Self, FormatError> {
        self.inside_tag = Template::parse(template, TAG_PLACEHOLDER)?;
        Ok(self)
    }

    pub fn with_close_marker(mut self, marker: &str) -> Result<Self, FormatError> {
        self.close_marker = check_literal(marker)?;
        Ok(self)
    }

    pub fn with_eos(mut self, eos: &str) -> Result<Self, FormatError> {
        self.eos = check_literal(eos)?;
        Ok(self)
    }

    pub fn with_spacing(mut self, spacing: SentinelSpacing) -> Self {
        self.spacing = spacing;
        self
    }

    pub fn with_max_sentinel(mut self, max_sentinel: usize) -> Self {
        self.max_sentinel = max_sentinel;
        self
    }

    pub fn sentinel(&self, k: usize) -> String {
        self.sentinel.render(&k.to_string())
    }

    /// Index of a sentinel word. Only the canonical decimal spelling is
    /// accepted, so `<extra_id_07>` is not a sentinel.
    pub fn sentinel_index(&self, word: &str) -> Option<usize> {
        let digits = self.sentinel.strip(word)?;
        if !digits.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        if digits.len() > 1 && digits.starts_with('0') {
            return None;
        }
        digits.parse().ok()
    }

    /// Whether an input token would collide with a markup literal.
    pub fn is_reserved(&self, text: &str) -> bool {
        text == self.close_marker
            || text == self.eos
            || self.sentinel.strip(text).is_some()
            || self.open_tag.strip(text).is_some()
            || self.inside_tag.strip(text).is_some()
    }
}

fn check_literal(s: &str) -> Result<String, FormatError> {
    if s.is_empty() || s.chars().any(char::is_whitespace) {
        Err(FormatError::BadLiteral(s.to_string()))
    } else {
        Ok(s.to_string())
    }
}

/// One of the 13 admissible grammars plus its markup.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct FormatSpec {
    family: Family,
    simplified_inside: bool,
    simplified_outside: bool,
    extractive_simplified: bool,
    markup: Markup,
}

impl FormatSpec {
    pub fn new(
        family: Family,
        simplified_inside: bool,
        simplified_outside: bool,
        extractive_simplified: bool,
    ) -> Result<Self, FormatError> {
        use Family::*;
        let (si, so, es) = (simplified_inside, simplified_outside, extractive_simplified);
        let ok = match family {
            TaggedSpans => !si && !es,
            InputTag | SentinelTag => !es && (si || !so),
            TagOnly => !so && !es,
            ExtractiveTaggedSpans => !si && !so && !es,
            ExtractiveSentinelTag => !si && !so,
        };
        if !ok {
            return Err(FormatError::Inadmissible {
                family,
                variant: variant_suffix(si, so, es)
                    .trim_start_matches('+')
                    .to_string(),
            });
        }
        Ok(FormatSpec {
            family,
            simplified_inside: si,
            simplified_outside: so,
            extractive_simplified: es,
            markup: Markup::default(),
        })
    }

    /// The unsimplified grammar of `family`.
    pub fn plain(family: Family) -> Self {
        Self::new(family, false, false, false).expect("plain variants are admissible")
    }

    /// All 13 admissible grammars with default markup.
    pub fn all() -> Vec<FormatSpec> {
        let mut out = Vec::with_capacity(13);
        for family in Family::ALL {
            for bits in 0..8u8 {
                let (si, so, es) = (bits & 1 != 0, bits & 2 != 0, bits & 4 != 0);
                if let Ok(spec) = FormatSpec::new(family, si, so, es) {
                    out.push(spec);
                }
            }
        }
        out
    }

    pub fn with_markup(mut self, markup: Markup) -> Self {
        self.markup = markup;
        self
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn simplified_inside(&self) -> bool {
        self.simplified_inside
    }

    pub fn simplified_outside(&self) -> bool {
        self.simplified_outside
    }

    pub fn extractive_simplified(&self) -> bool {
        self.extractive_simplified
    }

    pub fn markup(&self) -> &Markup {
        &self.markup
    }

    /// Stable name such as `sentinel-tag+si+so` or `extractive-sentinel-tag+s`.
    pub fn name(&self) -> String {
        format!(
            "{}{}",
            self.family,
            variant_suffix(
                self.simplified_inside,
                self.simplified_outside,
                self.extractive_simplified
            )
        )
    }
}

fn variant_suffix(si: bool, so: bool, es: bool) -> String {
    let mut s = String::new();
    if si {
        s.push_str("+si");
    }
    if so {
        s.push_str("+so");
    }
    if es {
        s.push_str("+s");
    }
    s
}

impl fmt::Display for FormatSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for FormatSpec {
    type Err = FormatError;

    /// Parses names produced by [`FormatSpec::name`]; markup is the default.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut parts = s.split('+');
        let family: Family = parts.next().unwrap_or_default().parse()?;
        let (mut si, mut so, mut es) = (false, false, false);
        for flag in parts {
            let slot = match flag {
                "si" => &mut si,
                "so" => &mut so,
                "s" => &mut es,
                _ => return Err(FormatError::UnknownFormat(s.to_string())),
            };
            if *slot {
                return Err(FormatError::UnknownFormat(s.to_string()));
            }
            *slot = true;
        }
        FormatSpec::new(family, si, so, es)
    }
}
