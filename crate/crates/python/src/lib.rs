//! Python bindings: `import tagcast_py`.
//!
//! Spans cross the boundary as `(start, end, tag)` tuples with inclusive
//! ends; labels as strings such as `"B-ARTIST"`.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;
use rand::rngs::StdRng;
use rand::SeedableRng;

use tagcast::metrics::SpanTally;
use tagcast::{Label, Perturbation, Prediction, Span, Tag};

type SpanTuple = (usize, usize, String);

fn value_error(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_tuple(s: &Span) -> SpanTuple {
    (s.start, s.end, s.tag.to_string())
}

fn from_tuples(spans: Vec<SpanTuple>) -> PyResult<Vec<Span>> {
    spans
        .into_iter()
        .map(|(s, e, t)| {
            if s > e {
                return Err(value_error(format!(
                    "span ({s},{e},{t}) ends before it starts"
                )));
            }
            Ok(Span::new(s, e, Tag::new(t).map_err(value_error)?))
        })
        .collect()
}

fn parse_labels(labels: &[String]) -> PyResult<Vec<Label>> {
    labels
        .iter()
        .map(|l| l.parse().map_err(value_error))
        .collect()
}

/// One of the 13 target formats, built from its name, e.g.
/// `FormatSpec("sentinel-tag+si")`.
#[pyclass(name = "FormatSpec", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyFormatSpec(tagcast::FormatSpec);

#[pymethods]
impl PyFormatSpec {
    #[new]
    fn new(name: &str) -> PyResult<Self> {
        name.parse().map(PyFormatSpec).map_err(value_error)
    }

    #[staticmethod]
    #[pyo3(signature = (family, si=false, so=false, extractive_simplified=false))]
    fn from_parts(family: &str, si: bool, so: bool, extractive_simplified: bool) -> PyResult<Self> {
        let family = family.parse().map_err(value_error)?;
        tagcast::FormatSpec::new(family, si, so, extractive_simplified)
            .map(PyFormatSpec)
            .map_err(value_error)
    }

    #[getter]
    fn name(&self) -> String {
        self.0.name()
    }

    #[getter]
    fn family(&self) -> &'static str {
        self.0.family().name()
    }

    fn __str__(&self) -> String {
        self.0.name()
    }

    fn __repr__(&self) -> String {
        format!("FormatSpec({:?})", self.0.name())
    }

    fn __eq__(&self, other: &Self) -> bool {
        self.0 == other.0
    }
}

#[pyclass(name = "TaggedExample", frozen, from_py_object)]
#[derive(Clone)]
struct PyTaggedExample(tagcast::TaggedExample);

#[pymethods]
impl PyTaggedExample {
    /// Stray inside labels are repaired to begin labels.
    #[new]
    #[pyo3(signature = (tokens, labels, id="ex0"))]
    fn new(tokens: Vec<String>, labels: Vec<String>, id: &str) -> PyResult<Self> {
        let tokens = tokens
            .into_iter()
            .map(|t| tagcast::Token::new(t).map_err(value_error))
            .collect::<PyResult<Vec<_>>>()?;
        let labels = parse_labels(&labels)?;
        tagcast::TaggedExample::new(id, tokens, labels)
            .map(PyTaggedExample)
            .map_err(value_error)
    }

    #[getter]
    fn id(&self) -> &str {
        self.0.id()
    }

    #[getter]
    fn tokens(&self) -> Vec<String> {
        self.0.token_texts().into_iter().map(String::from).collect()
    }

    #[getter]
    fn labels(&self) -> Vec<String> {
        self.0.labels().iter().map(ToString::to_string).collect()
    }

    #[getter]
    fn spans(&self) -> Vec<SpanTuple> {
        self.0.spans().iter().map(to_tuple).collect()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    fn __repr__(&self) -> String {
        format!(
            "TaggedExample(id={:?}, tokens={:?})",
            self.0.id(),
            self.0.token_texts()
        )
    }
}

#[pyfunction]
fn all_formats() -> Vec<PyFormatSpec> {
    tagcast::FormatSpec::all()
        .into_iter()
        .map(PyFormatSpec)
        .collect()
}

#[pyfunction]
fn encode_input(example: &PyTaggedExample, format: &PyFormatSpec) -> PyResult<String> {
    tagcast::encode_input(&example.0, &format.0).map_err(value_error)
}

#[pyfunction]
fn encode_target(example: &PyTaggedExample, format: &PyFormatSpec) -> PyResult<String> {
    tagcast::encode_target(&example.0, &format.0).map_err(value_error)
}

/// Decodes generated text. Returns a dict with `spans` (or `phrases` for
/// extractive tagged spans), `flagged`, `categories`,
/// `reconstructed_tokens` and `warnings`.
#[pyfunction]
fn decode<'py>(
    py: Python<'py>,
    example: &PyTaggedExample,
    generated: &str,
    format: &PyFormatSpec,
) -> PyResult<Bound<'py, PyDict>> {
    let result = tagcast::decode(&example.0, generated, &format.0);
    let out = PyDict::new(py);
    match &result.prediction {
        Prediction::Spans(spans) => {
            out.set_item("spans", spans.iter().map(to_tuple).collect::<Vec<_>>())?;
            out.set_item("phrases", py.None())?;
        }
        Prediction::Phrases(phrases) => {
            out.set_item("spans", py.None())?;
            let phrases: Vec<(String, String)> = phrases
                .iter()
                .map(|p| (p.tag.to_string(), p.text.clone()))
                .collect();
            out.set_item("phrases", phrases)?;
        }
    }
    let report = &result.hallucination;
    out.set_item("flagged", report.flagged)?;
    out.set_item(
        "categories",
        report
            .categories
            .iter()
            .map(ToString::to_string)
            .collect::<Vec<_>>(),
    )?;
    out.set_item("reconstructed_tokens", result.reconstructed_tokens.clone())?;
    let warnings: Vec<(usize, String)> = result
        .warnings
        .iter()
        .map(|w| (w.position, format!("{:?}", w.code)))
        .collect();
    out.set_item("warnings", warnings)?;
    Ok(out)
}

#[pyfunction]
fn labels_to_spans(labels: Vec<String>) -> PyResult<Vec<SpanTuple>> {
    let mut labels = parse_labels(&labels)?;
    tagcast::model::repair_iob2(&mut labels);
    Ok(tagcast::labels_to_spans(&labels)
        .iter()
        .map(to_tuple)
        .collect())
}

#[pyfunction]
fn spans_to_labels(spans: Vec<SpanTuple>, n_tokens: usize) -> PyResult<Vec<String>> {
    let spans = from_tuples(spans)?;
    let labels = tagcast::spans_to_labels(&spans, n_tokens).map_err(value_error)?;
    Ok(labels.iter().map(ToString::to_string).collect())
}

/// Exact-match span scores over `(gold, pred)` pairs of span lists.
#[pyfunction]
fn span_f1<'py>(
    py: Python<'py>,
    pairs: Vec<(Vec<SpanTuple>, Vec<SpanTuple>)>,
) -> PyResult<Bound<'py, PyDict>> {
    let mut tally = SpanTally::default();
    for (gold, pred) in pairs {
        tally.add(&from_tuples(gold)?, &from_tuples(pred)?);
    }
    let micro = tally.micro();
    let out = PyDict::new(py);
    out.set_item("tp", micro.tp)?;
    out.set_item("fp", micro.fp)?;
    out.set_item("fn", micro.fn_)?;
    out.set_item("precision", micro.precision())?;
    out.set_item("recall", micro.recall())?;
    out.set_item("micro_f1", micro.f1())?;
    out.set_item("macro_f1", tally.macro_f1())?;
    Ok(out)
}

#[pyfunction]
fn dataset_stats<'py>(
    py: Python<'py>,
    examples: Vec<PyTaggedExample>,
) -> PyResult<Bound<'py, PyDict>> {
    let s = tagcast::dataset_stats(examples.iter().map(|e| &e.0)).map_err(value_error)?;
    let out = PyDict::new(py);
    out.set_item("n_examples", s.n_examples)?;
    out.set_item("tokens_per_example", s.tokens_per_example)?;
    out.set_item("spans_per_example", s.spans_per_example)?;
    out.set_item("pct_tokens_tagged", s.pct_tokens_tagged)?;
    out.set_item("n_tag_classes", s.n_tag_classes)?;
    out.set_item("tag_entropy", s.tag_entropy)?;
    Ok(out)
}

/// Applies one named corruption (`substitute`, `insert`, `delete`,
/// `drop-sentinel`, `duplicate-sentinel`, `drop-label`) to a clean target.
/// Returns `None` when it does not apply.
#[pyfunction]
#[pyo3(signature = (target, format, kind, seed=0))]
fn perturb(target: &str, format: &PyFormatSpec, kind: &str, seed: u64) -> PyResult<Option<String>> {
    let p: Perturbation = kind.parse().map_err(value_error)?;
    let mut rng = StdRng::seed_from_u64(seed);
    Ok(p.apply(target, &format.0, &mut rng))
}

#[pymodule]
fn tagcast_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyFormatSpec>()?;
    m.add_class::<PyTaggedExample>()?;
    m.add_function(wrap_pyfunction!(all_formats, m)?)?;
    m.add_function(wrap_pyfunction!(encode_input, m)?)?;
    m.add_function(wrap_pyfunction!(encode_target, m)?)?;
    m.add_function(wrap_pyfunction!(decode, m)?)?;
    m.add_function(wrap_pyfunction!(labels_to_spans, m)?)?;
    m.add_function(wrap_pyfunction!(spans_to_labels, m)?)?;
    m.add_function(wrap_pyfunction!(span_f1, m)?)?;
    m.add_function(wrap_pyfunction!(dataset_stats, m)?)?;
    m.add_function(wrap_pyfunction!(perturb, m)?)?;
    Ok(())
}
