//! Python bindings. Documents and reports cross the boundary as JSON-shaped
//! Python objects; all library errors surface as `ValueError`.

use invoicekit::docmodel::{deserialize_document, serialize_document, FieldKind, Format};
use invoicekit::evalharness::{classify_match as classify, MatchClass};
use invoicekit::ingest::{parse_tesseract_tsv, parse_wordbox_json};
use invoicekit::pipeline::{Pipeline as CorePipeline, Resources};
use invoicekit::textannot::{self, MatchMode};
use invoicekit::PipelineConfig;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

fn value_error(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_py<'py>(py: Python<'py>, json: &str) -> PyResult<Bound<'py, PyAny>> {
    py.import("json")?.call_method1("loads", (json,))
}

fn from_py(obj: &Bound<'_, PyAny>) -> PyResult<String> {
    obj.py().import("json")?.call_method1("dumps", (obj,))?.extract()
}

/// Configured processing run; immutable, so one instance may serve many threads.
#[pyclass(frozen, module = "invoicekit_py")]
struct Pipeline {
    inner: CorePipeline,
}

#[pymethods]
impl Pipeline {
    /// `config` is TOML text; `mode` is "similarity" or "regex".
    #[new]
    #[pyo3(signature = (config=None, mode="similarity"))]
    fn new(config: Option<&str>, mode: &str) -> PyResult<Self> {
        let cfg = match config {
            Some(text) => PipelineConfig::from_toml_str(text).map_err(value_error)?,
            None => PipelineConfig::default(),
        };
        let mode: MatchMode = mode.parse().map_err(value_error)?;
        Ok(Pipeline {
            inner: CorePipeline::new(cfg, mode).map_err(value_error)?,
        })
    }

    /// Layout analysis of OCR output; `format` is "tsv" or "json". Returns a document.
    #[pyo3(signature = (source_id, data, format="tsv"))]
    fn analyze<'py>(&self, py: Python<'py>, source_id: &str, data: &[u8], format: &str) -> PyResult<Bound<'py, PyAny>> {
        let pages = match format {
            "tsv" => parse_tesseract_tsv(data),
            "json" => parse_wordbox_json(data),
            other => return Err(value_error(format!("unknown OCR format {other:?}"))),
        }
        .map_err(value_error)?;
        let doc = py.detach(|| self.inner.layout(source_id, &pages));
        let bytes = serialize_document(&doc, Format::Json);
        to_py(py, std::str::from_utf8(&bytes).map_err(value_error)?)
    }

    /// Annotation and extraction of a document; returns `(annotated document, report)`.
    #[pyo3(signature = (document, lang="auto"))]
    fn extract<'py>(
        &self,
        py: Python<'py>,
        document: &Bound<'py, PyAny>,
        lang: &str,
    ) -> PyResult<(Bound<'py, PyAny>, Bound<'py, PyAny>)> {
        let doc = deserialize_document(from_py(document)?.as_bytes(), Format::Json).map_err(value_error)?;
        let (annotated, report) = py.detach(|| self.inner.extract(&doc, lang)).map_err(value_error)?;
        let doc_json = String::from_utf8(serialize_document(&annotated, Format::Json)).map_err(value_error)?;
        let report_json = serde_json::to_string(&report).map_err(value_error)?;
        Ok((to_py(py, &doc_json)?, to_py(py, &report_json)?))
    }

    /// OCR output straight to an extraction report.
    #[pyo3(signature = (source_id, data, format="tsv", lang="auto"))]
    fn run<'py>(
        &self,
        py: Python<'py>,
        source_id: &str,
        data: &[u8],
        format: &str,
        lang: &str,
    ) -> PyResult<Bound<'py, PyAny>> {
        let doc = self.analyze(py, source_id, data, format)?;
        Ok(self.extract(py, &doc, lang)?.1)
    }
}

/// OCR-aware edit distance with the shipped confusion table.
#[pyfunction]
fn weighted_edit_distance(a: &str, b: &str) -> PyResult<f64> {
    let res = Resources::builtin(&PipelineConfig::default()).map_err(value_error)?;
    Ok(textannot::weighted_edit_distance(a, b, &res.confusions))
}

/// "MATCH", "PARTIAL" or "MISMATCH" for an extracted value against gold.
#[pyfunction]
fn classify_match(gold: &str, extracted: &str, field: &str) -> PyResult<&'static str> {
    let field: FieldKind = serde_json::from_value(serde_json::Value::String(field.to_string())).map_err(value_error)?;
    Ok(match classify(gold, extracted, field, &PipelineConfig::default()) {
        MatchClass::Match => "MATCH",
        MatchClass::Partial => "PARTIAL",
        MatchClass::Mismatch => "MISMATCH",
    })
}

#[pyfunction]
fn iban_valid(iban: &str) -> bool {
    textannot::iban_mod97(iban)
}

#[pyfunction]
fn company_id_valid(ico: &str) -> bool {
    textannot::ico_mod11(ico)
}

#[pymodule]
fn invoicekit_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Pipeline>()?;
    m.add_function(wrap_pyfunction!(weighted_edit_distance, m)?)?;
    m.add_function(wrap_pyfunction!(classify_match, m)?)?;
    m.add_function(wrap_pyfunction!(iban_valid, m)?)?;
    m.add_function(wrap_pyfunction!(company_id_valid, m)?)?;
    Ok(())
}
