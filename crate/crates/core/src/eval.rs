//! Corpus-level geometry metrics.
//!
//! Failed renders count as zero for success metrics and are left out of the
//! distance and overflow metrics (OAR, AEE, TPVR).

use crate::corpus::{build::split_ids, load_sample, CorpusError, CorpusSample};
use crate::plan::LayoutPlan;
use crate::text::TextMeasurer;
use crate::verifier::{verify_with, VerifierConfig};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

#[derive(Debug, Clone)]
pub struct PredictionPair {
    pub sample_id: String,
    pub reference: CorpusSample,
    pub candidate_svg: String,
}

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("prediction {pair} does not match reference {reference}")]
    ReferenceMismatch { pair: String, reference: String },
    #[error("nothing to aggregate")]
    EmptyInput,
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Per-sample metric ingredients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRecord {
    pub sample_id: String,
    pub rendered: bool,
    pub global_fit: bool,
    /// Overflow area over drawing area; `None` when not rendered.
    pub oar: Option<f64>,
    pub elements: usize,
    pub elements_in_canvas: usize,
    pub endpoints: usize,
    pub endpoints_hit: usize,
    /// Normalized errors of endpoints that were actually drawn.
    pub endpoint_errors: Vec<f64>,
    pub texts: usize,
    pub texts_in_box: usize,
    /// `None` when not rendered.
    pub padding_violations: Option<usize>,
    pub predicted_edges: BTreeSet<(String, String)>,
    pub reference_edges: BTreeSet<(String, String)>,
    pub ef1: f64,
    pub clean: f64,
}

/// Elements a correct rendering of `plan` draws: one shape per node, one
/// label per labelled node and one line per connector.
pub fn reference_element_count(plan: &LayoutPlan) -> usize {
    plan.nodes.len() + plan.nodes.iter().filter(|n| !n.label.is_empty()).count() + plan.connectors.len()
}

pub fn evaluate_pair(
    pair: &PredictionPair,
    cfg: &VerifierConfig,
    measurer: &dyn TextMeasurer,
) -> Result<PairRecord, EvalError> {
    if pair.sample_id != pair.reference.sample_id {
        return Err(EvalError::ReferenceMismatch {
            pair: pair.sample_id.clone(),
            reference: pair.reference.sample_id.clone(),
        });
    }
    let plan = &pair.reference.plan;
    let reference_edges = plan.edge_set();
    let v = verify_with(&pair.candidate_svg, plan, cfg, &cfg.weights, measurer);
    let (Some(report), Some(anchors), Some(texts)) = (&v.report, &v.anchors, &v.texts) else {
        let labelled = plan.nodes.iter().filter(|n| !n.label.is_empty()).count();
        return Ok(PairRecord {
            sample_id: pair.sample_id.clone(),
            rendered: false,
            global_fit: false,
            oar: None,
            elements: reference_element_count(plan),
            elements_in_canvas: 0,
            endpoints: plan.connectors.len() * 2,
            endpoints_hit: 0,
            endpoint_errors: Vec::new(),
            texts: labelled,
            texts_in_box: 0,
            padding_violations: None,
            predicted_edges: BTreeSet::new(),
            reference_edges,
            ef1: 0.0,
            clean: 0.0,
        });
    };
    let canvas = plan.canvas.rect();
    let b = &v.breakdown;
    Ok(PairRecord {
        sample_id: pair.sample_id.clone(),
        rendered: true,
        global_fit: b.fit == 1.0,
        // Avoid a negative zero in reports.
        oar: Some(0.0 - b.overflow),
        elements: report.element_bboxes.len(),
        elements_in_canvas: report
            .element_bboxes
            .iter()
            .filter(|e| canvas.contains_rect(&e.bbox))
            .count(),
        endpoints: anchors.endpoints.len(),
        endpoints_hit: anchors.endpoints.iter().filter(|e| e.hit).count(),
        endpoint_errors: anchors.endpoints.iter().filter_map(|e| e.normalized).collect(),
        texts: texts.texts.len(),
        texts_in_box: texts.texts.iter().filter(|t| t.inside).count(),
        padding_violations: Some(texts.texts.iter().filter(|t| t.violation).count()),
        predicted_edges: report.extracted_edges.clone(),
        reference_edges,
        ef1: b.graph,
        clean: b.clean,
    })
}

/// Corpus metrics. Rates are percentages; AEE is a plain ratio.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub rsr: f64,
    pub gfr: f64,
    pub oar: Option<f64>,
    pub eicr: f64,
    pub aacc: f64,
    pub aee: Option<f64>,
    pub tbr: f64,
    pub tpvr: Option<f64>,
    pub ef1: f64,
    pub clean: f64,
    pub n_samples: usize,
    pub n_endpoints: usize,
    pub n_texts: usize,
    pub n_elements: usize,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        // Nothing to get wrong.
        100.0
    } else {
        100.0 * num as f64 / den as f64
    }
}

/// Aggregates records in the given order.
pub fn aggregate(records: &[PairRecord]) -> Result<MetricsReport, EvalError> {
    if records.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let n = records.len() as f64;
    let sum = |f: &dyn Fn(&PairRecord) -> usize| records.iter().map(f).sum::<usize>();
    let rendered: Vec<&PairRecord> = records.iter().filter(|r| r.rendered).collect();
    let oar = (!rendered.is_empty())
        .then(|| 100.0 * rendered.iter().filter_map(|r| r.oar).sum::<f64>() / rendered.len() as f64);
    let errors: Vec<f64> = records.iter().flat_map(|r| r.endpoint_errors.iter().copied()).collect();
    let aee = (!errors.is_empty()).then(|| errors.iter().sum::<f64>() / errors.len() as f64);
    let rendered_texts: usize = rendered.iter().map(|r| r.texts).sum();
    let violations: usize = rendered.iter().filter_map(|r| r.padding_violations).sum();
    let tpvr = (!rendered.is_empty()).then(|| {
        if rendered_texts == 0 {
            0.0
        } else {
            100.0 * violations as f64 / rendered_texts as f64
        }
    });
    let (elements, endpoints, texts) = (sum(&|r| r.elements), sum(&|r| r.endpoints), sum(&|r| r.texts));
    Ok(MetricsReport {
        rsr: 100.0 * rendered.len() as f64 / n,
        gfr: 100.0 * records.iter().filter(|r| r.global_fit).count() as f64 / n,
        oar,
        eicr: ratio(sum(&|r| r.elements_in_canvas), elements),
        aacc: ratio(sum(&|r| r.endpoints_hit), endpoints),
        aee,
        tbr: ratio(sum(&|r| r.texts_in_box), texts),
        tpvr,
        ef1: 100.0 * records.iter().map(|r| r.ef1).sum::<f64>() / n,
        clean: 100.0 * records.iter().map(|r| r.clean).sum::<f64>() / n,
        n_samples: records.len(),
        n_endpoints: endpoints,
        n_texts: texts,
        n_elements: elements,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
    Md,
}

impl ReportFormat {
    pub fn parse(s: &str) -> Option<ReportFormat> {
        match s {
            "json" => Some(ReportFormat::Json),
            "csv" => Some(ReportFormat::Csv),
            "md" | "markdown" => Some(ReportFormat::Md),
            _ => None,
        }
    }
}

pub const METRIC_COLUMNS: [&str; 10] = [
    "RSR", "GFR", "OAR", "EICR", "AAcc", "AEE", "TBR", "TPVR", "E-F1", "Clean",
];

impl MetricsReport {
    /// Metric values in table column order.
    pub fn values(&self) -> [Option<f64>; 10] {
        [
            Some(self.rsr),
            Some(self.gfr),
            self.oar,
            Some(self.eicr),
            Some(self.aacc),
            self.aee,
            Some(self.tbr),
            self.tpvr,
            Some(self.ef1),
            Some(self.clean),
        ]
    }
}

pub fn emit_report(report: &MetricsReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => {
            let mut s = serde_json::to_string_pretty(report).expect("plain data");
            s.push('\n');
            s
        }
        ReportFormat::Csv => {
            let mut s =
                String::from("rsr,gfr,oar,eicr,aacc,aee,tbr,tpvr,ef1,clean,n_samples,n_endpoints,n_texts,n_elements\n");
            let cells: Vec<String> = report
                .values()
                .iter()
                .map(|v| v.map(|x| x.to_string()).unwrap_or_default())
                .chain(
                    [report.n_samples, report.n_endpoints, report.n_texts, report.n_elements]
                        .iter()
                        .map(|c| c.to_string()),
                )
                .collect();
            s.push_str(&cells.join(","));
            s.push('\n');
            s
        }
        ReportFormat::Md => {
            let mut s = String::new();
            let _ = writeln!(s, "| {} |", METRIC_COLUMNS.join(" | "));
            let _ = writeln!(s, "|{}", "---:|".repeat(METRIC_COLUMNS.len()));
            let cells: Vec<String> = report
                .values()
                .iter()
                .zip(METRIC_COLUMNS)
                .map(|(v, name)| match v {
                    None => "n/a".to_string(),
                    Some(x) if name == "AEE" => format!("{x:.3}"),
                    Some(x) => format!("{x:.1}"),
                })
                .collect();
            let _ = writeln!(s, "| {} |", cells.join(" | "));
            let _ = writeln!(
                s,
                "\n{} samples, {} endpoints, {} texts, {} elements.",
                report.n_samples, report.n_endpoints, report.n_texts, report.n_elements
            );
            s
        }
    }
}

/// Evaluation of a prediction directory against a reference split directory.
#[derive(Debug, Clone)]
pub struct CorpusEvaluation {
    pub records: Vec<PairRecord>,
    pub report: MetricsReport,
    /// Reference samples with no candidate file; scored as failed renders.
    pub missing_predictions: Vec<String>,
}

/// Candidate for sample `id` is `<pred_dir>/<id>.svg`.
pub fn evaluate_dirs(
    corpus_dir: &Path,
    pred_dir: &Path,
    cfg: &VerifierConfig,
    measurer: &dyn TextMeasurer,
) -> Result<CorpusEvaluation, EvalError> {
    let ids = split_ids(corpus_dir)?;
    let results: Vec<Result<(PairRecord, bool), EvalError>> = ids
        .par_iter()
        .map(|id| {
            let reference = load_sample(corpus_dir, id)?;
            let path = pred_dir.join(format!("{id}.svg"));
            let (candidate_svg, missing) = match std::fs::read_to_string(&path) {
                Ok(s) => (s, false),
                Err(e) if e.kind() == std::io::ErrorKind::NotFound => (String::new(), true),
                Err(source) => {
                    return Err(EvalError::Io {
                        path: path.display().to_string(),
                        source,
                    })
                }
            };
            let pair = PredictionPair {
                sample_id: id.clone(),
                reference,
                candidate_svg,
            };
            Ok((evaluate_pair(&pair, cfg, measurer)?, missing))
        })
        .collect();
    let mut records = Vec::with_capacity(results.len());
    let mut missing_predictions = Vec::new();
    for r in results {
        let (rec, missing) = r?;
        if missing {
            missing_predictions.push(rec.sample_id.clone());
        }
        records.push(rec);
    }
    let report = aggregate(&records)?;
    Ok(CorpusEvaluation {
        records,
        report,
        missing_predictions,
    })
}
