//! Executable reward components for a candidate SVG against a layout plan.
//!
//! Verification runs in three stages: [`check_exec`] parses and resolves the
//! document, [`extract_geometry`] collects boxes, text boxes, connector
//! endpoints and the recovered edge set, and the individual reward functions
//! score that report. [`verify`] chains them and applies the weights.

use crate::geom::{union_bbox, Point, Rect};
use crate::plan::{Canvas, LayoutPlan};
use crate::svg::{parse_svg_with_font, ElementKind, SvgScene};
use crate::text::{builtin_font, FontModel, TextBox, TextMeasurer};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

/// Updates before the global-fit terms start to ramp in.
pub const CURRICULUM_START: u64 = 500;
/// Updates after which the global-fit terms carry full weight.
pub const CURRICULUM_END: u64 = 1000;
/// Parallel verification workers used by default.
pub const DEFAULT_WORKERS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WeightSet {
    pub exec: f64,
    pub fit: f64,
    pub overflow: f64,
    pub anchor: f64,
    pub text: f64,
    pub padding: f64,
    pub graph: f64,
    pub clean: f64,
}

impl Default for WeightSet {
    fn default() -> Self {
        WeightSet {
            exec: 1.00,
            fit: 0.60,
            overflow: 0.50,
            anchor: 1.20,
            text: 1.10,
            padding: 0.50,
            graph: 0.90,
            clean: 0.30,
        }
    }
}

impl WeightSet {
    fn values(&self) -> [f64; 8] {
        [
            self.exec,
            self.fit,
            self.overflow,
            self.anchor,
            self.text,
            self.padding,
            self.graph,
            self.clean,
        ]
    }
}

/// Scale applied to the fit and overflow weights at update `u`.
pub fn curriculum_ramp(u: u64) -> f64 {
    if u < CURRICULUM_START {
        0.0
    } else if u < CURRICULUM_END {
        (u - CURRICULUM_START) as f64 / (CURRICULUM_END - CURRICULUM_START) as f64
    } else {
        1.0
    }
}

pub fn curriculum_weights(base: &WeightSet, update_index: u64) -> WeightSet {
    let r = curriculum_ramp(update_index);
    WeightSet {
        fit: base.fit * r,
        overflow: base.overflow * r,
        ..*base
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifierConfig {
    /// Anchor hit radius in px.
    pub tau: f64,
    /// Minimum text clearance in px.
    pub padding: f64,
    /// Endpoint-to-anchor radius for graph recovery in px.
    pub tau_match: f64,
    pub eps: f64,
    /// Canvas assumed when no reference plan supplies one.
    pub canvas: Canvas,
    pub weights: WeightSet,
}

impl Default for VerifierConfig {
    fn default() -> Self {
        VerifierConfig {
            tau: 12.0,
            padding: 6.0,
            tau_match: 12.0,
            eps: 1e-8,
            canvas: Canvas::default(),
            weights: WeightSet::default(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("config is not valid JSON: {0}")]
    Syntax(#[from] serde_json::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

impl VerifierConfig {
    pub fn from_json(text: &str) -> Result<VerifierConfig, ConfigError> {
        let cfg: VerifierConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: &str| Err(ConfigError::Invalid(m.to_string()));
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return bad("tau must be positive");
        }
        if !(self.padding >= 0.0 && self.padding.is_finite()) {
            return bad("padding must be non-negative");
        }
        if !(self.tau_match > 0.0 && self.tau_match.is_finite()) {
            return bad("tau_match must be positive");
        }
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return bad("eps must be positive");
        }
        if !(self.canvas.width > 0.0 && self.canvas.height > 0.0) {
            return bad("canvas must have positive size");
        }
        if !self.weights.values().iter().all(|w| *w >= 0.0 && w.is_finite()) {
            return bad("weights must be finite and non-negative");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub exec: f64,
    pub fit: f64,
    pub overflow: f64,
    pub anchor_acc: f64,
    pub anchor_err: f64,
    pub text_in_box: f64,
    pub padding: f64,
    pub graph: f64,
    pub clean: f64,
    pub weights: WeightSet,
    pub total: f64,
}

impl RewardBreakdown {
    /// Breakdown for a candidate that failed to render.
    pub fn failed(weights: WeightSet) -> Self {
        RewardBreakdown {
            weights,
            ..Default::default()
        }
    }
}

/// Weighted sum of the components of `c`, gated on `c.exec`.
pub fn total_reward(c: &RewardBreakdown, w: &WeightSet) -> f64 {
    if c.exec == 0.0 {
        return 0.0;
    }
    w.exec * c.exec
        + w.fit * c.fit
        + w.overflow * c.overflow
        + w.anchor * (c.anchor_acc + c.anchor_err)
        + w.text * c.text_in_box
        + w.padding * c.padding
        + w.graph * c.graph
        + w.clean * c.clean
}

#[derive(Debug, Clone)]
pub struct ExecOutcome {
    pub valid: bool,
    pub scene: Option<SvgScene>,
    pub diagnostics: Vec<String>,
}

pub fn check_exec(svg_text: &str) -> ExecOutcome {
    check_exec_with_font(svg_text, builtin_font())
}

pub fn check_exec_with_font(svg_text: &str, font: &FontModel) -> ExecOutcome {
    match parse_svg_with_font(svg_text, font) {
        Err(e) => ExecOutcome {
            valid: false,
            scene: None,
            diagnostics: vec![e.to_string()],
        },
        Ok(scene) => {
            let diagnostics: Vec<String> = scene
                .unresolved
                .iter()
                .map(|i| format!("{}:{}: <{}> {}", i.line, i.column, i.tag, i.message))
                .collect();
            ExecOutcome {
                valid: diagnostics.is_empty(),
                scene: Some(scene),
                diagnostics,
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ElementBox {
    pub doc_index: usize,
    pub kind: ElementKind,
    pub bbox: Rect,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TextPlacement {
    pub doc_index: usize,
    pub content: String,
    pub text_box: TextBox,
    /// Plan node the text was assigned to.
    pub container_id: Option<String>,
    /// Rendered shape recovered for that node.
    pub container_rect: Option<Rect>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConnectorEnds {
    /// Position among connector elements in document order.
    pub ordinal: usize,
    pub doc_index: usize,
    pub start: Point,
    pub end: Point,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeometryReport {
    /// Every visible non-group element, text measured by the active measurer.
    pub element_bboxes: Vec<ElementBox>,
    pub text_boxes: Vec<TextPlacement>,
    pub connector_endpoints: Vec<ConnectorEnds>,
    pub extracted_edges: BTreeSet<(String, String)>,
    /// Bounding box of all element boxes; `None` for an empty drawing.
    pub all_bbox: Option<Rect>,
    /// Rendered shape index (into `element_bboxes`) recovered per plan node.
    pub node_shapes: Vec<Option<usize>>,
    pub render_valid: bool,
}

pub fn extract_geometry(
    scene: &SvgScene,
    plan: &LayoutPlan,
    cfg: &VerifierConfig,
    measurer: &dyn TextMeasurer,
) -> GeometryReport {
    let mut element_bboxes = Vec::new();
    let mut texts = Vec::new();
    let mut connectors = Vec::new();
    for el in scene.elements.iter().filter(|e| e.kind() != ElementKind::Group) {
        let mut bbox = el.global_bbox;
        if el.kind() == ElementKind::Text {
            let tb = measurer
                .text_box(el)
                .or_else(|| builtin_font().text_box(el))
                .expect("text element");
            bbox = tb.bbox;
            texts.push((el.doc_index, el.text_content.clone().unwrap_or_default(), tb));
        }
        if let Some((start, end)) = el.endpoints {
            connectors.push(ConnectorEnds {
                ordinal: connectors.len(),
                doc_index: el.doc_index,
                start,
                end,
            });
        }
        element_bboxes.push(ElementBox {
            doc_index: el.doc_index,
            kind: el.kind(),
            bbox,
        });
    }
    let all: Vec<Rect> = element_bboxes.iter().map(|e| e.bbox).collect();
    let node_shapes = recover_node_shapes(plan, &element_bboxes);
    let text_boxes = texts
        .into_iter()
        .map(|(doc_index, content, text_box)| {
            let container = assign_container(&content, &text_box.bbox, plan);
            TextPlacement {
                doc_index,
                text_box,
                container_id: container.map(|i| plan.nodes[i].id.clone()),
                container_rect: container.and_then(|i| node_shapes[i]).map(|j| element_bboxes[j].bbox),
                content,
            }
        })
        .collect();
    let extracted_edges = extract_graph(&connectors, plan, cfg);
    GeometryReport {
        all_bbox: union_bbox(&all).ok(),
        element_bboxes,
        text_boxes,
        connector_endpoints: connectors,
        extracted_edges,
        node_shapes,
        render_valid: true,
    }
}

/// Shapes that can stand for a node box.
fn is_container_kind(kind: ElementKind) -> bool {
    matches!(
        kind,
        ElementKind::Rect | ElementKind::Polygon | ElementKind::Circle | ElementKind::Ellipse
    )
}

/// One-to-one matching of plan nodes to rendered shapes by descending IoU.
fn recover_node_shapes(plan: &LayoutPlan, elements: &[ElementBox]) -> Vec<Option<usize>> {
    let mut pairs = Vec::new();
    for (i, n) in plan.nodes.iter().enumerate() {
        for (j, e) in elements.iter().enumerate() {
            if !is_container_kind(e.kind) {
                continue;
            }
            let iou = n.bbox.iou(&e.bbox);
            if iou > 0.0 {
                pairs.push((iou, i, j));
            }
        }
    }
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut node_shape = vec![None; plan.nodes.len()];
    let mut taken = vec![false; elements.len()];
    for (_, i, j) in pairs {
        if node_shape[i].is_none() && !taken[j] {
            node_shape[i] = Some(j);
            taken[j] = true;
        }
    }
    node_shape
}

/// Plan node for a text run: nodes whose label equals the text, else all
/// nodes, nearest center wins and ties keep plan order.
fn assign_container(content: &str, text: &Rect, plan: &LayoutPlan) -> Option<usize> {
    let center = text.center();
    let labelled: Vec<usize> = (0..plan.nodes.len())
        .filter(|&i| plan.nodes[i].label == content)
        .collect();
    let pool: Vec<usize> = if labelled.is_empty() {
        (0..plan.nodes.len()).collect()
    } else {
        labelled
    };
    let mut best: Option<(f64, usize)> = None;
    for i in pool {
        let d = plan.nodes[i].bbox.center().distance(center);
        if best.is_none_or(|(bd, _)| d < bd) {
            best = Some((d, i));
        }
    }
    best.map(|(_, i)| i)
}

/// `(fit, overflow)` of the drawing's bounding box against `canvas`.
pub fn fit_and_overflow(all_bbox: Option<Rect>, canvas: &Rect, eps: f64) -> (f64, f64) {
    let Some(b) = all_bbox else {
        return (1.0, 0.0);
    };
    if canvas.contains_rect(&b) {
        return (1.0, 0.0);
    }
    let inside = b.intersection(canvas).map_or(0.0, |r| r.area());
    let outside = (b.area() - inside).max(0.0);
    let ratio = (outside / b.area().max(eps)).min(1.0);
    (0.0, -ratio)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum End {
    Start,
    End,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EndpointResult {
    pub connector: usize,
    pub end: End,
    pub target: Point,
    /// Rendered endpoint; `None` when the connector is missing.
    pub observed: Option<Point>,
    pub distance: Option<f64>,
    pub hit: bool,
    /// Distance over the node diagonal, unclamped.
    pub normalized: Option<f64>,
    /// Contribution to the error term, in `[0, 1]`.
    pub penalty: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnchorScore {
    pub acc: f64,
    pub err: f64,
    pub endpoints: Vec<EndpointResult>,
    /// Plan connectors without a rendered counterpart.
    pub missing: usize,
}

pub fn anchor_rewards(report: &GeometryReport, plan: &LayoutPlan, cfg: &VerifierConfig) -> AnchorScore {
    let mut endpoints = Vec::with_capacity(plan.connectors.len() * 2);
    let mut missing = 0;
    for (k, c) in plan.connectors.iter().enumerate() {
        let rendered = report.connector_endpoints.get(k);
        if rendered.is_none() {
            missing += 1;
        }
        let (src_node, dst_node) = (
            plan.node(&c.src_id).expect("validated plan"),
            plan.node(&c.dst_id).expect("validated plan"),
        );
        for (end, node, kind, observed) in [
            (End::Start, src_node, c.src_anchor, rendered.map(|r| r.start)),
            (End::End, dst_node, c.dst_anchor, rendered.map(|r| r.end)),
        ] {
            let target = node.anchor(kind);
            let diag = node.bbox.diagonal();
            let distance = observed.map(|p| p.distance(target));
            let normalized = distance.map(|d| {
                if diag > 0.0 {
                    d / diag
                } else if d == 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                }
            });
            endpoints.push(EndpointResult {
                connector: k,
                end,
                target,
                observed,
                distance,
                hit: distance.is_some_and(|d| d <= cfg.tau),
                normalized,
                penalty: normalized.map_or(1.0, |n| n.min(1.0)),
            });
        }
    }
    if endpoints.is_empty() {
        return AnchorScore {
            acc: 1.0,
            err: 0.0,
            endpoints,
            missing,
        };
    }
    let m = endpoints.len() as f64;
    let hits = endpoints.iter().filter(|e| e.hit).count() as f64;
    let penalty: f64 = endpoints.iter().map(|e| e.penalty).sum();
    AnchorScore {
        acc: hits / m,
        err: -(penalty / m),
        endpoints,
        missing,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TextResult {
    pub doc_index: usize,
    pub container_id: Option<String>,
    pub inside: bool,
    /// Smallest side clearance, negative when the text pokes out.
    pub margin: Option<f64>,
    pub violation: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TextScore {
    pub in_box: f64,
    pub padding: f64,
    pub texts: Vec<TextResult>,
}

/// Smallest distance from the sides of `inner` to the matching sides of
/// `outer`.
pub fn side_margin(inner: &Rect, outer: &Rect) -> f64 {
    (inner.x - outer.x)
        .min(outer.right() - inner.right())
        .min(inner.y - outer.y)
        .min(outer.bottom() - inner.bottom())
}

pub fn text_rewards(report: &GeometryReport, cfg: &VerifierConfig) -> TextScore {
    let texts: Vec<TextResult> = report
        .text_boxes
        .iter()
        .map(|t| {
            let tb = &t.text_box.bbox;
            let (inside, margin) = match &t.container_rect {
                Some(c) => (c.contains_rect(tb), Some(side_margin(tb, c))),
                None => (false, None),
            };
            TextResult {
                doc_index: t.doc_index,
                container_id: t.container_id.clone(),
                inside,
                margin,
                violation: !inside || margin.is_none_or(|m| m < cfg.padding),
            }
        })
        .collect();
    if texts.is_empty() {
        return TextScore {
            in_box: 1.0,
            padding: 0.0,
            texts,
        };
    }
    let k = texts.len() as f64;
    TextScore {
        in_box: texts.iter().filter(|t| t.inside).count() as f64 / k,
        padding: -(texts.iter().filter(|t| t.violation).count() as f64 / k),
        texts,
    }
}

fn nearest_node(p: Point, plan: &LayoutPlan, radius: f64) -> Option<usize> {
    let mut best: Option<(f64, usize)> = None;
    for (i, n) in plan.nodes.iter().enumerate() {
        let d = crate::plan::AnchorKind::ALL
            .iter()
            .map(|k| n.anchor(*k).distance(p))
            .fold(f64::INFINITY, f64::min);
        if d <= radius && best.is_none_or(|(bd, _)| d < bd) {
            best = Some((d, i));
        }
    }
    best.map(|(_, i)| i)
}

/// Directed edges recovered from connector endpoints.
pub fn extract_graph(
    connectors: &[ConnectorEnds],
    plan: &LayoutPlan,
    cfg: &VerifierConfig,
) -> BTreeSet<(String, String)> {
    connectors
        .iter()
        .filter_map(|c| {
            let u = nearest_node(c.start, plan, cfg.tau_match)?;
            let v = nearest_node(c.end, plan, cfg.tau_match)?;
            Some((plan.nodes[u].id.clone(), plan.nodes[v].id.clone()))
        })
        .collect()
}

/// F1 over directed edges; two empty sets agree perfectly.
pub fn graph_reward(pred: &BTreeSet<(String, String)>, truth: &BTreeSet<(String, String)>, eps: f64) -> f64 {
    match (pred.is_empty(), truth.is_empty()) {
        (true, true) => return 1.0,
        (true, false) | (false, true) => return 0.0,
        _ => {}
    }
    let tp = pred.intersection(truth).count() as f64;
    let p = tp / pred.len() as f64;
    let r = tp / truth.len() as f64;
    2.0 * p * r / (p + r).max(eps)
}

/// Share of drawn elements that use a semantic primitive.
pub fn clean_reward(scene: &SvgScene, eps: f64) -> f64 {
    let drawn = scene.elements.iter().filter(|e| e.kind() != ElementKind::Group);
    let (mut semantic, mut total) = (0usize, 0usize);
    for e in drawn {
        total += 1;
        if e.kind().is_semantic() {
            semantic += 1;
        }
    }
    semantic as f64 / (total as f64).max(eps)
}

#[derive(Debug, Clone)]
pub struct Verification {
    pub breakdown: RewardBreakdown,
    pub scene: Option<SvgScene>,
    pub report: Option<GeometryReport>,
    pub anchors: Option<AnchorScore>,
    pub texts: Option<TextScore>,
    pub diagnostics: Vec<String>,
}

/// Scores `svg` against `plan` with the configured weights and the builtin
/// text model.
pub fn verify(svg: &str, plan: &LayoutPlan, cfg: &VerifierConfig) -> Verification {
    verify_with(svg, plan, cfg, &cfg.weights, builtin_font())
}

pub fn verify_with(
    svg: &str,
    plan: &LayoutPlan,
    cfg: &VerifierConfig,
    weights: &WeightSet,
    measurer: &dyn TextMeasurer,
) -> Verification {
    let exec = check_exec(svg);
    match exec.scene {
        Some(scene) if exec.valid => score_scene(scene, plan, cfg, weights, measurer),
        scene => Verification {
            breakdown: RewardBreakdown::failed(*weights),
            scene,
            report: None,
            anchors: None,
            texts: None,
            diagnostics: exec.diagnostics,
        },
    }
}

/// Scores an already parsed, fully resolved scene.
pub fn score_scene(
    scene: SvgScene,
    plan: &LayoutPlan,
    cfg: &VerifierConfig,
    weights: &WeightSet,
    measurer: &dyn TextMeasurer,
) -> Verification {
    let report = extract_geometry(&scene, plan, cfg, measurer);
    let (fit, overflow) = fit_and_overflow(report.all_bbox, &plan.canvas.rect(), cfg.eps);
    let anchors = anchor_rewards(&report, plan, cfg);
    let texts = text_rewards(&report, cfg);
    let graph = graph_reward(&report.extracted_edges, &plan.edge_set(), cfg.eps);
    let mut breakdown = RewardBreakdown {
        exec: 1.0,
        fit,
        overflow,
        anchor_acc: anchors.acc,
        // Adding 0.0 turns a negative zero penalty into plain zero.
        anchor_err: anchors.err + 0.0,
        text_in_box: texts.in_box,
        padding: texts.padding + 0.0,
        graph,
        clean: clean_reward(&scene, cfg.eps),
        weights: *weights,
        total: 0.0,
    };
    breakdown.total = total_reward(&breakdown, weights);
    let mut diagnostics = Vec::new();
    if anchors.missing > 0 {
        diagnostics.push(format!(
            "{} plan connector(s) have no rendered connector",
            anchors.missing
        ));
    }
    let unmatched = texts.texts.iter().filter(|t| t.margin.is_none()).count();
    if unmatched > 0 {
        diagnostics.push(format!("{unmatched} text element(s) have no container"));
    }
    Verification {
        breakdown,
        scene: Some(scene),
        report: Some(report),
        anchors: Some(anchors),
        texts: Some(texts),
        diagnostics,
    }
}

/// Verifies independent `(svg, plan)` pairs on a pool of `workers` threads.
/// Output order follows input order.
pub fn verify_batch(items: &[(&str, &LayoutPlan)], cfg: &VerifierConfig, workers: usize) -> Vec<RewardBreakdown> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .expect("thread pool");
    pool.install(|| {
        items
            .par_iter()
            .map(|(svg, plan)| verify(svg, plan, cfg).breakdown)
            .collect()
    })
}
