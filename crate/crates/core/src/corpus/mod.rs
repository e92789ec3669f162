//! Synthetic diagram corpus: templates, layout, prompts, corruptions and
//! split management.

pub mod build;
pub mod corrupt;
pub mod layout;
pub mod templates;
pub mod vocab;

pub use build::{
    build_corpus, generate_split, load_sample, load_split, split_stats, CorpusConfig, CorpusManifest, SplitRecord,
    SplitStats,
};
pub use corrupt::{corrupt_sample, CorruptionError, CorruptionKind, CorruptionTag, CorruptionTarget};

use crate::emit::{centered_baseline, group_title_anchor, StyleConfig};
use crate::geom::{Point, Rect};
use crate::plan::{AnchorKind, Canvas, LayoutPlan, NodeType};
use crate::text::{builtin_font, measure_text, AnchorMode};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashSet};
use std::fmt;
use templates::{TemplateContext, HELD_OUT_TEMPLATE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyKind {
    HorizontalPipeline,
    StackedModules,
    BranchingFlow,
    GroupedContainers,
    RetrievalArchitecture,
    MultistageWorkflow,
}

impl FamilyKind {
    pub const ALL: [FamilyKind; 6] = [
        FamilyKind::HorizontalPipeline,
        FamilyKind::StackedModules,
        FamilyKind::BranchingFlow,
        FamilyKind::GroupedContainers,
        FamilyKind::RetrievalArchitecture,
        FamilyKind::MultistageWorkflow,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FamilyKind::HorizontalPipeline => "horizontal_pipeline",
            FamilyKind::StackedModules => "stacked_modules",
            FamilyKind::BranchingFlow => "branching_flow",
            FamilyKind::GroupedContainers => "grouped_containers",
            FamilyKind::RetrievalArchitecture => "retrieval_architecture",
            FamilyKind::MultistageWorkflow => "multistage_workflow",
        }
    }

    pub fn parse(s: &str) -> Option<FamilyKind> {
        FamilyKind::ALL.into_iter().find(|f| f.as_str() == s)
    }
}

impl fmt::Display for FamilyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitName {
    Train,
    Validation,
    IidTest,
    TemplateHeldOut,
    ComplexityHeldOut,
}

impl SplitName {
    pub const ALL: [SplitName; 5] = [
        SplitName::Train,
        SplitName::Validation,
        SplitName::IidTest,
        SplitName::TemplateHeldOut,
        SplitName::ComplexityHeldOut,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SplitName::Train => "train",
            SplitName::Validation => "validation",
            SplitName::IidTest => "iid_test",
            SplitName::TemplateHeldOut => "template_held_out",
            SplitName::ComplexityHeldOut => "complexity_held_out",
        }
    }
}

impl fmt::Display for SplitName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Generation parameters of one split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSpec {
    pub name: SplitName,
    /// Full-scale sample count.
    pub count: usize,
    pub node_range: (usize, usize),
    pub edge_range: (usize, usize),
    pub canvas_options: Vec<Canvas>,
    /// Sampling weights over `node_range`, lowest count first.
    pub node_weights: Vec<f64>,
    /// Weights over how many optional edges to add on top of the template.
    pub extra_edge_weights: Vec<f64>,
    pub font_sizes: (u32, u32),
    pub max_groups: usize,
    pub group_prob: f64,
    /// Graph template indices this split draws from.
    pub templates: Vec<u8>,
}

impl SplitSpec {
    /// Shipped defaults per split.
    pub fn default_for(name: SplitName) -> SplitSpec {
        let small = vec![
            Canvas {
                width: 600.0,
                height: 400.0,
            },
            Canvas::default(),
        ];
        let in_dist = SplitSpec {
            name,
            count: 0,
            node_range: (3, 7),
            edge_range: (2, 8),
            canvas_options: small.clone(),
            node_weights: vec![0.10, 0.22, 0.30, 0.23, 0.15],
            extra_edge_weights: vec![0.62, 0.28, 0.10],
            font_sizes: (12, 20),
            max_groups: 2,
            group_prob: 0.35,
            templates: vec![0, 1],
        };
        match name {
            SplitName::Train => SplitSpec {
                count: 48_000,
                ..in_dist
            },
            SplitName::Validation => SplitSpec {
                count: 4_000,
                ..in_dist
            },
            SplitName::IidTest => SplitSpec {
                count: 4_000,
                ..in_dist
            },
            SplitName::TemplateHeldOut => SplitSpec {
                count: 2_000,
                edge_range: (2, 9),
                node_weights: vec![0.08, 0.18, 0.28, 0.26, 0.20],
                extra_edge_weights: vec![0.6, 0.3, 0.1],
                templates: vec![HELD_OUT_TEMPLATE],
                ..in_dist
            },
            SplitName::ComplexityHeldOut => SplitSpec {
                count: 2_000,
                node_range: (6, 10),
                edge_range: (6, 13),
                canvas_options: vec![
                    Canvas::default(),
                    Canvas {
                        width: 1000.0,
                        height: 700.0,
                    },
                ],
                node_weights: vec![0.14, 0.28, 0.30, 0.17, 0.11],
                extra_edge_weights: vec![0.0, 0.05, 0.2, 0.35, 0.4],
                max_groups: 3,
                group_prob: 0.6,
                ..in_dist
            },
        }
    }

    pub fn validate(&self) -> Result<(), CorpusError> {
        let bad = |m: String| Err(CorpusError::InvalidConfig(format!("{}: {m}", self.name)));
        let (lo, hi) = self.node_range;
        if lo < 2 || lo > hi {
            return bad(format!("node_range {lo}..{hi} is empty or below 2"));
        }
        if self.edge_range.0 > self.edge_range.1 {
            return bad("edge_range is empty".into());
        }
        if self.node_weights.len() != hi - lo + 1 {
            return bad(format!("node_weights needs {} entries", hi - lo + 1));
        }
        for w in [&self.node_weights, &self.extra_edge_weights] {
            if w.is_empty() || w.iter().any(|x| !(x.is_finite() && *x >= 0.0)) || w.iter().sum::<f64>() <= 0.0 {
                return bad("weights must be non-negative with a positive sum".into());
            }
        }
        if self.canvas_options.is_empty() || self.canvas_options.iter().any(|c| !(c.width > 0.0 && c.height > 0.0)) {
            return bad("canvas_options must be non-empty and positive".into());
        }
        if self.font_sizes.0 == 0 || self.font_sizes.0 > self.font_sizes.1 {
            return bad("font_sizes range is empty".into());
        }
        if self.templates.is_empty() || self.templates.iter().any(|&t| t >= templates::TEMPLATES_PER_FAMILY) {
            return bad("templates must name existing template indices".into());
        }
        if !(0.0..=1.0).contains(&self.group_prob) {
            return bad("group_prob must lie in [0, 1]".into());
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("no layout fits {family} with {nodes} nodes in split {split}: {reason}")]
    InfeasibleLayout {
        family: FamilyKind,
        split: SplitName,
        nodes: usize,
        reason: String,
    },
    #[error("invalid corpus config: {0}")]
    InvalidConfig(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Malformed { path: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeGeometry {
    pub id: String,
    pub kind: NodeType,
    pub bbox: Rect,
    pub label: String,
    /// Measured label box under the built-in font.
    pub label_box: Rect,
    pub anchors: BTreeMap<AnchorKind, Point>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConnectorGeometry {
    pub src_id: String,
    pub dst_id: String,
    pub start: Point,
    pub end: Point,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleStats {
    pub nodes: usize,
    pub edges: usize,
    pub text_boxes: usize,
    pub branches: usize,
    pub groups: usize,
}

/// Geometry implied by a plan, stored next to every sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeoMetadata {
    pub split: SplitName,
    pub template: u8,
    pub font_size: f64,
    pub canvas: Canvas,
    pub nodes: Vec<NodeGeometry>,
    pub connectors: Vec<ConnectorGeometry>,
    pub edges: Vec<(String, String)>,
    pub stats: SampleStats,
}

impl GeoMetadata {
    pub fn from_plan(plan: &LayoutPlan, split: SplitName, template: u8, font_size: f64) -> GeoMetadata {
        let font = builtin_font();
        let nodes = plan
            .nodes
            .iter()
            .map(|n| {
                let (at, mode) = match n.node_type {
                    NodeType::Box => {
                        let c = n.bbox.center();
                        (
                            Point::new(c.x, centered_baseline(c.y, font_size, font)),
                            AnchorMode::Middle,
                        )
                    }
                    NodeType::Group => (group_title_anchor(&n.bbox, font_size, font), AnchorMode::Start),
                };
                NodeGeometry {
                    id: n.id.clone(),
                    kind: n.node_type,
                    bbox: n.bbox,
                    label: n.label.clone(),
                    label_box: measure_text(&n.label, font_size, at, mode, font).bbox,
                    anchors: AnchorKind::ALL.iter().map(|&k| (k, n.anchor(k))).collect(),
                }
            })
            .collect();
        let connectors = (0..plan.connectors.len())
            .map(|i| {
                let c = &plan.connectors[i];
                let (start, end) = plan.connector_anchors(i).expect("validated plan");
                ConnectorGeometry {
                    src_id: c.src_id.clone(),
                    dst_id: c.dst_id.clone(),
                    start,
                    end,
                }
            })
            .collect();
        let mut out_deg: BTreeMap<&str, usize> = BTreeMap::new();
        for (s, _) in &plan.edges {
            *out_deg.entry(s.as_str()).or_default() += 1;
        }
        let stats = SampleStats {
            nodes: plan.nodes.iter().filter(|n| n.node_type == NodeType::Box).count(),
            edges: plan.edge_set().len(),
            text_boxes: plan.nodes.iter().filter(|n| !n.label.is_empty()).count(),
            branches: out_deg.values().filter(|&&d| d >= 2).count(),
            groups: plan.nodes.iter().filter(|n| n.node_type == NodeType::Group).count(),
        };
        GeoMetadata {
            split,
            template,
            font_size,
            canvas: plan.canvas,
            nodes,
            connectors,
            edges: plan.edges.clone(),
            stats,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusSample {
    pub sample_id: String,
    pub prompt: String,
    pub plan: LayoutPlan,
    pub svg: String,
    pub metadata: GeoMetadata,
    pub corruption: Option<CorruptionTag>,
    pub family: FamilyKind,
    pub seed: u64,
}

impl CorpusSample {
    pub fn style(&self) -> StyleConfig {
        StyleConfig::with_font_size(self.metadata.font_size)
    }
}

fn weighted_index<R: Rng>(rng: &mut R, weights: &[f64]) -> usize {
    let total: f64 = weights.iter().sum();
    let mut x = rng.gen::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        if x < *w {
            return i;
        }
        x -= w;
    }
    weights.len() - 1
}

struct Attempt {
    template: u8,
    canvas: Canvas,
    font_size: f64,
    short_labels: bool,
}

/// Placement attempts, most faithful to the sampled parameters first.
fn attempts(split: &SplitSpec, template: u8, canvas: Canvas, font_size: f64) -> Vec<Attempt> {
    let largest = *split
        .canvas_options
        .iter()
        .max_by(|a, b| (a.width * a.height).total_cmp(&(b.width * b.height)))
        .expect("validated split");
    let min_fs = split.font_sizes.0 as f64;
    let mut out = vec![
        Attempt {
            template,
            canvas,
            font_size,
            short_labels: false,
        },
        Attempt {
            template,
            canvas: largest,
            font_size,
            short_labels: false,
        },
        Attempt {
            template,
            canvas: largest,
            font_size: min_fs,
            short_labels: false,
        },
        Attempt {
            template,
            canvas: largest,
            font_size: min_fs,
            short_labels: true,
        },
    ];
    for &t in split.templates.iter().filter(|&&t| t != template) {
        out.push(Attempt {
            template: t,
            canvas: largest,
            font_size: min_fs,
            short_labels: true,
        });
    }
    out
}

fn pick_labels<R: Rng>(rng: &mut R, family: FamilyKind, roles: &[templates::Role], short: bool) -> Option<Vec<String>> {
    let mut labels: Vec<Option<String>> = vec![None; roles.len()];
    let mut taken: Vec<String> = Vec::new();
    for (i, role) in roles.iter().enumerate() {
        if let Some(options) = role {
            let opts: Vec<&&str> = options.iter().filter(|o| !taken.iter().any(|t| t == **o)).collect();
            let pick = if short {
                opts.iter().min_by_key(|o| o.len()).copied()
            } else {
                opts.choose(rng).copied()
            }?;
            taken.push(pick.to_string());
            labels[i] = Some(pick.to_string());
        }
    }
    let free = labels.iter().filter(|l| l.is_none()).count();
    let pool = if short {
        vocab::short_pool()
    } else {
        vocab::pool(family)
    };
    let mut drawn = vocab::draw_distinct(rng, pool, free, &taken)?.into_iter();
    Some(
        labels
            .into_iter()
            .map(|l| l.unwrap_or_else(|| drawn.next().expect("counted")))
            .collect(),
    )
}

fn render_prompt<R: Rng>(rng: &mut R, family: FamilyKind, split: SplitName, plan: &LayoutPlan) -> String {
    let openers = vocab::openers(family);
    let opener = if split == SplitName::TemplateHeldOut {
        openers[openers.len() - 1]
    } else {
        openers[rng.gen_range(0..openers.len() - 1)]
    };
    let boxes: Vec<&str> = plan
        .nodes
        .iter()
        .filter(|n| n.node_type == NodeType::Box)
        .map(|n| n.label.as_str())
        .collect();
    let label = |id: &str| plan.node(id).map(|n| n.label.clone()).unwrap_or_default();
    let mut s = opener.replace("{n}", &boxes.len().to_string());
    s.push_str(&format!(" Components: {}.", boxes.join(", ")));
    for c in &plan.connectors {
        s.push_str(&format!(
            " {} {} {}.",
            label(&c.src_id),
            vocab::verb(rng),
            label(&c.dst_id)
        ));
    }
    let groups: Vec<_> = plan.nodes.iter().filter(|n| n.node_type == NodeType::Group).collect();
    for g in groups {
        let members: Vec<&str> = plan
            .nodes
            .iter()
            .filter(|n| n.node_type == NodeType::Box && g.bbox.contains_rect(&n.bbox))
            .map(|n| n.label.as_str())
            .collect();
        s.push_str(&format!(
            " Put {} inside a container titled \"{}\".",
            members.join(" and "),
            g.label
        ));
    }
    s.push(' ');
    s.push_str(&vocab::layout_hint(rng, plan.canvas.width, plan.canvas.height));
    s
}

/// Generates one ground-truth sample. Pure in `(family, split, seed)`.
pub fn generate_sample(family: FamilyKind, split: &SplitSpec, seed: u64) -> Result<CorpusSample, CorpusError> {
    split.validate()?;
    let font = builtin_font();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = split.node_range.0 + weighted_index(&mut rng, &split.node_weights);
    let template = *split.templates.choose(&mut rng).expect("validated split");
    let canvas = *split.canvas_options.choose(&mut rng).expect("validated split");
    let font_size = rng.gen_range(split.font_sizes.0..=split.font_sizes.1) as f64;
    let extra_target = weighted_index(&mut rng, &split.extra_edge_weights);
    let ctx = TemplateContext {
        max_groups: split.max_groups,
        group_prob: split.group_prob,
    };
    let (min_e, max_e) = split.edge_range;

    let mut last_reason = String::from("no attempts");
    for attempt in attempts(split, template, canvas, font_size) {
        let sk = templates::skeleton(family, attempt.template, n, &ctx, &mut rng);
        let Some(labels) = pick_labels(&mut rng, family, &sk.roles, attempt.short_labels) else {
            last_reason = "label pool exhausted".into();
            continue;
        };
        let Some(titles) = vocab::draw_distinct(&mut rng, vocab::group_titles(), sk.groups.len(), &labels) else {
            last_reason = "title pool exhausted".into();
            continue;
        };
        let placement = match layout::place(&sk, &labels, &titles, attempt.font_size, &attempt.canvas, font) {
            Ok(p) => p,
            Err(e) => {
                last_reason = e.to_string();
                continue;
            }
        };
        let mut connectors = Vec::new();
        let mut blocked = None;
        for e in &sk.edges {
            match layout::route(&placement.boxes, e.src, e.dst, e.anchors) {
                Some((a, b)) => connectors.push((e.src, e.dst, a, b)),
                None => {
                    blocked = Some(layout::LayoutFailure::Blocked { src: e.src, dst: e.dst });
                    break;
                }
            }
        }
        if let Some(b) = blocked {
            last_reason = b.to_string();
            continue;
        }
        let base = connectors.len();
        // Pipelines stay plain chains unless the split demands more edges.
        let wanted = if family == FamilyKind::HorizontalPipeline {
            base
        } else {
            base + extra_target
        };
        let wanted = wanted.clamp(min_e, max_e);
        if base > max_e {
            last_reason = format!("template has {base} edges, above the split maximum {max_e}");
            continue;
        }
        let mut pairs: HashSet<(usize, usize)> = connectors.iter().map(|c| (c.0, c.1)).collect();
        let mut extras = sk.extras.clone();
        extras.shuffle(&mut rng);
        for (s, d) in extras {
            if connectors.len() >= wanted {
                break;
            }
            if pairs.contains(&(s, d)) || pairs.contains(&(d, s)) {
                continue;
            }
            if let Some((a, b)) = layout::route(&placement.boxes, s, d, None) {
                connectors.push((s, d, a, b));
                pairs.insert((s, d));
            }
        }
        if connectors.len() < min_e {
            last_reason = format!("only {} edges available, split needs {min_e}", connectors.len());
            continue;
        }
        let plan = layout::to_plan(&placement, &labels, &titles, attempt.canvas, &connectors);
        debug_assert!(plan.validate().is_ok());
        let style = StyleConfig::with_font_size(attempt.font_size);
        let svg = crate::emit::emit_svg(&plan, &style);
        let prompt = render_prompt(&mut rng, family, split.name, &plan);
        let metadata = GeoMetadata::from_plan(&plan, split.name, attempt.template, attempt.font_size);
        return Ok(CorpusSample {
            sample_id: String::new(),
            prompt,
            plan,
            svg,
            metadata,
            corruption: None,
            family,
            seed,
        });
    }
    Err(CorpusError::InfeasibleLayout {
        family,
        split: split.name,
        nodes: n,
        reason: last_reason,
    })
}
