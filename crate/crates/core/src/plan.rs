//! Layout plans: the geometric contract a diagram has to realize.

use crate::geom::{Point, Rect};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeType {
    Box,
    Group,
}

/// Side midpoint a connector attaches to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AnchorKind {
    LeftCenter,
    RightCenter,
    TopCenter,
    BottomCenter,
}

impl AnchorKind {
    pub const ALL: [AnchorKind; 4] = [
        AnchorKind::LeftCenter,
        AnchorKind::RightCenter,
        AnchorKind::TopCenter,
        AnchorKind::BottomCenter,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AnchorKind::LeftCenter => "left-center",
            AnchorKind::RightCenter => "right-center",
            AnchorKind::TopCenter => "top-center",
            AnchorKind::BottomCenter => "bottom-center",
        }
    }
}

impl fmt::Display for AnchorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Canvas {
    pub width: f64,
    pub height: f64,
}

impl Canvas {
    pub fn rect(&self) -> Rect {
        Rect::new(0.0, 0.0, self.width, self.height)
    }
}

impl Default for Canvas {
    fn default() -> Self {
        Canvas {
            width: 800.0,
            height: 600.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeSpec {
    pub id: String,
    #[serde(rename = "type")]
    pub node_type: NodeType,
    pub bbox: Rect,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConnectorSpec {
    pub src_id: String,
    pub dst_id: String,
    pub src_anchor: AnchorKind,
    pub dst_anchor: AnchorKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayoutPlan {
    pub canvas: Canvas,
    pub nodes: Vec<NodeSpec>,
    #[serde(default)]
    pub connectors: Vec<ConnectorSpec>,
    #[serde(default)]
    pub edges: Vec<(String, String)>,
}

/// A plan document that violates the schema. `path` locates the offending
/// field, e.g. `connectors[2].dst_id`.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{path}: {message}")]
pub struct SchemaError {
    pub path: String,
    pub message: String,
}

impl SchemaError {
    fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        SchemaError {
            path: path.into(),
            message: message.into(),
        }
    }
}

/// Midpoint of the named side of `bbox`.
pub fn anchor_point(bbox: &Rect, kind: AnchorKind) -> Point {
    let cx = bbox.x + bbox.w / 2.0;
    let cy = bbox.y + bbox.h / 2.0;
    match kind {
        AnchorKind::LeftCenter => Point::new(bbox.x, cy),
        AnchorKind::RightCenter => Point::new(bbox.x + bbox.w, cy),
        AnchorKind::TopCenter => Point::new(cx, bbox.y),
        AnchorKind::BottomCenter => Point::new(cx, bbox.y + bbox.h),
    }
}

impl NodeSpec {
    pub fn anchor(&self, kind: AnchorKind) -> Point {
        anchor_point(&self.bbox, kind)
    }
}

impl LayoutPlan {
    pub fn node(&self, id: &str) -> Option<&NodeSpec> {
        self.nodes.iter().find(|n| n.id == id)
    }

    pub fn node_index(&self, id: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n.id == id)
    }

    /// Target anchor points `(start, end)` of connector `i`.
    pub fn connector_anchors(&self, i: usize) -> Option<(Point, Point)> {
        let c = self.connectors.get(i)?;
        let src = self.node(&c.src_id)?;
        let dst = self.node(&c.dst_id)?;
        Some((src.anchor(c.src_anchor), dst.anchor(c.dst_anchor)))
    }

    pub fn edge_set(&self) -> BTreeSet<(String, String)> {
        self.edges.iter().cloned().collect()
    }

    /// Edge list induced by the connectors, first occurrence order.
    pub fn induced_edges(connectors: &[ConnectorSpec]) -> Vec<(String, String)> {
        let mut seen = HashSet::new();
        connectors
            .iter()
            .map(|c| (c.src_id.clone(), c.dst_id.clone()))
            .filter(|e| seen.insert(e.clone()))
            .collect()
    }

    pub fn validate(&self) -> Result<(), SchemaError> {
        let Canvas { width, height } = self.canvas;
        if !(width.is_finite() && height.is_finite() && width > 0.0 && height > 0.0) {
            return Err(SchemaError::new("canvas", "width and height must be positive"));
        }
        let mut ids: HashMap<&str, usize> = HashMap::new();
        for (i, n) in self.nodes.iter().enumerate() {
            if n.id.is_empty() {
                return Err(SchemaError::new(format!("nodes[{i}].id"), "must not be empty"));
            }
            if let Some(prev) = ids.insert(&n.id, i) {
                return Err(SchemaError::new(
                    format!("nodes[{i}].id"),
                    format!("duplicate id {:?} (first at nodes[{prev}])", n.id),
                ));
            }
            let b = n.bbox;
            if ![b.x, b.y, b.w, b.h].iter().all(|v| v.is_finite()) || b.w < 0.0 || b.h < 0.0 {
                return Err(SchemaError::new(
                    format!("nodes[{i}].bbox"),
                    "must be finite with non-negative size",
                ));
            }
            if n.node_type == NodeType::Box && n.label.is_empty() {
                return Err(SchemaError::new(format!("nodes[{i}].label"), "box nodes need a label"));
            }
        }
        for (i, c) in self.connectors.iter().enumerate() {
            for (field, id) in [("src_id", &c.src_id), ("dst_id", &c.dst_id)] {
                if !ids.contains_key(id.as_str()) {
                    return Err(SchemaError::new(
                        format!("connectors[{i}].{field}"),
                        format!("unknown node {id:?}"),
                    ));
                }
            }
            if c.src_id == c.dst_id {
                return Err(SchemaError::new(
                    format!("connectors[{i}]"),
                    "source and destination must differ",
                ));
            }
        }
        let induced: HashSet<(String, String)> = Self::induced_edges(&self.connectors).into_iter().collect();
        let mut listed = HashSet::new();
        for (i, e) in self.edges.iter().enumerate() {
            if !induced.contains(e) {
                return Err(SchemaError::new(
                    format!("edges[{i}]"),
                    format!("edge ({}, {}) has no connector", e.0, e.1),
                ));
            }
            if !listed.insert(e) {
                return Err(SchemaError::new(format!("edges[{i}]"), "duplicate edge"));
            }
        }
        if listed.len() != induced.len() {
            return Err(SchemaError::new(
                "edges",
                "every connector's (src_id, dst_id) pair must be listed",
            ));
        }
        Ok(())
    }

    /// True when every node box lies inside the canvas.
    pub fn within_canvas(&self) -> bool {
        let c = self.canvas.rect();
        self.nodes.iter().all(|n| c.contains_rect(&n.bbox))
    }
}

pub fn serialize_plan(plan: &LayoutPlan) -> String {
    serde_json::to_string_pretty(plan).expect("plans always serialize")
}

pub fn deserialize_plan(text: &str) -> Result<LayoutPlan, SchemaError> {
    let plan: LayoutPlan = serde_json::from_str(text)
        .map_err(|e| SchemaError::new(format!("line {} column {}", e.line(), e.column()), e.to_string()))?;
    plan.validate()?;
    Ok(plan)
}
