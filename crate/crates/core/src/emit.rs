//! Plan to SVG emission.
//!
//! The emitter first builds a [`Drawing`], a flat list of boxes, labels and
//! connectors in global coordinates, and serializes that. Corruptions edit
//! the drawing rather than the SVG text.

use crate::geom::{Point, Rect};
use crate::plan::{LayoutPlan, NodeType};
use crate::svg::escape;
use crate::text::{builtin_font, AnchorMode, FontModel};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

/// Distance from a group's top-left corner to its title's text box.
pub const GROUP_TITLE_INSET: f64 = 8.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StyleConfig {
    pub font_size: f64,
    pub font_family: String,
    pub stroke: String,
    pub stroke_width: f64,
    pub box_fill: String,
    pub group_fill: String,
    pub text_fill: String,
    pub arrowheads: bool,
}

impl Default for StyleConfig {
    fn default() -> Self {
        StyleConfig {
            font_size: 14.0,
            font_family: "Arial".into(),
            stroke: "#333333".into(),
            stroke_width: 2.0,
            box_fill: "#eef3fb".into(),
            group_fill: "#fafaf2".into(),
            text_fill: "#111111".into(),
            arrowheads: true,
        }
    }
}

impl StyleConfig {
    pub fn with_font_size(font_size: f64) -> Self {
        StyleConfig {
            font_size,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Item {
    Box {
        node_id: String,
        rect: Rect,
        group: bool,
    },
    Label {
        node_id: String,
        text: String,
        /// Anchor point on the baseline.
        at: Point,
        anchor: AnchorMode,
        font_size: f64,
    },
    Connector {
        index: usize,
        start: Point,
        end: Point,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Drawing {
    pub width: f64,
    pub height: f64,
    pub style: StyleConfig,
    pub items: Vec<Item>,
}

/// Baseline that vertically centers a line box on `center_y`.
pub fn centered_baseline(center_y: f64, font_size: f64, font: &FontModel) -> f64 {
    center_y + (font.ascent - font.descent) / 2.0 * font_size
}

/// Baseline anchor of a group title.
pub fn group_title_anchor(rect: &Rect, font_size: f64, font: &FontModel) -> Point {
    Point::new(
        rect.x + GROUP_TITLE_INSET,
        rect.y + GROUP_TITLE_INSET + font.ascent * font_size,
    )
}

impl Drawing {
    pub fn from_plan(plan: &LayoutPlan, style: &StyleConfig) -> Drawing {
        let font = builtin_font();
        let fs = style.font_size;
        let mut items = Vec::new();
        for n in plan.nodes.iter().filter(|n| n.node_type == NodeType::Group) {
            items.push(Item::Box {
                node_id: n.id.clone(),
                rect: n.bbox,
                group: true,
            });
            if !n.label.is_empty() {
                items.push(Item::Label {
                    node_id: n.id.clone(),
                    text: n.label.clone(),
                    at: group_title_anchor(&n.bbox, fs, font),
                    anchor: AnchorMode::Start,
                    font_size: fs,
                });
            }
        }
        for n in plan.nodes.iter().filter(|n| n.node_type == NodeType::Box) {
            items.push(Item::Box {
                node_id: n.id.clone(),
                rect: n.bbox,
                group: false,
            });
            let c = n.bbox.center();
            items.push(Item::Label {
                node_id: n.id.clone(),
                text: n.label.clone(),
                at: Point::new(c.x, centered_baseline(c.y, fs, font)),
                anchor: AnchorMode::Middle,
                font_size: fs,
            });
        }
        for i in 0..plan.connectors.len() {
            let (start, end) = plan.connector_anchors(i).expect("validated plan");
            items.push(Item::Connector { index: i, start, end });
        }
        Drawing {
            width: plan.canvas.width,
            height: plan.canvas.height,
            style: style.clone(),
            items,
        }
    }

    pub fn box_rect_mut(&mut self, node_id: &str) -> Option<&mut Rect> {
        self.items.iter_mut().find_map(|it| match it {
            Item::Box { node_id: id, rect, .. } if id == node_id => Some(rect),
            _ => None,
        })
    }

    pub fn label_mut(&mut self, node_id: &str) -> Option<&mut Point> {
        self.items.iter_mut().find_map(|it| match it {
            Item::Label { node_id: id, at, .. } if id == node_id => Some(at),
            _ => None,
        })
    }

    pub fn connector_mut(&mut self, index: usize) -> Option<(&mut Point, &mut Point)> {
        self.items.iter_mut().find_map(|it| match it {
            Item::Connector { index: i, start, end } if *i == index => Some((start, end)),
            _ => None,
        })
    }

    pub fn connectors_mut(&mut self) -> impl Iterator<Item = (usize, &mut Point, &mut Point)> {
        self.items.iter_mut().filter_map(|it| match it {
            Item::Connector { index, start, end } => Some((*index, start, end)),
            _ => None,
        })
    }

    pub fn to_svg(&self) -> String {
        let st = &self.style;
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#,
            w = self.width,
            h = self.height
        );
        if st.arrowheads {
            let _ = writeln!(
                s,
                r#"  <defs><marker id="arrow" viewBox="0 0 10 10" refX="10" refY="5" markerWidth="6" markerHeight="6" orient="auto-start-reverse"><path d="M 0 0 L 10 5 L 0 10 z" fill="{}"/></marker></defs>"#,
                escape(&st.stroke)
            );
        }
        for it in &self.items {
            let _ = match it {
                Item::Box { node_id, rect, group } => writeln!(
                    s,
                    r#"  <rect id="{}-{}" x="{}" y="{}" width="{}" height="{}" rx="4" fill="{}" stroke="{}" stroke-width="{}"/>"#,
                    if *group { "group" } else { "node" },
                    escape(node_id),
                    rect.x,
                    rect.y,
                    rect.w,
                    rect.h,
                    escape(if *group { &st.group_fill } else { &st.box_fill }),
                    escape(&st.stroke),
                    st.stroke_width
                ),
                Item::Label {
                    node_id,
                    text,
                    at,
                    anchor,
                    font_size,
                } => writeln!(
                    s,
                    r#"  <text id="label-{}" x="{}" y="{}" font-family="{}" font-size="{}" text-anchor="{}" fill="{}">{}</text>"#,
                    escape(node_id),
                    at.x,
                    at.y,
                    escape(&st.font_family),
                    font_size,
                    anchor.as_str(),
                    escape(&st.text_fill),
                    escape(text)
                ),
                Item::Connector { index, start, end } => writeln!(
                    s,
                    r#"  <line id="edge-{}" x1="{}" y1="{}" x2="{}" y2="{}" stroke="{}" stroke-width="{}"{}/>"#,
                    index,
                    start.x,
                    start.y,
                    end.x,
                    end.y,
                    escape(&st.stroke),
                    st.stroke_width,
                    if st.arrowheads {
                        r#" marker-end="url(#arrow)""#
                    } else {
                        ""
                    }
                ),
            };
        }
        s.push_str("</svg>\n");
        s
    }
}

pub fn emit_svg(plan: &LayoutPlan, style: &StyleConfig) -> String {
    Drawing::from_plan(plan, style).to_svg()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plan::{AnchorKind, Canvas, ConnectorSpec, NodeSpec};
    use crate::svg::{parse_svg, ElementKind};

    fn plan(with_edge: bool) -> LayoutPlan {
        let node = |id: &str, x: f64| NodeSpec {
            id: id.into(),
            node_type: NodeType::Box,
            bbox: Rect::new(x, 100.0, 150.0, 80.0),
            label: format!("Stage {id}"),
        };
        let connectors = if with_edge {
            vec![ConnectorSpec {
                src_id: "A".into(),
                dst_id: "B".into(),
                src_anchor: AnchorKind::RightCenter,
                dst_anchor: AnchorKind::LeftCenter,
            }]
        } else {
            vec![]
        };
        LayoutPlan {
            canvas: Canvas::default(),
            nodes: vec![node("A", 50.0), node("B", 350.0)],
            edges: LayoutPlan::induced_edges(&connectors),
            connectors,
        }
    }

    #[test]
    fn connector_hits_anchor_points() {
        let svg = emit_svg(&plan(true), &StyleConfig::default());
        assert!(svg.contains(r#"x1="200" y1="140" x2="350" y2="140""#), "{svg}");
        let scene = parse_svg(&svg).unwrap();
        assert!(scene.parse_ok());
        let line = scene.elements.iter().find(|e| e.kind() == ElementKind::Line).unwrap();
        assert_eq!(
            line.endpoints,
            Some((Point::new(200.0, 140.0), Point::new(350.0, 140.0)))
        );
    }

    #[test]
    fn no_connectors_no_lines() {
        let scene = parse_svg(&emit_svg(&plan(false), &StyleConfig::default())).unwrap();
        assert!(scene.elements.iter().all(|e| e.kind() != ElementKind::Line));
        assert_eq!(scene.elements.len(), 4);
    }

    #[test]
    fn deterministic() {
        let st = StyleConfig::with_font_size(18.0);
        assert_eq!(emit_svg(&plan(true), &st), emit_svg(&plan(true), &st));
    }

    #[test]
    fn labels_are_centered() {
        let scene = parse_svg(&emit_svg(&plan(true), &StyleConfig::default())).unwrap();
        let text = scene.elements.iter().find(|e| e.kind() == ElementKind::Text).unwrap();
        let c = text.global_bbox.center();
        assert!((c.x - 125.0).abs() < 1e-9 && (c.y - 140.0).abs() < 1e-9, "{c}");
    }

    #[test]
    fn escapes_markup_in_labels() {
        let mut p = plan(false);
        p.nodes[0].label = "Q&A <fast>".into();
        let svg = emit_svg(&p, &StyleConfig::default());
        let scene = parse_svg(&svg).unwrap();
        assert!(scene
            .elements
            .iter()
            .any(|e| e.text_content.as_deref() == Some("Q&A <fast>")));
    }
}
