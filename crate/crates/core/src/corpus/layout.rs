//! Turns a [`Skeleton`] into concrete boxes on a canvas.
//!
//! All boxes in a diagram share one size: wide enough for the longest label
//! plus `2·(p + 4)` px. Lattice pitch is box size plus gap, with widths and
//! pitches kept even so half-unit slots land on integer coordinates.

use super::templates::Skeleton;
use crate::emit::GROUP_TITLE_INSET;
use crate::geom::{Point, Rect};
use crate::plan::{anchor_point, AnchorKind, Canvas, ConnectorSpec, LayoutPlan, NodeSpec, NodeType};
use crate::text::FontModel;

pub const CANVAS_MARGIN: f64 = 20.0;
/// Horizontal slack on each side of a label: padding 6 plus 4.
pub const LABEL_SLACK: f64 = 10.0;
pub const MIN_BOX_WIDTH: f64 = 60.0;
pub const GROUP_PAD: f64 = 14.0;
const MIN_GAP_X: f64 = 40.0;
const MAX_GAP_X: f64 = 96.0;
const MIN_GAP_Y: f64 = 24.0;
const MAX_GAP_Y: f64 = 56.0;
const TEXT_PADDING: f64 = 6.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Placement {
    pub boxes: Vec<Rect>,
    pub groups: Vec<Rect>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LayoutFailure {
    #[error("content needs {needed:.0} px but only {available:.0} px are available along {axis}")]
    TooLarge {
        axis: &'static str,
        needed: f64,
        available: f64,
    },
    #[error("group title {0:?} is wider than its container")]
    TitleTooWide(String),
    #[error("connector {src}->{dst} crosses another box")]
    Blocked { src: usize, dst: usize },
}

fn even_ceil(v: f64) -> f64 {
    (v / 2.0).ceil() * 2.0
}

fn even_floor(v: f64) -> f64 {
    (v / 2.0).floor() * 2.0
}

/// Box width shared by all nodes of a diagram.
pub fn box_width(labels: &[String], font_size: f64, font: &FontModel) -> f64 {
    even_ceil(
        labels
            .iter()
            .map(|l| font.text_width(l, font_size).ceil() + 2.0 * LABEL_SLACK)
            .fold(MIN_BOX_WIDTH, f64::max),
    )
}

pub fn box_height(font_size: f64) -> f64 {
    font_size.ceil() + 2.0 * LABEL_SLACK
}

fn group_rect(members: &[Rect], font_size: f64) -> Rect {
    let b = members.iter().skip(1).fold(members[0], |acc, r| acc.union(r));
    let band = font_size.ceil() + GROUP_TITLE_INSET + GROUP_PAD;
    Rect::new(
        b.x - GROUP_PAD,
        b.y - band,
        b.w + 2.0 * GROUP_PAD,
        b.h + band + GROUP_PAD,
    )
}

fn arrange(sk: &Skeleton, w: f64, h: f64, gx: f64, gy: f64, fs: f64) -> (Vec<Rect>, Vec<Rect>) {
    let min_c = sk.pos.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let min_r = sk.pos.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let boxes: Vec<Rect> = sk
        .pos
        .iter()
        .map(|&(c, r)| Rect::new((c - min_c) * (w + gx), (r - min_r) * (h + gy), w, h))
        .collect();
    let groups = sk
        .groups
        .iter()
        .map(|m| group_rect(&m.iter().map(|&i| boxes[i]).collect::<Vec<_>>(), fs))
        .collect();
    (boxes, groups)
}

fn extent(boxes: &[Rect], groups: &[Rect]) -> Rect {
    boxes.iter().chain(groups).skip(1).fold(boxes[0], |acc, r| acc.union(r))
}

/// Largest even gap in `[min, max]` that keeps the content within `available`.
fn stretch(span_at_min: f64, units: f64, available: f64, min: f64, max: f64) -> f64 {
    if units <= 0.0 {
        return min;
    }
    let spare = available - span_at_min;
    (min + even_floor(spare / units)).clamp(min, max)
}

/// Places every node and group of `sk` on `canvas`.
pub fn place(
    sk: &Skeleton,
    labels: &[String],
    titles: &[String],
    font_size: f64,
    canvas: &Canvas,
    font: &FontModel,
) -> Result<Placement, LayoutFailure> {
    let w = box_width(labels, font_size, font);
    let h = box_height(font_size);
    // Keep the vertical pitch even so half rows stay on integers.
    let gy_min = MIN_GAP_Y + (h % 2.0);
    let avail_w = canvas.width - 2.0 * CANVAS_MARGIN;
    let avail_h = canvas.height - 2.0 * CANVAS_MARGIN;

    let (b0, g0) = arrange(sk, w, h, MIN_GAP_X, gy_min, font_size);
    let e0 = extent(&b0, &g0);
    for (axis, needed, available) in [("x", e0.w, avail_w), ("y", e0.h, avail_h)] {
        if needed > available {
            return Err(LayoutFailure::TooLarge {
                axis,
                needed,
                available,
            });
        }
    }
    let cols = span(sk.pos.iter().map(|p| p.0));
    let rows = span(sk.pos.iter().map(|p| p.1));
    let gx = stretch(e0.w, cols, avail_w, MIN_GAP_X, MAX_GAP_X);
    let gy = stretch(e0.h, rows, avail_h, gy_min, MAX_GAP_Y);
    let (boxes, groups) = arrange(sk, w, h, gx, gy, font_size);
    let e = extent(&boxes, &groups);
    let dx = CANVAS_MARGIN + ((avail_w - e.w) / 2.0).floor() - e.x;
    let dy = CANVAS_MARGIN + ((avail_h - e.h) / 2.0).floor() - e.y;
    let boxes: Vec<Rect> = boxes.iter().map(|r| r.translate(dx, dy)).collect();
    let groups: Vec<Rect> = groups.iter().map(|r| r.translate(dx, dy)).collect();

    for (g, title) in groups.iter().zip(titles) {
        let tw = font.text_width(title, font_size);
        if GROUP_TITLE_INSET + tw > g.w - TEXT_PADDING {
            return Err(LayoutFailure::TitleTooWide(title.clone()));
        }
    }
    Ok(Placement { boxes, groups })
}

fn span(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let lo = values.clone().fold(f64::INFINITY, f64::min);
    let hi = values.fold(f64::NEG_INFINITY, f64::max);
    hi - lo
}

/// Sides of `u` and `v` that face each other, preferring left/right.
pub fn facing_anchors(u: &Rect, v: &Rect) -> (AnchorKind, AnchorKind) {
    use AnchorKind::*;
    if v.x >= u.right() + 1.0 {
        (RightCenter, LeftCenter)
    } else if v.right() <= u.x - 1.0 {
        (LeftCenter, RightCenter)
    } else if v.y >= u.bottom() {
        (BottomCenter, TopCenter)
    } else {
        (TopCenter, BottomCenter)
    }
}

/// Whether segment `a`-`b` enters the interior of `r` (shrunk by 1 px).
pub fn segment_hits_rect(a: Point, b: Point, r: &Rect) -> bool {
    let r = r.deflate(1.0);
    if r.w <= 0.0 || r.h <= 0.0 {
        return false;
    }
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let mut t0: f64 = 0.0;
    let mut t1: f64 = 1.0;
    for (p, q) in [
        (-dx, a.x - r.x),
        (dx, r.right() - a.x),
        (-dy, a.y - r.y),
        (dy, r.bottom() - a.y),
    ] {
        if p == 0.0 {
            if q < 0.0 {
                return false;
            }
        } else {
            let t = q / p;
            if p < 0.0 {
                t0 = t0.max(t);
            } else {
                t1 = t1.min(t);
            }
        }
    }
    t0 < t1
}

/// Anchors for an edge, or `None` if the straight connector would cross a
/// third box.
pub fn route(
    boxes: &[Rect],
    src: usize,
    dst: usize,
    anchors: Option<(AnchorKind, AnchorKind)>,
) -> Option<(AnchorKind, AnchorKind)> {
    let (a, b) = anchors.unwrap_or_else(|| facing_anchors(&boxes[src], &boxes[dst]));
    let p = anchor_point(&boxes[src], a);
    let q = anchor_point(&boxes[dst], b);
    // Endpoint boxes are included: a connector must leave through its anchor.
    let blocked = boxes.iter().any(|r| segment_hits_rect(p, q, r));
    (!blocked).then_some((a, b))
}

pub fn node_id(i: usize) -> String {
    format!("n{i}")
}

pub fn group_id(i: usize) -> String {
    format!("g{i}")
}

/// Builds the plan: boxes first, then groups; connectors in the given order.
pub fn to_plan(
    placement: &Placement,
    labels: &[String],
    titles: &[String],
    canvas: Canvas,
    connectors: &[(usize, usize, AnchorKind, AnchorKind)],
) -> LayoutPlan {
    let mut nodes: Vec<NodeSpec> = placement
        .boxes
        .iter()
        .zip(labels)
        .enumerate()
        .map(|(i, (r, l))| NodeSpec {
            id: node_id(i),
            node_type: NodeType::Box,
            bbox: *r,
            label: l.clone(),
        })
        .collect();
    nodes.extend(
        placement
            .groups
            .iter()
            .zip(titles)
            .enumerate()
            .map(|(i, (r, t))| NodeSpec {
                id: group_id(i),
                node_type: NodeType::Group,
                bbox: *r,
                label: t.clone(),
            }),
    );
    let connectors: Vec<ConnectorSpec> = connectors
        .iter()
        .map(|&(s, d, a, b)| ConnectorSpec {
            src_id: node_id(s),
            dst_id: node_id(d),
            src_anchor: a,
            dst_anchor: b,
        })
        .collect();
    LayoutPlan {
        canvas,
        nodes,
        edges: LayoutPlan::induced_edges(&connectors),
        connectors,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn segment_clipping() {
        let r = Rect::new(10.0, 10.0, 20.0, 20.0);
        assert!(segment_hits_rect(Point::new(0.0, 20.0), Point::new(40.0, 20.0), &r));
        assert!(!segment_hits_rect(Point::new(0.0, 0.0), Point::new(40.0, 0.0), &r));
        // Touching the border only.
        assert!(!segment_hits_rect(Point::new(30.0, 20.0), Point::new(60.0, 20.0), &r));
        assert!(!segment_hits_rect(Point::new(0.0, 10.0), Point::new(40.0, 10.0), &r));
        assert!(segment_hits_rect(Point::new(0.0, 0.0), Point::new(40.0, 40.0), &r));
    }

    #[test]
    fn facing_prefers_horizontal() {
        use AnchorKind::*;
        let u = Rect::new(0.0, 0.0, 50.0, 30.0);
        assert_eq!(facing_anchors(&u, &u.translate(100.0, 80.0)), (RightCenter, LeftCenter));
        assert_eq!(facing_anchors(&u, &u.translate(-100.0, 0.0)), (LeftCenter, RightCenter));
        assert_eq!(facing_anchors(&u, &u.translate(20.0, 60.0)), (BottomCenter, TopCenter));
        assert_eq!(facing_anchors(&u, &u.translate(0.0, -60.0)), (TopCenter, BottomCenter));
    }

    #[test]
    fn widths_are_even_and_fit_labels() {
        let font = crate::text::builtin_font();
        for fs in 12..=20 {
            let labels = vec!["Vector Store".to_string(), "A".to_string()];
            let w = box_width(&labels, fs as f64, font);
            assert_eq!(w % 2.0, 0.0);
            assert!(w - font.text_width("Vector Store", fs as f64) >= 2.0 * LABEL_SLACK);
        }
    }
}
