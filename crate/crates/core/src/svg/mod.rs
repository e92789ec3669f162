//! SVG parsing into global-coordinate primitives.
//!
//! [`parse_svg`] walks the document once, resolves every `transform` chain
//! into a single matrix per element and computes fill-geometry bounding
//! boxes (stroke width is ignored). Elements the builtin engine cannot
//! resolve exactly are kept out of [`SvgScene::elements`] and reported in
//! [`SvgScene::unresolved`] instead.

pub mod path;
pub mod transform;

pub use path::{path_endpoints, PathData, PathError};
pub use transform::{parse_transform, TransformError};

use crate::geom::{compose_transforms, AffineTransform, Point, Rect};
use crate::text::{AnchorMode, FontModel, TextMeasurer};
use roxmltree::{Document, Node, NodeId};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

pub const DEFAULT_CANVAS_WIDTH: f64 = 800.0;
pub const DEFAULT_CANVAS_HEIGHT: f64 = 600.0;
pub const DEFAULT_FONT_SIZE: f64 = 16.0;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ParseError {
    #[error("malformed XML at {line}:{column}: {message}")]
    Xml { line: u32, column: u32, message: String },
    #[error("root element is <{found}>, expected <svg>")]
    MissingRoot { found: String },
    #[error("invalid value {value:?} for attribute `{attribute}` at {line}:{column}")]
    InvalidNumber {
        attribute: String,
        value: String,
        line: u32,
        column: u32,
    },
    #[error("canvas size must be positive, got {width}x{height}")]
    InvalidCanvas { width: f64, height: f64 },
}

impl ParseError {
    /// `(line, column)` of the offending input, 1-based.
    pub fn position(&self) -> Option<(u32, u32)> {
        match self {
            ParseError::Xml { line, column, .. } | ParseError::InvalidNumber { line, column, .. } => {
                Some((*line, *column))
            }
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ElementKind {
    Rect,
    Circle,
    Ellipse,
    Line,
    Polyline,
    Polygon,
    Path,
    Text,
    Group,
}

impl ElementKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ElementKind::Rect => "rect",
            ElementKind::Circle => "circle",
            ElementKind::Ellipse => "ellipse",
            ElementKind::Line => "line",
            ElementKind::Polyline => "polyline",
            ElementKind::Polygon => "polygon",
            ElementKind::Path => "path",
            ElementKind::Text => "text",
            ElementKind::Group => "group",
        }
    }

    /// Kinds that can act as connectors and therefore carry endpoints.
    pub fn is_connector(self) -> bool {
        matches!(self, ElementKind::Line | ElementKind::Polyline | ElementKind::Path)
    }

    /// Tags whose name states their diagrammatic role.
    pub fn is_semantic(self) -> bool {
        matches!(
            self,
            ElementKind::Rect
                | ElementKind::Text
                | ElementKind::Line
                | ElementKind::Polyline
                | ElementKind::Circle
                | ElementKind::Ellipse
        )
    }
}

/// A single-line text run in the element's local coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct TextSpan {
    pub content: String,
    /// Anchor point on the baseline.
    pub origin: Point,
    pub font_size: f64,
    pub anchor: AnchorMode,
}

/// Local geometry of an element, before its transform.
#[derive(Debug, Clone, PartialEq)]
pub enum Shape {
    Rect(Rect),
    Circle { center: Point, r: f64 },
    Ellipse { center: Point, rx: f64, ry: f64 },
    Line(Point, Point),
    Polyline(Vec<Point>),
    Polygon(Vec<Point>),
    Path(PathData),
    Text(TextSpan),
    Group,
}

impl Shape {
    pub fn kind(&self) -> ElementKind {
        match self {
            Shape::Rect(_) => ElementKind::Rect,
            Shape::Circle { .. } => ElementKind::Circle,
            Shape::Ellipse { .. } => ElementKind::Ellipse,
            Shape::Line(..) => ElementKind::Line,
            Shape::Polyline(_) => ElementKind::Polyline,
            Shape::Polygon(_) => ElementKind::Polygon,
            Shape::Path(_) => ElementKind::Path,
            Shape::Text(_) => ElementKind::Text,
            Shape::Group => ElementKind::Group,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvgElement {
    /// Pre-order position among all element descendants of the root,
    /// counting skipped ones, so it lines up with a DOM
    /// `querySelectorAll('*')` walk.
    pub doc_index: usize,
    pub elem_id: String,
    pub shape: Shape,
    /// Element-to-root transform.
    pub transform: AffineTransform,
    pub global_bbox: Rect,
    pub endpoints: Option<(Point, Point)>,
    pub text_content: Option<String>,
    pub style: BTreeMap<String, String>,
}

impl SvgElement {
    pub fn kind(&self) -> ElementKind {
        self.shape.kind()
    }
}

/// An element the builtin engine could not resolve.
#[derive(Debug, Clone, PartialEq)]
pub struct GeometryIssue {
    pub doc_index: usize,
    pub tag: String,
    pub line: u32,
    pub column: u32,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvgScene {
    pub canvas_width: f64,
    pub canvas_height: f64,
    pub elements: Vec<SvgElement>,
    pub unresolved: Vec<GeometryIssue>,
}

impl SvgScene {
    /// True when every element in the document was resolved.
    pub fn parse_ok(&self) -> bool {
        self.unresolved.is_empty()
    }

    pub fn canvas(&self) -> Rect {
        Rect::new(0.0, 0.0, self.canvas_width, self.canvas_height)
    }

    pub fn element(&self, doc_index: usize) -> Option<&SvgElement> {
        self.elements.iter().find(|e| e.doc_index == doc_index)
    }

    /// Flat re-serialization: every non-group element with its resolved
    /// matrix and local geometry.
    pub fn to_svg(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}">"#,
            self.canvas_width, self.canvas_height
        );
        for el in &self.elements {
            let t = &el.transform;
            let tf = format!(
                r#" transform="matrix({} {} {} {} {} {})""#,
                t.a, t.b, t.c, t.d, t.e, t.f
            );
            let id = if el.elem_id.is_empty() {
                String::new()
            } else {
                format!(r#" id="{}""#, escape(&el.elem_id))
            };
            let _ = match &el.shape {
                Shape::Group => continue,
                Shape::Rect(r) => writeln!(
                    s,
                    r#"  <rect{id} x="{}" y="{}" width="{}" height="{}"{tf}/>"#,
                    r.x, r.y, r.w, r.h
                ),
                Shape::Circle { center, r } => writeln!(
                    s,
                    r#"  <circle{id} cx="{}" cy="{}" r="{}"{tf}/>"#,
                    center.x, center.y, r
                ),
                Shape::Ellipse { center, rx, ry } => writeln!(
                    s,
                    r#"  <ellipse{id} cx="{}" cy="{}" rx="{}" ry="{}"{tf}/>"#,
                    center.x, center.y, rx, ry
                ),
                Shape::Line(a, b) => writeln!(
                    s,
                    r#"  <line{id} x1="{}" y1="{}" x2="{}" y2="{}"{tf}/>"#,
                    a.x, a.y, b.x, b.y
                ),
                Shape::Polyline(pts) => {
                    writeln!(s, r#"  <polyline{id} points="{}"{tf}/>"#, points_attr(pts))
                }
                Shape::Polygon(pts) => {
                    writeln!(s, r#"  <polygon{id} points="{}"{tf}/>"#, points_attr(pts))
                }
                Shape::Path(p) => {
                    writeln!(s, r#"  <path{id} d="{}"{tf}/>"#, p.to_path_string())
                }
                Shape::Text(span) => writeln!(
                    s,
                    r#"  <text{id} x="{}" y="{}" font-size="{}" text-anchor="{}"{tf}>{}</text>"#,
                    span.origin.x,
                    span.origin.y,
                    span.font_size,
                    span.anchor.as_str(),
                    escape(&span.content)
                ),
            };
        }
        s.push_str("</svg>\n");
        s
    }
}

fn points_attr(pts: &[Point]) -> String {
    pts.iter()
        .map(|p| format!("{},{}", p.x, p.y))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Escapes text for XML character data and attribute values.
pub fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            _ => out.push(c),
        }
    }
    out
}

/// Parses with the builtin font model used for text boxes.
pub fn parse_svg(xml: &str) -> Result<SvgScene, ParseError> {
    parse_svg_with_font(xml, crate::text::builtin_font())
}

pub fn parse_svg_with_font(xml: &str, font: &FontModel) -> Result<SvgScene, ParseError> {
    let doc = Document::parse(xml).map_err(|e| {
        let pos = e.pos();
        ParseError::Xml {
            line: pos.row,
            column: pos.col,
            message: e.to_string(),
        }
    })?;
    let root = doc.root_element();
    if root.tag_name().name() != "svg" {
        return Err(ParseError::MissingRoot {
            found: root.tag_name().name().to_string(),
        });
    }

    let mut doc_index = HashMap::new();
    for (i, node) in root.descendants().filter(|n| n.is_element()).skip(1).enumerate() {
        doc_index.insert(node.id(), i);
    }

    let (canvas_width, canvas_height, view) = viewport(&doc, root)?;
    let mut walker = Walker {
        doc: &doc,
        font,
        doc_index,
        elements: Vec::new(),
        unresolved: Vec::new(),
    };
    let inherited = Inherited {
        font_size: DEFAULT_FONT_SIZE,
        anchor: AnchorMode::Start,
    };
    let inherited = walker.inherit(root, inherited)?;
    for child in root.children().filter(|n| n.is_element()) {
        walker.visit(child, &view, inherited)?;
    }
    Ok(SvgScene {
        canvas_width,
        canvas_height,
        elements: walker.elements,
        unresolved: walker.unresolved,
    })
}

fn viewport(doc: &Document, root: Node) -> Result<(f64, f64, AffineTransform), ParseError> {
    let view_box = match root.attribute("viewBox") {
        Some(v) => {
            let nums = number_list(doc, root, "viewBox", v)?;
            match nums[..] {
                [x, y, w, h] if w > 0.0 && h > 0.0 => Some(Rect::new(x, y, w, h)),
                _ => {
                    return Err(invalid_number(doc, root, "viewBox", v));
                }
            }
        }
        None => None,
    };
    let width = length_attr(doc, root, "width")?
        .or(view_box.map(|v| v.w))
        .unwrap_or(DEFAULT_CANVAS_WIDTH);
    let height = length_attr(doc, root, "height")?
        .or(view_box.map(|v| v.h))
        .unwrap_or(DEFAULT_CANVAS_HEIGHT);
    if !(width > 0.0 && height > 0.0) {
        return Err(ParseError::InvalidCanvas { width, height });
    }
    let transform = match view_box {
        None => AffineTransform::IDENTITY,
        Some(vb) => view_box_transform(vb, width, height, root.attribute("preserveAspectRatio")),
    };
    Ok((width, height, transform))
}

fn view_box_transform(vb: Rect, width: f64, height: f64, par: Option<&str>) -> AffineTransform {
    let mut sx = width / vb.w;
    let mut sy = height / vb.h;
    let mut words = par.unwrap_or("xMidYMid meet").split_whitespace();
    let align = words.next().unwrap_or("xMidYMid");
    let slice = words.next() == Some("slice");
    if align == "none" {
        return compose_transforms(
            &AffineTransform::scale(sx, sy),
            &AffineTransform::translate(-vb.x, -vb.y),
        );
    }
    let s = if slice { sx.max(sy) } else { sx.min(sy) };
    sx = s;
    sy = s;
    let free_x = width - vb.w * s;
    let free_y = height - vb.h * s;
    let fx = if align.starts_with("xMin") {
        0.0
    } else if align.starts_with("xMax") {
        1.0
    } else {
        0.5
    };
    let fy = if align.ends_with("YMin") {
        0.0
    } else if align.ends_with("YMax") {
        1.0
    } else {
        0.5
    };
    compose_transforms(
        &AffineTransform::translate(free_x * fx, free_y * fy),
        &compose_transforms(
            &AffineTransform::scale(sx, sy),
            &AffineTransform::translate(-vb.x, -vb.y),
        ),
    )
}

#[derive(Debug, Clone, Copy)]
struct Inherited {
    font_size: f64,
    anchor: AnchorMode,
}

/// Containers whose content never renders in place.
const SKIPPED: &[&str] = &[
    "defs",
    "marker",
    "title",
    "desc",
    "metadata",
    "style",
    "script",
    "clipPath",
    "mask",
    "pattern",
    "linearGradient",
    "radialGradient",
    "filter",
    "symbol",
];

struct Walker<'a, 'input> {
    doc: &'a Document<'input>,
    font: &'a FontModel,
    doc_index: HashMap<NodeId, usize>,
    elements: Vec<SvgElement>,
    unresolved: Vec<GeometryIssue>,
}

impl<'a, 'input> Walker<'a, 'input> {
    fn issue(&mut self, node: Node, message: impl Into<String>) {
        let pos = self.doc.text_pos_at(node.range().start);
        self.unresolved.push(GeometryIssue {
            doc_index: self.doc_index[&node.id()],
            tag: node.tag_name().name().to_string(),
            line: pos.row,
            column: pos.col,
            message: message.into(),
        });
    }

    fn inherit(&self, node: Node, parent: Inherited) -> Result<Inherited, ParseError> {
        let mut out = parent;
        let styles = inline_style(node);
        let size = styles
            .get("font-size")
            .map(|v| ("font-size", *v))
            .or_else(|| node.attribute("font-size").map(|v| ("font-size", v)));
        if let Some((name, v)) = size {
            match parse_length(v) {
                Some(s) if s > 0.0 => out.font_size = s,
                _ => return Err(invalid_number(self.doc, node, name, v)),
            }
        }
        let anchor = styles
            .get("text-anchor")
            .copied()
            .or_else(|| node.attribute("text-anchor"));
        if let Some(mode) = anchor.and_then(AnchorMode::parse) {
            out.anchor = mode;
        }
        Ok(out)
    }

    fn visit(
        &mut self,
        node: Node,
        parent: &AffineTransform,
        inherited: Inherited,
    ) -> Result<Option<Rect>, ParseError> {
        let tag = node.tag_name().name();
        if SKIPPED.contains(&tag) || node.attribute("display").map(str::trim) == Some("none") {
            return Ok(None);
        }
        if inline_style(node).get("display").copied() == Some("none") {
            return Ok(None);
        }
        let local = match node.attribute("transform") {
            None => AffineTransform::IDENTITY,
            Some(src) => match parse_transform(src) {
                Ok(t) if t.is_finite() => t,
                Ok(_) => {
                    self.issue(node, "transform is not finite");
                    return Ok(None);
                }
                Err(e) => {
                    self.issue(node, e.to_string());
                    return Ok(None);
                }
            },
        };
        let transform = compose_transforms(parent, &local);
        let inherited = self.inherit(node, inherited)?;

        let shape = match tag {
            "g" | "a" => {
                let slot = self.elements.len();
                self.elements.push(SvgElement {
                    doc_index: self.doc_index[&node.id()],
                    elem_id: node.attribute("id").unwrap_or_default().to_string(),
                    shape: Shape::Group,
                    transform,
                    global_bbox: Rect::default(),
                    endpoints: None,
                    text_content: None,
                    style: attributes(node),
                });
                let mut bbox: Option<Rect> = None;
                for child in node.children().filter(|n| n.is_element()) {
                    if let Some(b) = self.visit(child, &transform, inherited)? {
                        bbox = Some(bbox.map_or(b, |acc| acc.union(&b)));
                    }
                }
                let origin = transform.apply(Point::default());
                self.elements[slot].global_bbox = bbox.unwrap_or(Rect::new(origin.x, origin.y, 0.0, 0.0));
                return Ok(bbox);
            }
            "rect" => {
                let x = self.num(node, "x")?;
                let y = self.num(node, "y")?;
                let w = self.num(node, "width")?;
                let h = self.num(node, "height")?;
                self.num(node, "rx")?;
                self.num(node, "ry")?;
                if w < 0.0 || h < 0.0 {
                    self.issue(node, "negative rect size");
                    return Ok(None);
                }
                Shape::Rect(Rect::new(x, y, w, h))
            }
            "circle" => {
                let center = Point::new(self.num(node, "cx")?, self.num(node, "cy")?);
                let r = self.num(node, "r")?;
                if r < 0.0 {
                    self.issue(node, "negative radius");
                    return Ok(None);
                }
                Shape::Circle { center, r }
            }
            "ellipse" => {
                let center = Point::new(self.num(node, "cx")?, self.num(node, "cy")?);
                let rx = self.num(node, "rx")?;
                let ry = self.num(node, "ry")?;
                if rx < 0.0 || ry < 0.0 {
                    self.issue(node, "negative radius");
                    return Ok(None);
                }
                Shape::Ellipse { center, rx, ry }
            }
            "line" => Shape::Line(
                Point::new(self.num(node, "x1")?, self.num(node, "y1")?),
                Point::new(self.num(node, "x2")?, self.num(node, "y2")?),
            ),
            "polyline" | "polygon" => {
                let raw = node.attribute("points").unwrap_or("");
                let nums = number_list(self.doc, node, "points", raw)?;
                if nums.len() % 2 == 1 || nums.len() < 4 {
                    self.issue(node, "points needs at least two coordinate pairs");
                    return Ok(None);
                }
                let pts: Vec<Point> = nums.chunks(2).map(|c| Point::new(c[0], c[1])).collect();
                if tag == "polyline" {
                    Shape::Polyline(pts)
                } else {
                    Shape::Polygon(pts)
                }
            }
            "path" => {
                let d = node.attribute("d").unwrap_or("");
                match PathData::parse(d) {
                    Ok(p) if p.endpoints(&transform).is_ok() => Shape::Path(p),
                    Ok(_) => {
                        self.issue(node, PathError::NoVisibleSegment.to_string());
                        return Ok(None);
                    }
                    Err(e) => {
                        self.issue(node, e.to_string());
                        return Ok(None);
                    }
                }
            }
            "text" => {
                let origin = Point::new(self.num(node, "x")?, self.num(node, "y")?);
                Shape::Text(TextSpan {
                    content: collapse_whitespace(node),
                    origin,
                    font_size: inherited.font_size,
                    anchor: inherited.anchor,
                })
            }
            other => {
                self.issue(node, format!("unsupported element <{other}>"));
                return Ok(None);
            }
        };

        let mut element = SvgElement {
            doc_index: self.doc_index[&node.id()],
            elem_id: node.attribute("id").unwrap_or_default().to_string(),
            shape,
            transform,
            global_bbox: Rect::default(),
            endpoints: None,
            text_content: None,
            style: attributes(node),
        };
        element.global_bbox = self.global_bbox(&element);
        element.endpoints = connector_endpoints(&element.shape, &transform);
        if let Shape::Text(span) = &element.shape {
            element.text_content = Some(span.content.clone());
        }
        let bbox = element.global_bbox;
        self.elements.push(element);
        Ok(Some(bbox))
    }

    fn global_bbox(&self, el: &SvgElement) -> Rect {
        let t = &el.transform;
        match &el.shape {
            Shape::Rect(r) => r.transformed(t),
            Shape::Circle { center, r } => ellipse_bbox(*center, *r, *r, t),
            Shape::Ellipse { center, rx, ry } => ellipse_bbox(*center, *rx, *ry, t),
            Shape::Line(a, b) => Rect::from_corners(t.apply(*a), t.apply(*b)),
            Shape::Polyline(pts) | Shape::Polygon(pts) => {
                Rect::bounding(pts.iter().map(|p| t.apply(*p))).expect("at least two points")
            }
            Shape::Path(p) => p.bounds(t).expect("path has a drawn segment"),
            Shape::Text(_) => self.font.text_box(el).expect("text element").bbox,
            Shape::Group => Rect::default(),
        }
    }

    /// A plain numeric attribute; absent means 0.
    fn num(&self, node: Node, name: &str) -> Result<f64, ParseError> {
        match node.attribute(name) {
            None => Ok(0.0),
            Some(v) => parse_length(v).ok_or_else(|| invalid_number(self.doc, node, name, v)),
        }
    }
}

fn connector_endpoints(shape: &Shape, t: &AffineTransform) -> Option<(Point, Point)> {
    match shape {
        Shape::Line(a, b) => Some((t.apply(*a), t.apply(*b))),
        Shape::Polyline(pts) => Some((t.apply(pts[0]), t.apply(*pts.last()?))),
        Shape::Path(p) => p.endpoints(t).ok(),
        _ => None,
    }
}

/// Exact bounds of an axis-aligned ellipse after an affine map: the image
/// is an ellipse with conjugate half-axes `T·(rx,0)` and `T·(0,ry)`.
fn ellipse_bbox(center: Point, rx: f64, ry: f64, t: &AffineTransform) -> Rect {
    let c = t.apply(center);
    let u = t.apply_vector(Point::new(rx, 0.0));
    let v = t.apply_vector(Point::new(0.0, ry));
    let hx = u.x.hypot(v.x);
    let hy = u.y.hypot(v.y);
    Rect::new(c.x - hx, c.y - hy, 2.0 * hx, 2.0 * hy)
}

fn attributes(node: Node) -> BTreeMap<String, String> {
    node.attributes()
        .map(|a| (a.name().to_string(), a.value().to_string()))
        .collect()
}

fn inline_style<'a>(node: Node<'a, '_>) -> BTreeMap<&'a str, &'a str> {
    node.attribute("style")
        .map(|s| {
            s.split(';')
                .filter_map(|decl| {
                    let (k, v) = decl.split_once(':')?;
                    Some((k.trim(), v.trim()))
                })
                .collect()
        })
        .unwrap_or_default()
}

fn collapse_whitespace(node: Node) -> String {
    let raw: String = node
        .descendants()
        .filter(|n| n.is_text())
        .filter_map(|n| n.text())
        .collect();
    raw.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Unitless number or a number with a `px` suffix.
pub fn parse_length(s: &str) -> Option<f64> {
    let s = s.trim();
    let s = s.strip_suffix("px").unwrap_or(s);
    if s.is_empty() || s.starts_with(|c: char| c.is_ascii_alphabetic()) {
        return None;
    }
    s.parse::<f64>().ok().filter(|v| v.is_finite())
}

fn length_attr(doc: &Document, node: Node, name: &str) -> Result<Option<f64>, ParseError> {
    node.attribute(name)
        .map(|v| parse_length(v).ok_or_else(|| invalid_number(doc, node, name, v)))
        .transpose()
}

fn number_list(doc: &Document, node: Node, name: &str, raw: &str) -> Result<Vec<f64>, ParseError> {
    raw.split(|c: char| c.is_ascii_whitespace() || c == ',')
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| invalid_number(doc, node, name, raw))
        })
        .collect()
}

fn invalid_number(doc: &Document, node: Node, name: &str, value: &str) -> ParseError {
    let offset = node
        .attribute_node(name)
        .map(|a| a.range_value().start)
        .unwrap_or(node.range().start);
    let pos = doc.text_pos_at(offset);
    ParseError::InvalidNumber {
        attribute: name.to_string(),
        value: value.to_string(),
        line: pos.row,
        column: pos.col,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn scene(xml: &str) -> SvgScene {
        parse_svg(xml).unwrap()
    }

    #[test]
    fn single_rect() {
        let s = scene(r#"<svg width="800" height="600"><rect x="10" y="20" width="100" height="50"/></svg>"#);
        assert_eq!((s.canvas_width, s.canvas_height), (800.0, 600.0));
        assert_eq!(s.elements.len(), 1);
        assert_eq!(s.elements[0].kind(), ElementKind::Rect);
        assert_eq!(s.elements[0].global_bbox, Rect::new(10.0, 20.0, 100.0, 50.0));
        assert!(s.parse_ok());
    }

    #[test]
    fn truncated_xml_is_an_error() {
        let err = parse_svg(r#"<svg><rect x="1""#).unwrap_err();
        assert!(matches!(err, ParseError::Xml { .. }));
        assert!(err.position().is_some());
    }

    #[test]
    fn group_translation() {
        let s = scene(r#"<svg><g transform="translate(10,5)"><rect width="100" height="50"/></g></svg>"#);
        assert_eq!(s.elements[0].kind(), ElementKind::Group);
        assert_eq!(s.elements[1].global_bbox, Rect::new(10.0, 5.0, 100.0, 50.0));
        assert_eq!(s.elements[0].global_bbox, s.elements[1].global_bbox);
    }

    #[test]
    fn nested_transforms_compose() {
        let s = scene(
            r#"<svg><g transform="translate(10,5)"><g transform="scale(2)"><line x1="1" y1="1" x2="2" y2="1"/></g></g></svg>"#,
        );
        let line = s.elements.iter().find(|e| e.kind() == ElementKind::Line).unwrap();
        assert_eq!(line.endpoints, Some((Point::new(12.0, 7.0), Point::new(14.0, 7.0))));
    }

    #[test]
    fn root_checks() {
        assert!(matches!(parse_svg("<html/>"), Err(ParseError::MissingRoot { .. })));
        let s = scene("<svg/>");
        assert_eq!((s.canvas_width, s.canvas_height), (800.0, 600.0));
        let s = scene(r#"<svg viewBox="0 0 400 300"/>"#);
        assert_eq!((s.canvas_width, s.canvas_height), (400.0, 300.0));
        assert!(matches!(
            parse_svg(r#"<svg width="0" height="10"/>"#),
            Err(ParseError::InvalidCanvas { .. })
        ));
    }

    #[test]
    fn view_box_maps_to_viewport() {
        let s = scene(
            r#"<svg width="800" height="600" viewBox="0 0 400 300"><rect x="10" y="10" width="10" height="10"/></svg>"#,
        );
        assert_eq!(s.elements[0].global_bbox, Rect::new(20.0, 20.0, 20.0, 20.0));
        // meet with a wider viewport centers horizontally
        let s = scene(r#"<svg width="800" height="300" viewBox="0 0 400 300"><rect width="400" height="300"/></svg>"#);
        assert_eq!(s.elements[0].global_bbox, Rect::new(200.0, 0.0, 400.0, 300.0));
    }

    #[test]
    fn units_other_than_px_are_rejected() {
        assert!(parse_length("12px").is_some());
        assert_eq!(parse_length(" 1e2 "), Some(100.0));
        assert_eq!(parse_length("5em"), None);
        assert_eq!(parse_length("50%"), None);
        assert_eq!(parse_length("inf"), None);
        assert_eq!(parse_length("NaN"), None);
        let err = parse_svg("<svg>\n  <rect x=\"3mm\"/></svg>").unwrap_err();
        match err {
            ParseError::InvalidNumber { attribute, line, .. } => {
                assert_eq!(attribute, "x");
                assert_eq!(line, 2);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unsupported_geometry_is_flagged() {
        let s = scene(r#"<svg><path d="M 0 0 A 5 5 0 0 1 10 10"/><rect width="1" height="1"/></svg>"#);
        assert!(!s.parse_ok());
        assert_eq!(s.unresolved.len(), 1);
        assert_eq!(s.unresolved[0].tag, "path");
        assert_eq!(s.elements.len(), 1);
        assert!(!scene(r#"<svg><g transform="skewX(20)"/></svg>"#).parse_ok());
        assert!(!scene(r#"<svg><image href="x.png"/></svg>"#).parse_ok());
        assert!(!scene(r#"<svg><rect width="-1" height="1"/></svg>"#).parse_ok());
        assert!(!scene(r#"<svg><polyline points="1 1"/></svg>"#).parse_ok());
    }

    #[test]
    fn markers_and_defs_are_skipped_but_indexed() {
        let s = scene(
            r#"<svg><defs><marker id="arrow"><path d="M0 0 L10 5 L0 10 z"/></marker></defs><line x1="0" y1="0" x2="5" y2="0" marker-end="url(#arrow)"/></svg>"#,
        );
        assert_eq!(s.elements.len(), 1);
        assert_eq!(s.elements[0].doc_index, 3);
        assert_eq!(
            s.elements[0].style.get("marker-end").map(String::as_str),
            Some("url(#arrow)")
        );
    }

    #[test]
    fn text_inherits_style() {
        let s = scene(
            r#"<svg><g font-size="20" style="text-anchor: middle"><text x="100" y="50"> Hello
               <tspan>World</tspan></text></g></svg>"#,
        );
        let t = s.elements.iter().find(|e| e.kind() == ElementKind::Text).unwrap();
        assert_eq!(t.text_content.as_deref(), Some("Hello World"));
        let Shape::Text(span) = &t.shape else { unreachable!() };
        assert_eq!(span.font_size, 20.0);
        assert_eq!(span.anchor, AnchorMode::Middle);
        // box centered on x = 100, 16 px tall at ascent 0.8 + descent 0.2
        let b = t.global_bbox;
        assert!((b.x + b.w / 2.0 - 100.0).abs() < 1e-9);
        assert!((b.y - 34.0).abs() < 1e-9 && (b.h - 20.0).abs() < 1e-9);
    }

    #[test]
    fn display_none_is_invisible() {
        let s = scene(
            r#"<svg><g display="none"><rect width="5" height="5"/></g><circle r="2" style="display:none"/></svg>"#,
        );
        assert!(s.elements.is_empty());
    }

    #[test]
    fn rotated_ellipse_bbox_is_exact() {
        let s = scene(r#"<svg><ellipse cx="0" cy="0" rx="10" ry="5" transform="rotate(90)"/></svg>"#);
        let b = s.elements[0].global_bbox;
        assert!((b.w - 10.0).abs() < 1e-9 && (b.h - 20.0).abs() < 1e-9, "{b}");
    }

    #[test]
    fn endpoints_only_on_connector_kinds() {
        let s = scene(
            r#"<svg><rect width="1" height="1"/><polyline points="0,0 5,5 9,0"/><polygon points="0,0 5,5 9,0"/><path d="M1 1 Q 2 2 3 1"/><text>x</text><circle r="1"/></svg>"#,
        );
        for e in &s.elements {
            assert_eq!(e.endpoints.is_some(), e.kind().is_connector(), "{:?}", e.kind());
        }
    }

    #[derive(Debug, Clone)]
    enum Gen {
        Rect(f64, f64, f64, f64),
        Circle(f64, f64, f64),
        Line(f64, f64, f64, f64),
        Path(f64, f64, f64, f64, f64, f64),
        Text(f64, f64, u8),
    }

    fn shape() -> impl Strategy<Value = Gen> {
        let c = -200.0..200.0f64;
        let s = 0.0..100.0f64;
        prop_oneof![
            (c.clone(), c.clone(), s.clone(), s.clone()).prop_map(|(a, b, w, h)| Gen::Rect(a, b, w, h)),
            (c.clone(), c.clone(), s.clone()).prop_map(|(a, b, r)| Gen::Circle(a, b, r)),
            (c.clone(), c.clone(), c.clone(), c.clone()).prop_map(|(a, b, d, e)| Gen::Line(a, b, d, e)),
            (c.clone(), c.clone(), c.clone(), c.clone(), c.clone(), c.clone())
                .prop_map(|(a, b, d, e, f, g)| Gen::Path(a, b, d, e, f, g)),
            (c.clone(), c, 1u8..20).prop_map(|(a, b, n)| Gen::Text(a, b, n)),
        ]
    }

    fn tf() -> impl Strategy<Value = String> {
        prop_oneof![
            Just(String::new()),
            (-50.0..50.0f64, -50.0..50.0f64).prop_map(|(x, y)| format!(r#" transform="translate({x} {y})""#)),
            (0.1..3.0f64).prop_map(|s| format!(r#" transform="scale({s})""#)),
            (-180.0..180.0f64, -20.0..20.0f64).prop_map(|(a, c)| format!(r#" transform="rotate({a} {c} {c})""#)),
        ]
    }

    fn render(g: &Gen, tf: &str) -> String {
        match g {
            Gen::Rect(x, y, w, h) => format!(r#"<rect x="{x}" y="{y}" width="{w}" height="{h}"{tf}/>"#),
            Gen::Circle(x, y, r) => format!(r#"<circle cx="{x}" cy="{y}" r="{r}"{tf}/>"#),
            Gen::Line(a, b, c, d) => format!(r#"<line x1="{a}" y1="{b}" x2="{c}" y2="{d}"{tf}/>"#),
            Gen::Path(a, b, c, d, e, f) => {
                format!(r#"<path d="M{a} {b} c {c} {d} {e} {f} {c} {b} q {d} {a} {f} {e}"{tf}/>"#)
            }
            Gen::Text(x, y, n) => format!(
                r#"<text x="{x}" y="{y}" text-anchor="middle"{tf}>{}</text>"#,
                "Wi".repeat(*n as usize)
            ),
        }
    }

    proptest! {
        #[test]
        fn reserialized_scene_keeps_bboxes(
            items in prop::collection::vec((shape(), tf(), tf()), 1..8)
        ) {
            let mut xml = String::from(r#"<svg width="800" height="600">"#);
            for (g, outer, inner) in &items {
                xml.push_str(&format!("<g{outer}>{}</g>", render(g, inner)));
            }
            xml.push_str("</svg>");
            let first = parse_svg(&xml).unwrap();
            prop_assert!(first.parse_ok());
            let second = parse_svg(&first.to_svg()).unwrap();
            let a: Vec<_> = first.elements.iter().filter(|e| e.kind() != ElementKind::Group).collect();
            prop_assert_eq!(a.len(), second.elements.len());
            for (x, y) in a.iter().zip(&second.elements) {
                prop_assert_eq!(x.kind(), y.kind());
                let (p, q) = (x.global_bbox, y.global_bbox);
                for (u, v) in [(p.x, q.x), (p.y, q.y), (p.w, q.w), (p.h, q.h)] {
                    prop_assert!((u - v).abs() <= 1e-9, "{} vs {}", p, q);
                }
            }
        }
    }
}
