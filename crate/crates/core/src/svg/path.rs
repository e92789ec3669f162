//! Path data (`d` attribute) parsing for the subset used by box-arrow
//! diagrams: M, L, H, V, C, Q, Z and their relative forms.
//!
//! Parsed paths are stored in absolute coordinates, one [`PathCommand`] per
//! drawing step, so endpoint recovery and bounds never revisit the text.

use crate::geom::{AffineTransform, Point, Rect};
use std::fmt::Write as _;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PathError {
    #[error("path data is empty")]
    Empty,
    #[error("unsupported path command `{command}` at byte {offset}")]
    UnsupportedCommand { command: char, offset: usize },
    #[error("path data must start with a moveto, found `{found}`")]
    MissingMoveTo { found: char },
    #[error("expected a number at byte {offset}")]
    ExpectedNumber { offset: usize },
    #[error("unexpected character `{found}` at byte {offset}")]
    UnexpectedChar { found: char, offset: usize },
    #[error("path contains no drawn segment")]
    NoVisibleSegment,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PathCommand {
    MoveTo(Point),
    LineTo(Point),
    QuadTo(Point, Point),
    CubicTo(Point, Point, Point),
    /// Closes the current subpath; carries the point it returns to.
    Close(Point),
}

/// A drawn segment with explicit start point, in absolute coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Segment {
    Line(Point, Point),
    Quad(Point, Point, Point),
    Cubic(Point, Point, Point, Point),
}

impl Segment {
    pub fn start(&self) -> Point {
        match *self {
            Segment::Line(p, _) | Segment::Quad(p, _, _) | Segment::Cubic(p, _, _, _) => p,
        }
    }

    pub fn end(&self) -> Point {
        match *self {
            Segment::Line(_, p) | Segment::Quad(_, _, p) | Segment::Cubic(_, _, _, p) => p,
        }
    }

    pub fn transformed(&self, t: &AffineTransform) -> Segment {
        match *self {
            Segment::Line(a, b) => Segment::Line(t.apply(a), t.apply(b)),
            Segment::Quad(a, b, c) => Segment::Quad(t.apply(a), t.apply(b), t.apply(c)),
            Segment::Cubic(a, b, c, d) => Segment::Cubic(t.apply(a), t.apply(b), t.apply(c), t.apply(d)),
        }
    }

    /// Exact axis-aligned bounds, including curve extrema.
    pub fn bounds(&self) -> Rect {
        let mut pts = vec![self.start(), self.end()];
        match *self {
            Segment::Line(..) => {}
            Segment::Quad(p0, p1, p2) => {
                for t in quad_extrema(p0.x, p1.x, p2.x)
                    .into_iter()
                    .chain(quad_extrema(p0.y, p1.y, p2.y))
                {
                    pts.push(eval_quad(p0, p1, p2, t));
                }
            }
            Segment::Cubic(p0, p1, p2, p3) => {
                for t in cubic_extrema(p0.x, p1.x, p2.x, p3.x)
                    .into_iter()
                    .chain(cubic_extrema(p0.y, p1.y, p2.y, p3.y))
                {
                    pts.push(eval_cubic(p0, p1, p2, p3, t));
                }
            }
        }
        Rect::bounding(pts).expect("segment has points")
    }
}

fn eval_quad(p0: Point, p1: Point, p2: Point, t: f64) -> Point {
    let u = 1.0 - t;
    Point::new(
        u * u * p0.x + 2.0 * u * t * p1.x + t * t * p2.x,
        u * u * p0.y + 2.0 * u * t * p1.y + t * t * p2.y,
    )
}

fn eval_cubic(p0: Point, p1: Point, p2: Point, p3: Point, t: f64) -> Point {
    let u = 1.0 - t;
    let (a, b, c, d) = (u * u * u, 3.0 * u * u * t, 3.0 * u * t * t, t * t * t);
    Point::new(
        a * p0.x + b * p1.x + c * p2.x + d * p3.x,
        a * p0.y + b * p1.y + c * p2.y + d * p3.y,
    )
}

fn quad_extrema(a: f64, b: f64, c: f64) -> Option<f64> {
    let denom = a - 2.0 * b + c;
    if denom == 0.0 {
        return None;
    }
    let t = (a - b) / denom;
    (t > 0.0 && t < 1.0).then_some(t)
}

fn cubic_extrema(p0: f64, p1: f64, p2: f64, p3: f64) -> Vec<f64> {
    // derivative / 3 = qa·t² + qb·t + qc
    let qa = -p0 + 3.0 * p1 - 3.0 * p2 + p3;
    let qb = 2.0 * (p0 - 2.0 * p1 + p2);
    let qc = p1 - p0;
    let mut roots = Vec::with_capacity(2);
    if qa.abs() < 1e-12 {
        if qb != 0.0 {
            roots.push(-qc / qb);
        }
    } else {
        let disc = qb * qb - 4.0 * qa * qc;
        if disc >= 0.0 {
            let sq = disc.sqrt();
            roots.push((-qb + sq) / (2.0 * qa));
            roots.push((-qb - sq) / (2.0 * qa));
        }
    }
    roots.retain(|t| *t > 0.0 && *t < 1.0);
    roots
}

/// Path data resolved to absolute coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct PathData {
    pub commands: Vec<PathCommand>,
}

impl PathData {
    pub fn parse(d: &str) -> Result<PathData, PathError> {
        Parser::new(d).run()
    }

    /// Drawn segments grouped by subpath; subpaths without any drawing
    /// command are dropped.
    pub fn subpaths(&self) -> Vec<Vec<Segment>> {
        let mut out = Vec::new();
        let mut current: Vec<Segment> = Vec::new();
        let mut pen = Point::default();
        for cmd in &self.commands {
            match *cmd {
                PathCommand::MoveTo(p) => {
                    if !current.is_empty() {
                        out.push(std::mem::take(&mut current));
                    }
                    pen = p;
                }
                PathCommand::LineTo(p) => {
                    current.push(Segment::Line(pen, p));
                    pen = p;
                }
                PathCommand::QuadTo(c, p) => {
                    current.push(Segment::Quad(pen, c, p));
                    pen = p;
                }
                PathCommand::CubicTo(c1, c2, p) => {
                    current.push(Segment::Cubic(pen, c1, c2, p));
                    pen = p;
                }
                PathCommand::Close(start) => {
                    current.push(Segment::Line(pen, start));
                    pen = start;
                    out.push(std::mem::take(&mut current));
                }
            }
        }
        if !current.is_empty() {
            out.push(current);
        }
        out
    }

    /// Start of the first drawn subpath and last on-curve point of the final
    /// drawn subpath, mapped through `transform`.
    pub fn endpoints(&self, transform: &AffineTransform) -> Result<(Point, Point), PathError> {
        let subpaths = self.subpaths();
        let first = subpaths
            .first()
            .and_then(|s| s.first())
            .ok_or(PathError::NoVisibleSegment)?;
        let last = subpaths
            .last()
            .and_then(|s| s.last())
            .ok_or(PathError::NoVisibleSegment)?;
        Ok((transform.apply(first.start()), transform.apply(last.end())))
    }

    /// Bounds of every drawn segment after `transform`. Bezier segments map
    /// to Bezier segments under affine maps, so extrema are taken on the
    /// transformed control polygon.
    pub fn bounds(&self, transform: &AffineTransform) -> Option<Rect> {
        self.subpaths()
            .iter()
            .flatten()
            .map(|s| s.transformed(transform).bounds())
            .reduce(|a, b| a.union(&b))
    }

    /// Absolute-coordinate serialization.
    pub fn to_path_string(&self) -> String {
        let mut s = String::new();
        for cmd in &self.commands {
            if !s.is_empty() {
                s.push(' ');
            }
            let _ = match *cmd {
                PathCommand::MoveTo(p) => write!(s, "M {} {}", p.x, p.y),
                PathCommand::LineTo(p) => write!(s, "L {} {}", p.x, p.y),
                PathCommand::QuadTo(c, p) => write!(s, "Q {} {} {} {}", c.x, c.y, p.x, p.y),
                PathCommand::CubicTo(a, b, p) => {
                    write!(s, "C {} {} {} {} {} {}", a.x, a.y, b.x, b.y, p.x, p.y)
                }
                PathCommand::Close(_) => write!(s, "Z"),
            };
        }
        s
    }
}

/// Endpoints of a path given as `d` text, in the coordinate system of
/// `transform`'s target.
pub fn path_endpoints(path_data: &str, transform: &AffineTransform) -> Result<(Point, Point), PathError> {
    PathData::parse(path_data)?.endpoints(transform)
}

struct Parser<'a> {
    src: &'a str,
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn new(src: &'a str) -> Self {
        Self {
            src,
            bytes: src.as_bytes(),
            pos: 0,
        }
    }

    fn skip_separators(&mut self) {
        while self.pos < self.bytes.len()
            && (self.bytes[self.pos].is_ascii_whitespace() || self.bytes[self.pos] == b',')
        {
            self.pos += 1;
        }
    }

    fn at_number(&mut self) -> bool {
        self.skip_separators();
        matches!(self.bytes.get(self.pos), Some(b'0'..=b'9' | b'.' | b'-' | b'+'))
    }

    fn number(&mut self) -> Result<f64, PathError> {
        self.skip_separators();
        let start = self.pos;
        let b = self.bytes;
        let mut i = self.pos;
        if matches!(b.get(i), Some(b'+' | b'-')) {
            i += 1;
        }
        let int_start = i;
        while matches!(b.get(i), Some(b'0'..=b'9')) {
            i += 1;
        }
        let mut digits = i - int_start;
        if b.get(i) == Some(&b'.') {
            i += 1;
            let frac_start = i;
            while matches!(b.get(i), Some(b'0'..=b'9')) {
                i += 1;
            }
            digits += i - frac_start;
        }
        if digits == 0 {
            return Err(PathError::ExpectedNumber { offset: start });
        }
        if matches!(b.get(i), Some(b'e' | b'E')) {
            let mut j = i + 1;
            if matches!(b.get(j), Some(b'+' | b'-')) {
                j += 1;
            }
            let exp_start = j;
            while matches!(b.get(j), Some(b'0'..=b'9')) {
                j += 1;
            }
            if j > exp_start {
                i = j;
            }
        }
        let value: f64 = self.src[start..i]
            .parse()
            .map_err(|_| PathError::ExpectedNumber { offset: start })?;
        if !value.is_finite() {
            return Err(PathError::ExpectedNumber { offset: start });
        }
        self.pos = i;
        Ok(value)
    }

    fn pair(&mut self) -> Result<Point, PathError> {
        let x = self.number()?;
        let y = self.number()?;
        Ok(Point::new(x, y))
    }

    fn run(mut self) -> Result<PathData, PathError> {
        self.skip_separators();
        if self.pos >= self.bytes.len() {
            return Err(PathError::Empty);
        }
        let mut commands = Vec::new();
        let mut pen = Point::default();
        let mut subpath_start = Point::default();
        let mut first = true;
        // set after Z: a following drawing command starts at the closed
        // subpath's origin, which needs an explicit moveto in our form
        let mut needs_move = false;

        while self.pos < self.bytes.len() {
            let offset = self.pos;
            let ch = self.bytes[self.pos] as char;
            if !ch.is_ascii_alphabetic() {
                return Err(PathError::UnexpectedChar { found: ch, offset });
            }
            self.pos += 1;
            if first && !matches!(ch, 'M' | 'm') {
                return Err(if "LlHhVvCcQqZzAaSsTt".contains(ch) {
                    PathError::MissingMoveTo { found: ch }
                } else {
                    PathError::UnsupportedCommand { command: ch, offset }
                });
            }
            let relative = ch.is_ascii_lowercase();
            let origin = |pen: Point| if relative { pen } else { Point::default() };
            match ch.to_ascii_uppercase() {
                'M' => {
                    // a leading relative moveto is absolute
                    let base = if first { Point::default() } else { origin(pen) };
                    let p = self.pair()?;
                    pen = base.offset(p.x, p.y);
                    subpath_start = pen;
                    commands.push(PathCommand::MoveTo(pen));
                    needs_move = false;
                    while self.at_number() {
                        let p = self.pair()?;
                        pen = origin(pen).offset(p.x, p.y);
                        commands.push(PathCommand::LineTo(pen));
                    }
                }
                'L' => loop {
                    let p = self.pair()?;
                    Self::reopen(&mut commands, &mut needs_move, pen);
                    pen = origin(pen).offset(p.x, p.y);
                    commands.push(PathCommand::LineTo(pen));
                    if !self.at_number() {
                        break;
                    }
                },
                'H' => loop {
                    let x = self.number()?;
                    Self::reopen(&mut commands, &mut needs_move, pen);
                    pen = Point::new(if relative { pen.x + x } else { x }, pen.y);
                    commands.push(PathCommand::LineTo(pen));
                    if !self.at_number() {
                        break;
                    }
                },
                'V' => loop {
                    let y = self.number()?;
                    Self::reopen(&mut commands, &mut needs_move, pen);
                    pen = Point::new(pen.x, if relative { pen.y + y } else { y });
                    commands.push(PathCommand::LineTo(pen));
                    if !self.at_number() {
                        break;
                    }
                },
                'C' => loop {
                    let (c1, c2, p) = (self.pair()?, self.pair()?, self.pair()?);
                    Self::reopen(&mut commands, &mut needs_move, pen);
                    let o = origin(pen);
                    pen = o.offset(p.x, p.y);
                    commands.push(PathCommand::CubicTo(o.offset(c1.x, c1.y), o.offset(c2.x, c2.y), pen));
                    if !self.at_number() {
                        break;
                    }
                },
                'Q' => loop {
                    let (c, p) = (self.pair()?, self.pair()?);
                    Self::reopen(&mut commands, &mut needs_move, pen);
                    let o = origin(pen);
                    pen = o.offset(p.x, p.y);
                    commands.push(PathCommand::QuadTo(o.offset(c.x, c.y), pen));
                    if !self.at_number() {
                        break;
                    }
                },
                'Z' => {
                    if !needs_move {
                        commands.push(PathCommand::Close(subpath_start));
                    }
                    pen = subpath_start;
                    needs_move = true;
                }
                _ => return Err(PathError::UnsupportedCommand { command: ch, offset }),
            }
            first = false;
            self.skip_separators();
        }
        Ok(PathData { commands })
    }

    fn reopen(commands: &mut Vec<PathCommand>, needs_move: &mut bool, pen: Point) {
        if *needs_move {
            commands.push(PathCommand::MoveTo(pen));
            *needs_move = false;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ends(d: &str) -> (Point, Point) {
        path_endpoints(d, &AffineTransform::IDENTITY).unwrap()
    }

    #[test]
    fn straight_segment() {
        assert_eq!(
            ends("M 10 20 L 110 20"),
            (Point::new(10.0, 20.0), Point::new(110.0, 20.0))
        );
    }

    #[test]
    fn cubic_terminals() {
        assert_eq!(
            ends("M 0 0 C 10 10 20 10 30 0"),
            (Point::new(0.0, 0.0), Point::new(30.0, 0.0))
        );
    }

    #[test]
    fn translated_endpoints() {
        let e = path_endpoints("M 10 20 L 110 20", &AffineTransform::translate(5.0, 5.0)).unwrap();
        assert_eq!(e, (Point::new(15.0, 25.0), Point::new(115.0, 25.0)));
    }

    #[test]
    fn relative_and_implicit_commands() {
        // m with implicit l, then h/v
        assert_eq!(
            ends("m10,10 5,5 h10 v-3"),
            (Point::new(10.0, 10.0), Point::new(25.0, 12.0))
        );
        // compact numbers: "10-5" and ".5.5"
        assert_eq!(ends("M10-5L.5.5"), (Point::new(10.0, -5.0), Point::new(0.5, 0.5)));
        assert_eq!(ends("M1e1 2E0 l1e-1 0"), (Point::new(10.0, 2.0), Point::new(10.1, 2.0)));
        // repeated coordinates after a command
        assert_eq!(ends("M0 0 L1 1 2 2 3 3"), (Point::new(0.0, 0.0), Point::new(3.0, 3.0)));
        assert_eq!(
            ends("M0 0 q 5 5 10 0 5 5 10 0"),
            (Point::new(0.0, 0.0), Point::new(20.0, 0.0))
        );
    }

    #[test]
    fn close_returns_to_start() {
        assert_eq!(
            ends("M 0 0 L 10 0 L 10 10 Z"),
            (Point::new(0.0, 0.0), Point::new(0.0, 0.0))
        );
        // drawing after Z continues from the subpath start
        assert_eq!(
            ends("M 5 5 L 10 0 Z l 3 3"),
            (Point::new(5.0, 5.0), Point::new(8.0, 8.0))
        );
    }

    #[test]
    fn trailing_moveto_is_not_visible() {
        assert_eq!(
            ends("M 0 0 L 10 0 M 50 50"),
            (Point::new(0.0, 0.0), Point::new(10.0, 0.0))
        );
        assert_eq!(ends("M 0 0 M 3 3 L 4 4"), (Point::new(3.0, 3.0), Point::new(4.0, 4.0)));
    }

    #[test]
    fn errors() {
        assert_eq!(PathData::parse(""), Err(PathError::Empty));
        assert_eq!(PathData::parse("   "), Err(PathError::Empty));
        assert!(matches!(
            PathData::parse("M 0 0 A 5 5 0 0 1 10 10"),
            Err(PathError::UnsupportedCommand { command: 'A', .. })
        ));
        assert!(matches!(
            PathData::parse("M 0 0 S 1 1 2 2"),
            Err(PathError::UnsupportedCommand { command: 'S', .. })
        ));
        assert!(matches!(PathData::parse("L 1 1"), Err(PathError::MissingMoveTo { .. })));
        assert!(matches!(PathData::parse("M 1"), Err(PathError::ExpectedNumber { .. })));
        assert!(matches!(
            PathData::parse("M 1 1 L x"),
            Err(PathError::ExpectedNumber { .. })
        ));
        assert!(matches!(
            PathData::parse("M 1 1 # 2"),
            Err(PathError::UnexpectedChar { .. })
        ));
        assert_eq!(
            path_endpoints("M 4 4", &AffineTransform::IDENTITY),
            Err(PathError::NoVisibleSegment)
        );
    }

    #[test]
    fn curve_bounds_include_extrema() {
        let p = PathData::parse("M 0 0 C 0 10 10 10 10 0").unwrap();
        let b = p.bounds(&AffineTransform::IDENTITY).unwrap();
        // peak of the cubic at t = 0.5: y = 0.75·10
        assert!((b.h - 7.5).abs() < 1e-12, "{b}");
        let q = PathData::parse("M 0 0 Q 5 10 10 0").unwrap();
        let b = q.bounds(&AffineTransform::IDENTITY).unwrap();
        assert!((b.h - 5.0).abs() < 1e-12, "{b}");
    }

    #[test]
    fn absolute_serialization_reparses() {
        let p = PathData::parse("m 1 2 l 3 4 c 1 1 2 2 3 3 q 1 0 2 2 z h 5").unwrap();
        let again = PathData::parse(&p.to_path_string()).unwrap();
        assert_eq!(p, again);
    }
}
