//! Planar primitives shared by the parser, verifier and generator.
//!
//! Coordinates follow SVG conventions: the origin is the top-left corner and
//! `y` grows downward. All values are user units (px).

use serde::{Deserialize, Serialize};
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn offset(self, dx: f64, dy: f64) -> Point {
        Point::new(self.x + dx, self.y + dy)
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

/// Axis-aligned rectangle stored as top-left corner plus size.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Rect {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl Rect {
    pub const fn new(x: f64, y: f64, w: f64, h: f64) -> Self {
        Self { x, y, w, h }
    }

    /// Smallest rectangle spanning two corners given in any order.
    pub fn from_corners(a: Point, b: Point) -> Self {
        let x0 = a.x.min(b.x);
        let y0 = a.y.min(b.y);
        Rect::new(x0, y0, a.x.max(b.x) - x0, a.y.max(b.y) - y0)
    }

    /// Bounding box of a point set. `None` for an empty iterator.
    pub fn bounding<I: IntoIterator<Item = Point>>(points: I) -> Option<Rect> {
        let mut it = points.into_iter();
        let first = it.next()?;
        let (mut x0, mut y0, mut x1, mut y1) = (first.x, first.y, first.x, first.y);
        for p in it {
            x0 = x0.min(p.x);
            y0 = y0.min(p.y);
            x1 = x1.max(p.x);
            y1 = y1.max(p.y);
        }
        Some(Rect::new(x0, y0, x1 - x0, y1 - y0))
    }

    pub fn right(&self) -> f64 {
        self.x + self.w
    }

    pub fn bottom(&self) -> f64 {
        self.y + self.h
    }

    pub fn center(&self) -> Point {
        Point::new(self.x + self.w / 2.0, self.y + self.h / 2.0)
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    pub fn diagonal(&self) -> f64 {
        self.w.hypot(self.h)
    }

    pub fn corners(&self) -> [Point; 4] {
        [
            Point::new(self.x, self.y),
            Point::new(self.right(), self.y),
            Point::new(self.right(), self.bottom()),
            Point::new(self.x, self.bottom()),
        ]
    }

    /// Closed containment: `other` lies inside `self`, boundaries included.
    pub fn contains_rect(&self, other: &Rect) -> bool {
        other.x >= self.x && other.y >= self.y && other.right() <= self.right() && other.bottom() <= self.bottom()
    }

    pub fn contains_point(&self, p: Point) -> bool {
        p.x >= self.x && p.y >= self.y && p.x <= self.right() && p.y <= self.bottom()
    }

    /// Overlap of two rectangles, `None` when they are disjoint.
    /// Touching edges yield a zero-area rectangle.
    pub fn intersection(&self, other: &Rect) -> Option<Rect> {
        let x0 = self.x.max(other.x);
        let y0 = self.y.max(other.y);
        let x1 = self.right().min(other.right());
        let y1 = self.bottom().min(other.bottom());
        (x1 >= x0 && y1 >= y0).then(|| Rect::new(x0, y0, x1 - x0, y1 - y0))
    }

    pub fn union(&self, other: &Rect) -> Rect {
        let x0 = self.x.min(other.x);
        let y0 = self.y.min(other.y);
        let x1 = self.right().max(other.right());
        let y1 = self.bottom().max(other.bottom());
        Rect::new(x0, y0, x1 - x0, y1 - y0)
    }

    /// Intersection-over-union; 0 when either area is zero.
    pub fn iou(&self, other: &Rect) -> f64 {
        let inter = self.intersection(other).map_or(0.0, |r| r.area());
        let union = self.area() + other.area() - inter;
        if union > 0.0 {
            inter / union
        } else {
            0.0
        }
    }

    pub fn translate(&self, dx: f64, dy: f64) -> Rect {
        Rect::new(self.x + dx, self.y + dy, self.w, self.h)
    }

    /// Shrinks every side by `d`, never producing a negative size.
    pub fn deflate(&self, d: f64) -> Rect {
        let w = (self.w - 2.0 * d).max(0.0);
        let h = (self.h - 2.0 * d).max(0.0);
        let c = self.center();
        Rect::new(c.x - w / 2.0, c.y - h / 2.0, w, h)
    }

    pub fn expand(&self, d: f64) -> Rect {
        Rect::new(self.x - d, self.y - d, self.w + 2.0 * d, self.h + 2.0 * d)
    }

    /// Bounding box of this rectangle after an affine map.
    pub fn transformed(&self, t: &AffineTransform) -> Rect {
        Rect::bounding(self.corners().iter().map(|&p| t.apply(p))).expect("four corners are never empty")
    }
}

impl fmt::Display for Rect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {}, {})", self.x, self.y, self.w, self.h)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("cannot take the union of an empty rectangle list")]
pub struct EmptyInput;

/// Smallest axis-aligned rectangle containing every input rectangle.
pub fn union_bbox(rects: &[Rect]) -> Result<Rect, EmptyInput> {
    if rects.is_empty() {
        return Err(EmptyInput);
    }
    // single pass over raw extents so the result does not depend on order
    let x0 = rects.iter().map(|r| r.x).fold(f64::INFINITY, f64::min);
    let y0 = rects.iter().map(|r| r.y).fold(f64::INFINITY, f64::min);
    let x1 = rects.iter().map(Rect::right).fold(f64::NEG_INFINITY, f64::max);
    let y1 = rects.iter().map(Rect::bottom).fold(f64::NEG_INFINITY, f64::max);
    Ok(Rect::new(x0, y0, x1 - x0, y1 - y0))
}

/// 2-D affine map `(x, y) -> (a·x + c·y + e, b·x + d·y + f)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineTransform {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub e: f64,
    pub f: f64,
}

impl Default for AffineTransform {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl AffineTransform {
    pub const IDENTITY: AffineTransform = AffineTransform {
        a: 1.0,
        b: 0.0,
        c: 0.0,
        d: 1.0,
        e: 0.0,
        f: 0.0,
    };

    pub const fn new(a: f64, b: f64, c: f64, d: f64, e: f64, f: f64) -> Self {
        Self { a, b, c, d, e, f }
    }

    pub const fn translate(tx: f64, ty: f64) -> Self {
        Self::new(1.0, 0.0, 0.0, 1.0, tx, ty)
    }

    pub const fn scale(sx: f64, sy: f64) -> Self {
        Self::new(sx, 0.0, 0.0, sy, 0.0, 0.0)
    }

    /// Rotation by `degrees` about the origin. Positive angles turn the
    /// x axis toward the y axis (clockwise on screen).
    pub fn rotate(degrees: f64) -> Self {
        let (s, c) = degrees.to_radians().sin_cos();
        Self::new(c, s, -s, c, 0.0, 0.0)
    }

    /// Rotation about `(cx, cy)`: translate(cx, cy) · rotate · translate(-cx, -cy).
    pub fn rotate_about(degrees: f64, cx: f64, cy: f64) -> Self {
        compose_transforms(
            &compose_transforms(&Self::translate(cx, cy), &Self::rotate(degrees)),
            &Self::translate(-cx, -cy),
        )
    }

    pub fn apply(&self, p: Point) -> Point {
        Point::new(
            self.a * p.x + self.c * p.y + self.e,
            self.b * p.x + self.d * p.y + self.f,
        )
    }

    /// Applies only the linear part (no translation).
    pub fn apply_vector(&self, v: Point) -> Point {
        Point::new(self.a * v.x + self.c * v.y, self.b * v.x + self.d * v.y)
    }

    pub fn is_identity(&self) -> bool {
        *self == Self::IDENTITY
    }

    pub fn is_finite(&self) -> bool {
        [self.a, self.b, self.c, self.d, self.e, self.f]
            .iter()
            .all(|v| v.is_finite())
    }

    /// `self` applied after `child`.
    pub fn then_after(&self, child: &AffineTransform) -> AffineTransform {
        compose_transforms(self, child)
    }
}

/// Composition whose application equals applying `child` first, then `parent`.
pub fn compose_transforms(parent: &AffineTransform, child: &AffineTransform) -> AffineTransform {
    let p = parent;
    let q = child;
    AffineTransform {
        a: p.a * q.a + p.c * q.b,
        b: p.b * q.a + p.d * q.b,
        c: p.a * q.c + p.c * q.d,
        d: p.b * q.c + p.d * q.d,
        e: p.a * q.e + p.c * q.f + p.e,
        f: p.b * q.e + p.d * q.f + p.f,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: Point, b: Point, tol: f64) -> bool {
        (a.x - b.x).abs() <= tol && (a.y - b.y).abs() <= tol
    }

    #[test]
    fn identity_composition() {
        let id = AffineTransform::IDENTITY;
        assert_eq!(compose_transforms(&id, &id), id);
        assert_eq!(id.apply(Point::new(3.5, -2.0)), Point::new(3.5, -2.0));
    }

    #[test]
    fn translate_after_scale() {
        // translate(10,5)·scale(2,2)·(1,1) = (2+10, 2+5)
        let t = compose_transforms(
            &AffineTransform::translate(10.0, 5.0),
            &AffineTransform::scale(2.0, 2.0),
        );
        assert_eq!(t.apply(Point::new(1.0, 1.0)), Point::new(12.0, 7.0));
    }

    #[test]
    fn quarter_turn() {
        let p = AffineTransform::rotate(90.0).apply(Point::new(1.0, 0.0));
        assert!(close(p, Point::new(0.0, 1.0), 1e-9), "{p}");
    }

    #[test]
    fn rotate_about_center_fixes_center() {
        let t = AffineTransform::rotate_about(37.0, 12.0, -4.0);
        assert!(close(t.apply(Point::new(12.0, -4.0)), Point::new(12.0, -4.0), 1e-12));
    }

    #[test]
    fn union_examples() {
        let single = Rect::new(0.0, 0.0, 10.0, 10.0);
        assert_eq!(union_bbox(&[single]).unwrap(), single);
        assert_eq!(
            union_bbox(&[single, Rect::new(20.0, 20.0, 10.0, 10.0)]).unwrap(),
            Rect::new(0.0, 0.0, 30.0, 30.0)
        );
        let dot = Rect::new(5.0, 5.0, 0.0, 0.0);
        assert_eq!(union_bbox(&[dot, dot]).unwrap(), dot);
        assert_eq!(union_bbox(&[]), Err(EmptyInput));
    }

    #[test]
    fn iou_and_intersection() {
        let a = Rect::new(0.0, 0.0, 10.0, 10.0);
        let b = Rect::new(5.0, 0.0, 10.0, 10.0);
        assert_eq!(a.intersection(&b), Some(Rect::new(5.0, 0.0, 5.0, 10.0)));
        assert!((a.iou(&b) - 50.0 / 150.0).abs() < 1e-15);
        assert_eq!(a.intersection(&Rect::new(20.0, 0.0, 1.0, 1.0)), None);
    }

    #[test]
    fn deflate_clamps() {
        let r = Rect::new(0.0, 0.0, 10.0, 4.0).deflate(3.0);
        assert_eq!(r, Rect::new(3.0, 2.0, 4.0, 0.0));
    }

    fn coeff() -> impl Strategy<Value = f64> {
        -10.0..10.0f64
    }

    fn transform() -> impl Strategy<Value = AffineTransform> {
        (coeff(), coeff(), coeff(), coeff(), coeff(), coeff())
            .prop_map(|(a, b, c, d, e, f)| AffineTransform::new(a, b, c, d, e, f))
    }

    fn rect() -> impl Strategy<Value = Rect> {
        (-500.0..500.0f64, -500.0..500.0f64, 0.0..300.0f64, 0.0..300.0f64)
            .prop_map(|(x, y, w, h)| Rect::new(x, y, w, h))
    }

    proptest! {
        #[test]
        fn composition_is_associative(p in transform(), q in transform(), r in transform()) {
            let left = compose_transforms(&compose_transforms(&p, &q), &r);
            let right = compose_transforms(&p, &compose_transforms(&q, &r));
            for (x, y) in [
                (left.a, right.a), (left.b, right.b), (left.c, right.c),
                (left.d, right.d), (left.e, right.e), (left.f, right.f),
            ] {
                // coefficients reach ~1e4 in magnitude; compare relative to scale
                prop_assert!((x - y).abs() <= 1e-12 * x.abs().max(y.abs()).max(1.0));
            }
        }

        #[test]
        fn composition_matches_sequential_application(p in transform(), q in transform(),
                                                       x in -100.0..100.0f64, y in -100.0..100.0f64) {
            let pt = Point::new(x, y);
            let seq = p.apply(q.apply(pt));
            let composed = compose_transforms(&p, &q).apply(pt);
            prop_assert!(close(seq, composed, 1e-9 * (1.0 + seq.x.abs() + seq.y.abs())));
        }

        #[test]
        fn union_is_order_independent_and_idempotent(rects in proptest::collection::vec(rect(), 1..8)) {
            let u = union_bbox(&rects).unwrap();
            let mut rev = rects.clone();
            rev.reverse();
            prop_assert_eq!(u, union_bbox(&rev).unwrap());
            let again = union_bbox(&[u, u]).unwrap();
            prop_assert!((again.x - u.x).abs() < 1e-9 && (again.w - u.w).abs() < 1e-9);
            prop_assert!((again.y - u.y).abs() < 1e-9 && (again.h - u.h).abs() < 1e-9);
            let mut doubled = rects.clone();
            doubled.extend(rects.iter().copied());
            prop_assert_eq!(u, union_bbox(&doubled).unwrap());
            for r in &rects {
                prop_assert!(u.expand(1e-9).contains_rect(r));
            }
        }
    }
}
