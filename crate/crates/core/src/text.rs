//! Deterministic text measurement.
//!
//! A [`FontModel`] assigns every codepoint an advance width in em units and
//! fixes the ascent/descent of the line box. Measured boxes are exact
//! functions of the string, the font size and the anchor, which keeps every
//! downstream reward reproducible bit for bit. A browser-backed measurement
//! can replace the builtin model through [`TextMeasurer`].

use crate::geom::{Point, Rect};
use crate::svg::{Shape, SvgElement};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::sync::OnceLock;

const DEFAULT_FONT_JSON: &str = include_str!("../data/default_font.json");

/// Horizontal alignment of a text run relative to its anchor point
/// (`text-anchor` in SVG).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AnchorMode {
    #[default]
    Start,
    Middle,
    End,
}

impl AnchorMode {
    pub fn parse(s: &str) -> Option<AnchorMode> {
        match s.trim() {
            "start" => Some(AnchorMode::Start),
            "middle" => Some(AnchorMode::Middle),
            "end" => Some(AnchorMode::End),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            AnchorMode::Start => "start",
            AnchorMode::Middle => "middle",
            AnchorMode::End => "end",
        }
    }
}

/// Rendered extent of a single-line text run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TextBox {
    pub bbox: Rect,
    pub baseline_y: f64,
    pub anchor_mode: AnchorMode,
}

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("font model is not valid JSON: {0}")]
    Syntax(#[from] serde_json::Error),
    #[error("invalid font model: {0}")]
    Invalid(String),
}

/// Per-codepoint advance widths plus vertical metrics, all in em.
#[derive(Debug, Clone, PartialEq)]
pub struct FontModel {
    pub units_per_em: f64,
    pub default_advance: f64,
    pub advance_table: BTreeMap<char, f64>,
    pub ascent: f64,
    pub descent: f64,
}

static BUILTIN: OnceLock<FontModel> = OnceLock::new();

/// Shared instance of [`FontModel::builtin`].
pub fn builtin_font() -> &'static FontModel {
    BUILTIN.get_or_init(|| {
        let spec: FontSpec = serde_json::from_str(DEFAULT_FONT_JSON).expect("shipped font model parses");
        FontModel::from_spec(spec, None).expect("shipped font model is valid")
    })
}

/// On-disk font description. Every metric is given in font units and is
/// divided by `units_per_em`; leaving `units_per_em` at 1 means em values.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FontSpec {
    #[serde(default)]
    base: Option<String>,
    #[serde(default)]
    units_per_em: Option<f64>,
    #[serde(default)]
    ascent: Option<f64>,
    #[serde(default)]
    descent: Option<f64>,
    #[serde(default)]
    default_advance: Option<f64>,
    #[serde(default)]
    advances: BTreeMap<String, f64>,
}

impl Default for FontModel {
    fn default() -> Self {
        Self::builtin()
    }
}

impl FontModel {
    /// Shipped model: Arial-compatible ASCII advances, ascent 0.8 em,
    /// descent 0.2 em, 0.5 em for anything outside the table.
    pub fn builtin() -> FontModel {
        builtin_font().clone()
    }

    /// A model where every glyph has the same advance.
    pub fn uniform(advance: f64, ascent: f64, descent: f64) -> Result<FontModel, FormatError> {
        let model = FontModel {
            units_per_em: 1.0,
            default_advance: advance,
            advance_table: BTreeMap::new(),
            ascent,
            descent,
        };
        model.validate()?;
        Ok(model)
    }

    /// Loads a JSON font description. Fields that are absent fall back to the
    /// builtin model, and `advances` entries are layered over the builtin
    /// table unless `"base": "none"` is given.
    pub fn from_json(text: &str) -> Result<FontModel, FormatError> {
        let spec: FontSpec = serde_json::from_str(text)?;
        let base = match spec.base.as_deref() {
            None | Some("builtin") => Some(Self::builtin()),
            Some("none") => None,
            Some(other) => {
                return Err(FormatError::Invalid(format!(
                    "base must be \"builtin\" or \"none\", got {other:?}"
                )))
            }
        };
        Self::from_spec(spec, base)
    }

    fn from_spec(spec: FontSpec, base: Option<FontModel>) -> Result<FontModel, FormatError> {
        let upm = spec.units_per_em.unwrap_or(1.0);
        if !(upm.is_finite() && upm > 0.0) {
            return Err(FormatError::Invalid(format!(
                "units_per_em must be positive, got {upm}"
            )));
        }
        let scaled = |v: Option<f64>, fallback: Option<f64>, name: &str| -> Result<f64, FormatError> {
            match (v, fallback) {
                (Some(v), _) => Ok(v / upm),
                (None, Some(f)) => Ok(f),
                (None, None) => Err(FormatError::Invalid(format!("missing field {name}"))),
            }
        };
        let ascent = scaled(spec.ascent, base.as_ref().map(|b| b.ascent), "ascent")?;
        let descent = scaled(spec.descent, base.as_ref().map(|b| b.descent), "descent")?;
        let default_advance = scaled(
            spec.default_advance,
            base.as_ref().map(|b| b.default_advance),
            "default_advance",
        )?;
        let mut advance_table = base.map(|b| b.advance_table).unwrap_or_default();
        for (key, value) in spec.advances {
            let mut chars = key.chars();
            let (Some(ch), None) = (chars.next(), chars.next()) else {
                return Err(FormatError::Invalid(format!(
                    "advance key {key:?} must be exactly one character"
                )));
            };
            if !(value.is_finite() && value >= 0.0) {
                return Err(FormatError::Invalid(format!(
                    "advance for {key:?} must be a non-negative number, got {value}"
                )));
            }
            advance_table.insert(ch, value / upm);
        }
        let model = FontModel {
            units_per_em: upm,
            default_advance,
            advance_table,
            ascent,
            descent,
        };
        model.validate()?;
        Ok(model)
    }

    fn validate(&self) -> Result<(), FormatError> {
        let bad = |msg: String| Err(FormatError::Invalid(msg));
        if !(self.ascent.is_finite() && self.ascent > 0.0) {
            return bad(format!("ascent must be > 0, got {}", self.ascent));
        }
        if !(self.descent.is_finite() && self.descent >= 0.0) {
            return bad(format!("descent must be >= 0, got {}", self.descent));
        }
        if self.ascent + self.descent > 1.25 {
            return bad(format!(
                "ascent + descent must not exceed 1.25 em, got {}",
                self.ascent + self.descent
            ));
        }
        if !(self.default_advance > 0.0 && self.default_advance <= 1.0) {
            return bad(format!(
                "default_advance must lie in (0, 1], got {}",
                self.default_advance
            ));
        }
        Ok(())
    }

    pub fn advance(&self, ch: char) -> f64 {
        self.advance_table.get(&ch).copied().unwrap_or(self.default_advance)
    }

    /// Width in px of `content` at `font_size`.
    pub fn text_width(&self, content: &str, font_size: f64) -> f64 {
        content.chars().map(|c| self.advance(c)).sum::<f64>() * font_size
    }

    /// Height in px of the line box at `font_size`.
    pub fn line_height(&self, font_size: f64) -> f64 {
        (self.ascent + self.descent) * font_size
    }
}

/// Measures a single-line run whose baseline passes through `anchor_point`.
pub fn measure_text(
    content: &str,
    font_size: f64,
    anchor_point: Point,
    anchor_mode: AnchorMode,
    font: &FontModel,
) -> TextBox {
    let width = font.text_width(content, font_size);
    let x = match anchor_mode {
        AnchorMode::Start => anchor_point.x,
        AnchorMode::Middle => anchor_point.x - width / 2.0,
        AnchorMode::End => anchor_point.x - width,
    };
    let top = anchor_point.y - font.ascent * font_size;
    TextBox {
        bbox: Rect::new(x, top, width, font.line_height(font_size)),
        baseline_y: anchor_point.y,
        anchor_mode,
    }
}

/// Source of rendered text boxes for text elements of a parsed scene.
///
/// Implementations return the box in global (root user-space) coordinates.
pub trait TextMeasurer: Sync {
    fn text_box(&self, element: &SvgElement) -> Option<TextBox>;
}

impl TextMeasurer for FontModel {
    fn text_box(&self, element: &SvgElement) -> Option<TextBox> {
        let Shape::Text(span) = &element.shape else {
            return None;
        };
        let local = measure_text(&span.content, span.font_size, span.origin, span.anchor, self);
        let origin = element.transform.apply(span.origin);
        Some(TextBox {
            bbox: local.bbox.transformed(&element.transform),
            baseline_y: origin.y,
            anchor_mode: span.anchor,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn half_em() -> FontModel {
        FontModel::uniform(0.5, 0.8, 0.2).unwrap()
    }

    #[test]
    fn start_anchor() {
        let tb = measure_text("AB", 16.0, Point::new(100.0, 100.0), AnchorMode::Start, &half_em());
        // width 2·0.5·16, top 100 − 0.8·16
        assert_eq!(tb.bbox, Rect::new(100.0, 87.2, 16.0, 16.0));
        assert_eq!(tb.baseline_y, 100.0);
    }

    #[test]
    fn empty_text_has_zero_width() {
        let tb = measure_text("", 16.0, Point::new(50.0, 50.0), AnchorMode::Start, &half_em());
        assert_eq!(tb.bbox, Rect::new(50.0, 37.2, 0.0, 16.0));
    }

    #[test]
    fn middle_anchor_centers() {
        let tb = measure_text("AB", 16.0, Point::new(100.0, 100.0), AnchorMode::Middle, &half_em());
        assert_eq!(tb.bbox, Rect::new(92.0, 87.2, 16.0, 16.0));
    }

    #[test]
    fn end_anchor() {
        let tb = measure_text("AB", 16.0, Point::new(100.0, 100.0), AnchorMode::End, &half_em());
        assert_eq!(tb.bbox.x, 84.0);
    }

    #[test]
    fn builtin_constants() {
        let f = FontModel::builtin();
        assert_eq!(f.default_advance, 0.5);
        assert_eq!(f.ascent, 0.8);
        assert_eq!(f.descent, 0.2);
        assert_eq!(f.advance_table.len(), 95);
        assert_eq!(f.advance('A'), 1366.0 / 2048.0);
        // outside the ASCII table
        assert_eq!(f.advance('é'), 0.5);
    }

    #[test]
    fn override_single_glyph() {
        let f = FontModel::from_json(r#"{"advances": {"W": 0.9}}"#).unwrap();
        let tb = measure_text("W", 10.0, Point::new(0.0, 0.0), AnchorMode::Start, &f);
        assert!((tb.bbox.w - 9.0).abs() < 1e-12);
        // other glyphs keep the builtin table
        assert_eq!(f.advance('A'), FontModel::builtin().advance('A'));
    }

    #[test]
    fn rejects_invalid_models() {
        assert!(matches!(
            FontModel::from_json(r#"{"ascent": -1}"#),
            Err(FormatError::Invalid(_))
        ));
        assert!(FontModel::from_json(r#"{"advances": {"A": -0.1}}"#).is_err());
        assert!(FontModel::from_json(r#"{"advances": {"AB": 0.1}}"#).is_err());
        assert!(FontModel::from_json(r#"{"ascent": 1.0, "descent": 0.5}"#).is_err());
        assert!(FontModel::from_json(r#"{"default_advance": 0}"#).is_err());
        assert!(FontModel::from_json(r#"{"bogus": 1}"#).is_err());
        assert!(FontModel::from_json("not json").is_err());
        assert!(
            FontModel::from_json(r#"{"base": "none", "ascent": 0.7, "descent": 0.2}"#).is_err(),
            "default_advance is required without a base"
        );
    }

    #[test]
    fn font_units_are_scaled() {
        let f = FontModel::from_json(
            r#"{"base": "none", "units_per_em": 1000, "ascent": 750, "descent": 250,
                "default_advance": 500, "advances": {"i": 250}}"#,
        )
        .unwrap();
        assert_eq!(f.ascent, 0.75);
        assert_eq!(f.advance('i'), 0.25);
        assert_eq!(f.advance('x'), 0.5);
    }

    proptest! {
        #[test]
        fn appending_never_shrinks(s in "[ -~]{0,20}", c in proptest::char::any(), size in 1.0..40.0f64) {
            let f = FontModel::builtin();
            let mut longer = s.clone();
            longer.push(c);
            prop_assert!(f.text_width(&longer, size) >= f.text_width(&s, size));
        }

        #[test]
        fn width_is_linear_in_size(s in "[ -~]{0,20}", size in 1.0..40.0f64) {
            let f = FontModel::builtin();
            let unit = f.text_width(&s, 1.0);
            let w = f.text_width(&s, size);
            prop_assert!((w - unit * size).abs() <= 1e-12 * w.max(1.0));
        }

        #[test]
        fn middle_anchor_is_symmetric(s in "[ -~]{0,20}", size in 1.0..40.0f64, x in -500.0..500.0f64) {
            let tb = measure_text(&s, size, Point::new(x, 0.0), AnchorMode::Middle, &FontModel::builtin());
            let left = x - tb.bbox.x;
            let right = tb.bbox.right() - x;
            prop_assert!((left - right).abs() <= 1e-9);
        }

        #[test]
        fn box_height_matches_metrics(s in "[ -~]{1,20}", size in 1.0..40.0f64) {
            let f = FontModel::builtin();
            let tb = measure_text(&s, size, Point::new(0.0, 0.0), AnchorMode::Start, &f);
            prop_assert!((tb.bbox.h - (f.ascent + f.descent) * size).abs() < 1e-12);
        }
    }
}
