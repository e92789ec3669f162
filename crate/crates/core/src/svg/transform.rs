//! `transform` attribute parsing.

use crate::geom::{compose_transforms, AffineTransform};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TransformError {
    #[error("unsupported transform function `{0}`")]
    Unsupported(String),
    #[error("malformed transform list near byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("`{name}` takes {expected} arguments, got {got}")]
    Arity {
        name: String,
        expected: &'static str,
        got: usize,
    },
}

/// Parses an SVG transform list. Functions compose left to right, so the
/// rightmost function is applied to points first.
pub fn parse_transform(src: &str) -> Result<AffineTransform, TransformError> {
    let bytes = src.as_bytes();
    let mut pos = 0;
    let mut acc = AffineTransform::IDENTITY;
    loop {
        while pos < bytes.len() && (bytes[pos].is_ascii_whitespace() || bytes[pos] == b',') {
            pos += 1;
        }
        if pos >= bytes.len() {
            return Ok(acc);
        }
        let name_start = pos;
        while pos < bytes.len() && bytes[pos].is_ascii_alphabetic() {
            pos += 1;
        }
        let name = &src[name_start..pos];
        if name.is_empty() {
            return Err(TransformError::Syntax {
                offset: pos,
                message: "expected a transform function name".into(),
            });
        }
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if bytes.get(pos) != Some(&b'(') {
            return Err(TransformError::Syntax {
                offset: pos,
                message: format!("expected `(` after `{name}`"),
            });
        }
        let close = src[pos..].find(')').map(|i| pos + i).ok_or(TransformError::Syntax {
            offset: pos,
            message: "unterminated argument list".into(),
        })?;
        let args = parse_args(&src[pos + 1..close], pos + 1)?;
        pos = close + 1;
        let t = build(name, &args)?;
        acc = compose_transforms(&acc, &t);
    }
}

fn parse_args(list: &str, base: usize) -> Result<Vec<f64>, TransformError> {
    list.split(|c: char| c.is_ascii_whitespace() || c == ',')
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| TransformError::Syntax {
                    offset: base,
                    message: format!("invalid number `{s}`"),
                })
        })
        .collect()
}

fn build(name: &str, args: &[f64]) -> Result<AffineTransform, TransformError> {
    let arity = |expected: &'static str| TransformError::Arity {
        name: name.to_string(),
        expected,
        got: args.len(),
    };
    match name {
        "matrix" => match *args {
            [a, b, c, d, e, f] => Ok(AffineTransform::new(a, b, c, d, e, f)),
            _ => Err(arity("6")),
        },
        "translate" => match *args {
            [tx] => Ok(AffineTransform::translate(tx, 0.0)),
            [tx, ty] => Ok(AffineTransform::translate(tx, ty)),
            _ => Err(arity("1 or 2")),
        },
        "scale" => match *args {
            [s] => Ok(AffineTransform::scale(s, s)),
            [sx, sy] => Ok(AffineTransform::scale(sx, sy)),
            _ => Err(arity("1 or 2")),
        },
        "rotate" => match *args {
            [deg] => Ok(AffineTransform::rotate(deg)),
            [deg, cx, cy] => Ok(AffineTransform::rotate_about(deg, cx, cy)),
            _ => Err(arity("1 or 3")),
        },
        other => Err(TransformError::Unsupported(other.to_string())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Point;

    #[test]
    fn single_functions() {
        assert_eq!(
            parse_transform("translate(10,5)").unwrap(),
            AffineTransform::translate(10.0, 5.0)
        );
        assert_eq!(
            parse_transform("translate(7)").unwrap(),
            AffineTransform::translate(7.0, 0.0)
        );
        assert_eq!(
            parse_transform(" scale( 2 ) ").unwrap(),
            AffineTransform::scale(2.0, 2.0)
        );
        assert_eq!(
            parse_transform("matrix(1 2 3 4 5 6)").unwrap(),
            AffineTransform::new(1.0, 2.0, 3.0, 4.0, 5.0, 6.0)
        );
        assert!(parse_transform("").unwrap().is_identity());
    }

    #[test]
    fn list_applies_rightmost_first() {
        let t = parse_transform("translate(10,5) scale(2)").unwrap();
        assert_eq!(t.apply(Point::new(1.0, 1.0)), Point::new(12.0, 7.0));
        let t = parse_transform("scale(2),translate(10,5)").unwrap();
        assert_eq!(t.apply(Point::new(1.0, 1.0)), Point::new(22.0, 12.0));
    }

    #[test]
    fn rotate_about_center() {
        let t = parse_transform("rotate(180 50 50)").unwrap();
        let p = t.apply(Point::new(60.0, 50.0));
        assert!((p.x - 40.0).abs() < 1e-9 && (p.y - 50.0).abs() < 1e-9);
    }

    #[test]
    fn rejects_skew_and_garbage() {
        assert_eq!(
            parse_transform("skewX(30)"),
            Err(TransformError::Unsupported("skewX".into()))
        );
        assert!(parse_transform("translate(1,2").is_err());
        assert!(parse_transform("rotate(1,2)").is_err());
        assert!(parse_transform("translate(a,b)").is_err());
        assert!(parse_transform("(1,2)").is_err());
    }
}
