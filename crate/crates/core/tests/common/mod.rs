//! Independent path-endpoint oracle shared by integration tests.
#![allow(dead_code)]

use rand::Rng;

pub type P = (f64, f64);

/// Affine map as `[a, b, c, d, e, f]`.
pub fn apply(m: &[f64; 6], p: P) -> P {
    (m[0] * p.0 + m[2] * p.1 + m[4], m[1] * p.0 + m[3] * p.1 + m[5])
}

/// Point on a Bezier curve of any degree by the Bernstein sum.
pub fn bezier(ctrl: &[P], t: f64) -> P {
    let n = ctrl.len() - 1;
    let mut out = (0.0, 0.0);
    for (i, c) in ctrl.iter().enumerate() {
        let binom = (0..i).fold(1.0, |acc, k| acc * (n - k) as f64 / (k + 1) as f64);
        let w = binom * t.powi(i as i32) * (1.0 - t).powi((n - i) as i32);
        out.0 += w * c.0;
        out.1 += w * c.1;
    }
    out
}

/// Densely samples every drawn segment and returns the first and last
/// sample of the drawing.
fn sampled_ends(segments: &[Vec<P>]) -> Option<(P, P)> {
    const N: usize = 64;
    fn samples(ctrl: &[P]) -> Vec<P> {
        (0..=N).map(|i| bezier(ctrl, i as f64 / N as f64)).collect()
    }
    let first = *samples(segments.first()?).first()?;
    let last = *samples(segments.last()?).last()?;
    Some((first, last))
}

#[derive(Debug, Clone)]
pub struct RandomPath {
    pub d: String,
    /// Control polygons of drawn segments, absolute coordinates.
    pub segments: Vec<Vec<P>>,
}

impl RandomPath {
    pub fn endpoints(&self, m: &[f64; 6]) -> Option<(P, P)> {
        let (a, b) = sampled_ends(&self.segments)?;
        Some((apply(m, a), apply(m, b)))
    }
}

fn coord(rng: &mut impl Rng) -> f64 {
    // Exactly representable in decimal text and round-trippable.
    rng.gen_range(-400_000i64..400_000) as f64 / 1000.0
}

/// A random path over M, L, H, V, C, Q, Z in absolute and relative forms,
/// tracked independently of the library parser.
pub fn random_path(rng: &mut impl Rng) -> RandomPath {
    let mut d = String::new();
    let mut segments: Vec<Vec<P>> = Vec::new();
    let (x, y) = (coord(rng), coord(rng));
    d.push_str(&format!("M {x} {y}"));
    let mut pen = (x, y);
    let mut start = pen;
    let n = rng.gen_range(1..9);
    for i in 0..n {
        // The first command after the moveto always draws.
        let op = if i == 0 {
            rng.gen_range(0..10)
        } else {
            rng.gen_range(0..14)
        };
        let rel = rng.gen_bool(0.5);
        let base = if rel { pen } else { (0.0, 0.0) };
        let pt = |rng: &mut _| {
            let (a, b) = (coord(rng), coord(rng));
            ((a, b), (base.0 + a, base.1 + b))
        };
        let cmd = |c: char| if rel { c.to_ascii_lowercase() } else { c };
        match op {
            0 | 1 => {
                let (raw, abs) = pt(rng);
                d.push_str(&format!(" {} {} {}", cmd('L'), raw.0, raw.1));
                segments.push(vec![pen, abs]);
                pen = abs;
            }
            2 => {
                let v = coord(rng);
                d.push_str(&format!(" {} {v}", cmd('H')));
                let to = (if rel { pen.0 + v } else { v }, pen.1);
                segments.push(vec![pen, to]);
                pen = to;
            }
            3 => {
                let v = coord(rng);
                d.push_str(&format!(" {} {v}", cmd('V')));
                let to = (pen.0, if rel { pen.1 + v } else { v });
                segments.push(vec![pen, to]);
                pen = to;
            }
            4..=6 => {
                let (r1, a1) = pt(rng);
                let (r2, a2) = pt(rng);
                let (r3, a3) = pt(rng);
                d.push_str(&format!(
                    " {} {} {} {} {} {} {}",
                    cmd('C'),
                    r1.0,
                    r1.1,
                    r2.0,
                    r2.1,
                    r3.0,
                    r3.1
                ));
                segments.push(vec![pen, a1, a2, a3]);
                pen = a3;
            }
            7..=9 => {
                let (r1, a1) = pt(rng);
                let (r2, a2) = pt(rng);
                d.push_str(&format!(" {} {} {} {} {}", cmd('Q'), r1.0, r1.1, r2.0, r2.1));
                segments.push(vec![pen, a1, a2]);
                pen = a2;
            }
            10 | 11 => {
                d.push_str(&format!(" {}", cmd('Z')));
                segments.push(vec![pen, start]);
                pen = start;
            }
            _ => {
                let (raw, abs) = pt(rng);
                d.push_str(&format!(" {} {} {}", cmd('M'), raw.0, raw.1));
                pen = abs;
                start = abs;
            }
        }
    }
    RandomPath { d, segments }
}

pub fn random_transform(rng: &mut impl Rng) -> [f64; 6] {
    match rng.gen_range(0..3) {
        0 => [1.0, 0.0, 0.0, 1.0, 0.0, 0.0],
        1 => [1.0, 0.0, 0.0, 1.0, coord(rng), coord(rng)],
        _ => {
            let t: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            let s: f64 = rng.gen_range(0.25..4.0);
            [
                s * t.cos(),
                s * t.sin(),
                -s * t.sin(),
                s * t.cos(),
                coord(rng),
                coord(rng),
            ]
        }
    }
}
