//! Controlled defects applied to ground-truth drawings.
//!
//! The plan and metadata of a corrupted sample stay the intended reference;
//! only the SVG changes.

use super::CorpusSample;
use crate::emit::{Drawing, Item};
use crate::geom::{Point, Rect};
use crate::plan::{AnchorKind, NodeType};
use crate::verifier::End;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorruptionKind {
    BoxShift,
    EndpointShift,
    TextShrinkBox,
    CanvasOverflow,
}

impl CorruptionKind {
    pub const ALL: [CorruptionKind; 4] = [
        CorruptionKind::BoxShift,
        CorruptionKind::EndpointShift,
        CorruptionKind::TextShrinkBox,
        CorruptionKind::CanvasOverflow,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CorruptionKind::BoxShift => "box_shift",
            CorruptionKind::EndpointShift => "endpoint_shift",
            CorruptionKind::TextShrinkBox => "text_shrink_box",
            CorruptionKind::CanvasOverflow => "canvas_overflow",
        }
    }
}

impl fmt::Display for CorruptionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorruptionTarget {
    /// A box node by id.
    Node(String),
    Connector {
        index: usize,
        end: End,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorruptionTag {
    pub kind: CorruptionKind,
    /// Pixels; for `text_shrink_box`, the inset applied to every side.
    pub magnitude: f64,
    pub target: CorruptionTarget,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CorruptionError {
    #[error("corruption magnitude must be a positive finite number, got {0}")]
    InvalidMagnitude(f64),
    #[error("sample {0} is already corrupted")]
    AlreadyCorrupted(String),
    #[error("target {0} does not exist in the sample")]
    TargetMissing(String),
    #[error("{kind} cannot be applied to {target}")]
    WrongTarget { kind: CorruptionKind, target: String },
}

const DIRECTIONS: [(f64, f64); 8] = [
    (1.0, 0.0),
    (-1.0, 0.0),
    (0.0, 1.0),
    (0.0, -1.0),
    (std::f64::consts::FRAC_1_SQRT_2, std::f64::consts::FRAC_1_SQRT_2),
    (-std::f64::consts::FRAC_1_SQRT_2, std::f64::consts::FRAC_1_SQRT_2),
    (std::f64::consts::FRAC_1_SQRT_2, -std::f64::consts::FRAC_1_SQRT_2),
    (-std::f64::consts::FRAC_1_SQRT_2, -std::f64::consts::FRAC_1_SQRT_2),
];

impl CorruptionTag {
    /// Default target for `kind`: the rightmost box for node corruptions,
    /// the start of connector 0 otherwise.
    pub fn for_sample(sample: &CorpusSample, kind: CorruptionKind, magnitude: f64) -> Option<CorruptionTag> {
        let target = match kind {
            CorruptionKind::EndpointShift => {
                if sample.plan.connectors.is_empty() {
                    return None;
                }
                CorruptionTarget::Connector {
                    index: 0,
                    end: End::End,
                }
            }
            _ => CorruptionTarget::Node(rightmost_box(sample)?.to_string()),
        };
        Some(CorruptionTag {
            kind,
            magnitude,
            target,
        })
    }
}

fn rightmost_box(sample: &CorpusSample) -> Option<&str> {
    sample
        .plan
        .nodes
        .iter()
        .filter(|n| n.node_type == NodeType::Box)
        .max_by(|a, b| a.bbox.right().total_cmp(&b.bbox.right()))
        .map(|n| n.id.as_str())
}

/// Moves a box with its label and every connector end attached to it.
pub(crate) fn move_node(drawing: &mut Drawing, sample: &CorpusSample, id: &str, dx: f64, dy: f64) {
    if let Some(r) = drawing.box_rect_mut(id) {
        *r = r.translate(dx, dy);
    }
    if let Some(at) = drawing.label_mut(id) {
        *at = at.offset(dx, dy);
    }
    let plan = &sample.plan;
    for (i, start, end) in drawing.connectors_mut() {
        let c = &plan.connectors[i];
        if c.src_id == id {
            *start = start.offset(dx, dy);
        }
        if c.dst_id == id {
            *end = end.offset(dx, dy);
        }
    }
}

/// Anchor points of every node except those listed.
fn other_anchors(sample: &CorpusSample, except: &[&str]) -> Vec<Point> {
    sample
        .plan
        .nodes
        .iter()
        .filter(|n| !except.contains(&n.id.as_str()))
        .flat_map(|n| AnchorKind::ALL.map(|k| n.anchor(k)))
        .collect()
}

/// Applies `tag` to an uncorrupted sample. `seed` picks shift directions.
pub fn corrupt_sample(sample: &CorpusSample, tag: &CorruptionTag, seed: u64) -> Result<CorpusSample, CorruptionError> {
    if !(tag.magnitude.is_finite() && tag.magnitude > 0.0) {
        return Err(CorruptionError::InvalidMagnitude(tag.magnitude));
    }
    if sample.corruption.is_some() {
        return Err(CorruptionError::AlreadyCorrupted(sample.sample_id.clone()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut dirs = DIRECTIONS;
    dirs.shuffle(&mut rng);
    let m = tag.magnitude;
    let mut drawing = Drawing::from_plan(&sample.plan, &sample.style());

    match (&tag.kind, &tag.target) {
        (CorruptionKind::EndpointShift, CorruptionTarget::Connector { index, end }) => {
            let c = sample
                .plan
                .connectors
                .get(*index)
                .ok_or_else(|| CorruptionError::TargetMissing(format!("connector {index}")))?;
            let own = match end {
                End::Start => &c.src_id,
                End::End => &c.dst_id,
            };
            let others = other_anchors(sample, &[own]);
            let (start, stop) = drawing.connector_mut(*index).expect("emitted connector");
            let p = match end {
                End::Start => start,
                End::End => stop,
            };
            // Move away from foreign anchors so the defect stays attributable.
            let origin = *p;
            let clearance = |d: &(f64, f64)| {
                let q = origin.offset(d.0 * m, d.1 * m);
                others.iter().map(|a| a.distance(q)).fold(f64::INFINITY, f64::min)
            };
            let best = dirs
                .iter()
                .copied()
                .max_by(|a, b| clearance(a).total_cmp(&clearance(b)))
                .expect("eight directions");
            *p = origin.offset(best.0 * m, best.1 * m);
        }
        (CorruptionKind::EndpointShift, t) | (_, t @ CorruptionTarget::Connector { .. }) => {
            return Err(CorruptionError::WrongTarget {
                kind: tag.kind,
                target: format!("{t:?}"),
            });
        }
        (kind, CorruptionTarget::Node(id)) => {
            let node = sample
                .plan
                .node(id)
                .filter(|n| n.node_type == NodeType::Box)
                .ok_or_else(|| CorruptionError::TargetMissing(id.clone()))?;
            match kind {
                CorruptionKind::BoxShift => {
                    let d = dirs[0];
                    move_node(&mut drawing, sample, id, d.0 * m, d.1 * m);
                }
                CorruptionKind::TextShrinkBox => {
                    let r = drawing.box_rect_mut(id).expect("emitted box");
                    *r = r.deflate(m);
                }
                CorruptionKind::CanvasOverflow => {
                    let dx = sample.plan.canvas.width + m - node.bbox.right();
                    move_node(&mut drawing, sample, id, dx, 0.0);
                }
                CorruptionKind::EndpointShift => unreachable!("handled above"),
            }
        }
    }

    let mut out = sample.clone();
    out.svg = drawing.to_svg();
    out.sample_id = format!("{}-{}", sample.sample_id, tag.kind);
    out.corruption = Some(tag.clone());
    Ok(out)
}

/// Box rectangle of `id` as drawn, for oracle computations in tests.
pub fn drawn_box(drawing: &Drawing, id: &str) -> Option<Rect> {
    drawing.items.iter().find_map(|it| match it {
        Item::Box { node_id, rect, .. } if node_id == id => Some(*rect),
        _ => None,
    })
}

#[cfg(test)]
mod tests {
    use super::super::{generate_sample, FamilyKind, SplitName, SplitSpec};
    use super::*;
    use crate::verifier::{verify, VerifierConfig};

    fn sample() -> CorpusSample {
        let mut s = generate_sample(
            FamilyKind::HorizontalPipeline,
            &SplitSpec::default_for(SplitName::Train),
            42,
        )
        .unwrap();
        s.sample_id = "s".into();
        s
    }

    #[test]
    fn zero_magnitude_rejected() {
        let s = sample();
        let tag = CorruptionTag::for_sample(&s, CorruptionKind::BoxShift, 0.0).unwrap();
        assert_eq!(corrupt_sample(&s, &tag, 1), Err(CorruptionError::InvalidMagnitude(0.0)));
    }

    #[test]
    fn double_corruption_rejected() {
        let s = sample();
        let tag = CorruptionTag::for_sample(&s, CorruptionKind::BoxShift, 5.0).unwrap();
        let once = corrupt_sample(&s, &tag, 1).unwrap();
        assert!(matches!(
            corrupt_sample(&once, &tag, 1),
            Err(CorruptionError::AlreadyCorrupted(_))
        ));
    }

    #[test]
    fn missing_target() {
        let s = sample();
        let tag = CorruptionTag {
            kind: CorruptionKind::BoxShift,
            magnitude: 5.0,
            target: CorruptionTarget::Node("nope".into()),
        };
        assert!(matches!(
            corrupt_sample(&s, &tag, 1),
            Err(CorruptionError::TargetMissing(_))
        ));
        let tag = CorruptionTag {
            kind: CorruptionKind::EndpointShift,
            magnitude: 5.0,
            target: CorruptionTarget::Connector {
                index: 99,
                end: End::Start,
            },
        };
        assert!(matches!(
            corrupt_sample(&s, &tag, 1),
            Err(CorruptionError::TargetMissing(_))
        ));
    }

    #[test]
    fn endpoint_shift_twenty_misses_anchor() {
        let s = sample();
        let tag = CorruptionTag::for_sample(&s, CorruptionKind::EndpointShift, 20.0).unwrap();
        let c = corrupt_sample(&s, &tag, 3).unwrap();
        assert_eq!(c.plan, s.plan);
        let v = verify(&c.svg, &c.plan, &VerifierConfig::default());
        let anchors = v.anchors.unwrap();
        let hit: Vec<_> = anchors.endpoints.iter().filter(|e| e.connector == 0).collect();
        assert!(hit.iter().any(|e| e.end == End::End && !e.hit));
        assert!(hit.iter().any(|e| e.end == End::Start && e.hit));
    }

    #[test]
    fn every_kind_lowers_reward() {
        let cfg = VerifierConfig::default();
        for f in FamilyKind::ALL {
            let mut s = generate_sample(f, &SplitSpec::default_for(SplitName::Train), 77).unwrap();
            s.sample_id = "x".into();
            let clean = verify(&s.svg, &s.plan, &cfg).breakdown.total;
            for kind in CorruptionKind::ALL {
                let tag = CorruptionTag::for_sample(&s, kind, 30.0).unwrap();
                let c = corrupt_sample(&s, &tag, 9).unwrap();
                let t = verify(&c.svg, &c.plan, &cfg).breakdown.total;
                assert!(t < clean, "{f} {kind}: {t} !< {clean}");
            }
        }
    }
}
