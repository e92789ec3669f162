//! Geometry-aware verification of box-arrow-text SVG diagrams.

pub mod corpus;
pub mod emit;
pub mod eval;
pub mod geom;
pub mod grpo;
pub mod oracle;
pub mod plan;
pub mod svg;
pub mod text;
pub mod verifier;
