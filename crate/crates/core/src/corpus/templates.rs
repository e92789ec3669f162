//! Graph templates: node slots on a pitch lattice plus connectivity.
//!
//! Positions are `(col, row)` in lattice units; the layout engine turns one
//! unit into box size plus gap. Half units are allowed for staggered rows.

use super::FamilyKind;
use crate::plan::AnchorKind;
use rand::Rng;

/// Fixed role labels (alternatives) for template-defined nodes.
pub type Role = Option<&'static [&'static str]>;

#[derive(Debug, Clone, PartialEq)]
pub struct SkelEdge {
    pub src: usize,
    pub dst: usize,
    /// Explicit anchors; `None` lets the layout engine pick facing sides.
    pub anchors: Option<(AnchorKind, AnchorKind)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Skeleton {
    pub pos: Vec<(f64, f64)>,
    pub roles: Vec<Role>,
    pub edges: Vec<SkelEdge>,
    /// Optional extra edges, offered in preference order.
    pub extras: Vec<(usize, usize)>,
    /// Member lists; every group becomes a titled container.
    pub groups: Vec<Vec<usize>>,
}

impl Skeleton {
    fn new() -> Self {
        Skeleton {
            pos: Vec::new(),
            roles: Vec::new(),
            edges: Vec::new(),
            extras: Vec::new(),
            groups: Vec::new(),
        }
    }

    fn add(&mut self, col: f64, row: f64) -> usize {
        self.add_role(col, row, None)
    }

    fn add_role(&mut self, col: f64, row: f64, role: Role) -> usize {
        self.pos.push((col, row));
        self.roles.push(role);
        self.pos.len() - 1
    }

    fn link(&mut self, src: usize, dst: usize) {
        self.edges.push(SkelEdge {
            src,
            dst,
            anchors: None,
        });
    }

    fn link_with(&mut self, src: usize, dst: usize, a: AnchorKind, b: AnchorKind) {
        self.edges.push(SkelEdge {
            src,
            dst,
            anchors: Some((a, b)),
        });
    }

    fn chain(&mut self, nodes: &[usize]) {
        for w in nodes.windows(2) {
            self.link(w[0], w[1]);
        }
    }

    /// Swaps rows and columns, turning left-to-right flows into top-down ones.
    fn transpose(mut self) -> Self {
        for p in &mut self.pos {
            *p = (p.1, p.0);
        }
        let flip = |a: AnchorKind| match a {
            AnchorKind::LeftCenter => AnchorKind::TopCenter,
            AnchorKind::TopCenter => AnchorKind::LeftCenter,
            AnchorKind::RightCenter => AnchorKind::BottomCenter,
            AnchorKind::BottomCenter => AnchorKind::RightCenter,
        };
        for e in &mut self.edges {
            e.anchors = e.anchors.map(|(a, b)| (flip(a), flip(b)));
        }
        self
    }

    pub fn node_count(&self) -> usize {
        self.pos.len()
    }

    pub fn out_degrees(&self) -> Vec<usize> {
        let mut d = vec![0; self.pos.len()];
        for e in &self.edges {
            d[e.src] += 1;
        }
        d
    }
}

/// Number of graph templates per family. The last one is held out of the
/// in-distribution splits.
pub const TEMPLATES_PER_FAMILY: u8 = 3;
pub const HELD_OUT_TEMPLATE: u8 = 2;

/// Knobs that depend on the split rather than the template.
#[derive(Debug, Clone, Copy)]
pub struct TemplateContext {
    pub max_groups: usize,
    /// Probability of wrapping part of a single-row layout in a container.
    pub group_prob: f64,
}

pub fn skeleton<R: Rng>(family: FamilyKind, template: u8, n: usize, ctx: &TemplateContext, rng: &mut R) -> Skeleton {
    assert!(n >= 2, "templates need at least two nodes");
    match (family, template) {
        (FamilyKind::HorizontalPipeline, 0) => pipeline_row(n, ctx, rng),
        (FamilyKind::HorizontalPipeline, 1) => pipeline_stagger(n),
        (FamilyKind::HorizontalPipeline, _) => snake(n),
        (FamilyKind::StackedModules, 0) => stack_column(n),
        (FamilyKind::StackedModules, 1) => stack_pair(n),
        (FamilyKind::StackedModules, _) => stack_side_inputs(n),
        (FamilyKind::BranchingFlow, 0) => fan_out(n, rng),
        (FamilyKind::BranchingFlow, 1) => diamond(n, rng),
        (FamilyKind::BranchingFlow, _) => two_level(n),
        (FamilyKind::GroupedContainers, 0) => column_groups(n, ctx, rng, false),
        (FamilyKind::GroupedContainers, 1) => row_groups(n, ctx, rng),
        (FamilyKind::GroupedContainers, _) => column_groups(n, ctx, rng, true),
        (FamilyKind::RetrievalArchitecture, 0) => retrieval(n),
        (FamilyKind::RetrievalArchitecture, 1) => retrieval(n).transpose(),
        (FamilyKind::RetrievalArchitecture, _) => hybrid_retrieval(n),
        (FamilyKind::MultistageWorkflow, 0) => workflow_artifacts(n, ctx, rng),
        (FamilyKind::MultistageWorkflow, 1) => workflow_substeps(n, rng),
        (FamilyKind::MultistageWorkflow, _) => workflow_artifacts(n, ctx, rng).transpose_plain(),
    }
}

impl Skeleton {
    /// Transpose that also drops row-run containers, whose title band only
    /// fits above a row.
    fn transpose_plain(mut self) -> Self {
        self.groups.clear();
        self.transpose()
    }
}

/// Picks a contiguous run of `len` in `0..n`.
fn run<R: Rng>(rng: &mut R, n: usize, len: usize) -> Vec<usize> {
    let start = rng.gen_range(0..=n - len);
    (start..start + len).collect()
}

fn maybe_row_group<R: Rng>(sk: &mut Skeleton, row_nodes: &[usize], ctx: &TemplateContext, rng: &mut R) {
    if ctx.max_groups == 0 || row_nodes.len() < 3 || !rng.gen_bool(ctx.group_prob) {
        return;
    }
    let len = rng.gen_range(2..=3.min(row_nodes.len() - 1));
    let r = run(rng, row_nodes.len(), len);
    sk.groups.push(r.into_iter().map(|i| row_nodes[i]).collect());
}

fn pipeline_row<R: Rng>(n: usize, ctx: &TemplateContext, rng: &mut R) -> Skeleton {
    let mut sk = Skeleton::new();
    let ids: Vec<usize> = (0..n).map(|i| sk.add(i as f64, 0.0)).collect();
    sk.chain(&ids);
    maybe_row_group(&mut sk, &ids, ctx, rng);
    sk
}

/// Alternating rows, half a column apart; x-centers still increase.
fn pipeline_stagger(n: usize) -> Skeleton {
    let mut sk = Skeleton::new();
    let ids: Vec<usize> = (0..n).map(|i| sk.add(i as f64 * 0.5, (i % 2) as f64)).collect();
    sk.chain(&ids);
    sk.extras = (0..n.saturating_sub(2)).map(|i| (i, i + 2)).collect();
    sk
}

/// Left to right along the top row, then back along the bottom row.
fn snake(n: usize) -> Skeleton {
    let mut sk = Skeleton::new();
    let top = n.div_ceil(2);
    let mut ids = Vec::new();
    for i in 0..top {
        ids.push(sk.add(i as f64, 0.0));
    }
    for j in 0..n - top {
        ids.push(sk.add((top - 1 - j) as f64, 1.0));
    }
    sk.chain(&ids);
    for j in 0..n - top {
        let below = top + j;
        let above = top - 1 - j;
        if below != top {
            sk.extras.push((below, above));
        }
    }
    sk
}

fn stack_column(n: usize) -> Skeleton {
    let mut sk = Skeleton::new();
    let ids: Vec<usize> = (0..n).map(|i| sk.add(0.0, i as f64)).collect();
    sk.chain(&ids);
    sk
}

/// Two stacks side by side, the first feeding the second.
fn stack_pair(n: usize) -> Skeleton {
    let mut sk = Skeleton::new();
    let a = n.div_ceil(2);
    let left: Vec<usize> = (0..a).map(|r| sk.add(0.0, r as f64)).collect();
    let right: Vec<usize> = (0..n - a).map(|r| sk.add(1.0, r as f64)).collect();
    sk.chain(&left);
    sk.link(left[a - 1], right[0]);
    sk.chain(&right);
    for r in 0..right.len() {
        if !(r == 0 && a == 1) {
            sk.extras.push((left[r], right[r]));
        }
    }
    sk
}

/// A main stack with side inputs entering from the right.
fn stack_side_inputs(n: usize) -> Skeleton {
    let mut sk = Skeleton::new();
    let side = (n / 3).max(1);
    let main_len = n - side;
    let main: Vec<usize> = (0..main_len).map(|r| sk.add(0.0, r as f64)).collect();
    let inputs: Vec<usize> = (0..side).map(|r| sk.add(1.0, r as f64)).collect();
    sk.chain(&main);
    for (r, &s) in inputs.iter().enumerate() {
        sk.link(s, main[r]);
        if r + 1 < main_len {
            sk.extras.push((s, main[r + 1]));
        }
    }
    sk
}

fn branch_count<R: Rng>(rest: usize, rng: &mut R) -> usize {
    if rest >= 3 && rng.gen_bool(0.35) {
        3
    } else {
        2
    }
}

/// A root fanning out into parallel branches that extend to the right.
fn fan_out<R: Rng>(n: usize, rng: &mut R) -> Skeleton {
    let mut sk = Skeleton::new();
    let b = branch_count(n - 1, rng).min(n - 1);
    let root = sk.add(0.0, (b - 1) as f64 / 2.0);
    let mut branches: Vec<Vec<usize>> = (0..b).map(|j| vec![sk.add(1.0, j as f64)]).collect();
    for k in 0..n - 1 - b {
        let j = k % b;
        let col = 1 + branches[j].len();
        let id = sk.add(col as f64, j as f64);
        branches[j].push(id);
    }
    for br in &branches {
        sk.link(root, br[0]);
        sk.chain(br);
    }
    for j in 0..b - 1 {
        for (&a, &b) in branches[j].iter().zip(&branches[j + 1]) {
            sk.extras.push((a, b));
        }
    }
    sk
}

/// Split into branches that merge again, followed by a tail.
fn diamond<R: Rng>(n: usize, rng: &mut R) -> Skeleton {
    if n < 4 {
        return fan_out(n, rng);
    }
    let mut sk = Skeleton::new();
    let b = if n >= 6 { branch_count(n - 2, rng) } else { 2 };
    let mid = (b - 1) as f64 / 2.0;
    let root = sk.add(0.0, mid);
    let heads: Vec<usize> = (0..b).map(|j| sk.add(1.0, j as f64)).collect();
    let merge = sk.add(2.0, mid);
    let mut tail = vec![merge];
    for k in 0..n - 2 - b {
        tail.push(sk.add(3.0 + k as f64, mid));
    }
    for &h in &heads {
        sk.link(root, h);
        sk.link(h, merge);
    }
    sk.chain(&tail);
    for w in heads.windows(2) {
        sk.extras.push((w[0], w[1]));
    }
    sk
}

/// A root with two branches, the upper one splitting again.
fn two_level(n: usize) -> Skeleton {
    let mut sk = Skeleton::new();
    let root = sk.add(0.0, 1.5);
    let a = sk.add(1.0, 0.5);
    let b = sk.add(1.0, 2.5);
    sk.link(root, a);
    sk.link(root, b);
    let slots = [(a, 0.0), (a, 1.0), (b, 2.5)];
    let mut leaves = Vec::new();
    for &(parent, row) in slots.iter().take(n.saturating_sub(3)) {
        let id = sk.add(2.0, row);
        sk.link(parent, id);
        leaves.push((id, row));
    }
    // Remaining nodes extend the leaves to the right, round robin.
    let mut ends = leaves.clone();
    let mut depth = vec![2usize; ends.len()];
    for k in 0..n.saturating_sub(3 + slots.len()) {
        let j = k % ends.len();
        depth[j] += 1;
        let id = sk.add(depth[j] as f64, ends[j].1);
        sk.link(ends[j].0, id);
        ends[j].0 = id;
    }
    if leaves.len() >= 2 {
        sk.extras.push((leaves[0].0, leaves[1].0));
    }
    if leaves.len() >= 3 {
        sk.extras.push((leaves[1].0, leaves[2].0));
    }
    sk
}

fn split_sizes(n: usize, parts: usize) -> Vec<usize> {
    (0..parts).map(|i| n / parts + usize::from(i < n % parts)).collect()
}

/// Each column is a container holding a vertical chain. Columns link along
/// the top row, or bottom-to-top when `diagonal` is set.
fn column_groups<R: Rng>(n: usize, ctx: &TemplateContext, rng: &mut R, diagonal: bool) -> Skeleton {
    let mut sk = Skeleton::new();
    let max_groups = ctx.max_groups.clamp(1, 3);
    let g = if n >= 7 && max_groups >= 3 && rng.gen_bool(0.5) {
        3
    } else {
        max_groups.min(2).min(n)
    };
    let cols: Vec<Vec<usize>> = split_sizes(n, g)
        .into_iter()
        .enumerate()
        .map(|(c, size)| (0..size).map(|r| sk.add(c as f64, r as f64)).collect())
        .collect();
    for c in 0..g {
        sk.chain(&cols[c]);
        if c + 1 < g {
            if diagonal {
                sk.link(*cols[c].last().unwrap(), cols[c + 1][0]);
            } else {
                sk.link(cols[c][0], cols[c + 1][0]);
            }
            let skip = usize::from(!diagonal);
            for r in skip..cols[c].len().min(cols[c + 1].len()) {
                if diagonal && r == 0 && cols[c].len() == 1 {
                    continue;
                }
                sk.extras.push((cols[c][r], cols[c + 1][r]));
            }
        }
    }
    sk.groups = cols;
    sk
}

/// One row split into consecutive containers.
fn row_groups<R: Rng>(n: usize, ctx: &TemplateContext, rng: &mut R) -> Skeleton {
    let mut sk = Skeleton::new();
    let ids: Vec<usize> = (0..n).map(|i| sk.add(i as f64, 0.0)).collect();
    sk.chain(&ids);
    let g = if n >= 4 { ctx.max_groups.clamp(1, 2) } else { 1 };
    let mut start = 0;
    let sizes = split_sizes(n, g);
    for size in sizes {
        sk.groups.push(ids[start..start + size].to_vec());
        start += size;
    }
    if g == 1 && n >= 3 {
        // A single container covering everything reads oddly; trim one end.
        let keep = run(rng, n, n - 1);
        sk.groups[0] = keep;
    }
    sk
}

const QUERY: &[&str] = &["Query", "User Query", "Question"];
const RETRIEVER: &[&str] = &["Retriever", "Dense Retriever", "Search"];
const STORE: &[&str] = &["Vector Store", "Index", "Doc Store"];
const RANKER: &[&str] = &["Reranker", "Ranker", "Cross Encoder"];
const GENERATOR: &[&str] = &["Generator", "LLM", "Reader"];
const DENSE: &[&str] = &["Dense Search", "Vector Search"];
const SPARSE: &[&str] = &["Keyword Search", "BM25"];

/// query → retriever → store ⇄ ranker → generator, zigzagging between two
/// rows so the two-way link uses distinct sides.
fn retrieval(n: usize) -> Skeleton {
    use AnchorKind::*;
    let mut sk = Skeleton::new();
    let q = sk.add_role(0.0, 0.0, Some(QUERY));
    let r = sk.add_role(1.0, 0.0, Some(RETRIEVER));
    let s = sk.add_role(2.0, 1.0, Some(STORE));
    sk.link(q, r);
    sk.link(r, s);
    if n == 3 {
        sk.link_with(s, r, TopCenter, BottomCenter);
        return sk;
    }
    if n == 4 {
        let g = sk.add_role(2.0, 0.0, Some(GENERATOR));
        sk.link_with(s, r, TopCenter, BottomCenter);
        sk.link(r, g);
        return sk;
    }
    let k = sk.add_role(3.0, 0.0, Some(RANKER));
    let g = sk.add_role(4.0, 1.0, Some(GENERATOR));
    sk.link(s, k);
    sk.link_with(k, s, BottomCenter, TopCenter);
    sk.link(k, g);
    // Optional stages stack in the column after the generator.
    let mut prev = g;
    for i in 5..n {
        let id = sk.add(5.0, (i - 5) as f64);
        sk.link(prev, id);
        prev = id;
    }
    sk.extras = vec![(r, k), (q, s)];
    sk
}

/// Two parallel retrievers merged into one store, then rerank and generate.
fn hybrid_retrieval(n: usize) -> Skeleton {
    use AnchorKind::*;
    let mut sk = Skeleton::new();
    let q = sk.add_role(0.0, 0.5, Some(QUERY));
    let d = sk.add_role(1.0, 0.0, Some(DENSE));
    let sp = sk.add_role(1.0, 1.0, Some(SPARSE));
    sk.link(q, d);
    sk.link(q, sp);
    if n == 3 {
        return sk;
    }
    let s = sk.add_role(2.0, 0.5, Some(STORE));
    sk.link(d, s);
    sk.link(sp, s);
    if n == 4 {
        return sk;
    }
    let k = sk.add_role(3.0, 1.5, Some(RANKER));
    sk.link(s, k);
    sk.link_with(k, s, TopCenter, BottomCenter);
    let mut prev = k;
    for i in 5..n {
        let role = if i == 5 { Some(GENERATOR) } else { None };
        let id = sk.add_role(4.0, i as f64 - 4.5, role);
        sk.link(prev, id);
        prev = id;
    }
    sk.extras = vec![(d, sp)];
    sk
}

/// Main stages along the top row, each optionally producing an artifact
/// below it.
fn workflow_artifacts<R: Rng>(n: usize, ctx: &TemplateContext, rng: &mut R) -> Skeleton {
    let mut sk = Skeleton::new();
    let artifacts = (n - 1) / 2;
    let main_len = n - artifacts;
    let main: Vec<usize> = (0..main_len).map(|i| sk.add(i as f64, 0.0)).collect();
    sk.chain(&main);
    for i in 0..artifacts {
        let a = sk.add(i as f64, 1.0);
        sk.link(main[i], a);
        if i + 1 < main_len {
            sk.extras.push((a, main[i + 1]));
        }
    }
    maybe_row_group(&mut sk, &main, ctx, rng);
    sk
}

/// Stages on the top row; some stages route through a sub-step below them.
fn workflow_substeps<R: Rng>(n: usize, rng: &mut R) -> Skeleton {
    let mut sk = Skeleton::new();
    let subs = (n - 1) / 2;
    let stages = n - subs;
    let main: Vec<usize> = (0..stages).map(|i| sk.add(i as f64, 0.0)).collect();
    // Choose which of the first stages-1 stages get a sub-step.
    let mut with_sub: Vec<usize> = (0..stages - 1).collect();
    while with_sub.len() > subs {
        let k = rng.gen_range(0..with_sub.len());
        with_sub.remove(k);
    }
    for i in 0..stages - 1 {
        if with_sub.contains(&i) {
            let s = sk.add(i as f64 + 0.5, 1.0);
            sk.link(main[i], s);
            sk.link(s, main[i + 1]);
            sk.extras.push((main[i], main[i + 1]));
        } else {
            sk.link(main[i], main[i + 1]);
        }
    }
    sk
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::HashSet;

    const CTX: TemplateContext = TemplateContext {
        max_groups: 3,
        group_prob: 0.5,
    };

    fn connected(sk: &Skeleton) -> bool {
        let n = sk.node_count();
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        while let Some(v) = stack.pop() {
            if std::mem::replace(&mut seen[v], true) {
                continue;
            }
            for e in &sk.edges {
                if e.src == v {
                    stack.push(e.dst);
                }
                if e.dst == v {
                    stack.push(e.src);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    #[test]
    fn every_template_honours_node_count_and_connectivity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for family in FamilyKind::ALL {
            for t in 0..TEMPLATES_PER_FAMILY {
                for n in 3..=10 {
                    for _ in 0..5 {
                        let sk = skeleton(family, t, n, &CTX, &mut rng);
                        assert_eq!(sk.node_count(), n, "{family:?} t{t} n{n}");
                        assert!(connected(&sk), "{family:?} t{t} n{n}");
                        let slots: HashSet<(i64, i64)> = sk
                            .pos
                            .iter()
                            .map(|p| ((p.0 * 2.0) as i64, (p.1 * 2.0) as i64))
                            .collect();
                        assert_eq!(slots.len(), n, "slot collision {family:?} t{t} n{n}");
                        for e in &sk.edges {
                            assert_ne!(e.src, e.dst);
                        }
                        let base: HashSet<(usize, usize)> = sk.edges.iter().map(|e| (e.src, e.dst)).collect();
                        assert_eq!(base.len(), sk.edges.len(), "duplicate edge");
                    }
                }
            }
        }
    }

    #[test]
    fn pipelines_are_chains() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for t in 0..TEMPLATES_PER_FAMILY {
            let sk = skeleton(FamilyKind::HorizontalPipeline, t, 6, &CTX, &mut rng);
            assert_eq!(sk.edges.len(), 5);
        }
    }

    #[test]
    fn branching_has_fan_out() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for t in 0..TEMPLATES_PER_FAMILY {
            for n in 3..=10 {
                let sk = skeleton(FamilyKind::BranchingFlow, t, n, &CTX, &mut rng);
                assert!(sk.out_degrees().iter().any(|&d| d >= 2), "t{t} n{n}");
            }
        }
    }

    #[test]
    fn retrieval_has_two_way_link() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let sk = skeleton(FamilyKind::RetrievalArchitecture, 0, 5, &CTX, &mut rng);
        let pairs: HashSet<(usize, usize)> = sk.edges.iter().map(|e| (e.src, e.dst)).collect();
        assert!(pairs.contains(&(2, 3)) && pairs.contains(&(3, 2)));
        assert_eq!(sk.edges.len(), 5);
    }
}
