//! Label pools, relational verbs and prompt paraphrases.

use super::FamilyKind;
use rand::seq::SliceRandom;
use rand::Rng;

const PIPELINE: &[&str] = &[
    "Ingest",
    "Parse",
    "Clean",
    "Filter",
    "Tokenize",
    "Embed",
    "Encode",
    "Pool",
    "Project",
    "Normalize",
    "Classify",
    "Decode",
    "Rank",
    "Score",
    "Export",
    "Index",
    "Augment",
    "Sample",
    "Batch",
    "Cache",
    "Route",
    "Merge",
    "Validate",
    "Format",
    "Render",
    "Publish",
    "Compress",
    "Quantize",
    "Align",
    "Fuse",
];

const MODULES: &[&str] = &[
    "Input Embed",
    "Attention",
    "MLP Block",
    "LayerNorm",
    "Residual",
    "Output Head",
    "Encoder",
    "Decoder",
    "Backbone",
    "Adapter",
    "Projector",
    "Softmax",
    "Conv Stem",
    "Patchify",
    "Pooling",
    "Cross Attn",
    "Self Attn",
    "Gating",
    "Dropout",
    "Logits",
    "Router",
    "Experts",
    "Positional",
    "Tokenizer",
];

const FLOW: &[&str] = &[
    "Request",
    "Planner",
    "Router",
    "Classifier",
    "Search",
    "Summarize",
    "Translate",
    "Verify",
    "Fallback",
    "Answer",
    "Critic",
    "Reviewer",
    "Tool Call",
    "Parser",
    "Executor",
    "Memory",
    "Guardrail",
    "Reward",
    "Judge",
    "Refine",
    "Draft",
    "Select",
    "Aggregate",
    "Respond",
];

const WORKFLOW: &[&str] = &[
    "Collect Data",
    "Label",
    "Preprocess",
    "Split",
    "Train",
    "Evaluate",
    "Tune",
    "Deploy",
    "Monitor",
    "Retrain",
    "Dataset",
    "Checkpoint",
    "Metrics",
    "Report",
    "Features",
    "Registry",
    "Serve",
    "Feedback",
    "Logs",
    "Alerts",
    "Artifacts",
    "Sweep",
    "Profile",
    "Distill",
];

const RETRIEVAL_EXTRA: &[&str] = &[
    "Postprocess",
    "Response",
    "Citation",
    "Cache",
    "Guardrail",
    "Formatter",
    "Feedback",
    "Logger",
];

/// Fallback labels short enough for the narrowest layouts.
const SHORT: &[&str] = &[
    "Input", "Embed", "Encode", "Pool", "Head", "Norm", "Attn", "MLP", "Loss", "Train", "Eval", "Store", "Index",
    "Rank", "Query", "Cache", "Data", "Fuse", "Split", "Score", "Model", "Plan", "Act", "Log",
];

const GROUP_TITLES: &[&str] = &[
    "Stage A", "Stage B", "Stage C", "Encoder", "Decoder", "Data", "Model", "Serving", "Training", "Offline", "Online",
    "Backend", "Frontend", "Core", "Block 1", "Block 2",
];

/// Label pool for free (non-role) nodes of a family.
pub fn pool(family: FamilyKind) -> &'static [&'static str] {
    match family {
        FamilyKind::HorizontalPipeline => PIPELINE,
        FamilyKind::StackedModules => MODULES,
        FamilyKind::BranchingFlow => FLOW,
        FamilyKind::GroupedContainers => PIPELINE,
        FamilyKind::RetrievalArchitecture => RETRIEVAL_EXTRA,
        FamilyKind::MultistageWorkflow => WORKFLOW,
    }
}

pub fn short_pool() -> &'static [&'static str] {
    SHORT
}

pub fn group_titles() -> &'static [&'static str] {
    GROUP_TITLES
}

/// Draws `n` distinct labels, avoiding anything in `taken`.
pub fn draw_distinct<R: Rng>(rng: &mut R, pool: &[&'static str], n: usize, taken: &[String]) -> Option<Vec<String>> {
    let mut candidates: Vec<&str> = pool.iter().copied().filter(|l| !taken.iter().any(|t| t == l)).collect();
    if candidates.len() < n {
        return None;
    }
    candidates.shuffle(rng);
    Some(candidates[..n].iter().map(|s| s.to_string()).collect())
}

const VERBS: &[&str] = &[
    "feeds into",
    "passes its output to",
    "sends results to",
    "connects to",
    "flows into",
    "hands off to",
];

pub fn verb<R: Rng>(rng: &mut R) -> &'static str {
    VERBS[rng.gen_range(0..VERBS.len())]
}

/// Paraphrase openers per family. The last entry of every list is kept for
/// held-out splits.
pub fn openers(family: FamilyKind) -> &'static [&'static str] {
    match family {
        FamilyKind::HorizontalPipeline => &[
            "Draw a left-to-right pipeline with {n} stages.",
            "Create a horizontal processing pipeline made of {n} boxes.",
            "Sketch a sequential flow of {n} steps laid out across the page.",
            "Lay out a {n}-step processing chain as connected boxes.",
        ],
        FamilyKind::StackedModules => &[
            "Draw a stack of {n} modules connected from top to bottom.",
            "Create a layered architecture diagram with {n} stacked blocks.",
            "Show {n} modules arranged as a vertical stack.",
            "Illustrate a model built from {n} blocks placed in columns.",
        ],
        FamilyKind::BranchingFlow => &[
            "Draw a branching flow chart with {n} nodes.",
            "Create a process diagram where the flow splits into parallel branches ({n} nodes).",
            "Sketch a decision flow of {n} steps that fans out.",
            "Diagram a {n}-node flow with nested branches.",
        ],
        FamilyKind::GroupedContainers => &[
            "Draw {n} components organized into labeled containers.",
            "Create a diagram with grouped blocks holding {n} components.",
            "Show a system of {n} parts grouped into titled regions.",
            "Lay out {n} components inside container boxes linked across groups.",
        ],
        FamilyKind::RetrievalArchitecture => &[
            "Draw a retrieval-augmented generation architecture with {n} components.",
            "Create a diagram of a retrieval pipeline ({n} boxes) that queries a store and reranks results.",
            "Sketch a search-then-generate system with {n} parts.",
            "Illustrate a hybrid retrieval system with {n} components.",
        ],
        FamilyKind::MultistageWorkflow => &[
            "Draw a multi-stage machine learning workflow with {n} steps.",
            "Create an ML lifecycle diagram containing {n} boxes.",
            "Sketch an end-to-end training and deployment workflow with {n} nodes.",
            "Lay out a {n}-node workflow that runs top to bottom.",
        ],
    }
}

const LAYOUT_HINTS: &[&str] = &[
    "Use a {w}x{h} canvas.",
    "The canvas is {w} by {h} pixels.",
    "Fit everything on a {w}x{h} page.",
];

pub fn layout_hint<R: Rng>(rng: &mut R, w: f64, h: f64) -> String {
    LAYOUT_HINTS[rng.gen_range(0..LAYOUT_HINTS.len())]
        .replace("{w}", &w.to_string())
        .replace("{h}", &h.to_string())
}
