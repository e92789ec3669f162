//! Group-relative policy optimization over a toy perturbation policy.
//!
//! The policy picks one perturbation magnitude per constraint category and
//! applies it to a ground-truth drawing; the verifier scores the result.
//! Log-probabilities and gradients are exact.

use crate::corpus::corrupt::move_node;
use crate::corpus::CorpusSample;
use crate::emit::Drawing;
use crate::plan::NodeType;
use crate::text::TextMeasurer;
use crate::verifier::{curriculum_weights, verify_with, RewardBreakdown, VerifierConfig, WeightSet};
use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;

pub const DEFAULT_MAGNITUDES: [f64; 5] = [0.0, 4.0, 8.0, 16.0, 32.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    Endpoint,
    Box,
    Text,
}

impl Category {
    pub const ALL: [Category; 3] = [Category::Endpoint, Category::Box, Category::Text];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GrpoConfig {
    pub group_size: usize,
    pub clip_eta: f64,
    pub learning_rate: f64,
    pub updates: u64,
    pub kl_coeff: f64,
    pub eps: f64,
    pub seeds: Vec<u64>,
    /// Gradient steps taken on each batch. Steps after the first see
    /// ratios away from one, which is where clipping can engage.
    pub epochs_per_batch: usize,
    pub magnitudes: Vec<f64>,
}

impl Default for GrpoConfig {
    fn default() -> Self {
        GrpoConfig {
            group_size: 4,
            clip_eta: 0.2,
            learning_rate: 0.05,
            updates: 1500,
            kl_coeff: 0.02,
            eps: 1e-8,
            seeds: vec![13, 21, 42],
            epochs_per_batch: 2,
            magnitudes: DEFAULT_MAGNITUDES.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GrpoError {
    #[error("invalid GRPO config: {0}")]
    InvalidConfig(String),
    #[error("gradient is not finite")]
    NonFiniteGradient,
    #[error("training corpus is empty")]
    EmptyCorpus,
}

impl GrpoConfig {
    pub fn from_json(text: &str) -> Result<GrpoConfig, GrpoError> {
        let cfg: GrpoConfig = serde_json::from_str(text).map_err(|e| GrpoError::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), GrpoError> {
        let bad = |m: &str| Err(GrpoError::InvalidConfig(m.to_string()));
        if self.group_size < 2 {
            return bad("group_size must be at least 2");
        }
        if !(self.clip_eta > 0.0 && self.clip_eta < 1.0) {
            return bad("clip_eta must lie in (0, 1)");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if !(self.kl_coeff >= 0.0 && self.kl_coeff.is_finite()) {
            return bad("kl_coeff must be non-negative");
        }
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return bad("eps must be positive");
        }
        if self.epochs_per_batch == 0 {
            return bad("epochs_per_batch must be at least 1");
        }
        if self.magnitudes.is_empty() || self.magnitudes.iter().any(|m| !(m.is_finite() && *m >= 0.0)) {
            return bad("magnitudes must be non-empty, finite and non-negative");
        }
        Ok(())
    }
}

/// Normalizes rewards within a group using the population standard deviation.
pub fn group_advantages(rewards: &[f64], eps: f64) -> Vec<f64> {
    let n = rewards.len() as f64;
    let mean = rewards.iter().sum::<f64>() / n;
    let var = rewards.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    rewards.iter().map(|r| (r - mean) / (std + eps)).collect()
}

pub fn clipped_surrogate(rho: f64, adv: f64, eta: f64) -> f64 {
    (rho * adv).min(rho.clamp(1.0 - eta, 1.0 + eta) * adv)
}

/// True when the clipped branch is the active one, i.e. the gradient is cut.
fn clip_active(rho: f64, adv: f64, eta: f64) -> bool {
    rho.clamp(1.0 - eta, 1.0 + eta) * adv < rho * adv
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|l| (l - m).exp()).collect();
    let z: f64 = e.iter().sum();
    e.into_iter().map(|x| x / z).collect()
}

fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lz = m + logits.iter().map(|l| (l - m).exp()).sum::<f64>().ln();
    logits.iter().map(|l| l - lz).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyPolicy {
    /// One logit vector per entry of [`Category::ALL`].
    pub logits: [Vec<f64>; 3],
    pub magnitudes: Vec<f64>,
}

/// Magnitude index chosen for each category.
pub type Action = [usize; 3];

impl ToyPolicy {
    pub fn uniform(magnitudes: &[f64]) -> ToyPolicy {
        let z = vec![0.0; magnitudes.len()];
        ToyPolicy {
            logits: [z.clone(), z.clone(), z],
            magnitudes: magnitudes.to_vec(),
        }
    }

    pub fn probs(&self, c: Category) -> Vec<f64> {
        softmax(&self.logits[c as usize])
    }

    pub fn log_prob(&self, a: &Action) -> f64 {
        (0..3).map(|c| log_softmax(&self.logits[c])[a[c]]).sum()
    }

    pub fn sample(&self, rng: &mut impl Rng) -> Action {
        let mut a = [0; 3];
        for (c, slot) in a.iter_mut().enumerate() {
            let w = WeightedIndex::new(softmax(&self.logits[c])).expect("softmax is a distribution");
            *slot = w.sample(rng);
        }
        a
    }

    /// KL(self || reference), summed over categories.
    pub fn kl(&self, reference: &ToyPolicy) -> f64 {
        (0..3)
            .map(|c| {
                let (lp, lq) = (log_softmax(&self.logits[c]), log_softmax(&reference.logits[c]));
                lp.iter().zip(&lq).map(|(p, q)| p.exp() * (p - q)).sum::<f64>()
            })
            .sum()
    }

    fn is_finite(&self) -> bool {
        self.logits.iter().flatten().all(|x| x.is_finite())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub action: Action,
    pub magnitudes: [f64; 3],
    pub svg: String,
    pub logp_behavior: f64,
    pub breakdown: RewardBreakdown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupBatch {
    pub prompt_ref: String,
    pub candidates: Vec<Candidate>,
    pub rewards: Vec<f64>,
    pub advantages: Vec<f64>,
    /// Ratios under the policy that sampled the batch; all one.
    pub ratios: Vec<f64>,
    pub weights: WeightSet,
}

fn unit_direction(rng: &mut impl Rng) -> (f64, f64) {
    let t = rng.gen_range(0.0..std::f64::consts::TAU);
    (t.cos(), t.sin())
}

/// Ground-truth drawing of `sample` with every connector end, box and label
/// displaced by the category magnitude in a random direction.
pub fn perturb(sample: &CorpusSample, magnitudes: [f64; 3], rng: &mut impl Rng) -> String {
    let mut drawing = Drawing::from_plan(&sample.plan, &sample.style());
    let [m_end, m_box, m_text] = magnitudes;
    if m_box > 0.0 {
        for n in sample.plan.nodes.iter().filter(|n| n.node_type == NodeType::Box) {
            let (dx, dy) = unit_direction(rng);
            move_node(&mut drawing, sample, &n.id, dx * m_box, dy * m_box);
        }
    }
    if m_end > 0.0 {
        for (_, start, end) in drawing.connectors_mut() {
            for p in [start, end] {
                let (dx, dy) = unit_direction(rng);
                *p = p.offset(dx * m_end, dy * m_end);
            }
        }
    }
    if m_text > 0.0 {
        for n in &sample.plan.nodes {
            let (dx, dy) = unit_direction(rng);
            if let Some(at) = drawing.label_mut(&n.id) {
                *at = at.offset(dx * m_text, dy * m_text);
            }
        }
    }
    drawing.to_svg()
}

/// Samples `g` candidates for `sample` and scores them with the curriculum
/// weights of `update_index`.
#[allow(clippy::too_many_arguments)]
pub fn rollout_group(
    policy: &ToyPolicy,
    sample: &CorpusSample,
    g: usize,
    rng_seed: u64,
    update_index: u64,
    vcfg: &VerifierConfig,
    eps: f64,
    measurer: &dyn TextMeasurer,
) -> GroupBatch {
    let weights = curriculum_weights(&vcfg.weights, update_index);
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let drafts: Vec<(Action, [f64; 3], u64)> = (0..g)
        .map(|_| {
            let a = policy.sample(&mut rng);
            let m = [0, 1, 2].map(|c| policy.magnitudes[a[c]]);
            (a, m, rng.gen())
        })
        .collect();
    let candidates: Vec<Candidate> = drafts
        .into_par_iter()
        .map(|(action, magnitudes, seed)| {
            let svg = perturb(sample, magnitudes, &mut ChaCha8Rng::seed_from_u64(seed));
            let breakdown = verify_with(&svg, &sample.plan, vcfg, &weights, measurer).breakdown;
            Candidate {
                action,
                magnitudes,
                svg,
                logp_behavior: policy.log_prob(&action),
                breakdown,
            }
        })
        .collect();
    let rewards: Vec<f64> = candidates.iter().map(|c| c.breakdown.total).collect();
    GroupBatch {
        prompt_ref: sample.sample_id.clone(),
        advantages: group_advantages(&rewards, eps),
        ratios: vec![1.0; g],
        candidates,
        rewards,
        weights,
    }
}

/// Objective value and gradient with respect to the logits.
#[derive(Debug, Clone, PartialEq)]
pub struct Objective {
    pub surrogate: f64,
    pub kl: f64,
    pub value: f64,
    pub grad: [Vec<f64>; 3],
    pub clip_fraction: f64,
}

/// Mean clipped surrogate minus `kl_coeff` times KL to `reference`.
pub fn objective(policy: &ToyPolicy, reference: &ToyPolicy, batch: &GroupBatch, cfg: &GrpoConfig) -> Objective {
    let g = batch.candidates.len() as f64;
    let k = policy.magnitudes.len();
    let probs: Vec<Vec<f64>> = (0..3).map(|c| softmax(&policy.logits[c])).collect();
    let mut grad = [vec![0.0; k], vec![0.0; k], vec![0.0; k]];
    let mut surrogate = 0.0;
    let mut clipped = 0usize;
    for (cand, &adv) in batch.candidates.iter().zip(&batch.advantages) {
        let rho = (policy.log_prob(&cand.action) - cand.logp_behavior).exp();
        surrogate += clipped_surrogate(rho, adv, cfg.clip_eta) / g;
        if clip_active(rho, adv, cfg.clip_eta) {
            clipped += 1;
            continue;
        }
        // d(rho)/d(logit_cj) = rho * (1[j = a_c] - p_cj)
        for c in 0..3 {
            for j in 0..k {
                let onehot = if j == cand.action[c] { 1.0 } else { 0.0 };
                grad[c][j] += adv * rho * (onehot - probs[c][j]) / g;
            }
        }
    }
    let kl = policy.kl(reference);
    for c in 0..3 {
        let (lp, lq) = (log_softmax(&policy.logits[c]), log_softmax(&reference.logits[c]));
        let kl_c: f64 = probs[c]
            .iter()
            .zip(lp.iter().zip(&lq))
            .map(|(p, (a, b))| p * (a - b))
            .sum();
        for j in 0..k {
            grad[c][j] -= cfg.kl_coeff * probs[c][j] * (lp[j] - lq[j] - kl_c);
        }
    }
    Objective {
        surrogate,
        kl,
        value: surrogate - cfg.kl_coeff * kl,
        grad,
        clip_fraction: clipped as f64 / g,
    }
}

/// One gradient-ascent step; returns the new policy and the objective at the
/// old parameters.
pub fn grpo_update(
    policy: &ToyPolicy,
    reference: &ToyPolicy,
    batch: &GroupBatch,
    cfg: &GrpoConfig,
) -> Result<(ToyPolicy, Objective), GrpoError> {
    let obj = objective(policy, reference, batch, cfg);
    if !obj.grad.iter().flatten().all(|x| x.is_finite()) {
        return Err(GrpoError::NonFiniteGradient);
    }
    let mut next = policy.clone();
    for (l, g) in next.logits.iter_mut().flatten().zip(obj.grad.iter().flatten()) {
        *l += cfg.learning_rate * g;
    }
    if !next.is_finite() {
        return Err(GrpoError::NonFiniteGradient);
    }
    Ok((next, obj))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentMeans {
    pub exec: f64,
    pub fit: f64,
    pub overflow: f64,
    pub anchor_acc: f64,
    pub anchor_err: f64,
    pub text_in_box: f64,
    pub padding: f64,
    pub graph: f64,
    pub clean: f64,
}

impl ComponentMeans {
    fn of(batch: &GroupBatch) -> ComponentMeans {
        let n = batch.candidates.len() as f64;
        let mean = |f: fn(&RewardBreakdown) -> f64| batch.candidates.iter().map(|c| f(&c.breakdown)).sum::<f64>() / n;
        ComponentMeans {
            exec: mean(|b| b.exec),
            fit: mean(|b| b.fit),
            overflow: mean(|b| b.overflow),
            anchor_acc: mean(|b| b.anchor_acc),
            anchor_err: mean(|b| b.anchor_err),
            text_in_box: mean(|b| b.text_in_box),
            padding: mean(|b| b.padding),
            graph: mean(|b| b.graph),
            clean: mean(|b| b.clean),
        }
    }
}

/// One line of the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpdateRecord {
    pub seed: u64,
    pub update: u64,
    pub sample_id: String,
    pub mean_reward: f64,
    pub components: ComponentMeans,
    /// Largest clip fraction over the steps taken on this batch.
    pub clip_fraction: f64,
    pub kl: f64,
    pub effective_weights: WeightSet,
    /// Probability of magnitude zero per category after the update.
    pub p_zero: [f64; 3],
}

/// Runs `cfg.updates` updates from a uniform policy with one seed.
pub fn train(
    corpus: &[CorpusSample],
    cfg: &GrpoConfig,
    vcfg: &VerifierConfig,
    seed: u64,
    measurer: &dyn TextMeasurer,
    mut on_update: impl FnMut(&UpdateRecord),
) -> Result<(ToyPolicy, Vec<UpdateRecord>), GrpoError> {
    cfg.validate()?;
    if corpus.is_empty() {
        return Err(GrpoError::EmptyCorpus);
    }
    let reference = ToyPolicy::uniform(&cfg.magnitudes);
    let mut policy = reference.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut log = Vec::with_capacity(cfg.updates as usize);
    for u in 0..cfg.updates {
        let sample = &corpus[rng.gen_range(0..corpus.len())];
        let batch = rollout_group(&policy, sample, cfg.group_size, rng.gen(), u, vcfg, cfg.eps, measurer);
        let mut clip_fraction: f64 = 0.0;
        let mut kl = 0.0;
        for _ in 0..cfg.epochs_per_batch {
            let (next, obj) = grpo_update(&policy, &reference, &batch, cfg)?;
            clip_fraction = clip_fraction.max(obj.clip_fraction);
            kl = obj.kl;
            policy = next;
        }
        let rec = UpdateRecord {
            seed,
            update: u,
            sample_id: batch.prompt_ref.clone(),
            mean_reward: batch.rewards.iter().sum::<f64>() / batch.rewards.len() as f64,
            components: ComponentMeans::of(&batch),
            clip_fraction,
            kl,
            effective_weights: batch.weights,
            p_zero: Category::ALL.map(|c| policy.probs(c)[0]),
        };
        on_update(&rec);
        log.push(rec);
    }
    Ok((policy, log))
}

pub fn write_log_line(out: &mut impl Write, rec: &UpdateRecord) -> std::io::Result<()> {
    serde_json::to_writer(&mut *out, rec)?;
    out.write_all(b"\n")
}

/// Mean reward of the first and last `window` updates.
pub fn reward_windows(log: &[UpdateRecord], window: usize) -> Option<(f64, f64)> {
    if log.len() < window || window == 0 {
        return None;
    }
    let mean = |s: &[UpdateRecord]| s.iter().map(|r| r.mean_reward).sum::<f64>() / s.len() as f64;
    Some((mean(&log[..window]), mean(&log[log.len() - window..])))
}
