//! Corpus builds: split sizing, seed derivation, file layout and manifest.

use super::{generate_sample, CorpusError, CorpusSample, CorruptionTag, FamilyKind, GeoMetadata, SplitName, SplitSpec};
use crate::plan::{deserialize_plan, serialize_plan, Canvas};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusConfig {
    /// Multiplier on the full-scale split counts.
    pub scale: f64,
    pub seed: u64,
    pub splits: Vec<SplitSpec>,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        CorpusConfig {
            scale: 1.0,
            seed: 13,
            splits: SplitName::ALL.iter().map(|&s| SplitSpec::default_for(s)).collect(),
        }
    }
}

impl CorpusConfig {
    pub fn from_json(text: &str) -> Result<CorpusConfig, CorpusError> {
        let cfg: CorpusConfig = serde_json::from_str(text).map_err(|e| CorpusError::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CorpusError> {
        if !(self.scale.is_finite() && self.scale > 0.0) {
            return Err(CorpusError::InvalidConfig(format!(
                "scale must be positive, got {}",
                self.scale
            )));
        }
        if self.splits.is_empty() {
            return Err(CorpusError::InvalidConfig("no splits configured".into()));
        }
        for (i, s) in self.splits.iter().enumerate() {
            s.validate()?;
            if self.splits[..i].iter().any(|o| o.name == s.name) {
                return Err(CorpusError::InvalidConfig(format!("split {} listed twice", s.name)));
            }
        }
        Ok(())
    }

    /// Scaled counts. Counts are multiples of their greatest common divisor
    /// and that unit is scaled as a whole, so ratios hold at every scale.
    pub fn scaled_counts(&self) -> Vec<usize> {
        let unit = self.splits.iter().map(|s| s.count).fold(0, gcd);
        if unit == 0 {
            return vec![0; self.splits.len()];
        }
        let scaled_unit = ((unit as f64 * self.scale).round() as usize).max(1);
        self.splits.iter().map(|s| s.count / unit * scaled_unit).collect()
    }
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Deterministic child seed for a labelled stream.
pub fn derive_seed(parent: u64, label: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(parent.to_le_bytes());
    h.update(label.as_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("32-byte digest"))
}

pub fn sample_id(split: SplitName, index: usize) -> String {
    format!("{split}-{index:06}")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitStats {
    pub nodes_min: usize,
    pub nodes_max: usize,
    pub nodes_mean: f64,
    pub edges_min: usize,
    pub edges_max: usize,
    pub edges_mean: f64,
    pub text_boxes_mean: f64,
    pub branches_mean: f64,
    pub groups_mean: f64,
}

pub fn split_stats(samples: &[CorpusSample]) -> Option<SplitStats> {
    if samples.is_empty() {
        return None;
    }
    let n = samples.len() as f64;
    let st = || samples.iter().map(|s| s.metadata.stats);
    let mean = |f: fn(&super::SampleStats) -> usize| st().map(|s| f(&s) as f64).sum::<f64>() / n;
    Some(SplitStats {
        nodes_min: st().map(|s| s.nodes).min()?,
        nodes_max: st().map(|s| s.nodes).max()?,
        nodes_mean: mean(|s| s.nodes),
        edges_min: st().map(|s| s.edges).min()?,
        edges_max: st().map(|s| s.edges).max()?,
        edges_mean: mean(|s| s.edges),
        text_boxes_mean: mean(|s| s.text_boxes),
        branches_mean: mean(|s| s.branches),
        groups_mean: mean(|s| s.groups),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitRecord {
    pub name: SplitName,
    pub count: usize,
    pub seed: u64,
    pub node_range: (usize, usize),
    pub edge_range: (usize, usize),
    pub canvas_options: Vec<Canvas>,
    pub templates: Vec<u8>,
    pub families: BTreeMap<FamilyKind, usize>,
    pub stats: Option<SplitStats>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub version: u32,
    pub seed: u64,
    pub scale: f64,
    pub splits: Vec<SplitRecord>,
    /// sha256 of every written file, keyed by path relative to the root.
    pub checksums: BTreeMap<String, String>,
}

impl CorpusManifest {
    pub fn load(root: &Path) -> Result<CorpusManifest, CorpusError> {
        let path = root.join(MANIFEST_FILE);
        let text = read(&path)?;
        serde_json::from_str(&text).map_err(|e| malformed(&path, e))
    }

    pub fn split(&self, name: SplitName) -> Option<&SplitRecord> {
        self.splits.iter().find(|s| s.name == name)
    }
}

/// Generates `count` samples of `spec` in memory, families in rotation.
pub fn generate_split(spec: &SplitSpec, split_seed: u64, count: usize) -> Result<Vec<CorpusSample>, CorpusError> {
    (0..count)
        .into_par_iter()
        .map(|i| {
            let family = FamilyKind::ALL[i % FamilyKind::ALL.len()];
            let mut s = generate_sample(family, spec, derive_seed(split_seed, &i.to_string()))?;
            s.sample_id = sample_id(spec.name, i);
            Ok(s)
        })
        .collect()
}

/// Stored next to the SVG as `.meta`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct MetaFile {
    sample_id: String,
    family: FamilyKind,
    seed: u64,
    corruption: Option<CorruptionTag>,
    metadata: GeoMetadata,
}

fn io_err(path: &Path, source: std::io::Error) -> CorpusError {
    CorpusError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn malformed(path: &Path, e: impl std::fmt::Display) -> CorpusError {
    CorpusError::Malformed {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

fn read(path: &Path) -> Result<String, CorpusError> {
    fs::read_to_string(path).map_err(|e| io_err(path, e))
}

/// Writes via a sibling temp file and rename so readers never see partial
/// files.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), CorpusError> {
    let tmp = path.with_extension(format!(
        "{}.tmp",
        path.extension().and_then(|e| e.to_str()).unwrap_or("")
    ));
    fs::write(&tmp, contents).map_err(|e| io_err(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| io_err(path, e))
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// The four files of a sample, as (file name, contents).
pub fn sample_files(sample: &CorpusSample) -> Result<Vec<(String, String)>, CorpusError> {
    let meta = MetaFile {
        sample_id: sample.sample_id.clone(),
        family: sample.family,
        seed: sample.seed,
        corruption: sample.corruption.clone(),
        metadata: sample.metadata.clone(),
    };
    let meta = serde_json::to_string_pretty(&meta).map_err(|e| CorpusError::Malformed {
        path: sample.sample_id.clone(),
        message: e.to_string(),
    })?;
    let id = &sample.sample_id;
    Ok(vec![
        (format!("{id}.prompt.txt"), sample.prompt.clone()),
        (format!("{id}.plan"), serialize_plan(&sample.plan)),
        (format!("{id}.svg"), sample.svg.clone()),
        (format!("{id}.meta"), meta),
    ])
}

/// Writes one sample into `dir`, returning (file name, sha256) pairs.
pub fn write_sample(dir: &Path, sample: &CorpusSample) -> Result<Vec<(String, String)>, CorpusError> {
    sample_files(sample)?
        .into_iter()
        .map(|(name, body)| {
            write_atomic(&dir.join(&name), body.as_bytes())?;
            Ok((name, sha256_hex(body.as_bytes())))
        })
        .collect()
}

/// Generates every configured split under `out` and writes the manifest.
pub fn build_corpus(cfg: &CorpusConfig, out: &Path) -> Result<CorpusManifest, CorpusError> {
    cfg.validate()?;
    fs::create_dir_all(out).map_err(|e| io_err(out, e))?;
    let mut splits = Vec::new();
    let mut checksums = BTreeMap::new();
    for (spec, count) in cfg.splits.iter().zip(cfg.scaled_counts()) {
        let split_seed = derive_seed(cfg.seed, spec.name.as_str());
        let dir = out.join(spec.name.as_str());
        fs::create_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
        let samples = generate_split(spec, split_seed, count)?;
        let written: Vec<Vec<(String, String)>> = samples
            .par_iter()
            .map(|s| write_sample(&dir, s))
            .collect::<Result<_, _>>()?;
        for (name, sum) in written.into_iter().flatten() {
            checksums.insert(format!("{}/{name}", spec.name), sum);
        }
        let mut families = BTreeMap::new();
        for s in &samples {
            *families.entry(s.family).or_insert(0) += 1;
        }
        splits.push(SplitRecord {
            name: spec.name,
            count,
            seed: split_seed,
            node_range: spec.node_range,
            edge_range: spec.edge_range,
            canvas_options: spec.canvas_options.clone(),
            templates: spec.templates.clone(),
            families,
            stats: split_stats(&samples),
        });
    }
    let manifest = CorpusManifest {
        version: MANIFEST_VERSION,
        seed: cfg.seed,
        scale: cfg.scale,
        splits,
        checksums,
    };
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| malformed(out, e))?;
    write_atomic(&out.join(MANIFEST_FILE), text.as_bytes())?;
    Ok(manifest)
}

/// Reads the sample whose files in `dir` share the stem `id`.
pub fn load_sample(dir: &Path, id: &str) -> Result<CorpusSample, CorpusError> {
    let path = |ext: &str| dir.join(format!("{id}.{ext}"));
    let meta_path = path("meta");
    let meta: MetaFile = serde_json::from_str(&read(&meta_path)?).map_err(|e| malformed(&meta_path, e))?;
    let plan_path = path("plan");
    let plan = deserialize_plan(&read(&plan_path)?).map_err(|e| malformed(&plan_path, e))?;
    Ok(CorpusSample {
        sample_id: meta.sample_id,
        prompt: read(&path("prompt.txt"))?,
        plan,
        svg: read(&path("svg"))?,
        metadata: meta.metadata,
        corruption: meta.corruption,
        family: meta.family,
        seed: meta.seed,
    })
}

/// Sample ids in `dir`, sorted.
pub fn split_ids(dir: &Path) -> Result<Vec<String>, CorpusError> {
    let mut ids: Vec<String> = fs::read_dir(dir)
        .map_err(|e| io_err(dir, e))?
        .filter_map(|e| e.ok())
        .filter_map(|e| {
            e.file_name()
                .to_str()
                .and_then(|n| n.strip_suffix(".meta"))
                .map(str::to_owned)
        })
        .collect();
    ids.sort();
    Ok(ids)
}

pub fn load_split(dir: &Path) -> Result<Vec<CorpusSample>, CorpusError> {
    split_ids(dir)?.par_iter().map(|id| load_sample(dir, id)).collect()
}

/// Directory of `split` under a corpus root.
pub fn split_dir(root: &Path, split: SplitName) -> PathBuf {
    root.join(split.as_str())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_keep_ratios() {
        let mut cfg = CorpusConfig::default();
        for (scale, want) in [
            (0.01, [480, 40, 40, 20, 20]),
            (1.0, [48_000, 4_000, 4_000, 2_000, 2_000]),
            (0.1, [4_800, 400, 400, 200, 200]),
            (0.0001, [24, 2, 2, 1, 1]),
        ] {
            cfg.scale = scale;
            assert_eq!(cfg.scaled_counts(), want.to_vec(), "scale {scale}");
        }
    }

    #[test]
    fn derived_seeds_differ() {
        let a = derive_seed(13, "train");
        assert_ne!(a, derive_seed(13, "validation"));
        assert_ne!(a, derive_seed(21, "train"));
        assert_eq!(a, derive_seed(13, "train"));
    }

    #[test]
    fn write_and_reload() {
        let dir = tempfile::tempdir().unwrap();
        let spec = SplitSpec::default_for(SplitName::Validation);
        let samples = generate_split(&spec, 5, 6).unwrap();
        for s in &samples {
            write_sample(dir.path(), s).unwrap();
        }
        let back = load_split(dir.path()).unwrap();
        assert_eq!(back, samples);
    }
}
