use std::collections::HashSet;
use svgcheck::corpus::build::derive_seed;
use svgcheck::corpus::{
    corrupt_sample, generate_split, split_stats, CorpusConfig, CorpusSample, CorruptionKind, CorruptionTag, SplitName,
    SplitSpec,
};
use svgcheck::eval::{aggregate, evaluate_pair, PredictionPair};
use svgcheck::text::builtin_font;
use svgcheck::verifier::{verify, VerifierConfig};

fn split(name: SplitName, n: usize) -> Vec<CorpusSample> {
    generate_split(&SplitSpec::default_for(name), derive_seed(13, name.as_str()), n).unwrap()
}

#[test]
fn held_out_templates_never_appear_in_training() {
    let train: HashSet<u8> = split(SplitName::Train, 300)
        .iter()
        .map(|s| s.metadata.template)
        .collect();
    let held: HashSet<u8> = split(SplitName::TemplateHeldOut, 60)
        .iter()
        .map(|s| s.metadata.template)
        .collect();
    assert!(train.is_disjoint(&held), "{train:?} vs {held:?}");
}

#[test]
fn splits_do_not_share_drawings() {
    let a: HashSet<String> = split(SplitName::Train, 300).into_iter().map(|s| s.svg).collect();
    for other in [SplitName::Validation, SplitName::IidTest] {
        let dup = split(other, 60).into_iter().filter(|s| a.contains(&s.svg)).count();
        assert_eq!(dup, 0, "{other} repeats training drawings");
    }
}

#[test]
fn complexity_split_is_larger() {
    let train = split_stats(&split(SplitName::Train, 300)).unwrap();
    let hard = split_stats(&split(SplitName::ComplexityHeldOut, 120)).unwrap();
    assert!(hard.nodes_mean > train.nodes_mean + 2.0);
    assert!(hard.edges_mean > train.edges_mean + 3.0);
    assert!(hard.nodes_min >= 6 && hard.nodes_max <= 10);
    assert!(hard.edges_min >= 6 && hard.edges_max <= 13);
}

#[test]
fn canvas_options_respected() {
    for s in split(SplitName::ComplexityHeldOut, 60) {
        let c = s.plan.canvas;
        assert!([(800.0, 600.0), (1000.0, 700.0)].contains(&(c.width, c.height)));
    }
}

#[test]
fn rewards_stable_under_eps() {
    let tight = VerifierConfig {
        eps: 1e-12,
        ..VerifierConfig::default()
    };
    let base = VerifierConfig::default();
    for s in split(SplitName::IidTest, 24) {
        let tag = CorruptionTag::for_sample(&s, CorruptionKind::CanvasOverflow, 30.0).unwrap();
        let bad = corrupt_sample(&s, &tag, 3).unwrap();
        for svg in [&s.svg, &bad.svg] {
            let a = verify(svg, &s.plan, &base).breakdown.total;
            let b = verify(svg, &s.plan, &tight).breakdown.total;
            assert!((a - b).abs() < 1e-6, "{a} vs {b}");
        }
    }
}

#[test]
fn aggregation_ignores_record_order() {
    let cfg = VerifierConfig::default();
    let mut recs: Vec<_> = split(SplitName::IidTest, 30)
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let kind = CorruptionKind::ALL[i % 4];
            let svg = match CorruptionTag::for_sample(s, kind, 10.0 + i as f64) {
                Some(tag) if i % 3 != 0 => corrupt_sample(s, &tag, i as u64).unwrap().svg,
                _ => s.svg.clone(),
            };
            let pair = PredictionPair {
                sample_id: s.sample_id.clone(),
                reference: s.clone(),
                candidate_svg: svg,
            };
            evaluate_pair(&pair, &cfg, builtin_font()).unwrap()
        })
        .collect();
    let a = aggregate(&recs).unwrap();
    recs.reverse();
    let b = aggregate(&recs).unwrap();
    for (x, y) in a.values().iter().zip(b.values()) {
        match (x, y) {
            (Some(x), Some(y)) => assert!((x - y).abs() < 1e-9),
            (x, y) => assert_eq!(*x, y),
        }
    }
    assert!(a.aacc < 100.0 && a.gfr < 100.0);
}

#[test]
fn generation_is_seed_deterministic() {
    let cfg = CorpusConfig {
        scale: 0.001,
        ..CorpusConfig::default()
    };
    let spec = &cfg.splits[0];
    let a = generate_split(spec, 99, 12).unwrap();
    let b = generate_split(spec, 99, 12).unwrap();
    assert_eq!(
        a.iter().map(|s| &s.svg).collect::<Vec<_>>(),
        b.iter().map(|s| &s.svg).collect::<Vec<_>>()
    );
    let c = generate_split(spec, 100, 12).unwrap();
    assert_ne!(a[0].svg, c[0].svg);
}
