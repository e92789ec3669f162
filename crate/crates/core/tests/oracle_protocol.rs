use svgcheck::corpus::{generate_sample, FamilyKind, SplitName, SplitSpec};
use svgcheck::oracle::*;
use svgcheck::plan::Canvas;
use svgcheck::verifier::{verify, VerifierConfig};

fn fake(flags: &str) -> String {
    format!(
        "python3 {}/tests/fixtures/fake_oracle.py {flags}",
        env!("CARGO_MANIFEST_DIR")
    )
}

fn rect_request(id: &str) -> MeasureRequest {
    MeasureRequest::new(
        id,
        r#"<svg xmlns="http://www.w3.org/2000/svg"><rect x="10" y="20" width="100" height="50"/></svg>"#,
        Canvas::default(),
    )
}

#[test]
fn answers_with_matching_ids() {
    let mut c = OracleClient::spawn(&fake("")).unwrap();
    for i in 0..20 {
        let r = c.measure(&rect_request(&format!("r{i}"))).unwrap();
        assert_eq!(r.id, format!("r{i}"));
        assert_eq!(r.version, "v1");
        assert_eq!(
            r.elements[0].bbox,
            WireBox {
                x: 10.0,
                y: 20.0,
                w: 100.0,
                h: 50.0
            }
        );
    }
}

#[test]
fn self_check_passes_on_conforming_oracle() {
    let mut c = OracleClient::spawn(&fake("")).unwrap();
    let rep = oracle_check(&mut c, 100);
    assert!(rep.passed, "{:?}", rep.failures);
    assert_eq!(rep.ids_matched, 100);
    assert_eq!(rep.max_rect_error, Some(0.0));
    assert_eq!(rep.font_family.as_deref(), Some("FakeSans"));
}

#[test]
fn self_check_flags_nondeterministic_text() {
    let mut c = OracleClient::spawn(&fake("--flaky-text")).unwrap();
    let rep = oracle_check(&mut c, 9);
    assert!(!rep.passed);
    assert!(!rep.text_deterministic);
}

#[test]
fn wrong_id_is_an_error() {
    let mut c = OracleClient::spawn(&fake("--wrong-id")).unwrap();
    assert!(matches!(
        c.measure(&rect_request("a")),
        Err(OracleError::IdMismatch { .. })
    ));
    let rep = oracle_check(&mut OracleClient::spawn(&fake("--wrong-id")).unwrap(), 3);
    assert!(!rep.passed);
    assert_eq!(rep.ids_matched, 0);
}

#[test]
fn slow_oracle_times_out() {
    let mut c = OracleClient::spawn(&fake("--sleep 2")).unwrap();
    let mut req = rect_request("slow");
    req.timeout_ms = 200;
    assert!(matches!(c.measure(&req), Err(OracleError::Timeout { .. })));
    // The late answer to "slow" is skipped, not taken for this one.
    let r = c.measure(&rect_request("next")).unwrap();
    assert_eq!(r.id, "next");
}

#[test]
fn dead_oracle_is_closed() {
    let mut c = OracleClient::spawn(&fake("--die-after 1")).unwrap();
    c.measure(&rect_request("one")).unwrap();
    assert!(matches!(
        c.measure(&rect_request("two")),
        Err(OracleError::Closed) | Err(OracleError::Io(_))
    ));
}

#[test]
fn truncated_svg_reports_error() {
    let mut c = OracleClient::spawn(&fake("")).unwrap();
    let r = c
        .measure(&MeasureRequest::new("t", "<svg><rect", Canvas::default()))
        .unwrap();
    assert!(!r.ok);
    assert!(!r.error.unwrap().is_empty());
}

#[test]
fn pool_keeps_request_order() {
    let pool = OraclePool::spawn(&fake(""), 3).unwrap();
    let reqs: Vec<MeasureRequest> = (0..10).map(|i| rect_request(&format!("p{i}"))).collect();
    let out = pool.measure_batch(&reqs);
    for (i, r) in out.into_iter().enumerate() {
        assert_eq!(r.unwrap().id, format!("p{i}"));
    }
}

#[test]
fn oracle_text_boxes_reach_the_reward() {
    let mut s = generate_sample(
        FamilyKind::HorizontalPipeline,
        &SplitSpec::default_for(SplitName::Train),
        42,
    )
    .unwrap();
    s.sample_id = "s".into();
    let cfg = VerifierConfig::default();
    let builtin = verify(&s.svg, &s.plan, &cfg).breakdown;
    assert_eq!(builtin.text_in_box, 1.0);

    let mut c = OracleClient::spawn(&fake("")).unwrap();
    let v = verify_with_oracle(&mut c, "s", &s.svg, &s.plan, &cfg);
    assert_eq!(v.breakdown.exec, 1.0);
    assert_eq!(v.breakdown.anchor_acc, builtin.anchor_acc);

    // Oversized oracle boxes must show up as text violations.
    let mut c = OracleClient::spawn(&fake("--wide")).unwrap();
    let v = verify_with_oracle(&mut c, "s", &s.svg, &s.plan, &cfg);
    assert_eq!(v.breakdown.exec, 1.0);
    assert!(v.breakdown.text_in_box < 1.0);
}

#[test]
fn oracle_timeout_fails_execution() {
    let s = generate_sample(FamilyKind::StackedModules, &SplitSpec::default_for(SplitName::Train), 1).unwrap();
    let mut c = OracleClient::spawn(&fake("--die-after 0")).unwrap();
    let v = verify_with_oracle(&mut c, "s", &s.svg, &s.plan, &VerifierConfig::default());
    assert_eq!(v.breakdown.exec, 0.0);
    assert_eq!(v.breakdown.total, 0.0);
}
