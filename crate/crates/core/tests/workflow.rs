use wst_core::config::RunConfig;
use wst_core::storage::{load_manifest, save_model, write_frame, write_manifest, Manifest, MANIFEST_SCHEMA};
use wst_core::synthgen::class_name;
use wst_core::workflow::{classify_path, evaluate, generate, stream, train, transform_for, StreamOptions};
use wst_core::{Error, SignalFrame};

fn small_config() -> RunConfig {
    RunConfig::from_json(
        r#"{"profile": "cm40-256", "k": 3, "seed": 11,
            "synth": {"classes": 3, "samples_per_class": 6}}"#,
    )
    .unwrap()
}

#[test]
fn generate_train_evaluate_classify() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config();
    let summary = generate(&cfg, dir.path()).unwrap();
    assert_eq!(summary.frames, 18);
    assert_eq!(summary.class_counts, vec![6, 6, 6]);

    let again = tempfile::tempdir().unwrap();
    assert_eq!(
        generate(&cfg, again.path()).unwrap().manifest_digest,
        summary.manifest_digest
    );

    let (model, ts) = train(&cfg, &summary.manifest).unwrap();
    assert_eq!(ts.projected_dim, 2);
    assert_eq!(ts.class_names, (0..3).map(class_name).collect::<Vec<_>>());
    let (model2, _) = train(&cfg, &summary.manifest).unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    save_model(&model, &a).unwrap();
    save_model(&model2, &b).unwrap();
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());

    let report = evaluate(&cfg, &summary.manifest).unwrap();
    assert_eq!(report.k, 3);
    for row in &report.percent {
        assert!((row.iter().sum::<f64>() - 100.0).abs() < 1e-9);
    }

    let transform = transform_for(&cfg.filter_config().unwrap()).unwrap();
    let loaded = load_manifest(&summary.manifest).unwrap();
    let first = &loaded.manifest.entries[0];
    let (decision, timing) = classify_path(&model, &transform, &loaded.frame_path(first)).unwrap();
    assert_eq!(decision.class_name, first.class_name);
    assert!(timing.total >= timing.max_stage());

    let zero = dir.path().join("zero.wstf");
    write_frame(&SignalFrame::zeros(40, 256, "cm40-256").unwrap(), &zero).unwrap();
    assert!(classify_path(&model, &transform, &zero).is_ok());
    let wrong = dir.path().join("wrong.wstf");
    write_frame(&SignalFrame::zeros(400, 256, "mm400-256").unwrap(), &wrong).unwrap();
    assert!(matches!(
        classify_path(&model, &transform, &wrong),
        Err(Error::DimensionMismatch(_))
    ));

    let report = stream(
        &model,
        &transform,
        &loaded,
        StreamOptions {
            rate_hz: 200.0,
            duration_s: None,
            pace: false,
        },
    )
    .unwrap();
    assert_eq!(report.frames, 18);
    assert_eq!(report.timing.len(), 18);
    assert_eq!(report.overruns, report.timing.overruns(report.period_ms));
    let totals = report.timing.stage_values("total");
    let median = wst_core::timing::median(&totals).unwrap();
    assert_eq!(report.timing.summary("total").unwrap().median, median);
}

#[test]
fn empty_manifest_cannot_train() {
    let dir = tempfile::tempdir().unwrap();
    let m = Manifest {
        schema: MANIFEST_SCHEMA,
        class_names: vec!["a".into(), "b".into()],
        profile: None,
        seed: None,
        entries: vec![],
    };
    let path = dir.path().join("m.json");
    write_manifest(&m, &path).unwrap();
    assert!(matches!(train(&small_config(), &path), Err(Error::TooFewSamples(_))));
}
