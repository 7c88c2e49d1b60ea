mod common;

use std::collections::BTreeMap;

use topolip_core::pipeline::{
    layer_diagrams, load_trace, run_pipeline, LayerFormat, LayerTrace, PipelineConfig,
};
use topolip_core::{Error, EssentialPolicy, HomCombine, PointCloud};

use common::*;

#[test]
fn csv_and_f64_traces_round_trip() {
    let trace = staircase_trace();
    for format in [LayerFormat::Csv, LayerFormat::F64] {
        let dir = tempfile::tempdir().unwrap();
        let manifest = trace.write(dir.path(), format).unwrap();
        assert_eq!(load_trace(&manifest).unwrap(), trace);
        assert_eq!(load_trace(dir.path()).unwrap(), trace);
    }
}

#[test]
fn csv_and_f64_give_identical_reports() {
    let mut rng = rng(3);
    let layers = (0..5)
        .map(|k| (format!("layer{k}"), random_cloud(&mut rng, 30, 3 + k)))
        .collect();
    let trace = LayerTrace::new("random", layers, BTreeMap::new()).unwrap();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let cfg = PipelineConfig { max_points: 20, seed: 5, ..PipelineConfig::default() };
    let ra = run_pipeline(&trace.write(a.path(), LayerFormat::Csv).unwrap(), &cfg).unwrap();
    let rb = run_pipeline(&trace.write(b.path(), LayerFormat::F64).unwrap(), &cfg).unwrap();
    assert_eq!(ra.to_json().unwrap(), rb.to_json().unwrap());
    assert_eq!(ra.rates.len(), 3);
    assert!(ra.topolip.is_finite());
    assert_eq!(ra.normalized_curve.len(), 101);
}

#[test]
fn every_option_combination_runs() {
    let trace = staircase_trace();
    for essential in [EssentialPolicy::Drop, EssentialPolicy::Cap] {
        for combine in [HomCombine::Sum, HomCombine::Max] {
            for p in [1.0, 2.0] {
                let cfg = PipelineConfig { p, essential, combine, ..PipelineConfig::default() };
                let dir = tempfile::tempdir().unwrap();
                let r = run_pipeline(&trace.write(dir.path(), LayerFormat::Csv).unwrap(), &cfg).unwrap();
                assert_eq!(r.distances.len(), 3);
            }
        }
    }
}

#[test]
fn equal_size_layers_share_subsample_rows() {
    let mut rng = rng(8);
    let base = random_cloud(&mut rng, 50, 2);
    let shifted = base.map_points(|p| vec![p[0] + 5.0, p[1] - 1.0]).unwrap();
    let trace = LayerTrace::new(
        "shift",
        vec![("a".into(), base), ("b".into(), shifted)],
        BTreeMap::new(),
    )
    .unwrap();
    let sets = layer_diagrams(&trace, 16, 77, 1, None).unwrap();
    // same rows, rigidly moved: diagrams agree up to rounding
    for (x, y) in sets[0].iter().zip(&sets[1]) {
        let (px, py) = (pairs_of(x), pairs_of(y));
        assert_eq!(px.len(), py.len());
        for (a, b) in px.iter().zip(&py) {
            assert!((a.0 - b.0).abs() < 1e-9);
            assert!(a.1 == b.1 || (a.1 - b.1).abs() < 1e-9);
        }
    }
}

#[test]
fn ingestion_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(load_trace(dir.path()), Err(Error::Io { .. })));

    let manifest = staircase_trace().write(dir.path(), LayerFormat::F64).unwrap();
    let text = std::fs::read_to_string(&manifest).unwrap();
    std::fs::write(&manifest, text.replacen("\"rows\": 2", "\"rows\": 3", 1)).unwrap();
    match load_trace(dir.path()) {
        Err(Error::Ingestion { message, .. }) => assert!(message.contains("shape mismatch"), "{message}"),
        other => panic!("{other:?}"),
    }

    let one = tempfile::tempdir().unwrap();
    let single = LayerTrace {
        model_name: "one".into(),
        layers: vec![topolip_core::pipeline::Layer {
            name: "only".into(),
            cloud: PointCloud::from_points(&[[0.0]]).unwrap(),
        }],
        meta: BTreeMap::new(),
    };
    single.write(one.path(), LayerFormat::Csv).unwrap();
    match load_trace(one.path()) {
        Err(Error::Ingestion { message, .. }) => assert!(message.contains("insufficient layers")),
        other => panic!("{other:?}"),
    }

    std::fs::write(one.path().join("manifest.json"), "{not json").unwrap();
    assert!(matches!(load_trace(one.path()), Err(Error::Ingestion { .. })));
}

#[test]
fn missing_layer_file_is_ingestion() {
    let dir = tempfile::tempdir().unwrap();
    staircase_trace().write(dir.path(), LayerFormat::Csv).unwrap();
    std::fs::remove_file(dir.path().join("001_block1.csv")).unwrap();
    assert!(matches!(load_trace(dir.path()), Err(Error::Ingestion { .. })));
}
