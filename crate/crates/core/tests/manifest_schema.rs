use std::path::Path;

use cs3_core::cascade::run_pipeline;
use cs3_core::manifest::{build_backend, export_scene, gt_manifest_path, GroundTruth, PipelineConfig, ResultManifest};
use cs3_core::synthgen::{generate, SceneParams};
use serde_json::Value;

fn schema(name: &str) -> jsonschema::Validator {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../docs/schema").join(name);
    let v: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    jsonschema::validator_for(&v).unwrap()
}

fn assert_valid(v: &jsonschema::Validator, doc: &Value) {
    let errors: Vec<String> = v.iter_errors(doc).map(|e| format!("{} at {}", e, e.instance_path)).collect();
    assert!(errors.is_empty(), "{errors:#?}");
}

#[test]
fn default_config_matches_schema() {
    let doc: Value = serde_json::from_str(&PipelineConfig::default().to_json()).unwrap();
    assert_valid(&schema("config.schema.json"), &doc);
    assert!(!schema("config.schema.json").is_valid(&serde_json::json!({"workers": 0})));
    assert!(!schema("config.schema.json").is_valid(&serde_json::json!({"unknown": 1})));
}

#[test]
fn manifests_match_schema() {
    let dir = tempfile::tempdir().unwrap();
    let result_schema = schema("result.schema.json");
    let gt_schema = schema("gt.schema.json");
    let cfg = PipelineConfig::default();
    for seed in 0..5 {
        let scene = generate(&SceneParams { n_sperm: 1 + seed as usize % 5, overlap_bias: 0.7, ..Default::default() }, seed).unwrap();
        let stem = format!("scene_{seed}");
        export_scene(&scene, dir.path(), &stem).unwrap();
        let gt: Value = serde_json::from_str(&std::fs::read_to_string(gt_manifest_path(dir.path(), &stem)).unwrap()).unwrap();
        assert_valid(&gt_schema, &gt);

        let truth = GroundTruth { width: 720, height: 540, instances: scene.instances.clone() };
        let backend = build_backend(&cfg.backend, Some(&truth)).unwrap();
        let state = run_pipeline(&scene.image, backend.as_ref(), &cfg.stages()).unwrap();
        let manifest = ResultManifest::from_state(&format!("{stem}.png"), &state, backend.descriptor(), &cfg);
        let doc: Value = serde_json::from_str(&manifest.to_json()).unwrap();
        assert_valid(&result_schema, &doc);
    }
}

#[test]
fn schema_rejects_broken_manifest() {
    let mut doc: Value = serde_json::from_str(
        r#"{"schema": 1, "image": "a.png", "width": 4, "height": 4, "seed": 0,
            "params": {}, "instances": []}"#,
    )
    .unwrap();
    assert!(!schema("gt.schema.json").is_valid(&doc));
    doc["schema"] = Value::from(2);
    assert!(!schema("gt.schema.json").is_valid(&doc));
}
