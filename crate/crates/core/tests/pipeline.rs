use std::fs;

use facefuse::pipeline::{run_pipeline, write_dataset, PipelineConfig, SceneKind, CONFIG_FILE, REPORT_FILE};
use facefuse::synthstage::LightMode;
use facefuse::Error;

fn small_config(dir: &std::path::Path) -> PipelineConfig {
    let mut cfg = PipelineConfig::load(dir.join(CONFIG_FILE)).unwrap();
    cfg.params.patches = 24;
    cfg
}

#[test]
fn head_dataset_runs_end_to_end() {
    let tmp = tempfile::tempdir().unwrap();
    let summary = write_dataset(SceneKind::Head, LightMode::Continuous, 96, tmp.path()).unwrap();
    assert_eq!(summary.cameras, 24);
    assert_eq!(summary.images, 63);
    let cfg = small_config(tmp.path());
    let run = run_pipeline(&cfg).unwrap();
    assert_eq!(run.report.stitch.fresnel.unsafe_patches, 0);
    assert_eq!(run.report.views.len(), 3);
    for name in ["textured.ply", "refined.ply", "preview.png", "segmentation.txt", REPORT_FILE, "timings.json"] {
        assert!(cfg.output.join(name).is_file(), "{name}");
    }
    eprintln!("{:#?}", run.timings);
}

#[test]
fn missing_camera_fails_validation_before_compute() {
    let tmp = tempfile::tempdir().unwrap();
    write_dataset(SceneKind::Sphere, LightMode::Continuous, 32, tmp.path()).unwrap();
    fs::remove_file(tmp.path().join("views/left/camera.txt")).unwrap();
    let cfg = small_config(tmp.path());
    let err = run_pipeline(&cfg).unwrap_err();
    assert!(matches!(err, Error::Config(_)), "{err}");
    assert_eq!(err.exit_code(), 2);
    assert!(!cfg.output.exists());
}
