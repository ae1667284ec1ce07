//! End-to-end orchestration: configuration, per-stage file-based steps,
//! the full run and the synthetic dataset writer.

mod config;
mod dataset;
mod run;
pub mod stages;

pub use config::{view_input_files, view_name, NormalSource, PipelineConfig, StageParams, CAMERA_FILE};
pub use dataset::{
    build_scene, write_dataset, DatasetSummary, SceneKind, BASE_MESH_FILE, CONFIG_FILE, GROUND_TRUTH_FILE,
    MULTIVIEW_FRAME,
};
pub use run::{
    run_pipeline, Report, RunSummary, PREVIEW_FILE, REFINED_FILE, REPORT_FILE, SEGMENTATION_FILE, TEXTURED_FILE,
    TIMINGS_FILE,
};
