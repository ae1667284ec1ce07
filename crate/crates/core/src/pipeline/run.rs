use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use super::config::{view_input_files, view_name, PipelineConfig, StageParams, CAMERA_FILE};
use super::stages::{self, AlignOutcome, BiasOutcome, NormalsOutcome, RefineOutcome, StitchOutcome, ViewMaps};
use crate::error::{Error, Result};
use crate::meshkit::{load_mesh, save_mesh};
use crate::patchwork::{segment, Segmentation};
use crate::photometrics::Camera;

pub const REPORT_FILE: &str = "report.json";
pub const TIMINGS_FILE: &str = "timings.json";
pub const SEGMENTATION_FILE: &str = "segmentation.txt";
pub const TEXTURED_FILE: &str = "textured.ply";
pub const REFINED_FILE: &str = "refined.ply";
pub const PREVIEW_FILE: &str = "preview.png";

#[derive(Debug, Clone, Serialize)]
pub struct ViewReport {
    pub name: String,
    pub align: AlignOutcome,
    pub normals: NormalsOutcome,
    pub bias: BiasOutcome,
}

#[derive(Debug, Clone, Serialize)]
pub struct SegmentReport {
    pub patches: usize,
    pub sigma: f64,
    pub adjacent_pairs: usize,
    pub overlap_vertices: usize,
}

/// Machine-readable run summary. Holds no timings so identical inputs give
/// an identical file.
#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub params: StageParams,
    pub base_vertices: usize,
    pub views: Vec<ViewReport>,
    pub segmentation: SegmentReport,
    pub stitch: StitchOutcome,
    pub refine: RefineOutcome,
    /// SHA-256 of every artifact, keyed by path relative to the output directory.
    pub outputs: BTreeMap<String, String>,
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub report: Report,
    pub timings: Vec<(String, f64)>,
}

struct Clock {
    timings: Vec<(String, f64)>,
}

impl Clock {
    /// Runs one stage, timing it and tagging any error with the stage name
    /// and a digest of its inputs.
    fn stage<T>(&mut self, name: &'static str, inputs: &[PathBuf], f: impl FnOnce() -> Result<T>) -> Result<T> {
        log::info!("stage {name}");
        let t0 = Instant::now();
        let r = f().map_err(|e| Error::Stage {
            stage: name,
            digest: stages::digest_files(inputs),
            source: Box::new(e),
        });
        self.timings.push((name.to_string(), t0.elapsed().as_secs_f64()));
        r
    }
}

fn collect_outputs(root: &Path) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        let entries = fs::read_dir(&dir).map_err(|e| Error::io(&dir, e))?;
        for entry in entries {
            let path = entry.map_err(|e| Error::io(&dir, e))?.path();
            if path.is_dir() {
                stack.push(path);
                continue;
            }
            let rel = path.strip_prefix(root).unwrap().to_string_lossy().replace('\\', "/");
            if rel == REPORT_FILE || rel == TIMINGS_FILE {
                continue;
            }
            out.insert(rel, stages::file_sha256(&path)?);
        }
    }
    Ok(out)
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("report serializes");
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

/// Runs every stage on validated inputs and writes all artifacts, the
/// report and the timings under the configured output directory.
/// Artifacts written before a failing stage are kept.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<RunSummary> {
    cfg.validate()?;
    let p = &cfg.params;
    let out = &cfg.output;
    stages::create_dir(out)?;
    let mut clock = Clock { timings: Vec::new() };

    let base = clock.stage("load", &[cfg.base_mesh.clone()], || load_mesh(&cfg.base_mesh))?;

    let mut view_dirs = Vec::new();
    let mut aligns = Vec::new();
    for v in &cfg.views {
        let dst = out.join("views").join(view_name(v));
        let a = clock.stage("align", &view_input_files(v), || stages::align_view(v, &dst, p.align_iterations))?;
        aligns.push(a);
        view_dirs.push(dst);
    }
    let mut normals = Vec::new();
    for d in &view_dirs {
        normals.push(clock.stage("normals", &view_input_files(d), || stages::estimate_view_normals(d))?);
    }
    let mut biases = Vec::new();
    for d in &view_dirs {
        let inputs = vec![
            d.join(CAMERA_FILE),
            d.join(stages::DIFFUSE_NORMALS_FILE),
            d.join(stages::SPECULAR_NORMALS_FILE),
            cfg.base_mesh.clone(),
        ];
        biases.push(clock.stage("bias", &inputs, || stages::bias_correct_view(d, &base, p.sigma_low))?);
    }

    let seg_path = out.join(SEGMENTATION_FILE);
    let seg: Segmentation = clock.stage("segment", &[cfg.base_mesh.clone()], || {
        let s = segment(&base, p.patches, p.sigma, p.seed)?;
        s.save(&seg_path)?;
        Ok(s)
    })?;

    let mut stitch_inputs: Vec<PathBuf> = view_dirs.iter().flat_map(|d| ViewMaps::files(d)).collect();
    stitch_inputs.push(seg_path.clone());
    let stitched = clock.stage("stitch", &stitch_inputs, || {
        let maps = view_dirs.iter().map(|d| ViewMaps::load(d)).collect::<Result<Vec<_>>>()?;
        let s = stages::stitch_views(&base, &seg, &maps, p.lambda, p.fresnel_threshold_deg)?;
        save_mesh(&s.mesh, out.join(TEXTURED_FILE))?;
        Ok(s)
    })?;

    let (refined, refine) = clock.stage("refine", &[out.join(TEXTURED_FILE)], || {
        let targets = stages::targets_from_mesh(&stitched.mesh, p.normal_source)?;
        let (m, r) = stages::refine_views(&stitched.mesh, &targets, p.lambda_screen, p.refine_rounds)?;
        save_mesh(&m, out.join(REFINED_FILE))?;
        Ok((m, r))
    })?;

    if p.preview {
        let cam_path = view_dirs[0].join(CAMERA_FILE);
        clock.stage("preview", &[out.join(REFINED_FILE), cam_path.clone()], || {
            let cam = Camera::load(&cam_path)?;
            stages::render_view(&refined, &cam, &out.join(PREVIEW_FILE)).map(|_| ())
        })?;
    }

    let views = cfg
        .views
        .iter()
        .zip(aligns)
        .zip(normals)
        .zip(biases)
        .map(|(((v, align), normals), bias)| ViewReport {
            name: view_name(v),
            align,
            normals,
            bias,
        })
        .collect();
    let grown: usize = seg.overlaps.values().map(Vec::len).sum();
    let report = Report {
        params: p.clone(),
        base_vertices: base.num_vertices(),
        views,
        segmentation: SegmentReport {
            patches: seg.num_patches(),
            sigma: seg.sigma,
            adjacent_pairs: seg.adjacency.len(),
            overlap_vertices: grown,
        },
        stitch: stitched,
        refine,
        outputs: collect_outputs(out)?,
    };
    write_json(&out.join(REPORT_FILE), &report)?;
    let timings: BTreeMap<String, f64> = clock.timings.iter().fold(BTreeMap::new(), |mut m, (k, t)| {
        *m.entry(k.clone()).or_insert(0.0) += t;
        m
    });
    write_json(&out.join(TIMINGS_FILE), &timings)?;
    Ok(RunSummary {
        report,
        timings: clock.timings,
    })
}
