use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;

use super::config::{PipelineConfig, StageParams, CAMERA_FILE};
use super::stages::create_dir;
use crate::error::{Error, Result};
use crate::meshkit::{save_mesh, Vec3};
use crate::synthstage::{
    head_material, head_surface, make_rigged_scene, render_gradient_set, render_ground_truth, LightMode, LightRig,
    Reflectance, Surface, TestHead,
};

pub const CONFIG_FILE: &str = "pipeline.toml";
pub const BASE_MESH_FILE: &str = "base_mesh.ply";
pub const GROUND_TRUTH_FILE: &str = "truth/ground_truth.ply";
pub const MULTIVIEW_FRAME: &str = "frame.pfm";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SceneKind {
    Sphere,
    Bumpy,
    Head,
}

impl FromStr for SceneKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sphere" => Ok(SceneKind::Sphere),
            "bumpy" => Ok(SceneKind::Bumpy),
            "head" => Ok(SceneKind::Head),
            other => Err(Error::Argument(format!("unknown scene `{other}`"))),
        }
    }
}

impl fmt::Display for SceneKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SceneKind::Sphere => "sphere",
            SceneKind::Bumpy => "bumpy",
            SceneKind::Head => "head",
        })
    }
}

pub fn build_scene(kind: SceneKind, resolution: usize) -> Result<TestHead> {
    let surface = match kind {
        SceneKind::Head => head_surface(),
        SceneKind::Sphere => Surface::Sphere {
            center: Vec3::zeros(),
            radius: 1.0,
        },
        SceneKind::Bumpy => Surface::Bumpy {
            center: Vec3::zeros(),
            radius: 1.0,
            amplitude: 0.03,
            frequency: 5.0,
        },
    };
    make_rigged_scene(surface, head_material(), resolution)
}

#[derive(Debug, Clone, Serialize)]
pub struct DatasetSummary {
    pub scene: String,
    pub mode: String,
    pub cameras: usize,
    pub photometric_views: Vec<PathBuf>,
    pub images: usize,
    pub base_vertices: usize,
    pub ground_truth_vertices: usize,
}

/// Writes a complete synthetic capture: per pose the 14 photometric images
/// (7 conditions, 2 polarizations) of its photometric camera and one
/// uniformly lit frame per multiview camera, plus cameras, ground truth,
/// the jittered base mesh and a ready-to-run `pipeline.toml`.
pub fn write_dataset(kind: SceneKind, mode: LightMode, resolution: usize, out: &Path) -> Result<DatasetSummary> {
    let head = build_scene(kind, resolution)?;
    let rig = LightRig::new(mode);
    create_dir(&out.join("truth"))?;
    save_mesh(&head.base_mesh, out.join(BASE_MESH_FILE))?;
    save_mesh(&head.ground_truth, out.join(GROUND_TRUTH_FILE))?;

    let mut images = 0;
    let mut views = Vec::new();
    let mut multiview_index = 0;
    for rc in &head.rig {
        let (dir, rel) = if rc.photometric {
            let rel = PathBuf::from("views").join(rc.pose.to_string());
            multiview_index = 0;
            (out.join(&rel), Some(rel))
        } else {
            multiview_index += 1;
            (out.join("multiview").join(format!("{}_{multiview_index}", rc.pose)), None)
        };
        create_dir(&dir)?;
        rc.camera.save(dir.join(CAMERA_FILE))?;
        let (cross, parallel) = render_gradient_set(&head.scene, &rc.camera, &rig, Reflectance::Both)?;
        match rel {
            Some(rel) => {
                cross.save(&dir, "cross")?;
                parallel.save(&dir, "parallel")?;
                images += 14;
                let gt = render_ground_truth(&head.scene, &rc.camera);
                let name = rc.pose.to_string();
                gt.depth.save_pfm(out.join("truth").join(format!("{name}_depth.pfm")))?;
                gt.normals.save_pfm(out.join("truth").join(format!("{name}_normals.pfm")))?;
                gt.albedo.save_pfm(out.join("truth").join(format!("{name}_albedo.pfm")))?;
                views.push(rel);
            }
            None => {
                parallel.c.save_pfm(dir.join(MULTIVIEW_FRAME))?;
                images += 1;
            }
        }
    }
    let cfg = PipelineConfig {
        base_mesh: BASE_MESH_FILE.into(),
        views: views.clone(),
        output: "output".into(),
        params: StageParams::default(),
    };
    let cfg_path = out.join(CONFIG_FILE);
    std::fs::write(&cfg_path, cfg.to_toml()).map_err(|e| Error::io(&cfg_path, e))?;
    Ok(DatasetSummary {
        scene: kind.to_string(),
        mode: mode.to_string(),
        cameras: head.rig.len(),
        photometric_views: views,
        images,
        base_vertices: head.base_mesh.num_vertices(),
        ground_truth_vertices: head.ground_truth.num_vertices(),
    })
}
