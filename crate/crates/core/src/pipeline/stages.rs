//! Stage functions. Each reads its inputs from files and writes its
//! outputs to files so any stage can be rerun on its own.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use super::config::{NormalSource, CAMERA_FILE};
use crate::error::{Error, Result};
use crate::meshkit::{Attribute, TriangleMesh, Vec3, COLOR, NORMAL, SCALAR_PREFIX};
use crate::patchwork::Segmentation;
use crate::photometrics::raster::project_depth_normals;
use crate::photometrics::{
    align_sequence, angle_deg, bias_correct, complement_residual, default_sigma_low, lambertian_normals,
    specular_normals, to_world_normals, Camera, GradientSet, ImageGrid, Polarization,
};
use crate::poissonstitch::{
    fresnel_safe_check, refine_mesh_iterated, sample_views, select_vertex_normals, stitch_texture, FresnelReport, ViewInput,
};
use crate::synthstage::{render_preview, specular_normals_of, PointLight, PreviewMaterial, SPECULAR_ALBEDO_CHANNEL, SPECULAR_NORMAL_CHANNELS};

pub const ALBEDO_FILE: &str = "albedo.pfm";
pub const DIFFUSE_NORMALS_FILE: &str = "diffuse_normals.pfm";
pub const SPECULAR_NORMALS_FILE: &str = "specular_normals.pfm";
pub const SPECULAR_ALBEDO_FILE: &str = "specular_albedo.pfm";
pub const DIFFUSE_CORRECTED_FILE: &str = "diffuse_corrected.pfm";
pub const SPECULAR_CORRECTED_FILE: &str = "specular_corrected.pfm";
pub const DIFFUSE_WORLD_FILE: &str = "diffuse_world.pfm";
pub const SPECULAR_WORLD_FILE: &str = "specular_world.pfm";

/// Relative floor on C used when reporting the complement residual.
const RESIDUAL_FLOOR: f64 = 0.05;
/// Sets whose complement residual is already below this are left unwarped.
pub const ALIGNED_RESIDUAL: f64 = 1e-3;

/// Short SHA-256 over the contents of `paths` (missing files are skipped).
pub fn digest_files(paths: &[PathBuf]) -> String {
    let mut h = Sha256::new();
    for p in paths {
        if let Ok(bytes) = fs::read(p) {
            h.update(p.file_name().map(|s| s.as_encoded_bytes()).unwrap_or_default());
            h.update(&bytes);
        }
    }
    hex::encode(&h.finalize()[..8])
}

pub fn file_sha256(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

pub(crate) fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn copy_file(from: &Path, to: &Path) -> Result<()> {
    fs::copy(from, to).map(|_| ()).map_err(|e| Error::io(from, e))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlignOutcome {
    /// Largest complement-law residual of the cross and parallel sets,
    /// before and after alignment.
    pub residual_before: [f64; 2],
    pub residual_after: [f64; 2],
    /// Whether flow was estimated for each set.
    pub warped: [bool; 2],
    /// Largest mean flow magnitude over the six conditions, pixels.
    pub max_mean_flow: f64,
}

/// Aligns both polarization sets of the view in `input` and writes them,
/// with the camera, to `out`. Sets that already obey the complement law
/// are copied through.
pub fn align_view(input: &Path, out: &Path, iterations: usize) -> Result<AlignOutcome> {
    create_dir(out)?;
    let mut outcome = AlignOutcome {
        residual_before: [0.0; 2],
        residual_after: [0.0; 2],
        warped: [false; 2],
        max_mean_flow: 0.0,
    };
    for (k, (prefix, pol)) in [("cross", Polarization::Cross), ("parallel", Polarization::Parallel)]
        .into_iter()
        .enumerate()
    {
        let set = GradientSet::load(input, prefix, pol, 0)?;
        outcome.residual_before[k] = complement_residual(&set, RESIDUAL_FLOOR, None);
        if outcome.residual_before[k] <= ALIGNED_RESIDUAL {
            // a registered sequence; specular highlights would otherwise
            // read as motion in the invariant images
            outcome.residual_after[k] = outcome.residual_before[k];
            set.save(out, prefix)?;
            continue;
        }
        outcome.warped[k] = true;
        let aligned = align_sequence(&set, iterations)?;
        outcome.residual_after[k] = complement_residual(&aligned.set, RESIDUAL_FLOOR, None);
        for f in &aligned.flows {
            outcome.max_mean_flow = outcome.max_mean_flow.max(f.mean_magnitude());
        }
        aligned.set.save(out, prefix)?;
    }
    if input != out {
        copy_file(&input.join(CAMERA_FILE), &out.join(CAMERA_FILE))?;
    }
    Ok(outcome)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormalsOutcome {
    pub diffuse_pixels: usize,
    pub specular_pixels: usize,
    pub specular_clamped: usize,
}

/// Diffuse normals and albedo from the cross set, specular normals and
/// albedo from the parallel minus cross difference. Camera space.
pub fn estimate_view_normals(dir: &Path) -> Result<NormalsOutcome> {
    let cross = GradientSet::load(dir, "cross", Polarization::Cross, 0)?;
    let parallel = GradientSet::load(dir, "parallel", Polarization::Parallel, 0)?;
    let (diffuse, albedo) = lambertian_normals(&cross)?;
    let spec = specular_normals(&cross, &parallel)?;
    diffuse.save_pfm(dir.join(DIFFUSE_NORMALS_FILE))?;
    albedo.save_pfm(dir.join(ALBEDO_FILE))?;
    spec.normals.save_pfm(dir.join(SPECULAR_NORMALS_FILE))?;
    spec.albedo.save_pfm(dir.join(SPECULAR_ALBEDO_FILE))?;
    Ok(NormalsOutcome {
        diffuse_pixels: diffuse.valid_count(),
        specular_pixels: spec.normals.valid_count(),
        specular_clamped: spec.clamped,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BiasOutcome {
    pub sigma_low: f64,
    /// Mean rotation applied to the diffuse and specular normals, degrees.
    pub mean_correction_deg: [f64; 2],
    pub corrected_pixels: [usize; 2],
}

fn mean_angle(a: &ImageGrid, b: &ImageGrid) -> f64 {
    let mut sum = 0.0;
    let mut n = 0usize;
    for i in 0..a.len() {
        if a.is_valid(i) && b.is_valid(i) {
            sum += angle_deg(&a.vec3(i), &b.vec3(i));
            n += 1;
        }
    }
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Removes low-frequency bias from both normal maps of the view against the
/// base mesh, then writes camera- and world-space results.
pub fn bias_correct_view(dir: &Path, mesh: &TriangleMesh, sigma_low: Option<f64>) -> Result<BiasOutcome> {
    let cam = Camera::load(dir.join(CAMERA_FILE))?;
    let geo = project_depth_normals(mesh, &cam).normals;
    let sigma = sigma_low.unwrap_or_else(|| default_sigma_low(cam.width));
    let mut out = BiasOutcome {
        sigma_low: sigma,
        mean_correction_deg: [0.0; 2],
        corrected_pixels: [0; 2],
    };
    let files = [
        (DIFFUSE_NORMALS_FILE, DIFFUSE_CORRECTED_FILE, DIFFUSE_WORLD_FILE),
        (SPECULAR_NORMALS_FILE, SPECULAR_CORRECTED_FILE, SPECULAR_WORLD_FILE),
    ];
    for (k, (src, corr, world)) in files.into_iter().enumerate() {
        let photo = ImageGrid::load_pfm(dir.join(src))?;
        let fixed = bias_correct(&photo, &geo, sigma)?;
        out.mean_correction_deg[k] = mean_angle(&photo, &fixed);
        out.corrected_pixels[k] = fixed.valid_count();
        fixed.save_pfm(dir.join(corr))?;
        to_world_normals(&fixed, &cam).save_pfm(dir.join(world))?;
    }
    Ok(out)
}

/// Per-view maps consumed by stitching.
#[derive(Debug, Clone)]
pub struct ViewMaps {
    pub camera: Camera,
    pub albedo: ImageGrid,
    pub specular_albedo: ImageGrid,
    pub diffuse_world: ImageGrid,
    pub specular_world: ImageGrid,
}

impl ViewMaps {
    pub fn load(dir: &Path) -> Result<Self> {
        Ok(ViewMaps {
            camera: Camera::load(dir.join(CAMERA_FILE))?,
            albedo: ImageGrid::load_pfm(dir.join(ALBEDO_FILE))?,
            specular_albedo: ImageGrid::load_pfm(dir.join(SPECULAR_ALBEDO_FILE))?,
            diffuse_world: ImageGrid::load_pfm(dir.join(DIFFUSE_WORLD_FILE))?,
            specular_world: ImageGrid::load_pfm(dir.join(SPECULAR_WORLD_FILE))?,
        })
    }

    pub fn files(dir: &Path) -> Vec<PathBuf> {
        [CAMERA_FILE, ALBEDO_FILE, SPECULAR_ALBEDO_FILE, DIFFUSE_WORLD_FILE, SPECULAR_WORLD_FILE]
            .iter()
            .map(|f| dir.join(f))
            .collect()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StitchOutcome {
    #[serde(skip)]
    pub mesh: TriangleMesh,
    pub residuals: [f64; 3],
    pub specular_residual: f64,
    pub unlabeled_faces: usize,
    pub unobserved_vertices: usize,
    pub fresnel: FresnelSummary,
}

/// Per-vertex flags marking which stored normals came from a view.
pub const DIFFUSE_LABELED: &str = "diffuse_labeled";
pub const SPECULAR_LABELED: &str = "specular_labeled";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FresnelSummary {
    pub threshold_deg: f64,
    pub unsafe_patches: usize,
    pub max_angle_deg: f64,
}

impl From<&FresnelReport> for FresnelSummary {
    fn from(r: &FresnelReport) -> Self {
        FresnelSummary {
            threshold_deg: r.threshold_deg,
            unsafe_patches: r.flagged.len(),
            max_angle_deg: r.angles_deg.iter().cloned().fold(0.0, f64::max),
        }
    }
}

/// Blends diffuse albedo (`color`) and specular albedo (`scalar:spec`) over
/// the mesh and attaches the selected per-vertex diffuse (`normal`) and
/// specular (`scalar:snx..snz`) normals. Vertices
/// without a photometric normal keep the geometric one and a zero flag.
pub fn stitch_views(
    mesh: &TriangleMesh,
    seg: &Segmentation,
    views: &[ViewMaps],
    lambda: f64,
    fresnel_threshold_deg: f64,
) -> Result<StitchOutcome> {
    if seg.num_vertices() != mesh.num_vertices() {
        return Err(Error::Shape {
            what: "segmentation labels",
            expected: mesh.num_vertices(),
            found: seg.num_vertices(),
        });
    }
    let inputs = |spec: bool| -> Vec<ViewInput<'_>> {
        views
            .iter()
            .map(|v| ViewInput {
                camera: &v.camera,
                texture: if spec { &v.specular_albedo } else { &v.albedo },
                normals: Some(if spec { &v.specular_world } else { &v.diffuse_world }),
            })
            .collect()
    };
    let obs_d = sample_views(mesh, &inputs(false))?;
    let stitched = stitch_texture(mesh, seg, &obs_d, lambda)?;
    let fresnel = fresnel_safe_check(&stitched.selection, fresnel_threshold_deg);
    if !fresnel.is_safe() {
        log::warn!("{} patches are seen beyond {fresnel_threshold_deg} degrees", fresnel.flagged.len());
    }
    let diffuse_targets = select_vertex_normals(seg, &obs_d);
    let obs_s = sample_views(mesh, &inputs(true))?;
    let specular_targets = select_vertex_normals(seg, &obs_s);
    let spec_stitched = stitch_texture(mesh, seg, &obs_s, lambda)?;

    let geometric = mesh.vertex_normals();
    let mut out = mesh.clone();
    out.set_attribute(COLOR, Attribute::Color(stitched.colors.clone()))?;
    let pick = |t: &[Option<Vec3>]| -> Vec<Vec3> { t.iter().zip(&geometric).map(|(n, g)| n.unwrap_or(*g)).collect() };
    let flags = |t: &[Option<Vec3>]| Attribute::Scalar(t.iter().map(|n| if n.is_some() { 1.0 } else { 0.0 }).collect());
    out.set_attribute(NORMAL, Attribute::Normal(pick(&diffuse_targets)))?;
    out.set_attribute(
        format!("{SCALAR_PREFIX}{SPECULAR_ALBEDO_CHANNEL}"),
        Attribute::Scalar(spec_stitched.colors.iter().map(|c| (c[0] + c[1] + c[2]) / 3.0).collect()),
    )?;
    let spec = pick(&specular_targets);
    for (k, name) in SPECULAR_NORMAL_CHANNELS.iter().enumerate() {
        out.set_attribute(
            format!("{SCALAR_PREFIX}{name}"),
            Attribute::Scalar(spec.iter().map(|n| n[k]).collect()),
        )?;
    }
    out.set_attribute(format!("{SCALAR_PREFIX}{DIFFUSE_LABELED}"), flags(&diffuse_targets))?;
    out.set_attribute(format!("{SCALAR_PREFIX}{SPECULAR_LABELED}"), flags(&specular_targets))?;
    let unobserved_vertices = (0..mesh.num_vertices())
        .filter(|&v| obs_d.iter().all(|o| !o.observed[v]))
        .count();
    Ok(StitchOutcome {
        mesh: out,
        residuals: stitched.residuals,
        specular_residual: spec_stitched.residuals.iter().cloned().fold(0.0, f64::max),
        unlabeled_faces: stitched.face_view.iter().filter(|f| f.is_none()).count(),
        unobserved_vertices,
        fresnel: FresnelSummary::from(&fresnel),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RefineOutcome {
    pub residual: f64,
    pub lambda_screen: f64,
    pub rounds: usize,
    pub targets: usize,
    pub mean_displacement: f64,
    pub max_displacement: f64,
}

/// Moves the (textured) mesh towards the selected photometric normals.
pub fn refine_views(
    textured: &TriangleMesh,
    targets: &[Option<Vec3>],
    lambda_screen: Option<f64>,
    rounds: usize,
) -> Result<(TriangleMesh, RefineOutcome)> {
    let r = refine_mesh_iterated(textured, targets, lambda_screen, rounds)?;
    let d: Vec<f64> = r
        .mesh
        .vertices()
        .iter()
        .zip(textured.vertices())
        .map(|(a, b)| (a - b).norm())
        .collect();
    let outcome = RefineOutcome {
        residual: r.residual,
        lambda_screen: r.lambda_screen,
        rounds,
        targets: targets.iter().filter(|t| t.is_some()).count(),
        mean_displacement: d.iter().sum::<f64>() / d.len().max(1) as f64,
        max_displacement: d.iter().cloned().fold(0.0, f64::max),
    };
    Ok((r.mesh, outcome))
}

/// Refinement targets stored on a stitched mesh by [`stitch_views`].
pub fn targets_from_mesh(mesh: &TriangleMesh, source: NormalSource) -> Result<Vec<Option<Vec3>>> {
    let missing = || Error::Argument("mesh carries no stitched normals (run stitch first)".into());
    let (normals, flag) = match source {
        NormalSource::Diffuse => (mesh.normals(NORMAL).ok_or_else(missing)?.to_vec(), DIFFUSE_LABELED),
        NormalSource::Specular => (specular_normals_of(mesh).ok_or_else(missing)?, SPECULAR_LABELED),
    };
    let flags = mesh.scalars(&format!("{SCALAR_PREFIX}{flag}")).ok_or_else(missing)?;
    Ok(normals
        .into_iter()
        .zip(flags)
        .map(|(n, &f)| (f > 0.5 && n.norm() > 0.0).then(|| n.normalize()))
        .collect())
}

/// Default preview light: above and to the right of the camera.
pub fn default_light(cam: &Camera, mesh: &TriangleMesh) -> PointLight {
    let center = mesh.vertices().iter().sum::<Vec3>() / mesh.num_vertices().max(1) as f64;
    let eye = cam.center();
    let dist = (eye - center).norm();
    let up = cam.direction_to_world(&Vec3::y());
    let right = cam.direction_to_world(&Vec3::x());
    PointLight {
        position: eye + (up + right) * (0.3 * dist),
        intensity: std::f64::consts::PI,
    }
}

pub fn render_view(mesh: &TriangleMesh, cam: &Camera, out: &Path) -> Result<ImageGrid> {
    let img = render_preview(mesh, cam, &default_light(cam, mesh), &PreviewMaterial::default())?;
    img.save_png(out, false)?;
    Ok(img)
}
