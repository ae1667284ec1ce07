use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::scene::{Albedo, Material, Scene, Surface};
use crate::error::{Error, Result};
use crate::meshkit::{shapes, TriangleMesh, Vec3};
use crate::photometrics::Camera;

pub const DEFAULT_HEAD_RESOLUTION: usize = 256;
pub const HEAD_AMPLITUDE: f64 = 0.01;
pub const HEAD_FREQUENCY: f64 = 5.0;
pub const CAMERA_DISTANCE: f64 = 20.0;
pub const CAMERAS_PER_POSE: usize = 8;
const GROUND_TRUTH_LEVEL: usize = 6;
const BASE_LEVEL: usize = 4;
const JITTER_FRACTION: f64 = 0.005;
const JITTER_SEED: u64 = 7;
/// Kept region on the unit sphere: a band around the equator without the back.
const REGION_HALF_HEIGHT: f64 = 0.35;
const REGION_BACK: f64 = -0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pose {
    Frontal,
    Left,
    Right,
}

impl Pose {
    pub const ALL: [Pose; 3] = [Pose::Frontal, Pose::Left, Pose::Right];

    /// Direction from the head center to the pose's photometric camera.
    pub fn axis(self) -> Vec3 {
        match self {
            Pose::Frontal => Vec3::z(),
            Pose::Left => Vec3::x(),
            Pose::Right => -Vec3::x(),
        }
    }
}

impl fmt::Display for Pose {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Pose::Frontal => "frontal",
            Pose::Left => "left",
            Pose::Right => "right",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RigCamera {
    pub camera: Camera,
    pub pose: Pose,
    pub photometric: bool,
}

/// Synthetic head: analytic scene, 24-camera rig and ground-truth and
/// base meshes restricted to the face region.
#[derive(Debug, Clone)]
pub struct TestHead {
    pub scene: Scene,
    pub rig: Vec<RigCamera>,
    pub ground_truth: TriangleMesh,
    pub base_mesh: TriangleMesh,
}

impl TestHead {
    pub fn photometric(&self) -> Vec<&RigCamera> {
        self.rig.iter().filter(|c| c.photometric).collect()
    }
}

pub fn head_surface() -> Surface {
    Surface::Bumpy {
        center: Vec3::zeros(),
        radius: 1.0,
        amplitude: HEAD_AMPLITUDE,
        frequency: HEAD_FREQUENCY,
    }
}

pub fn head_material() -> Material {
    Material {
        albedo: Albedo::Smooth {
            base: [0.62, 0.45, 0.38],
            amplitude: 0.05,
            frequency: 2.0,
        },
        specular_albedo: 0.15,
        roughness: 0.3,
        ior: 1.4,
    }
}

fn in_region(w: &Vec3) -> bool {
    w.y.abs() <= REGION_HALF_HEIGHT && w.z >= REGION_BACK
}

/// Displaced icosphere of `level` cut to the face region, optionally jittered.
fn head_mesh(surface: &Surface, level: usize, jitter: Option<f64>) -> Result<TriangleMesh> {
    if matches!(surface, Surface::Mesh(_)) {
        return Err(Error::Argument("the rigged scene needs an analytic surface".into()));
    }
    let ico = shapes::icosphere(level);
    let dirs = ico.vertices().to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(JITTER_SEED);
    let verts = dirs
        .iter()
        .map(|w| {
            let p = w * surface.radius_along(w).unwrap();
            match jitter {
                Some(amp) => {
                    let d = Vec3::new(
                        rng.random_range(-1.0..=1.0),
                        rng.random_range(-1.0..=1.0),
                        rng.random_range(-1.0..=1.0),
                    );
                    p + d * (amp / 3f64.sqrt())
                }
                None => p,
            }
        })
        .collect();
    let full = ico.with_vertices(verts)?;
    let (cut, _) = full.submesh(|f| f.iter().all(|&v| in_region(&dirs[v])))?;
    Ok(cut)
}

fn camera_towards(dir: Vec3, resolution: usize) -> Camera {
    let focal = (resolution as f64 / 2.0) / (1.25 / CAMERA_DISTANCE);
    Camera::look_at(dir * CAMERA_DISTANCE, Vec3::zeros(), Vec3::y(), focal, resolution, resolution)
}

/// Unit direction `axis` turned by azimuth (about y) and elevation, degrees.
fn offset_direction(axis: &Vec3, az: f64, el: f64) -> Vec3 {
    let (az, el) = (az.to_radians(), el.to_radians());
    let yaw = nalgebra::Rotation3::from_axis_angle(&Vec3::y_axis(), az);
    let side = axis.cross(&Vec3::y()).normalize();
    let pitch = nalgebra::Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(side), el);
    (yaw * pitch * axis).normalize()
}

/// Builds the synthetic head with square images of `resolution` pixels.
/// Each pose has one photometric camera on its axis and seven multiview
/// cameras scattered within 20 degrees of it.
pub fn make_test_head(resolution: usize) -> Result<TestHead> {
    make_rigged_scene(head_surface(), head_material(), resolution)
}

/// Ground-truth and jittered base meshes of a primitive surface, cut to the
/// region the three photometric poses see.
pub fn region_meshes(surface: &Surface) -> Result<(TriangleMesh, TriangleMesh)> {
    let ground_truth = head_mesh(surface, GROUND_TRUTH_LEVEL, None)?;
    let jitter = JITTER_FRACTION * ground_truth.bbox_diagonal();
    let base_mesh = head_mesh(surface, BASE_LEVEL, Some(jitter))?;
    Ok((ground_truth, base_mesh))
}

/// Any primitive surface placed in the 24-camera head rig.
pub fn make_rigged_scene(surface: Surface, material: Material, resolution: usize) -> Result<TestHead> {
    let (ground_truth, base_mesh) = region_meshes(&surface)?;
    let offsets = [(-20.0, 0.0), (20.0, 0.0), (-10.0, 12.0), (10.0, 12.0), (-10.0, -12.0), (10.0, -12.0), (0.0, 20.0)];
    let mut rig = Vec::with_capacity(3 * CAMERAS_PER_POSE);
    for pose in Pose::ALL {
        let axis = pose.axis();
        rig.push(RigCamera {
            camera: camera_towards(axis, resolution),
            pose,
            photometric: true,
        });
        for (az, el) in offsets {
            rig.push(RigCamera {
                camera: camera_towards(offset_direction(&axis, az, el), resolution),
                pose,
                photometric: false,
            });
        }
    }
    let mut scene = Scene::new(surface, material)?;
    scene.cameras = rig.iter().map(|c| c.camera.clone()).collect();
    Ok(TestHead {
        scene,
        rig,
        ground_truth,
        base_mesh,
    })
}
