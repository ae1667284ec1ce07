use std::f64::consts::FRAC_PI_2;

use crate::error::{Error, Result};
use crate::meshkit::{TriangleMesh, Vec3};
use crate::parallel;
use crate::photometrics::raster::rasterize;
use crate::photometrics::{Camera, ImageGrid};

/// What one view sees of the mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewObservation {
    pub view: usize,
    pub observed: Vec<bool>,
    /// Per-vertex color samples (zero where unobserved).
    pub colors: Vec<[f64; 3]>,
    /// Per-vertex world-space photometric normals, if a normal map was given.
    pub normals: Option<Vec<Vec3>>,
    /// Angle between vertex normal and direction to the camera, radians;
    /// exactly pi/2 where unobserved.
    pub vertex_angle: Vec<f64>,
    /// Same per face; pi/2 unless all three vertices are observed.
    pub face_angle: Vec<f64>,
}

impl ViewObservation {
    pub fn face_observed(&self, face: &[usize; 3]) -> bool {
        face.iter().all(|&v| self.observed[v])
    }
}

/// Per-view inputs for [`sample_views`]. Normal maps are in world space.
#[derive(Debug, Clone, Copy)]
pub struct ViewInput<'a> {
    pub camera: &'a Camera,
    pub texture: &'a ImageGrid,
    pub normals: Option<&'a ImageGrid>,
}

fn angle_to(n: &Vec3, to_cam: &Vec3) -> f64 {
    let c = n.dot(to_cam) / to_cam.norm();
    c.clamp(0.0, 1.0).acos().min(FRAC_PI_2)
}

/// Back-projects each view onto the mesh. A vertex is observed when it
/// passes the z-buffer test, faces the camera and has a valid pixel in
/// its bilinear footprint.
pub fn sample_views(mesh: &TriangleMesh, views: &[ViewInput<'_>]) -> Result<Vec<ViewObservation>> {
    let vn = mesh.vertex_normals();
    let n = mesh.num_vertices();
    let verts = mesh.vertices();
    let mean_edge = {
        let e = mesh.edges();
        e.iter().map(|&(a, b)| (verts[a] - verts[b]).norm()).sum::<f64>() / e.len().max(1) as f64
    };
    views
        .iter()
        .enumerate()
        .map(|(k, input)| {
            let cam = input.camera;
            if input.texture.width() != cam.width || input.texture.height() != cam.height {
                return Err(Error::Argument(format!(
                    "view {k}: texture is {}x{} but camera is {}x{}",
                    input.texture.width(),
                    input.texture.height(),
                    cam.width,
                    cam.height
                )));
            }
            if let Some(nm) = input.normals {
                if !nm.same_shape(input.texture) || nm.channels() != 3 {
                    return Err(Error::Argument(format!("view {k}: normal map shape differs from texture")));
                }
            }
            let zbuf = rasterize(mesh, cam);
            let center = cam.center();
            let samples = parallel::map_range(n, |v| {
                let p = verts[v];
                let to_cam = center - p;
                if vn[v].dot(&to_cam) <= 0.0 {
                    return None;
                }
                let proj = cam.project(&p)?;
                let tol = (1e-3 * proj.depth).max(0.5 * mean_edge);
                if !zbuf.visible(proj.u, proj.v, proj.depth, tol) {
                    return None;
                }
                let color = input.texture.sample_bilinear_masked(proj.u, proj.v)?;
                let normal = match input.normals {
                    Some(nm) => {
                        let s = nm.sample_bilinear_masked(proj.u, proj.v)?;
                        let s = Vec3::new(s[0], s[1], s[2]);
                        let len = s.norm();
                        if len < 1e-12 {
                            return None;
                        }
                        Some(s / len)
                    }
                    None => None,
                };
                Some((color, normal, angle_to(&vn[v], &to_cam)))
            });
            let mut obs = ViewObservation {
                view: k,
                observed: vec![false; n],
                colors: vec![[0.0; 3]; n],
                normals: input.normals.map(|_| vec![Vec3::zeros(); n]),
                vertex_angle: vec![FRAC_PI_2; n],
                face_angle: vec![FRAC_PI_2; mesh.num_faces()],
            };
            for (v, s) in samples.into_iter().enumerate() {
                if let Some((c, nrm, a)) = s {
                    obs.observed[v] = true;
                    obs.colors[v] = c;
                    obs.vertex_angle[v] = a;
                    if let (Some(list), Some(nrm)) = (obs.normals.as_mut(), nrm) {
                        list[v] = nrm;
                    }
                }
            }
            for (fi, f) in mesh.faces().iter().enumerate() {
                if obs.face_observed(f) {
                    let to_cam = center - mesh.face_centroid(fi);
                    obs.face_angle[fi] = angle_to(&mesh.face_normal(fi), &to_cam);
                }
            }
            Ok(obs)
        })
        .collect()
}
