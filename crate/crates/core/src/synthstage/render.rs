use std::f64::consts::PI;
use std::str::FromStr;

use super::rig::{Condition, LightMode, LightRig};
use super::scene::{Scene, Surface};
use crate::error::{Error, Result};
use crate::meshkit::Vec3;
use crate::parallel;
use crate::photometrics::raster::rasterize;
use crate::photometrics::{reflect, Camera, GradientSet, ImageGrid, Polarization};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reflectance {
    Lambertian,
    Specular,
    Both,
}

impl FromStr for Reflectance {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lambertian" => Ok(Reflectance::Lambertian),
            "specular" => Ok(Reflectance::Specular),
            "both" => Ok(Reflectance::Both),
            other => Err(Error::Argument(format!("unknown reflectance `{other}`"))),
        }
    }
}

/// Visible surface point behind one pixel, world space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfacePoint {
    pub point: Vec3,
    pub normal: Vec3,
    pub albedo: [f64; 3],
    /// z-depth in the camera.
    pub depth: f64,
}

/// Nearest visible surface point for every pixel (row-major).
pub fn trace(scene: &Scene, cam: &Camera) -> Vec<Option<SurfacePoint>> {
    let (w, h) = (cam.width, cam.height);
    match &scene.surface {
        Surface::Mesh(mesh) => {
            let buf = rasterize(mesh, cam);
            let computed;
            let normals = match mesh.normals(crate::meshkit::NORMAL) {
                Some(n) => n,
                None => {
                    computed = mesh.vertex_normals();
                    &computed
                }
            };
            let colors = mesh.colors();
            let verts = mesh.vertices();
            let faces = mesh.faces();
            parallel::map_range(w * h, |i| {
                if !buf.covered(i) {
                    return None;
                }
                let f = faces[buf.face[i]];
                let b = buf.bary[i];
                let point = verts[f[0]] * b[0] + verts[f[1]] * b[1] + verts[f[2]] * b[2];
                let n = normals[f[0]] * b[0] + normals[f[1]] * b[1] + normals[f[2]] * b[2];
                if n.norm() == 0.0 {
                    return None;
                }
                let albedo = match colors {
                    Some(c) => [0, 1, 2].map(|k| c[f[0]][k] * b[0] + c[f[1]][k] * b[1] + c[f[2]][k] * b[2]),
                    None => scene.albedo_at(&point),
                };
                Some(SurfacePoint {
                    point,
                    normal: n.normalize(),
                    albedo,
                    depth: buf.depth[i],
                })
            })
        }
        surface => parallel::map_range(w * h, |i| {
            let (origin, dir) = cam.world_ray((i % w) as f64, (i / w) as f64);
            let hit = surface.intersect(&origin, &dir)?;
            Some(SurfacePoint {
                point: hit.point,
                normal: hit.normal,
                albedo: scene.albedo_at(&hit.point),
                depth: -cam.world_to_camera(&hit.point).z,
            })
        }),
    }
}

/// Beckmann microfacet distribution with RMS slope `m`.
pub fn beckmann(cos_h: f64, m: f64) -> f64 {
    if cos_h <= 0.0 {
        return 0.0;
    }
    let c2 = cos_h * cos_h;
    let tan2 = (1.0 - c2) / c2;
    (-tan2 / (m * m)).exp() / (PI * m * m * c2 * c2)
}

/// Per-condition diffuse shading factor (multiplied by albedo) for a rig-frame normal.
fn lambert_terms(rig: &LightRig, n: &Vec3) -> [f64; 7] {
    match rig.mode {
        LightMode::Continuous => Condition::ALL.map(|k| k.lambert_integral(n)),
        LightMode::Led41 => {
            let dw = rig.led_solid_angle() / PI;
            let mut out = [0.0; 7];
            for w in &rig.leds {
                let c = n.dot(w);
                if c <= 0.0 {
                    continue;
                }
                for (o, k) in out.iter_mut().zip(Condition::ALL) {
                    *o += k.intensity(w) * c * dw;
                }
            }
            out
        }
    }
}

/// Per-condition specular factor (multiplied by specular albedo); `v` points
/// from the surface to the camera, both in the rig frame.
fn specular_terms(rig: &LightRig, n: &Vec3, v: &Vec3, roughness: f64) -> [f64; 7] {
    match rig.mode {
        LightMode::Continuous => {
            let r = reflect(v, n);
            Condition::ALL.map(|k| k.intensity(&r))
        }
        LightMode::Led41 => {
            // microfacet lobe D(h)(n.h)/(4 v.h) integrates to one over directions
            let dw = rig.led_solid_angle();
            let mut out = [0.0; 7];
            for w in &rig.leds {
                if n.dot(w) <= 0.0 {
                    continue;
                }
                let h = (w + v).normalize();
                let vh = v.dot(&h);
                if vh <= 0.0 {
                    continue;
                }
                let nh = n.dot(&h);
                let wt = beckmann(nh, roughness) * nh / (4.0 * vh) * dw;
                for (o, k) in out.iter_mut().zip(Condition::ALL) {
                    *o += k.intensity(w) * wt;
                }
            }
            out
        }
    }
}

fn empty_grids(w: usize, h: usize) -> [ImageGrid; 7] {
    std::array::from_fn(|_| ImageGrid::new(w, h, 3))
}

/// Renders the cross- (diffuse only) and parallel-polarized (diffuse plus
/// specular) gradient sets seen by `cam`, with the rig attached to `cam`.
pub fn render_gradient_set(
    scene: &Scene,
    cam: &Camera,
    rig: &LightRig,
    reflectance: Reflectance,
) -> Result<(GradientSet, GradientSet)> {
    cam.validate()?;
    let samples = trace(scene, cam);
    if samples.iter().all(Option::is_none) {
        log::warn!("camera sees no surface");
    }
    let center = cam.center();
    let mat = &scene.material;
    let shaded = parallel::map_slice(&samples, |s| {
        let s = s.as_ref()?;
        let n = rig.to_rig(&cam.direction_to_camera(&s.normal));
        let v = rig.to_rig(&cam.direction_to_camera(&(center - s.point).normalize()));
        let diffuse = match reflectance {
            Reflectance::Specular => [0.0; 7],
            _ => lambert_terms(rig, &n),
        };
        let specular = match reflectance {
            Reflectance::Lambertian => [0.0; 7],
            _ => specular_terms(rig, &n, &v, mat.roughness),
        };
        let cross: [[f64; 3]; 7] = std::array::from_fn(|k| s.albedo.map(|a| a * diffuse[k]));
        let parallel: [[f64; 3]; 7] =
            std::array::from_fn(|k| cross[k].map(|c| c + mat.specular_albedo * specular[k]));
        Some((cross, parallel))
    });
    let (w, h) = (cam.width, cam.height);
    let mut cross = empty_grids(w, h);
    let mut par = empty_grids(w, h);
    for (i, s) in shaded.iter().enumerate() {
        match s {
            Some((c, p)) => {
                for k in 0..7 {
                    cross[k].pixel_mut(i).copy_from_slice(&c[k]);
                    par[k].pixel_mut(i).copy_from_slice(&p[k]);
                }
            }
            None => {
                for k in 0..7 {
                    cross[k].set_valid(i, false);
                    par[k].set_valid(i, false);
                }
            }
        }
    }
    Ok((
        GradientSet::new(cross, Polarization::Cross, 0)?,
        GradientSet::new(par, Polarization::Parallel, 0)?,
    ))
}

/// Ground-truth z-depth, camera-space normals and diffuse albedo.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    pub depth: ImageGrid,
    pub normals: ImageGrid,
    pub albedo: ImageGrid,
}

pub fn render_ground_truth(scene: &Scene, cam: &Camera) -> GroundTruth {
    let samples = trace(scene, cam);
    let (w, h) = (cam.width, cam.height);
    let mut depth = ImageGrid::new(w, h, 1);
    let mut normals = ImageGrid::new(w, h, 3);
    let mut albedo = ImageGrid::new(w, h, 3);
    for (i, s) in samples.iter().enumerate() {
        match s {
            Some(s) => {
                depth.pixel_mut(i)[0] = s.depth;
                normals.set_vec3(i, cam.direction_to_camera(&s.normal));
                albedo.pixel_mut(i).copy_from_slice(&s.albedo);
            }
            None => {
                depth.set_valid(i, false);
                normals.set_valid(i, false);
                albedo.set_valid(i, false);
            }
        }
    }
    GroundTruth { depth, normals, albedo }
}

/// Rigid integer shift: `out(x, y) = img(x - dx, y - dy)`, invalid where
/// the source falls outside the frame.
pub fn shift_image(img: &ImageGrid, dx: i64, dy: i64) -> ImageGrid {
    let (w, h) = (img.width() as i64, img.height() as i64);
    ImageGrid::from_fn(img.width(), img.height(), img.channels(), |x, y| {
        let (sx, sy) = (x as i64 - dx, y as i64 - dy);
        if sx < 0 || sy < 0 || sx >= w || sy >= h {
            return None;
        }
        let i = (sy * w + sx) as usize;
        if !img.is_valid(i) {
            return None;
        }
        let p = img.pixel(i);
        Some(if p.len() == 3 { [p[0], p[1], p[2]] } else { [p[0]; 3] })
    })
}
