use std::f64::consts::PI;

use super::render::beckmann;
use crate::error::{Error, Result};
use crate::meshkit::{TriangleMesh, Vec3, NORMAL, SCALAR_PREFIX};
use crate::parallel;
use crate::photometrics::raster::rasterize;
use crate::photometrics::{Camera, ImageGrid};

/// Scalar channels holding the specular normal in meshes (PLY keeps a
/// single `nx ny nz` triple for the diffuse one).
pub const SPECULAR_NORMAL_CHANNELS: [&str; 3] = ["snx", "sny", "snz"];
/// Scalar channel with per-vertex specular albedo.
pub const SPECULAR_ALBEDO_CHANNEL: &str = "spec";

/// Point light; `intensity` is the irradiance it delivers at normal incidence
/// (no distance falloff).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointLight {
    pub position: Vec3,
    pub intensity: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PreviewMaterial {
    pub specular_albedo: f64,
    pub roughness: f64,
    pub ior: f64,
}

impl Default for PreviewMaterial {
    fn default() -> Self {
        PreviewMaterial {
            specular_albedo: 0.3,
            roughness: 0.3,
            ior: 1.4,
        }
    }
}

pub fn schlick(cos: f64, ior: f64) -> f64 {
    let f0 = ((ior - 1.0) / (ior + 1.0)).powi(2);
    f0 + (1.0 - f0) * (1.0 - cos.clamp(0.0, 1.0)).powi(5)
}

/// Cook-Torrance specular BRDF times `n.l`, for unit `n`, `l`, `v`.
pub fn cook_torrance(n: &Vec3, l: &Vec3, v: &Vec3, roughness: f64, ior: f64) -> f64 {
    let nl = n.dot(l);
    let nv = n.dot(v);
    if nl <= 0.0 || nv <= 0.0 {
        return 0.0;
    }
    let h = (l + v).normalize();
    let nh = n.dot(&h);
    let vh = v.dot(&h).max(1e-12);
    let g = (2.0 * nh * nv / vh).min(2.0 * nh * nl / vh).min(1.0);
    beckmann(nh, roughness) * schlick(vh, ior) * g / (4.0 * nv)
}

/// Per-vertex specular normals stored on the mesh, if any.
pub fn specular_normals_of(mesh: &TriangleMesh) -> Option<Vec<Vec3>> {
    let ch: Vec<&[f64]> = SPECULAR_NORMAL_CHANNELS
        .iter()
        .map(|c| mesh.scalars(&format!("{SCALAR_PREFIX}{c}")))
        .collect::<Option<_>>()?;
    Some(
        (0..mesh.num_vertices())
            .map(|i| Vec3::new(ch[0][i], ch[1][i], ch[2][i]))
            .collect(),
    )
}

/// Cook-Torrance rendering with hybrid normals: the diffuse term is shaded
/// with the mesh's diffuse normals, the specular term with its specular
/// normals (diffuse ones reused when absent).
pub fn render_preview(
    mesh: &TriangleMesh,
    cam: &Camera,
    light: &PointLight,
    material: &PreviewMaterial,
) -> Result<ImageGrid> {
    if !(material.roughness > 0.0) || material.specular_albedo < 0.0 || light.intensity < 0.0 {
        return Err(Error::Argument("preview needs roughness > 0 and non-negative albedo and light".into()));
    }
    let buf = rasterize(mesh, cam);
    let computed;
    let diffuse_n = match mesh.normals(NORMAL) {
        Some(n) => n,
        None => {
            computed = mesh.vertex_normals();
            &computed
        }
    };
    let spec_stored = specular_normals_of(mesh);
    let spec_n = spec_stored.as_deref().unwrap_or(diffuse_n);
    let spec_albedo = mesh.scalars(&format!("{SCALAR_PREFIX}{SPECULAR_ALBEDO_CHANNEL}"));
    let colors = mesh.colors();
    let (verts, faces) = (mesh.vertices(), mesh.faces());
    let eye = cam.center();
    let (w, h) = (cam.width, cam.height);
    let px = parallel::map_range(w * h, |i| {
        if !buf.covered(i) {
            return None;
        }
        let f = faces[buf.face[i]];
        let b = buf.bary[i];
        let lerp3 = |a: &[Vec3]| a[f[0]] * b[0] + a[f[1]] * b[1] + a[f[2]] * b[2];
        let p = lerp3(verts);
        let nd = lerp3(diffuse_n).try_normalize(1e-300).unwrap_or_else(Vec3::zeros);
        let ns = lerp3(spec_n).try_normalize(1e-300).unwrap_or(nd);
        let rho = match colors {
            Some(c) => [0, 1, 2].map(|k| c[f[0]][k] * b[0] + c[f[1]][k] * b[1] + c[f[2]][k] * b[2]),
            None => [0.5; 3],
        };
        let rho_s = match spec_albedo {
            Some(s) => s[f[0]] * b[0] + s[f[1]] * b[1] + s[f[2]] * b[2],
            None => material.specular_albedo,
        };
        let l = (light.position - p).normalize();
        let v = (eye - p).normalize();
        let diffuse = nd.dot(&l).max(0.0) * light.intensity / PI;
        let spec = rho_s.max(0.0) * cook_torrance(&ns, &l, &v, material.roughness, material.ior) * light.intensity;
        Some(rho.map(|r| r.max(0.0) * diffuse + spec))
    });
    let mut img = ImageGrid::new(w, h, 3);
    for (i, p) in px.into_iter().enumerate() {
        match p {
            Some(c) => img.pixel_mut(i).copy_from_slice(&c),
            None => img.set_valid(i, false),
        }
    }
    Ok(img)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::meshkit::{shapes, Attribute, COLOR};

    fn quad() -> TriangleMesh {
        let s = 2.0;
        let mut m = TriangleMesh::new(
            vec![
                Vec3::new(-s, -s, 0.0),
                Vec3::new(s, -s, 0.0),
                Vec3::new(s, s, 0.0),
                Vec3::new(-s, s, 0.0),
            ],
            vec![[0, 1, 2], [0, 2, 3]],
        )
        .unwrap();
        m.set_attribute(COLOR, Attribute::Color(vec![[0.8, 0.5, 0.2]; 4])).unwrap();
        m
    }

    #[test]
    fn lambertian_limit() {
        let cam = Camera::look_at(Vec3::new(0.0, 0.0, 3.0), Vec3::zeros(), Vec3::y(), 20.0, 9, 9);
        let light = PointLight {
            position: Vec3::new(0.0, 0.0, 1e9),
            intensity: 2.0,
        };
        let mat = PreviewMaterial {
            specular_albedo: 0.0,
            ..PreviewMaterial::default()
        };
        let img = render_preview(&quad(), &cam, &light, &mat).unwrap();
        let p = img.at(4, 4);
        for (k, a) in [0.8, 0.5, 0.2].iter().enumerate() {
            assert!((p[k] - a * 2.0 / PI).abs() < 1e-9);
        }
    }

    #[test]
    fn lobe_peaks_at_mirror_direction() {
        let n = Vec3::z();
        let l = n;
        let peak = cook_torrance(&n, &l, &n, 0.2, 1.5);
        for k in -80..=80 {
            let a = (k as f64).to_radians();
            let v = Vec3::new(a.sin(), 0.0, a.cos());
            assert!(cook_torrance(&n, &l, &v, 0.2, 1.5) <= peak + 1e-12);
        }
        assert!(peak > 0.0);
    }

    #[test]
    fn rougher_surfaces_spread_the_highlight() {
        let sphere = shapes::icosphere(5);
        let cam = Camera::look_at(Vec3::new(0.0, 0.0, 6.0), Vec3::zeros(), Vec3::y(), 150.0, 96, 96);
        let light = PointLight {
            position: Vec3::new(2.0, 2.0, 6.0),
            intensity: 1.0,
        };
        let mut mesh = sphere.clone();
        mesh.set_attribute(COLOR, Attribute::Color(vec![[0.0; 3]; sphere.num_vertices()])).unwrap();
        let mut last = 0;
        for r in [0.1, 0.2, 0.3, 0.4, 0.5] {
            let mat = PreviewMaterial {
                specular_albedo: 1.0,
                roughness: r,
                ior: 1.4,
            };
            let img = render_preview(&mesh, &cam, &light, &mat).unwrap();
            let vals: Vec<f64> = (0..img.len()).filter(|&i| img.is_valid(i)).map(|i| img.pixel(i)[0]).collect();
            let max = vals.iter().cloned().fold(0.0, f64::max);
            let area = vals.iter().filter(|&&v| v > 0.5 * max).count();
            assert!(area > last, "roughness {r}: {area} <= {last}");
            last = area;
        }
    }

    #[test]
    fn specular_channels_are_used_for_the_lobe() {
        let mut m = quad();
        let tilt = Vec3::new(0.3, 0.0, 1.0).normalize();
        for (c, v) in SPECULAR_NORMAL_CHANNELS.iter().zip([tilt.x, tilt.y, tilt.z]) {
            m.set_attribute(format!("{SCALAR_PREFIX}{c}"), Attribute::Scalar(vec![v; 4])).unwrap();
        }
        let sn = specular_normals_of(&m).unwrap();
        assert!((sn[2] - tilt).norm() < 1e-12);
        let cam = Camera::look_at(Vec3::new(0.0, 0.0, 3.0), Vec3::zeros(), Vec3::y(), 20.0, 9, 9);
        let light = PointLight {
            position: Vec3::new(0.0, 0.0, 1e9),
            intensity: 1.0,
        };
        let a = render_preview(&m, &cam, &light, &PreviewMaterial::default()).unwrap();
        let b = render_preview(&quad(), &cam, &light, &PreviewMaterial::default()).unwrap();
        assert!(a.at(4, 4)[0] < b.at(4, 4)[0]);
    }
}
