//! Z-buffer rasterization of a triangle mesh into a camera.
//!
//! Every covered pixel center is intersected exactly with the triangle's
//! plane, so depths and barycentrics carry no screen-space interpolation
//! error.

use super::camera::Camera;
use super::image::ImageGrid;
use crate::meshkit::{TriangleMesh, Vec3};

/// Per-pixel nearest hit: z-depth, face index and barycentric weights.
#[derive(Debug, Clone)]
pub struct RasterBuffer {
    pub width: usize,
    pub height: usize,
    pub depth: Vec<f64>,
    pub face: Vec<usize>,
    pub bary: Vec<[f64; 3]>,
}

pub const NO_FACE: usize = usize::MAX;

impl RasterBuffer {
    pub fn covered(&self, i: usize) -> bool {
        self.face[i] != NO_FACE
    }

    pub fn coverage(&self) -> usize {
        self.face.iter().filter(|&&f| f != NO_FACE).count()
    }

    /// Z-buffer depth at continuous pixel coordinates (nearest pixel).
    pub fn depth_near(&self, u: f64, v: f64) -> Option<f64> {
        let x = u.round();
        let y = v.round();
        if x < 0.0 || y < 0.0 || x >= self.width as f64 || y >= self.height as f64 {
            return None;
        }
        let i = y as usize * self.width + x as usize;
        self.covered(i).then(|| self.depth[i])
    }

    /// Whether a point at pixel `(u, v)` and z-depth `depth` is not hidden:
    /// some covered pixel in the 3x3 neighbourhood has depth within `tol`.
    /// The neighbourhood admits vertices lying exactly on silhouettes.
    pub fn visible(&self, u: f64, v: f64, depth: f64, tol: f64) -> bool {
        let (x, y) = (u.round(), v.round());
        for dy in -1..=1 {
            for dx in -1..=1 {
                let (px, py) = (x + dx as f64, y + dy as f64);
                if px < 0.0 || py < 0.0 || px >= self.width as f64 || py >= self.height as f64 {
                    continue;
                }
                let i = py as usize * self.width + px as usize;
                if self.covered(i) && depth <= self.depth[i] + tol {
                    return true;
                }
            }
        }
        false
    }
}

pub fn rasterize(mesh: &TriangleMesh, cam: &Camera) -> RasterBuffer {
    let (w, h) = (cam.width, cam.height);
    let mut buf = RasterBuffer {
        width: w,
        height: h,
        depth: vec![f64::INFINITY; w * h],
        face: vec![NO_FACE; w * h],
        bary: vec![[0.0; 3]; w * h],
    };
    let pc: Vec<Vec3> = mesh.vertices().iter().map(|p| cam.world_to_camera(p)).collect();
    let near = 1e-9;

    for (fi, f) in mesh.faces().iter().enumerate() {
        let (a, b, c) = (pc[f[0]], pc[f[1]], pc[f[2]]);
        if -a.z <= near || -b.z <= near || -c.z <= near {
            // triangles crossing the camera plane are skipped
            continue;
        }
        let proj = [a, b, c].map(|p| cam.project_camera(&p).unwrap());
        let umin = proj.iter().map(|p| p.u).fold(f64::INFINITY, f64::min).ceil().max(0.0);
        let umax = proj.iter().map(|p| p.u).fold(f64::NEG_INFINITY, f64::max).floor().min((w - 1) as f64);
        let vmin = proj.iter().map(|p| p.v).fold(f64::INFINITY, f64::min).ceil().max(0.0);
        let vmax = proj.iter().map(|p| p.v).fold(f64::NEG_INFINITY, f64::max).floor().min((h - 1) as f64);
        if umin > umax || vmin > vmax {
            continue;
        }
        let e1 = b - a;
        let e2 = c - a;
        for y in vmin as usize..=vmax as usize {
            for x in umin as usize..=umax as usize {
                // Moller-Trumbore from the camera origin
                let d = cam.camera_ray(x as f64, y as f64);
                let p = d.cross(&e2);
                let det = e1.dot(&p);
                if det.abs() < 1e-300 {
                    continue;
                }
                let inv = 1.0 / det;
                let s = -a;
                let bu = s.dot(&p) * inv;
                let q = s.cross(&e1);
                let bv = d.dot(&q) * inv;
                let tol = -1e-12;
                if bu < tol || bv < tol || bu + bv > 1.0 - tol {
                    continue;
                }
                let t = e2.dot(&q) * inv; // z-depth since d.z = -1
                let i = y * w + x;
                if t > 0.0 && t < buf.depth[i] {
                    buf.depth[i] = t;
                    buf.face[i] = fi;
                    buf.bary[i] = [1.0 - bu - bv, bu, bv];
                }
            }
        }
    }
    buf
}

/// Visible-surface depth and camera-space normals of a mesh.
#[derive(Debug, Clone)]
pub struct DepthNormals {
    pub normals: ImageGrid,
    pub depth: ImageGrid,
}

impl DepthNormals {
    pub fn mask(&self) -> &[bool] {
        self.depth.mask()
    }
}

/// Projects the mesh into the camera: z-buffered depth plus camera-space
/// normals interpolated from area-weighted vertex normals.
pub fn project_depth_normals(mesh: &TriangleMesh, cam: &Camera) -> DepthNormals {
    let buf = rasterize(mesh, cam);
    let vn: Vec<Vec3> = mesh
        .vertex_normals()
        .iter()
        .map(|n| cam.direction_to_camera(n))
        .collect();
    let faces = mesh.faces();
    let n = buf.width * buf.height;
    let mut normals = ImageGrid::new(buf.width, buf.height, 3);
    let mut depth = ImageGrid::new(buf.width, buf.height, 1);
    for i in 0..n {
        if !buf.covered(i) {
            normals.set_valid(i, false);
            depth.set_valid(i, false);
            continue;
        }
        let f = faces[buf.face[i]];
        let b = buf.bary[i];
        let nrm = vn[f[0]] * b[0] + vn[f[1]] * b[1] + vn[f[2]] * b[2];
        let len = nrm.norm();
        if len == 0.0 {
            normals.set_valid(i, false);
            depth.set_valid(i, false);
            continue;
        }
        normals.set_vec3(i, nrm / len);
        depth.pixel_mut(i)[0] = buf.depth[i];
    }
    if depth.valid_count() == 0 {
        log::warn!("mesh does not cover any pixel of the camera");
    }
    DepthNormals { normals, depth }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::meshkit::shapes;

    #[test]
    fn frontal_quad_fills_frame_with_z_normal() {
        let cam = Camera::look_at(Vec3::new(0.0, 0.0, 2.0), Vec3::zeros(), Vec3::y(), 20.0, 32, 24);
        let s = 10.0;
        let quad = TriangleMesh::new(
            vec![
                Vec3::new(-s, -s, 0.0),
                Vec3::new(s, -s, 0.0),
                Vec3::new(s, s, 0.0),
                Vec3::new(-s, s, 0.0),
            ],
            vec![[0, 1, 2], [0, 2, 3]],
        )
        .unwrap();
        let dn = project_depth_normals(&quad, &cam);
        assert_eq!(dn.depth.valid_count(), 32 * 24);
        for i in 0..dn.normals.len() {
            assert!((dn.normals.vec3(i) - Vec3::z()).norm() < 1e-12);
            assert!((dn.depth.pixel(i)[0] - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn back_hemisphere_is_occluded() {
        let cam = Camera::look_at(Vec3::new(0.0, 0.0, 4.0), Vec3::zeros(), Vec3::y(), 60.0, 64, 64);
        let sphere = shapes::icosphere(3);
        let buf = rasterize(&sphere, &cam);
        for i in 0..buf.face.len() {
            if buf.covered(i) {
                let c = sphere.face_centroid(buf.face[i]);
                assert!(c.z > -0.2, "pixel {i} shows a back face");
            }
        }
        assert!(buf.coverage() > 100);
    }

    #[test]
    fn mesh_behind_camera_is_empty() {
        let cam = Camera::look_at(Vec3::new(0.0, 0.0, 4.0), Vec3::new(0.0, 0.0, 10.0), Vec3::y(), 60.0, 16, 16);
        let dn = project_depth_normals(&shapes::icosphere(1), &cam);
        assert_eq!(dn.depth.valid_count(), 0);
    }
}
