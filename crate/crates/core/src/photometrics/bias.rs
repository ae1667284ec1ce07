//! Low-frequency bias removal: keep the photometric detail, take the
//! low-pass shape from the geometry.

use nalgebra::Matrix3;

use super::camera::Camera;
use super::image::ImageGrid;
use crate::error::{Error, Result};
use crate::meshkit::Vec3;

/// Smoothed normals closer to anti-parallel than this are masked.
const ANTIPARALLEL: f64 = -0.999;

/// Default smoothing scale: 15 px at 1024 px width.
pub fn default_sigma_low(width: usize) -> f64 {
    15.0 * width as f64 / 1024.0
}

/// Gaussian-smoothed, renormalized normal field.
pub fn smooth_normals(normals: &ImageGrid, sigma: f64) -> ImageGrid {
    let mut out = normals.gaussian_blur(sigma);
    for i in 0..out.len() {
        if !out.is_valid(i) {
            continue;
        }
        let v = out.vec3(i);
        let len = v.norm();
        if len > 1e-12 {
            out.set_vec3(i, v / len);
        } else {
            out.set_valid(i, false);
        }
    }
    out
}

/// Smallest rotation taking unit `a` onto unit `b`.
pub fn minimal_rotation(a: &Vec3, b: &Vec3) -> Option<Matrix3<f64>> {
    let c = a.dot(b);
    if c < ANTIPARALLEL {
        return None;
    }
    let v = a.cross(b);
    let k = v.cross_matrix();
    Some(Matrix3::identity() + k + k * k / (1.0 + c))
}

/// Rotates each photometric normal by the rotation that takes its smoothed
/// version onto the smoothed geometric normal.
pub fn bias_correct(photo: &ImageGrid, geo: &ImageGrid, sigma_low: f64) -> Result<ImageGrid> {
    if !photo.same_shape(geo) || photo.channels() != 3 || geo.channels() != 3 {
        return Err(Error::Shape {
            what: "normal map",
            expected: photo.data().len(),
            found: geo.data().len(),
        });
    }
    let mut p = photo.clone();
    p.intersect_mask(geo.mask());
    let mut g = geo.clone();
    g.intersect_mask(p.mask());
    let ps = smooth_normals(&p, sigma_low);
    let gs = smooth_normals(&g, sigma_low);
    let w = p.width();
    Ok(ImageGrid::from_fn(w, p.height(), 3, |x, y| {
        let i = y * w + x;
        if !(p.is_valid(i) && ps.is_valid(i) && gs.is_valid(i)) {
            return None;
        }
        let r = minimal_rotation(&ps.vec3(i), &gs.vec3(i))?;
        let n = (r * p.vec3(i)).normalize();
        Some([n.x, n.y, n.z])
    }))
}

/// Camera-space normals rotated into world space.
pub fn to_world_normals(normals: &ImageGrid, cam: &Camera) -> ImageGrid {
    let mut out = normals.clone();
    for i in 0..out.len() {
        if out.is_valid(i) {
            let n = cam.direction_to_world(&normals.vec3(i));
            out.set_vec3(i, n);
        }
    }
    out
}

/// High-pass band of a normal field: `n - smooth(n)` per pixel.
pub fn high_pass(normals: &ImageGrid, sigma: f64) -> ImageGrid {
    let s = smooth_normals(normals, sigma);
    let mut out = normals.clone();
    out.intersect_mask(s.mask());
    for i in 0..out.len() {
        if out.is_valid(i) {
            out.set_vec3(i, normals.vec3(i) - s.vec3(i));
        }
    }
    out
}

/// Pearson correlation of two vector fields over pixels valid in both
/// and in `mask` (all components pooled).
pub fn field_correlation(a: &ImageGrid, b: &ImageGrid, mask: Option<&[bool]>) -> f64 {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for i in 0..a.len() {
        if a.is_valid(i) && b.is_valid(i) && mask.is_none_or(|m| m[i]) {
            xs.extend_from_slice(a.pixel(i));
            ys.extend_from_slice(b.pixel(i));
        }
    }
    pearson(&xs, &ys)
}

pub fn pearson(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    if n == 0.0 {
        return 0.0;
    }
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return 0.0;
    }
    sxy / (sxx * syy).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::photometrics::normals::angle_deg;
    use nalgebra::{Rotation3, Unit};

    fn smooth_field(w: usize, h: usize) -> ImageGrid {
        ImageGrid::from_fn(w, h, 3, |x, y| {
            let n = Vec3::new(0.3 * (x as f64 / w as f64 - 0.5), 0.2 * (y as f64 / h as f64 - 0.5), 1.0).normalize();
            Some([n.x, n.y, n.z])
        })
    }

    #[test]
    fn identical_fields_are_unchanged() {
        let f = smooth_field(40, 30);
        let out = bias_correct(&f, &f, 4.0).unwrap();
        for i in 0..f.len() {
            assert!((out.vec3(i) - f.vec3(i)).norm() < 1e-6);
        }
    }

    #[test]
    fn global_rotation_is_removed() {
        let geo = smooth_field(48, 40);
        let rot = Rotation3::from_axis_angle(&Unit::new_normalize(Vec3::new(1.0, 2.0, 0.0)), 5f64.to_radians());
        let mut photo = geo.clone();
        for i in 0..photo.len() {
            photo.set_vec3(i, rot * geo.vec3(i));
        }
        let out = bias_correct(&photo, &geo, 6.0).unwrap();
        for i in 0..out.len() {
            assert!(angle_deg(&out.vec3(i), &geo.vec3(i)) < 0.1);
        }
    }

    #[test]
    fn minimal_rotation_maps_a_to_b() {
        let a = Vec3::new(0.2, -0.4, 0.9).normalize();
        let b = Vec3::new(-0.5, 0.1, 0.8).normalize();
        let r = minimal_rotation(&a, &b).unwrap();
        assert!((r * a - b).norm() < 1e-12);
        assert!((r.determinant() - 1.0).abs() < 1e-12);
        assert!(minimal_rotation(&a, &-a).is_none());
    }

    #[test]
    fn world_rotation_matches_matrix_product() {
        let cam = Camera::look_at(Vec3::new(5.0, 0.0, 0.0), Vec3::zeros(), Vec3::y(), 100.0, 2, 2);
        let mut n = ImageGrid::new(2, 2, 3);
        for i in 0..4 {
            n.set_vec3(i, Vec3::z());
        }
        let w = to_world_normals(&n, &cam);
        let expect = cam.rotation.transpose() * Vec3::z();
        assert!((w.vec3(0) - expect).norm() < 1e-12);
        assert!((w.vec3(0) - Vec3::x()).norm() < 1e-12);
    }
}
