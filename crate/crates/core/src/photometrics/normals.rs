//! Per-pixel normal and albedo estimation from spherical gradient images.

use std::fmt;
use std::path::Path;

use super::image::ImageGrid;
use crate::error::{Error, Result};
use crate::meshkit::Vec3;
use crate::parallel;

/// Masking floor relative to the 99th percentile of the constant image.
pub const INTENSITY_FLOOR: f64 = 0.01;

/// Floor on the length of an un-normalized difference vector, relative to C.
const DIRECTION_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Polarization {
    Cross,
    Parallel,
}

impl fmt::Display for Polarization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Polarization::Cross => "cross",
            Polarization::Parallel => "parallel",
        })
    }
}

/// File stems of the seven conditions, in storage order.
pub const CONDITION_NAMES: [&str; 7] = ["X", "Y", "Z", "C", "Xc", "Yc", "Zc"];

/// Seven illumination conditions of one view: gradients X, Y, Z, the
/// constant C, and the complements (`xc` = X̄ and so on).
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSet {
    pub x: ImageGrid,
    pub y: ImageGrid,
    pub z: ImageGrid,
    pub c: ImageGrid,
    pub xc: ImageGrid,
    pub yc: ImageGrid,
    pub zc: ImageGrid,
    pub polarization: Polarization,
    pub view: usize,
}

impl GradientSet {
    /// Builds a set from grids in [`CONDITION_NAMES`] order; masks are intersected.
    pub fn new(grids: [ImageGrid; 7], polarization: Polarization, view: usize) -> Result<Self> {
        let first = &grids[0];
        for g in &grids[1..] {
            if !g.same_shape(first) || g.channels() != first.channels() {
                return Err(Error::Shape {
                    what: "condition image",
                    expected: first.data().len(),
                    found: g.data().len(),
                });
            }
        }
        let mut mask = first.mask().to_vec();
        for g in &grids[1..] {
            for (m, &o) in mask.iter_mut().zip(g.mask()) {
                *m = *m && o;
            }
        }
        let [mut x, mut y, mut z, mut c, mut xc, mut yc, mut zc] = grids;
        for g in [&mut x, &mut y, &mut z, &mut c, &mut xc, &mut yc, &mut zc] {
            g.intersect_mask(&mask);
        }
        Ok(GradientSet {
            x,
            y,
            z,
            c,
            xc,
            yc,
            zc,
            polarization,
            view,
        })
    }

    pub fn grids(&self) -> [&ImageGrid; 7] {
        [&self.x, &self.y, &self.z, &self.c, &self.xc, &self.yc, &self.zc]
    }

    pub fn into_grids(self) -> [ImageGrid; 7] {
        [self.x, self.y, self.z, self.c, self.xc, self.yc, self.zc]
    }

    pub fn width(&self) -> usize {
        self.c.width()
    }

    pub fn height(&self) -> usize {
        self.c.height()
    }

    pub fn mask(&self) -> &[bool] {
        self.c.mask()
    }

    /// Writes `<prefix>_<cond>.pfm` for every condition.
    pub fn save(&self, dir: &Path, prefix: &str) -> Result<()> {
        for (name, g) in CONDITION_NAMES.iter().zip(self.grids()) {
            g.save_pfm(dir.join(format!("{prefix}_{name}.pfm")))?;
        }
        Ok(())
    }

    pub fn load(dir: &Path, prefix: &str, polarization: Polarization, view: usize) -> Result<Self> {
        let mut grids = Vec::with_capacity(7);
        for name in CONDITION_NAMES {
            grids.push(ImageGrid::load_pfm(dir.join(format!("{prefix}_{name}.pfm")))?);
        }
        let grids: [ImageGrid; 7] = grids.try_into().unwrap();
        GradientSet::new(grids, polarization, view)
    }
}

fn floor_mask(c: &ImageGrid) -> Vec<bool> {
    let floor = INTENSITY_FLOOR * c.gray_quantile(0.99);
    (0..c.len()).map(|i| c.is_valid(i) && c.gray(i) > floor && c.gray(i) > 0.0).collect()
}

fn normals_from<F>(w: usize, h: usize, f: F) -> ImageGrid
where
    F: Fn(usize) -> Option<Vec3> + Sync + Send,
{
    ImageGrid::from_fn(w, h, 3, |x, y| f(y * w + x).map(|n| [n.x, n.y, n.z]))
}

/// Normals `normalize(X/C - 1/2, Y/C - 1/2, Z/C - 1/2)` from a
/// cross-polarized set; diffuse albedo is the constant image C.
pub fn lambertian_normals(set: &GradientSet) -> Result<(ImageGrid, ImageGrid)> {
    let keep = floor_mask(&set.c);
    let normals = normals_from(set.width(), set.height(), |i| {
        if !keep[i] {
            return None;
        }
        let c = set.c.gray(i);
        let d = Vec3::new(set.x.gray(i) / c - 0.5, set.y.gray(i) / c - 0.5, set.z.gray(i) / c - 0.5);
        let len = d.norm();
        (len > DIRECTION_FLOOR).then(|| d / len)
    });
    let mut albedo = set.c.clone();
    albedo.intersect_mask(normals.mask());
    Ok((normals, albedo))
}

/// Normals from gradient/complement differences `normalize(X - X̄, Y - Ȳ, Z - Z̄)`.
pub fn complement_normals(set: &GradientSet) -> Result<ImageGrid> {
    let keep = floor_mask(&set.c);
    Ok(normals_from(set.width(), set.height(), |i| {
        if !set.c.is_valid(i) {
            return None;
        }
        let d = Vec3::new(
            set.x.gray(i) - set.xc.gray(i),
            set.y.gray(i) - set.yc.gray(i),
            set.z.gray(i) - set.zc.gray(i),
        );
        let len = d.norm();
        // the floor is relative to the pixel's own scale so that a uniform
        // rescale of every input never changes the mask
        let scale = set.x.gray(i) + set.xc.gray(i) + set.y.gray(i) + set.yc.gray(i);
        (keep[i] && len > DIRECTION_FLOOR * scale && len > 0.0).then(|| d / len)
    }))
}

#[derive(Debug, Clone)]
pub struct SpecularEstimate {
    pub normals: ImageGrid,
    pub albedo: ImageGrid,
    /// Reflection-lobe centers `u` per pixel (camera space).
    pub lobe: ImageGrid,
    /// Number of negative specular samples beyond the noise floor that were clamped.
    pub clamped: usize,
}

/// Specular normals from the polarization difference `parallel - cross`:
/// `u = normalize(X_s - C_s/2, ...)`, `n = normalize(u + [0 0 1])`.
pub fn specular_normals(cross: &GradientSet, parallel: &GradientSet) -> Result<SpecularEstimate> {
    for (a, b) in cross.grids().into_iter().zip(parallel.grids()) {
        if !a.same_shape(b) || a.channels() != b.channels() {
            return Err(Error::Shape {
                what: "parallel/cross image",
                expected: a.data().len(),
                found: b.data().len(),
            });
        }
    }
    let noise = 1e-6 * parallel.c.gray_quantile(0.99).max(f64::MIN_POSITIVE);
    let mut clamped = 0;
    let mut spec = Vec::with_capacity(7);
    for (a, b) in cross.grids().into_iter().zip(parallel.grids()) {
        let mut d = b.zip_with(a, |p, c| p - c)?;
        let mut data = d.data().to_vec();
        for v in &mut data {
            if *v < 0.0 {
                if *v < -noise {
                    clamped += 1;
                }
                *v = 0.0;
            }
        }
        d = ImageGrid::from_parts(d.width(), d.height(), d.channels(), data, d.mask().to_vec())?;
        spec.push(d);
    }
    let spec = GradientSet::new(spec.try_into().unwrap(), Polarization::Parallel, parallel.view)?;
    if clamped > 0 {
        log::warn!("view {}: clamped {clamped} negative specular samples", spec.view);
    }
    let keep = floor_mask(&spec.c);
    let (w, h) = (spec.width(), spec.height());
    let lobe_of = |i: usize| -> Option<Vec3> {
        if !keep[i] {
            return None;
        }
        let half = 0.5 * spec.c.gray(i);
        let u = Vec3::new(spec.x.gray(i) - half, spec.y.gray(i) - half, spec.z.gray(i) - half);
        let len = u.norm();
        (len > DIRECTION_FLOOR * spec.c.gray(i)).then(|| u / len)
    };
    let lobe = normals_from(w, h, lobe_of);
    let normals = normals_from(w, h, |i| {
        if !lobe.is_valid(i) {
            return None;
        }
        let s = lobe.vec3(i) + Vec3::z();
        let len = s.norm();
        // u opposite the view direction leaves the half vector undefined
        (len > 1e-9).then(|| s / len)
    });
    let mut albedo = spec.c.clone();
    albedo.intersect_mask(normals.mask());
    let mut lobe = lobe;
    lobe.intersect_mask(normals.mask());
    Ok(SpecularEstimate {
        normals,
        albedo,
        lobe,
        clamped,
    })
}

/// Mirror reflection of direction `v` about unit normal `n`.
pub fn reflect(v: &Vec3, n: &Vec3) -> Vec3 {
    n * (2.0 * n.dot(v)) - v
}

/// Angle in degrees between two unit vectors.
pub fn angle_deg(a: &Vec3, b: &Vec3) -> f64 {
    // atan2 stays accurate for tiny angles where acos does not
    a.cross(b).norm().atan2(a.dot(b)).to_degrees()
}

/// Mean per-pixel angle (degrees) over pixels valid in both maps.
pub fn mean_angular_error(a: &ImageGrid, b: &ImageGrid) -> Option<f64> {
    let errs = parallel::map_range(a.len(), |i| {
        (a.is_valid(i) && b.is_valid(i)).then(|| angle_deg(&a.vec3(i), &b.vec3(i)))
    });
    let v: Vec<f64> = errs.into_iter().flatten().collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}
