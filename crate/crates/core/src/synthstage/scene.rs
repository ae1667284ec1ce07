use crate::error::{Error, Result};
use crate::meshkit::{TriangleMesh, Vec3};
use crate::photometrics::Camera;

/// Diffuse albedo as a function of the unit direction from the surface center.
#[derive(Debug, Clone, PartialEq)]
pub enum Albedo {
    Constant([f64; 3]),
    /// Latitude/longitude checkerboard with `cells` squares around the equator.
    Checker { a: [f64; 3], b: [f64; 3], cells: usize },
    /// `base * (1 + amplitude * wave_c(w))` with a phase-shifted wave per channel.
    Smooth { base: [f64; 3], amplitude: f64, frequency: f64 },
}

impl Albedo {
    pub fn eval(&self, w: &Vec3) -> [f64; 3] {
        match self {
            Albedo::Constant(c) => *c,
            Albedo::Checker { a, b, cells } => {
                let lon = w.x.atan2(w.z);
                let lat = w.y.clamp(-1.0, 1.0).asin();
                let step = std::f64::consts::TAU / *cells as f64;
                let i = (lon / step).floor() as i64 + (lat / step).floor() as i64;
                if i.rem_euclid(2) == 0 {
                    *a
                } else {
                    *b
                }
            }
            Albedo::Smooth {
                base,
                amplitude,
                frequency,
            } => {
                let f = *frequency;
                let waves = [
                    (f * w.x + 0.3).sin() * (f * w.y + 1.1).cos(),
                    (f * w.y - 0.7).sin() * (f * w.z + 0.4).cos(),
                    (f * w.z + 1.9).sin() * (f * w.x - 0.2).cos(),
                ];
                [0, 1, 2].map(|c| base[c] * (1.0 + amplitude * waves[c]))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Material {
    pub albedo: Albedo,
    pub specular_albedo: f64,
    /// Beckmann RMS slope.
    pub roughness: f64,
    pub ior: f64,
}

impl Default for Material {
    fn default() -> Self {
        Material {
            albedo: Albedo::Constant([1.0; 3]),
            specular_albedo: 0.0,
            roughness: 0.3,
            ior: 1.4,
        }
    }
}

/// Geometry of a synthetic subject.
#[derive(Debug, Clone, PartialEq)]
pub enum Surface {
    Sphere { center: Vec3, radius: f64 },
    /// `r(w) = radius (1 + amplitude sin(k w_x) sin(k w_y) sin(k w_z))`.
    Bumpy { center: Vec3, radius: f64, amplitude: f64, frequency: f64 },
    Mesh(TriangleMesh),
}

/// Ray-surface hit in world space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    pub t: f64,
    pub point: Vec3,
    pub normal: Vec3,
}

pub fn bump(w: &Vec3, k: f64) -> f64 {
    (k * w.x).sin() * (k * w.y).sin() * (k * w.z).sin()
}

fn bump_grad(w: &Vec3, k: f64) -> Vec3 {
    let (sx, sy, sz) = ((k * w.x).sin(), (k * w.y).sin(), (k * w.z).sin());
    let (cx, cy, cz) = ((k * w.x).cos(), (k * w.y).cos(), (k * w.z).cos());
    Vec3::new(k * cx * sy * sz, k * sx * cy * sz, k * sx * sy * cz)
}

impl Surface {
    pub fn center(&self) -> Vec3 {
        match self {
            Surface::Sphere { center, .. } | Surface::Bumpy { center, .. } => *center,
            Surface::Mesh(m) => {
                m.vertices().iter().sum::<Vec3>() / m.num_vertices().max(1) as f64
            }
        }
    }

    /// Radius of the bumpy surface along unit direction `w`.
    pub fn radius_along(&self, w: &Vec3) -> Option<f64> {
        match self {
            Surface::Sphere { radius, .. } => Some(*radius),
            Surface::Bumpy {
                radius,
                amplitude,
                frequency,
                ..
            } => Some(radius * (1.0 + amplitude * bump(w, *frequency))),
            Surface::Mesh(_) => None,
        }
    }

    /// Analytic outward unit normal at a surface point (primitives only).
    pub fn normal_at(&self, p: &Vec3) -> Option<Vec3> {
        match self {
            Surface::Sphere { center, .. } => Some((p - center).normalize()),
            Surface::Bumpy {
                center,
                radius,
                amplitude,
                frequency,
            } => {
                let q = p - center;
                let r = q.norm();
                let w = q / r;
                let g = bump_grad(&w, *frequency);
                let tangential = g - w * w.dot(&g);
                Some((w - tangential * (radius * amplitude / r)).normalize())
            }
            Surface::Mesh(_) => None,
        }
    }

    /// Nearest intersection with the ray `origin + t dir` (`dir` unit), primitives only.
    pub fn intersect(&self, origin: &Vec3, dir: &Vec3) -> Option<Hit> {
        match self {
            Surface::Sphere { center, radius } => {
                let t = ray_sphere(origin, dir, center, *radius)?;
                let point = origin + dir * t;
                Some(Hit {
                    t,
                    point,
                    normal: (point - center) / *radius,
                })
            }
            Surface::Bumpy {
                center,
                radius,
                amplitude,
                frequency,
            } => {
                let outer = radius * (1.0 + amplitude.abs());
                let t0 = ray_sphere(origin, dir, center, outer)?;
                let f = |t: f64| {
                    let q = origin + dir * t - center;
                    let r = q.norm();
                    r - radius * (1.0 + amplitude * bump(&(q / r), *frequency))
                };
                // conservative Lipschitz bound of f along the ray
                let lip = 1.0 + radius * amplitude.abs() * frequency * 3f64.sqrt() / (radius * (1.0 - amplitude.abs()));
                let far = t0 + 2.0 * outer;
                let mut t = t0;
                let mut prev = t;
                let mut hit = None;
                for _ in 0..10_000 {
                    let v = f(t);
                    if v <= 0.0 {
                        hit = Some((prev, t));
                        break;
                    }
                    prev = t;
                    t += (v / lip).max(1e-7 * outer);
                    if t > far {
                        break;
                    }
                }
                let (mut lo, mut hi) = hit?;
                for _ in 0..80 {
                    let mid = 0.5 * (lo + hi);
                    if f(mid) > 0.0 {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                let t = 0.5 * (lo + hi);
                let point = origin + dir * t;
                Some(Hit {
                    t,
                    point,
                    normal: self.normal_at(&point)?,
                })
            }
            Surface::Mesh(_) => None,
        }
    }

    /// Triangle mesh of the surface from an icosphere of `level`.
    pub fn tessellate(&self, level: usize) -> Result<TriangleMesh> {
        match self {
            Surface::Mesh(m) => Ok(m.clone()),
            _ => {
                let ico = crate::meshkit::shapes::icosphere(level);
                let c = self.center();
                let verts = ico
                    .vertices()
                    .iter()
                    .map(|w| c + w * self.radius_along(w).unwrap())
                    .collect();
                ico.with_vertices(verts)
            }
        }
    }
}

fn ray_sphere(origin: &Vec3, dir: &Vec3, center: &Vec3, radius: f64) -> Option<f64> {
    let oc = origin - center;
    let b = oc.dot(dir);
    let c = oc.norm_squared() - radius * radius;
    let disc = b * b - c;
    if disc < 0.0 {
        return None;
    }
    let s = disc.sqrt();
    // numerically stable root pair
    let q = -b - s.copysign(b);
    let (r1, r2) = if q != 0.0 { (q, c / q) } else { (-b, -b) };
    let (t0, t1) = (r1.min(r2), r1.max(r2));
    if t0 > 0.0 {
        Some(t0)
    } else if t1 > 0.0 {
        Some(t1)
    } else {
        None
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub surface: Surface,
    pub material: Material,
    pub cameras: Vec<Camera>,
}

impl Scene {
    pub fn new(surface: Surface, material: Material) -> Result<Self> {
        if !(material.roughness > 0.0) {
            return Err(Error::Argument("roughness must be positive".into()));
        }
        if material.specular_albedo < 0.0 {
            return Err(Error::Argument("specular albedo must be non-negative".into()));
        }
        Ok(Scene {
            surface,
            material,
            cameras: Vec::new(),
        })
    }

    pub fn albedo_at(&self, p: &Vec3) -> [f64; 3] {
        let w = (p - self.surface.center()).normalize();
        self.material.albedo.eval(&w)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ray_hits_unit_sphere_front() {
        let s = Surface::Sphere {
            center: Vec3::zeros(),
            radius: 1.0,
        };
        let h = s.intersect(&Vec3::new(0.0, 0.0, 5.0), &-Vec3::z()).unwrap();
        assert!((h.t - 4.0).abs() < 1e-12);
        assert!((h.normal - Vec3::z()).norm() < 1e-12);
    }

    #[test]
    fn bumpy_hit_lies_on_surface() {
        let s = Surface::Bumpy {
            center: Vec3::zeros(),
            radius: 1.0,
            amplitude: 0.05,
            frequency: 5.0,
        };
        let o = Vec3::new(0.3, 0.2, 5.0);
        let d = (Vec3::new(0.1, -0.2, 0.0) - o).normalize();
        let h = s.intersect(&o, &d).unwrap();
        let w = h.point.normalize();
        assert!((h.point.norm() - s.radius_along(&w).unwrap()).abs() < 1e-10);
    }

    #[test]
    fn bumpy_normal_matches_finite_differences() {
        let s = Surface::Bumpy {
            center: Vec3::zeros(),
            radius: 1.0,
            amplitude: 0.05,
            frequency: 5.0,
        };
        let w = Vec3::new(0.4, 0.3, 0.85).normalize();
        let p = w * s.radius_along(&w).unwrap();
        let n = s.normal_at(&p).unwrap();
        // tangent vectors by perturbing the direction
        let e = 1e-6;
        let t1 = Vec3::new(1.0, 0.0, 0.0).cross(&w).normalize();
        let t2 = w.cross(&t1);
        let at = |d: Vec3| {
            let u = (w + d).normalize();
            u * s.radius_along(&u).unwrap()
        };
        let d1 = at(t1 * e) - at(-t1 * e);
        let d2 = at(t2 * e) - at(-t2 * e);
        let fd = d1.cross(&d2).normalize();
        assert!((fd - n).norm() < 1e-6, "{fd} {n}");
    }

    #[test]
    fn checker_alternates() {
        let a = Albedo::Checker {
            a: [1.0; 3],
            b: [0.0; 3],
            cells: 8,
        };
        let step = std::f64::consts::TAU / 8.0;
        let w1 = Vec3::new((0.5 * step).sin(), 0.0, (0.5 * step).cos());
        let w2 = Vec3::new((1.5 * step).sin(), 0.0, (1.5 * step).cos());
        assert_ne!(a.eval(&w1), a.eval(&w2));
    }
}
