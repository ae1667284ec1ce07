use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::Matrix3;

use crate::error::{Error, Result};
use crate::meshkit::Vec3;

/// Pinhole camera. Camera space looks down `-z` with `+y` up, so surfaces
/// facing the camera have normals with positive `z` (view vector `[0 0 1]`).
/// Pixel `(i, j)` has its center at continuous coordinates `(i, j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Camera {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
    /// World-to-camera rotation.
    pub rotation: Matrix3<f64>,
    /// World-to-camera translation.
    pub translation: Vec3,
}

/// Projected point: pixel coordinates and z-depth (distance along the optical axis).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub u: f64,
    pub v: f64,
    pub depth: f64,
}

impl Camera {
    /// Camera at `eye` looking at `target`, principal point at the image center.
    pub fn look_at(eye: Vec3, target: Vec3, up: Vec3, focal: f64, width: usize, height: usize) -> Self {
        let back = (eye - target).normalize();
        let right = up.cross(&back).normalize();
        let true_up = back.cross(&right);
        // rows are the camera axes expressed in world coordinates
        let rotation = Matrix3::from_rows(&[right.transpose(), true_up.transpose(), back.transpose()]);
        let translation = -(rotation * eye);
        Camera {
            fx: focal,
            fy: focal,
            cx: (width as f64 - 1.0) / 2.0,
            cy: (height as f64 - 1.0) / 2.0,
            width,
            height,
            rotation,
            translation,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let rtr = self.rotation.transpose() * self.rotation;
        let err = (rtr - Matrix3::identity()).abs().max();
        if err > 1e-9 {
            return Err(Error::Argument(format!("camera rotation not orthonormal (error {err:e})")));
        }
        if self.rotation.determinant() < 0.0 {
            return Err(Error::Argument("camera rotation has determinant -1".into()));
        }
        if !(self.fx > 0.0 && self.fy > 0.0) || self.width == 0 || self.height == 0 {
            return Err(Error::Argument("camera intrinsics must be positive".into()));
        }
        Ok(())
    }

    pub fn world_to_camera(&self, p: &Vec3) -> Vec3 {
        self.rotation * p + self.translation
    }

    /// Camera-to-world rotation applied to a direction.
    pub fn direction_to_world(&self, d: &Vec3) -> Vec3 {
        self.rotation.transpose() * d
    }

    pub fn direction_to_camera(&self, d: &Vec3) -> Vec3 {
        self.rotation * d
    }

    pub fn center(&self) -> Vec3 {
        -(self.rotation.transpose() * self.translation)
    }

    pub fn project_camera(&self, pc: &Vec3) -> Option<Projection> {
        let depth = -pc.z;
        if depth <= 0.0 {
            return None;
        }
        Some(Projection {
            u: self.cx + self.fx * pc.x / depth,
            v: self.cy - self.fy * pc.y / depth,
            depth,
        })
    }

    pub fn project(&self, p: &Vec3) -> Option<Projection> {
        self.project_camera(&self.world_to_camera(p))
    }

    /// Camera-space ray direction through pixel `(u, v)` with unit z-depth.
    pub fn camera_ray(&self, u: f64, v: f64) -> Vec3 {
        Vec3::new((u - self.cx) / self.fx, -(v - self.cy) / self.fy, -1.0)
    }

    /// World-space ray origin and unit direction through pixel `(u, v)`.
    pub fn world_ray(&self, u: f64, v: f64) -> (Vec3, Vec3) {
        (self.center(), self.direction_to_world(&self.camera_ray(u, v)).normalize())
    }

    pub fn in_image(&self, p: &Projection) -> bool {
        p.u >= 0.0 && p.v >= 0.0 && p.u <= (self.width - 1) as f64 && p.v <= (self.height - 1) as f64
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "fx {}\nfy {}\ncx {}\ncy {}", self.fx, self.fy, self.cx, self.cy).unwrap();
        writeln!(s, "width {}\nheight {}", self.width, self.height).unwrap();
        let r = &self.rotation;
        writeln!(
            s,
            "R {} {} {} {} {} {} {} {} {}",
            r[(0, 0)],
            r[(0, 1)],
            r[(0, 2)],
            r[(1, 0)],
            r[(1, 1)],
            r[(1, 2)],
            r[(2, 0)],
            r[(2, 1)],
            r[(2, 2)]
        )
        .unwrap();
        writeln!(s, "t {} {} {}", self.translation.x, self.translation.y, self.translation.z).unwrap();
        s
    }

    pub fn from_text(text: &str, path: &Path) -> Result<Self> {
        let mut fx = None;
        let mut fy = None;
        let mut cx = None;
        let mut cy = None;
        let mut width = None;
        let mut height = None;
        let mut rot = None;
        let mut t = None;
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            let mut tok = line.split_whitespace();
            let Some(key) = tok.next() else { continue };
            let vals: Vec<f64> = tok
                .map(|v| v.parse().map_err(|_| Error::format(path, n + 1, format!("bad value `{v}`"))))
                .collect::<Result<_>>()?;
            let expect = |k: usize| -> Result<()> {
                if vals.len() == k {
                    Ok(())
                } else {
                    Err(Error::format(path, n + 1, format!("`{key}` needs {k} values")))
                }
            };
            match key {
                "fx" | "fy" | "cx" | "cy" | "width" | "height" => {
                    expect(1)?;
                    let v = vals[0];
                    match key {
                        "fx" => fx = Some(v),
                        "fy" => fy = Some(v),
                        "cx" => cx = Some(v),
                        "cy" => cy = Some(v),
                        "width" => width = Some(v as usize),
                        _ => height = Some(v as usize),
                    }
                }
                "R" => {
                    expect(9)?;
                    rot = Some(Matrix3::from_row_slice(&vals));
                }
                "t" => {
                    expect(3)?;
                    t = Some(Vec3::new(vals[0], vals[1], vals[2]));
                }
                other => return Err(Error::format(path, n + 1, format!("unknown key `{other}`"))),
            }
        }
        let missing = |k: &str| Error::format(path, 0, format!("missing key `{k}`"));
        let cam = Camera {
            fx: fx.ok_or_else(|| missing("fx"))?,
            fy: fy.ok_or_else(|| missing("fy"))?,
            cx: cx.ok_or_else(|| missing("cx"))?,
            cy: cy.ok_or_else(|| missing("cy"))?,
            width: width.ok_or_else(|| missing("width"))?,
            height: height.ok_or_else(|| missing("height"))?,
            rotation: rot.ok_or_else(|| missing("R"))?,
            translation: t.ok_or_else(|| missing("t"))?,
        };
        cam.validate()?;
        Ok(cam)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text, path)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }
}
