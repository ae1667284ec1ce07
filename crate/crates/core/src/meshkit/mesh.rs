use std::collections::{BTreeMap, HashMap};

use nalgebra::Vector3;

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;

pub const NORMAL: &str = "normal";
pub const COLOR: &str = "color";
pub const SCALAR_PREFIX: &str = "scalar:";

/// Per-vertex attribute channel.
#[derive(Debug, Clone, PartialEq)]
pub enum Attribute {
    Color(Vec<[f64; 3]>),
    Normal(Vec<Vec3>),
    Scalar(Vec<f64>),
}

impl Attribute {
    pub fn len(&self) -> usize {
        match self {
            Attribute::Color(v) => v.len(),
            Attribute::Normal(v) => v.len(),
            Attribute::Scalar(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Sorted vertex pair identifying an undirected edge.
pub type Edge = (usize, usize);

pub fn edge_key(a: usize, b: usize) -> Edge {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Indexed triangle mesh with counter-clockwise faces and named vertex attributes.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangleMesh {
    vertices: Vec<Vec3>,
    faces: Vec<[usize; 3]>,
    attributes: BTreeMap<String, Attribute>,
}

impl TriangleMesh {
    /// Validates indices, degeneracy and edge-manifoldness.
    pub fn new(vertices: Vec<Vec3>, faces: Vec<[usize; 3]>) -> Result<Self> {
        let n = vertices.len();
        let mut edge_faces: HashMap<Edge, u8> = HashMap::with_capacity(faces.len() * 3 / 2);
        for (fi, f) in faces.iter().enumerate() {
            if f.iter().any(|&i| i >= n) {
                return Err(Error::Argument(format!(
                    "face {fi} references vertex out of range 0..{n}: {f:?}"
                )));
            }
            if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                return Err(Error::DegenerateFace {
                    face: fi,
                    reason: "repeated vertex index",
                });
            }
            for k in 0..3 {
                let e = edge_key(f[k], f[(k + 1) % 3]);
                let c = edge_faces.entry(e).or_insert(0);
                *c += 1;
                if *c > 2 {
                    return Err(Error::NonManifold(e.0, e.1));
                }
            }
        }
        Ok(TriangleMesh {
            vertices,
            faces,
            attributes: BTreeMap::new(),
        })
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_faces(&self) -> usize {
        self.faces.len()
    }

    pub fn attributes(&self) -> &BTreeMap<String, Attribute> {
        &self.attributes
    }

    pub fn attribute(&self, name: &str) -> Option<&Attribute> {
        self.attributes.get(name)
    }

    /// Attaches a per-vertex channel. Normal channels are renormalized.
    pub fn set_attribute(&mut self, name: impl Into<String>, attr: Attribute) -> Result<()> {
        if attr.len() != self.vertices.len() {
            return Err(Error::Shape {
                what: "vertex attribute",
                expected: self.vertices.len(),
                found: attr.len(),
            });
        }
        let attr = match attr {
            Attribute::Normal(ns) => Attribute::Normal(
                ns.into_iter()
                    .map(|n| {
                        let len = n.norm();
                        if len > 0.0 {
                            n / len
                        } else {
                            n
                        }
                    })
                    .collect(),
            ),
            other => other,
        };
        self.attributes.insert(name.into(), attr);
        Ok(())
    }

    pub fn colors(&self) -> Option<&[[f64; 3]]> {
        match self.attributes.get(COLOR) {
            Some(Attribute::Color(c)) => Some(c),
            _ => None,
        }
    }

    pub fn normals(&self, name: &str) -> Option<&[Vec3]> {
        match self.attributes.get(name) {
            Some(Attribute::Normal(c)) => Some(c),
            _ => None,
        }
    }

    pub fn scalars(&self, name: &str) -> Option<&[f64]> {
        match self.attributes.get(name) {
            Some(Attribute::Scalar(c)) => Some(c),
            _ => None,
        }
    }

    /// Same connectivity and attributes, new positions.
    pub fn with_vertices(&self, vertices: Vec<Vec3>) -> Result<Self> {
        if vertices.len() != self.vertices.len() {
            return Err(Error::Shape {
                what: "vertex positions",
                expected: self.vertices.len(),
                found: vertices.len(),
            });
        }
        Ok(TriangleMesh {
            vertices,
            faces: self.faces.clone(),
            attributes: self.attributes.clone(),
        })
    }

    pub fn face_normal(&self, f: usize) -> Vec3 {
        let [a, b, c] = self.faces[f];
        let n = (self.vertices[b] - self.vertices[a]).cross(&(self.vertices[c] - self.vertices[a]));
        let len = n.norm();
        if len > 0.0 {
            n / len
        } else {
            n
        }
    }

    pub fn face_area(&self, f: usize) -> f64 {
        let [a, b, c] = self.faces[f];
        0.5 * (self.vertices[b] - self.vertices[a])
            .cross(&(self.vertices[c] - self.vertices[a]))
            .norm()
    }

    pub fn face_centroid(&self, f: usize) -> Vec3 {
        let [a, b, c] = self.faces[f];
        (self.vertices[a] + self.vertices[b] + self.vertices[c]) / 3.0
    }

    /// Area-weighted vertex normals (zero for isolated vertices).
    pub fn vertex_normals(&self) -> Vec<Vec3> {
        let mut acc = vec![Vec3::zeros(); self.vertices.len()];
        for &[a, b, c] in &self.faces {
            let n = (self.vertices[b] - self.vertices[a]).cross(&(self.vertices[c] - self.vertices[a]));
            acc[a] += n;
            acc[b] += n;
            acc[c] += n;
        }
        for n in &mut acc {
            let len = n.norm();
            if len > 0.0 {
                *n /= len;
            }
        }
        acc
    }

    /// Sorted unique edge list.
    pub fn edges(&self) -> Vec<Edge> {
        let mut e: Vec<Edge> = self
            .faces
            .iter()
            .flat_map(|f| (0..3).map(move |k| edge_key(f[k], f[(k + 1) % 3])))
            .collect();
        e.sort_unstable();
        e.dedup();
        e
    }

    /// Faces incident to each vertex.
    pub fn vertex_faces(&self) -> Vec<Vec<usize>> {
        let mut vf = vec![Vec::new(); self.vertices.len()];
        for (fi, f) in self.faces.iter().enumerate() {
            for &v in f {
                vf[v].push(fi);
            }
        }
        vf
    }

    /// Axis-aligned bounding box diagonal length.
    pub fn bbox_diagonal(&self) -> f64 {
        if self.vertices.is_empty() {
            return 0.0;
        }
        let mut lo = self.vertices[0];
        let mut hi = self.vertices[0];
        for v in &self.vertices {
            lo = lo.inf(v);
            hi = hi.sup(v);
        }
        (hi - lo).norm()
    }

    /// Keeps only `keep` faces and drops vertices no longer referenced.
    /// Returns the new mesh and the old index of every retained vertex.
    pub fn submesh(&self, keep: impl Fn(&[usize; 3]) -> bool) -> Result<(TriangleMesh, Vec<usize>)> {
        let mut remap = vec![usize::MAX; self.vertices.len()];
        let mut old_of_new = Vec::new();
        let mut faces = Vec::new();
        for f in self.faces.iter().filter(|f| keep(f)) {
            let mut nf = [0; 3];
            for k in 0..3 {
                if remap[f[k]] == usize::MAX {
                    remap[f[k]] = old_of_new.len();
                    old_of_new.push(f[k]);
                }
                nf[k] = remap[f[k]];
            }
            faces.push(nf);
        }
        let vertices = old_of_new.iter().map(|&o| self.vertices[o]).collect();
        let mut mesh = TriangleMesh::new(vertices, faces)?;
        for (name, attr) in &self.attributes {
            let sub = match attr {
                Attribute::Color(c) => Attribute::Color(old_of_new.iter().map(|&o| c[o]).collect()),
                Attribute::Normal(c) => Attribute::Normal(old_of_new.iter().map(|&o| c[o]).collect()),
                Attribute::Scalar(c) => Attribute::Scalar(old_of_new.iter().map(|&o| c[o]).collect()),
            };
            mesh.attributes.insert(name.clone(), sub);
        }
        Ok((mesh, old_of_new))
    }
}
