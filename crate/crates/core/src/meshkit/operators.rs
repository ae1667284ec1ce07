//! Piecewise-linear (hat function) differential operators on triangle meshes.

use std::collections::HashMap;

use super::mesh::{edge_key, Edge, TriangleMesh, Vec3};
use crate::error::{Error, Result};
use crate::linalg::CsrMatrix;

/// Faces with area below this fraction of their squared longest edge are degenerate.
const DEGENERATE_RATIO: f64 = 1e-14;

/// Gradients of the three hat functions of one face, plus the face area.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FaceGradients {
    pub grads: [Vec3; 3],
    pub area: f64,
    pub normal: Vec3,
}

fn check_face(mesh: &TriangleMesh, f: usize) -> Result<(Vec3, f64)> {
    let [a, b, c] = mesh.faces()[f];
    let v = mesh.vertices();
    let cross = (v[b] - v[a]).cross(&(v[c] - v[a]));
    let area = 0.5 * cross.norm();
    let longest = (v[b] - v[a])
        .norm_squared()
        .max((v[c] - v[b]).norm_squared())
        .max((v[a] - v[c]).norm_squared());
    if !(area > DEGENERATE_RATIO * longest) || !area.is_finite() {
        return Err(Error::DegenerateFace {
            face: f,
            reason: "zero area",
        });
    }
    Ok((cross / (2.0 * area), area))
}

/// Per-face hat gradients. `grads[k]` belongs to vertex `faces[f][k]`.
pub fn hat_gradients(mesh: &TriangleMesh) -> Result<Vec<FaceGradients>> {
    let v = mesh.vertices();
    mesh.faces()
        .iter()
        .enumerate()
        .map(|(fi, f)| {
            let (normal, area) = check_face(mesh, fi)?;
            let mut grads = [Vec3::zeros(); 3];
            for k in 0..3 {
                let j = f[(k + 1) % 3];
                let l = f[(k + 2) % 3];
                grads[k] = normal.cross(&(v[l] - v[j])) / (2.0 * area);
            }
            Ok(FaceGradients {
                grads,
                area,
                normal,
            })
        })
        .collect()
}

/// Cotangent edge weights `w_ij = cot(alpha_ij) + cot(beta_ij)`.
#[derive(Debug, Clone)]
pub struct CotanWeights {
    edges: Vec<Edge>,
    weights: Vec<f64>,
    index: HashMap<Edge, usize>,
}

impl CotanWeights {
    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        self.index.get(&edge_key(i, j)).map(|&k| self.weights[k])
    }

    pub fn iter(&self) -> impl Iterator<Item = (Edge, f64)> + '_ {
        self.edges.iter().copied().zip(self.weights.iter().copied())
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    /// Neighbour lists `(j, w_ij)` per vertex.
    pub fn adjacency(&self, num_vertices: usize) -> Vec<Vec<(usize, f64)>> {
        let mut adj = vec![Vec::new(); num_vertices];
        for (&(i, j), &w) in self.edges.iter().zip(&self.weights) {
            adj[i].push((j, w));
            adj[j].push((i, w));
        }
        adj
    }
}

pub fn cotangent_weights(mesh: &TriangleMesh) -> Result<CotanWeights> {
    let v = mesh.vertices();
    let mut acc: HashMap<Edge, f64> = HashMap::with_capacity(mesh.num_faces() * 3 / 2);
    for (fi, f) in mesh.faces().iter().enumerate() {
        check_face(mesh, fi)?;
        for k in 0..3 {
            let o = f[k];
            let i = f[(k + 1) % 3];
            let j = f[(k + 2) % 3];
            let a = v[i] - v[o];
            let b = v[j] - v[o];
            let cot = a.dot(&b) / a.cross(&b).norm();
            *acc.entry(edge_key(i, j)).or_insert(0.0) += cot;
        }
    }
    let mut edges: Vec<Edge> = acc.keys().copied().collect();
    edges.sort_unstable();
    let weights = edges.iter().map(|e| acc[e]).collect();
    let index = edges.iter().enumerate().map(|(k, &e)| (e, k)).collect();
    Ok(CotanWeights {
        edges,
        weights,
        index,
    })
}

/// Stiffness matrix `a_ij = sum_T |T| grad(B_i) . grad(B_j)`: symmetric PSD with zero row sums.
pub fn assemble_laplace(mesh: &TriangleMesh) -> Result<CsrMatrix> {
    let grads = hat_gradients(mesh)?;
    Ok(assemble_from_gradients(mesh, &grads))
}

pub fn assemble_from_gradients(mesh: &TriangleMesh, grads: &[FaceGradients]) -> CsrMatrix {
    let mut t = Vec::with_capacity(mesh.num_faces() * 9);
    for (f, g) in mesh.faces().iter().zip(grads) {
        for a in 0..3 {
            for b in 0..3 {
                t.push((f[a], f[b], g.area * g.grads[a].dot(&g.grads[b])));
            }
        }
    }
    CsrMatrix::from_triplets(mesh.num_vertices(), mesh.num_vertices(), &t)
}

/// Per-face gradient of a per-vertex potential.
pub fn gradient(mesh: &TriangleMesh, grads: &[FaceGradients], phi: &[f64]) -> Vec<Vec3> {
    mesh.faces()
        .iter()
        .zip(grads)
        .map(|(f, g)| (0..3).map(|k| g.grads[k] * phi[f[k]]).sum())
        .collect()
}

/// Vertex divergence of a per-face vector field, projected onto each face plane first.
pub fn divergence(mesh: &TriangleMesh, field: &[Vec3]) -> Result<Vec<f64>> {
    let grads = hat_gradients(mesh)?;
    divergence_with(mesh, &grads, field)
}

pub fn divergence_with(mesh: &TriangleMesh, grads: &[FaceGradients], field: &[Vec3]) -> Result<Vec<f64>> {
    if field.len() != mesh.num_faces() {
        return Err(Error::Shape {
            what: "per-face field",
            expected: mesh.num_faces(),
            found: field.len(),
        });
    }
    let mut div = vec![0.0; mesh.num_vertices()];
    for ((f, g), v) in mesh.faces().iter().zip(grads).zip(field) {
        let tangential = v - g.normal * g.normal.dot(v);
        for k in 0..3 {
            div[f[k]] += g.area * g.grads[k].dot(&tangential);
        }
    }
    Ok(div)
}

/// Matrix part plus one or more right-hand-side channels.
#[derive(Debug, Clone)]
pub struct SparseLinearSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<Vec<f64>>,
}

impl SparseLinearSystem {
    pub fn dimension(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn entries(&self) -> Vec<(usize, usize, f64)> {
        self.matrix.triplets()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::meshkit::shapes;

    fn right_triangle() -> TriangleMesh {
        TriangleMesh::new(vec![Vec3::zeros(), Vec3::x(), Vec3::y()], vec![[0, 1, 2]]).unwrap()
    }

    #[test]
    fn right_triangle_hat_gradient_and_area() {
        let g = hat_gradients(&right_triangle()).unwrap();
        assert!((g[0].grads[0] - Vec3::new(-1.0, -1.0, 0.0)).norm() < 1e-15);
        assert!((g[0].area - 0.5).abs() < 1e-15);
    }

    #[test]
    fn hat_gradients_interpolate_and_sum_to_zero() {
        let m = shapes::icosphere(2);
        let g = hat_gradients(&m).unwrap();
        let v = m.vertices();
        for (f, fg) in m.faces().iter().zip(&g) {
            let sum: Vec3 = fg.grads.iter().sum();
            assert!(sum.norm() < 1e-10);
            for k in 0..3 {
                assert!(fg.grads[k].dot(&fg.normal).abs() < 1e-10);
                // B_k rises by 1 from the opposite edge to vertex k
                let d = v[f[k]] - v[f[(k + 1) % 3]];
                assert!((fg.grads[k].dot(&d) - 1.0).abs() < 1e-9);
                let e = v[f[(k + 2) % 3]] - v[f[(k + 1) % 3]];
                assert!(fg.grads[k].dot(&e).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn equilateral_weights() {
        let single = shapes::equilateral_triangle();
        let w = cotangent_weights(&single).unwrap();
        assert!((w.get(0, 1).unwrap() - 1.0 / 3f64.sqrt()).abs() < 1e-12);

        let h = 3f64.sqrt() / 2.0;
        let pair = TriangleMesh::new(
            vec![Vec3::zeros(), Vec3::x(), Vec3::new(0.5, h, 0.0), Vec3::new(0.5, -h, 0.0)],
            vec![[0, 1, 2], [1, 0, 3]],
        )
        .unwrap();
        let w = cotangent_weights(&pair).unwrap();
        assert!((w.get(0, 1).unwrap() - 2.0 / 3f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn equilateral_stiffness_entry() {
        let a = assemble_laplace(&shapes::equilateral_triangle()).unwrap();
        let expected = -1.0 / (2.0 * 3f64.sqrt());
        assert!((a.get(0, 1) - expected).abs() < 1e-12);
        assert!((a.get(1, 2) - expected).abs() < 1e-12);
    }

    #[test]
    fn zero_area_face_is_reported() {
        let m = TriangleMesh::new(
            vec![Vec3::zeros(), Vec3::x(), Vec3::new(2.0, 0.0, 0.0)],
            vec![[0, 1, 2]],
        )
        .unwrap();
        assert!(matches!(
            cotangent_weights(&m),
            Err(Error::DegenerateFace { face: 0, .. })
        ));
        assert!(matches!(hat_gradients(&m), Err(Error::DegenerateFace { face: 0, .. })));
        assert!(assemble_laplace(&m).is_err());
    }

    #[test]
    fn zero_field_has_zero_divergence() {
        let m = shapes::icosphere(1);
        let d = divergence(&m, &vec![Vec3::zeros(); m.num_faces()]).unwrap();
        assert!(d.iter().all(|&x| x == 0.0));
        assert!(matches!(
            divergence(&m, &[Vec3::zeros()]),
            Err(Error::Shape { .. })
        ));
    }

    #[test]
    fn flat_x_coordinate_field() {
        let m = shapes::grid(6, 5, 0.7);
        let a = assemble_laplace(&m).unwrap();
        let phi: Vec<f64> = m.vertices().iter().map(|v| v.x).collect();
        let field = vec![Vec3::x(); m.num_faces()];
        let div = divergence(&m, &field).unwrap();
        for (d, r) in div.iter().zip(a.mul_vec(&phi)) {
            assert!((d - r).abs() < 1e-9);
        }
    }
}
