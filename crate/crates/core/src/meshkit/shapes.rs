//! Procedural meshes used by the synthetic stage and the tests.

use std::collections::HashMap;

use super::mesh::{edge_key, TriangleMesh, Vec3};

/// Regular icosahedron inscribed in the unit sphere (12 vertices, 20 faces).
pub fn icosahedron() -> TriangleMesh {
    let (v, f) = icosahedron_raw();
    TriangleMesh::new(v, f).expect("icosahedron is a valid mesh")
}

fn icosahedron_raw() -> (Vec<Vec3>, Vec<[usize; 3]>) {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let raw = [
        (-1.0, t, 0.0),
        (1.0, t, 0.0),
        (-1.0, -t, 0.0),
        (1.0, -t, 0.0),
        (0.0, -1.0, t),
        (0.0, 1.0, t),
        (0.0, -1.0, -t),
        (0.0, 1.0, -t),
        (t, 0.0, -1.0),
        (t, 0.0, 1.0),
        (-t, 0.0, -1.0),
        (-t, 0.0, 1.0),
    ];
    let v = raw
        .iter()
        .map(|&(x, y, z)| Vec3::new(x, y, z).normalize())
        .collect();
    let f = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    (v, f)
}

/// Unit icosphere after `level` rounds of 4-way subdivision
/// (`10 * 4^level + 2` vertices: 12, 42, 162, 642, 2562, 10242, ...).
pub fn icosphere(level: usize) -> TriangleMesh {
    let (mut v, mut f) = icosahedron_raw();
    for _ in 0..level {
        let mut mid: HashMap<(usize, usize), usize> = HashMap::new();
        let mut next = Vec::with_capacity(f.len() * 4);
        let mut midpoint = |a: usize, b: usize, v: &mut Vec<Vec3>| -> usize {
            *mid.entry(edge_key(a, b)).or_insert_with(|| {
                v.push(((v[a] + v[b]) * 0.5).normalize());
                v.len() - 1
            })
        };
        for &[a, b, c] in &f {
            let ab = midpoint(a, b, &mut v);
            let bc = midpoint(b, c, &mut v);
            let ca = midpoint(c, a, &mut v);
            next.push([a, ab, ca]);
            next.push([b, bc, ab]);
            next.push([c, ca, bc]);
            next.push([ab, bc, ca]);
        }
        f = next;
    }
    TriangleMesh::new(v, f).expect("icosphere is a valid mesh")
}

/// Flat `nx` x `ny` vertex grid in the z = 0 plane with the given spacing,
/// split along alternating diagonals.
pub fn grid(nx: usize, ny: usize, spacing: f64) -> TriangleMesh {
    assert!(nx >= 2 && ny >= 2);
    let mut v = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            v.push(Vec3::new(i as f64 * spacing, j as f64 * spacing, 0.0));
        }
    }
    let mut f = Vec::with_capacity(2 * (nx - 1) * (ny - 1));
    for j in 0..ny - 1 {
        for i in 0..nx - 1 {
            let a = j * nx + i;
            let b = a + 1;
            let c = a + nx;
            let d = c + 1;
            if (i + j) % 2 == 0 {
                f.push([a, b, d]);
                f.push([a, d, c]);
            } else {
                f.push([a, b, c]);
                f.push([b, d, c]);
            }
        }
    }
    TriangleMesh::new(v, f).expect("grid is a valid mesh")
}

/// Unit-edge equilateral triangle in the z = 0 plane.
pub fn equilateral_triangle() -> TriangleMesh {
    TriangleMesh::new(
        vec![
            Vec3::zeros(),
            Vec3::x(),
            Vec3::new(0.5, 3f64.sqrt() / 2.0, 0.0),
        ],
        vec![[0, 1, 2]],
    )
    .expect("valid triangle")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn icosphere_counts() {
        for (level, n) in [(0, 12), (1, 42), (2, 162), (3, 642)] {
            let m = icosphere(level);
            assert_eq!(m.num_vertices(), n);
            assert_eq!(m.num_faces(), 20 * 4usize.pow(level as u32));
            // closed genus-0: V - E + F = 2
            assert_eq!(
                m.num_vertices() as i64 - m.edges().len() as i64 + m.num_faces() as i64,
                2
            );
        }
    }

    #[test]
    fn icosphere_faces_point_outward() {
        let m = icosphere(2);
        for f in 0..m.num_faces() {
            assert!(m.face_normal(f).dot(&m.face_centroid(f)) > 0.0);
        }
    }

    #[test]
    fn grid_faces_are_ccw() {
        let m = grid(4, 3, 0.5);
        for f in 0..m.num_faces() {
            assert!(m.face_normal(f).z > 0.99);
        }
    }
}
