//! Graph geodesics: Dijkstra over mesh edges weighted by Euclidean length.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::mesh::TriangleMesh;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
struct Entry {
    dist: f64,
    label: usize,
    vertex: usize,
}

impl Eq for Entry {}

impl Ord for Entry {
    // min-heap on (dist, label, vertex)
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .dist
            .total_cmp(&self.dist)
            .then(other.label.cmp(&self.label))
            .then(other.vertex.cmp(&self.vertex))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Vertex-edge graph with Euclidean edge lengths.
#[derive(Debug, Clone)]
pub struct MeshGraph {
    adj: Vec<Vec<(usize, f64)>>,
}

impl MeshGraph {
    pub fn from_mesh(mesh: &TriangleMesh) -> Self {
        let v = mesh.vertices();
        let edges: Vec<_> = mesh
            .edges()
            .into_iter()
            .map(|(a, b)| (a, b, (v[a] - v[b]).norm()))
            .collect();
        Self::from_edges(mesh.num_vertices(), &edges)
    }

    /// Graph over `n` vertices from `(a, b, length)` triples.
    pub fn from_edges(n: usize, edges: &[(usize, usize, f64)]) -> Self {
        let mut adj = vec![Vec::new(); n];
        for &(a, b, w) in edges {
            adj[a].push((b, w));
            adj[b].push((a, w));
        }
        for list in &mut adj {
            list.sort_by_key(|&(j, _)| j);
        }
        MeshGraph { adj }
    }

    pub fn num_vertices(&self) -> usize {
        self.adj.len()
    }

    pub fn neighbors(&self, i: usize) -> &[(usize, f64)] {
        &self.adj[i]
    }

    /// Shortest-path distance from the nearest source; `+inf` outside
    /// `restriction` or where unreachable.
    pub fn distances(&self, sources: &[usize], restriction: Option<&[bool]>) -> Result<Vec<f64>> {
        Ok(self.nearest_source(sources, restriction)?.0)
    }

    /// Multi-source Dijkstra returning distances and the index (into
    /// `sources`) of the nearest source. Equal distances resolve to the
    /// lowest source index. Unreached vertices get label `usize::MAX`.
    pub fn nearest_source(
        &self,
        sources: &[usize],
        restriction: Option<&[bool]>,
    ) -> Result<(Vec<f64>, Vec<usize>)> {
        let n = self.adj.len();
        if sources.is_empty() {
            return Err(Error::Argument("geodesic query needs at least one source".into()));
        }
        if let Some(r) = restriction {
            if r.len() != n {
                return Err(Error::Shape {
                    what: "restriction mask",
                    expected: n,
                    found: r.len(),
                });
            }
        }
        let allowed = |i: usize| restriction.is_none_or(|r| r[i]);
        let mut dist = vec![f64::INFINITY; n];
        let mut label = vec![usize::MAX; n];
        let mut heap = BinaryHeap::new();
        for (l, &s) in sources.iter().enumerate() {
            if s >= n {
                return Err(Error::Argument(format!("source vertex {s} out of range")));
            }
            if !allowed(s) {
                return Err(Error::Argument(format!("source vertex {s} outside the restriction")));
            }
            if dist[s] > 0.0 || l < label[s] {
                dist[s] = 0.0;
                label[s] = label[s].min(l);
            }
        }
        for (v, &l) in label.iter().enumerate() {
            if l != usize::MAX {
                heap.push(Entry {
                    dist: 0.0,
                    label: l,
                    vertex: v,
                });
            }
        }
        while let Some(Entry { dist: d, label: l, vertex: u }) = heap.pop() {
            if d > dist[u] || (d == dist[u] && l > label[u]) {
                continue;
            }
            for &(w, len) in &self.adj[u] {
                if !allowed(w) {
                    continue;
                }
                let nd = d + len;
                if nd < dist[w] || (nd == dist[w] && l < label[w]) {
                    dist[w] = nd;
                    label[w] = l;
                    heap.push(Entry {
                        dist: nd,
                        label: l,
                        vertex: w,
                    });
                }
            }
        }
        Ok((dist, label))
    }
}

/// Convenience wrapper building the edge graph on every call.
pub fn geodesic_distances(
    mesh: &TriangleMesh,
    sources: &[usize],
    restriction: Option<&[bool]>,
) -> Result<Vec<f64>> {
    MeshGraph::from_mesh(mesh).distances(sources, restriction)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::meshkit::shapes;

    fn path3() -> MeshGraph {
        MeshGraph::from_edges(3, &[(0, 1, 1.0), (1, 2, 1.0)])
    }

    #[test]
    fn path_graph_distances() {
        assert_eq!(path3().distances(&[0], None).unwrap(), vec![0.0, 1.0, 2.0]);
    }

    #[test]
    fn all_sources_are_zero() {
        let m = shapes::icosahedron();
        let all: Vec<usize> = (0..12).collect();
        assert!(geodesic_distances(&m, &all, None).unwrap().iter().all(|&d| d == 0.0));
    }

    #[test]
    fn empty_sources_rejected() {
        assert!(matches!(path3().distances(&[], None), Err(Error::Argument(_))));
    }

    #[test]
    fn restriction_blocks_paths() {
        let g = path3();
        let d = g.distances(&[0], Some(&[true, false, true])).unwrap();
        assert_eq!(d[0], 0.0);
        assert!(d[1].is_infinite() && d[2].is_infinite());
        assert!(g.distances(&[1], Some(&[true, false, true])).is_err());
    }

    #[test]
    fn ties_go_to_lowest_source_index() {
        let g = MeshGraph::from_edges(5, &[(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0), (3, 4, 1.0)]);
        let (_, label) = g.nearest_source(&[4, 0], None).unwrap();
        assert_eq!(label, vec![1, 1, 0, 0, 0]);
    }
}
