//! Geodesic patch segmentation: farthest-point seeds, Voronoi cells and
//! overlapping grown patches.
//!
//! Patch labels are 0-based in memory and 1-based in the text format.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::meshkit::{MeshGraph, TriangleMesh};
use crate::parallel;

pub const DEFAULT_PATCHES: usize = 100;
pub const DEFAULT_SIGMA: f64 = 0.3;

#[derive(Debug, Clone, PartialEq)]
pub struct Segmentation {
    pub seeds: Vec<usize>,
    pub patch_of: Vec<usize>,
    /// Adjacent label pairs `(m, n)` with `m < n`, sorted.
    pub adjacency: Vec<(usize, usize)>,
    /// `O_mn` per ordered adjacent pair: vertices of `P_n` within `d_mn` of `P_m`.
    pub overlaps: BTreeMap<(usize, usize), Vec<usize>>,
    pub sigma: f64,
}

impl Segmentation {
    pub fn num_patches(&self) -> usize {
        self.seeds.len()
    }

    pub fn num_vertices(&self) -> usize {
        self.patch_of.len()
    }

    /// Members of every `P_m`, each sorted.
    pub fn patches(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.num_patches()];
        for (v, &m) in self.patch_of.iter().enumerate() {
            out[m].push(v);
        }
        out
    }

    /// `Q_m = P_m ∪ ⋃_n O_mn`, each sorted.
    pub fn grown(&self) -> Vec<Vec<usize>> {
        let mut sets: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); self.num_patches()];
        for (v, &m) in self.patch_of.iter().enumerate() {
            sets[m].insert(v);
        }
        for (&(m, _), o) in &self.overlaps {
            sets[m].extend(o.iter().copied());
        }
        sets.into_iter().map(|s| s.into_iter().collect()).collect()
    }

    /// Per-patch membership masks of the grown patches.
    pub fn grown_masks(&self) -> Vec<Vec<bool>> {
        self.grown()
            .into_iter()
            .map(|q| {
                let mut mask = vec![false; self.num_vertices()];
                q.into_iter().for_each(|v| mask[v] = true);
                mask
            })
            .collect()
    }

    /// Neighbouring labels of each patch, sorted.
    pub fn neighbors(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.num_patches()];
        for &(m, n) in &self.adjacency {
            out[m].push(n);
            out[n].push(m);
        }
        out.iter_mut().for_each(|l| l.sort_unstable());
        out
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "{} {}", self.num_patches(), self.sigma).unwrap();
        let seeds: Vec<String> = self.seeds.iter().map(|v| v.to_string()).collect();
        writeln!(s, "seeds {}", seeds.join(" ")).unwrap();
        writeln!(s, "labels {}", self.patch_of.len()).unwrap();
        for &m in &self.patch_of {
            writeln!(s, "{}", m + 1).unwrap();
        }
        writeln!(s, "overlaps {}", self.overlaps.len()).unwrap();
        for (&(m, n), o) in &self.overlaps {
            write!(s, "{} {} {}", m + 1, n + 1, o.len()).unwrap();
            for v in o {
                write!(s, " {v}").unwrap();
            }
            s.push('\n');
        }
        s
    }

    pub fn from_text(text: &str, path: &Path) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let mut next = |what: &str| {
            lines
                .next()
                .map(|(n, l)| (n + 1, l.split_whitespace().collect::<Vec<_>>()))
                .ok_or_else(|| Error::format(path, 0, format!("missing {what}")))
        };
        fn num<T: std::str::FromStr>(path: &Path, line: usize, tok: &str) -> Result<T> {
            tok.parse().map_err(|_| Error::format(path, line, format!("bad number `{tok}`")))
        }
        let (ln, head) = next("header")?;
        if head.len() != 2 {
            return Err(Error::format(path, ln, "header must be `M sigma`"));
        }
        let m: usize = num(path, ln, head[0])?;
        let sigma: f64 = num(path, ln, head[1])?;
        let (ln, seeds) = next("seeds")?;
        if seeds.first() != Some(&"seeds") || seeds.len() != m + 1 {
            return Err(Error::format(path, ln, format!("expected `seeds` with {m} entries")));
        }
        let seeds = seeds[1..].iter().map(|t| num(path, ln, t)).collect::<Result<Vec<usize>>>()?;
        let (ln, lab) = next("labels")?;
        if lab.len() != 2 || lab[0] != "labels" {
            return Err(Error::format(path, ln, "expected `labels N`"));
        }
        let n: usize = num(path, ln, lab[1])?;
        let mut patch_of = Vec::with_capacity(n);
        for _ in 0..n {
            let (ln, t) = next("label")?;
            let l: usize = num(path, ln, t.first().copied().unwrap_or(""))?;
            if l == 0 || l > m {
                return Err(Error::format(path, ln, format!("label {l} outside 1..={m}")));
            }
            patch_of.push(l - 1);
        }
        let (ln, ov) = next("overlaps")?;
        if ov.len() != 2 || ov[0] != "overlaps" {
            return Err(Error::format(path, ln, "expected `overlaps K`"));
        }
        let k: usize = num(path, ln, ov[1])?;
        let mut overlaps = BTreeMap::new();
        for _ in 0..k {
            let (ln, t) = next("overlap list")?;
            if t.len() < 3 {
                return Err(Error::format(path, ln, "overlap line needs `m n count`"));
            }
            let a: usize = num(path, ln, t[0])?;
            let b: usize = num(path, ln, t[1])?;
            let c: usize = num(path, ln, t[2])?;
            if a == 0 || b == 0 || a > m || b > m || t.len() != 3 + c {
                return Err(Error::format(path, ln, "malformed overlap line"));
            }
            let verts = t[3..].iter().map(|s| num(path, ln, s)).collect::<Result<Vec<usize>>>()?;
            if verts.iter().any(|&v| v >= n) {
                return Err(Error::format(path, ln, "overlap vertex out of range"));
            }
            overlaps.insert((a - 1, b - 1), verts);
        }
        let adjacency = adjacency_from_overlaps(&overlaps);
        Ok(Segmentation {
            seeds,
            patch_of,
            adjacency,
            overlaps,
            sigma,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text, path)
    }
}

// the text format has no edge list, so adjacency is recovered from the
// overlap keys (every adjacent pair gets an entry, possibly empty)
fn adjacency_from_overlaps(overlaps: &BTreeMap<(usize, usize), Vec<usize>>) -> Vec<(usize, usize)> {
    let set: BTreeSet<(usize, usize)> = overlaps.keys().map(|&(a, b)| (a.min(b), a.max(b))).collect();
    set.into_iter().collect()
}

/// Farthest-point sampling of `m` seeds starting from `seed`. Ties pick the
/// lowest vertex index.
pub fn farthest_point_sample(graph: &MeshGraph, m: usize, seed: usize) -> Result<Vec<usize>> {
    let n = graph.num_vertices();
    if m == 0 || m > n {
        return Err(Error::Argument(format!("patch count {m} must be in 1..={n}")));
    }
    if seed >= n {
        return Err(Error::Argument(format!("seed vertex {seed} out of range")));
    }
    let mut dmin = graph.distances(&[seed], None)?;
    if let Some(v) = dmin.iter().position(|d| d.is_infinite()) {
        return Err(Error::Disconnected { from: seed, vertex: v });
    }
    let mut seeds = vec![seed];
    while seeds.len() < m {
        let mut best = 0;
        for i in 1..n {
            if dmin[i] > dmin[best] {
                best = i;
            }
        }
        seeds.push(best);
        let d = graph.distances(&[best], None)?;
        for (a, b) in dmin.iter_mut().zip(d) {
            *a = a.min(b);
        }
    }
    Ok(seeds)
}

/// Geodesic Voronoi cells of `seeds`; equal distances go to the lower label.
pub fn voronoi_segment(graph: &MeshGraph, seeds: &[usize]) -> Result<Segmentation> {
    let distinct: BTreeSet<usize> = seeds.iter().copied().collect();
    if distinct.len() != seeds.len() {
        return Err(Error::Argument("seeds must be distinct".into()));
    }
    let (_, labels) = graph.nearest_source(seeds, None)?;
    if let Some(v) = labels.iter().position(|&l| l == usize::MAX) {
        return Err(Error::Disconnected { from: seeds[0], vertex: v });
    }
    let mut adj = BTreeSet::new();
    for u in 0..graph.num_vertices() {
        for &(w, _) in graph.neighbors(u) {
            let (a, b) = (labels[u], labels[w]);
            if a != b {
                adj.insert((a.min(b), a.max(b)));
            }
        }
    }
    Ok(Segmentation {
        seeds: seeds.to_vec(),
        patch_of: labels,
        adjacency: adj.into_iter().collect(),
        overlaps: BTreeMap::new(),
        sigma: 0.0,
    })
}

/// Overlap set `O_mn` for one ordered pair plus its threshold `d_mn`.
fn pair_overlap(graph: &MeshGraph, seg: &Segmentation, members: &[Vec<usize>], m: usize, n: usize, sigma: f64) -> Result<(Vec<usize>, f64)> {
    let union: Vec<bool> = seg.patch_of.iter().map(|&l| l == m || l == n).collect();
    let seed_dist = graph.distances(&[seg.seeds[m]], Some(&union))?[seg.seeds[n]];
    let threshold = sigma * seed_dist;
    if !threshold.is_finite() {
        log::warn!("patches {m} and {n} are not connected through their union");
        return Ok((Vec::new(), threshold));
    }
    let dist = graph.distances(&members[m], Some(&union))?;
    let o = members[n].iter().copied().filter(|&i| dist[i] <= threshold).collect();
    Ok((o, threshold))
}

/// Grows every patch into its neighbours by `sigma` times the restricted
/// seed-to-seed distance.
pub fn grow_overlaps(graph: &MeshGraph, seg: &Segmentation, sigma: f64) -> Result<Segmentation> {
    if !(sigma >= 0.0) {
        return Err(Error::Argument(format!("overlap ratio must be non-negative, got {sigma}")));
    }
    let members = seg.patches();
    let pairs: Vec<(usize, usize)> = seg.adjacency.iter().flat_map(|&(a, b)| [(a, b), (b, a)]).collect();
    let results = parallel::map_slice(&pairs, |&(m, n)| pair_overlap(graph, seg, &members, m, n, sigma));
    let mut overlaps = BTreeMap::new();
    for (&p, r) in pairs.iter().zip(results) {
        overlaps.insert(p, r?.0);
    }
    Ok(Segmentation {
        overlaps,
        sigma,
        ..seg.clone()
    })
}

/// Sampling, tessellation and overlap growth in one call.
pub fn segment(mesh: &TriangleMesh, patches: usize, sigma: f64, seed: usize) -> Result<Segmentation> {
    let graph = MeshGraph::from_mesh(mesh);
    let seeds = farthest_point_sample(&graph, patches.min(mesh.num_vertices()), seed)?;
    let seg = voronoi_segment(&graph, &seeds)?;
    grow_overlaps(&graph, &seg, sigma)
}
