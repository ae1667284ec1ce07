use std::f64::consts::FRAC_PI_2;

use super::observe::ViewObservation;
use crate::meshkit::TriangleMesh;
use crate::patchwork::Segmentation;

/// Per-patch view ranking by mean vertex viewing angle.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchSelection {
    /// View indices per patch, best first (ties to the lower index).
    pub ranking: Vec<Vec<usize>>,
    /// `mean_angle[m][k]`: mean angle of patch `m` in view `k`, radians.
    pub mean_angle: Vec<Vec<f64>>,
    /// Patches no view observes at all.
    pub unobserved: Vec<usize>,
}

impl PatchSelection {
    pub fn primary(&self, patch: usize) -> usize {
        self.ranking[patch][0]
    }

    pub fn primary_angle(&self, patch: usize) -> f64 {
        self.mean_angle[patch][self.primary(patch)]
    }
}

/// Ranks views for every patch `P_m`; unobserved vertices count as pi/2.
pub fn select_patch_views(seg: &Segmentation, obs: &[ViewObservation]) -> PatchSelection {
    assert!(!obs.is_empty(), "view selection needs at least one view");
    let patches = seg.patches();
    let mut ranking = Vec::with_capacity(patches.len());
    let mut mean_angle = Vec::with_capacity(patches.len());
    let mut unobserved = Vec::new();
    for (m, members) in patches.iter().enumerate() {
        let means: Vec<f64> = obs
            .iter()
            .map(|o| members.iter().map(|&v| o.vertex_angle[v]).sum::<f64>() / members.len().max(1) as f64)
            .collect();
        let mut order: Vec<usize> = (0..obs.len()).collect();
        order.sort_by(|&a, &b| means[a].total_cmp(&means[b]).then(a.cmp(&b)));
        if members.iter().all(|&v| obs.iter().all(|o| !o.observed[v])) {
            unobserved.push(m);
        }
        ranking.push(order);
        mean_angle.push(means);
    }
    PatchSelection {
        ranking,
        mean_angle,
        unobserved,
    }
}

/// Candidate patches for an element: every grown patch containing all of
/// `verts`, or the base patches of `verts` when none does.
fn candidate_patches(seg: &Segmentation, grown: &[Vec<bool>], verts: &[usize]) -> Vec<usize> {
    let mut c: Vec<usize> = (0..grown.len()).filter(|&m| verts.iter().all(|&v| grown[m][v])).collect();
    if c.is_empty() {
        c = verts.iter().map(|&v| seg.patch_of[v]).collect();
        c.sort_unstable();
        c.dedup();
    }
    c
}

/// Picks a view for one element: least angle among the candidate patches'
/// primary views, then down that patch's ranking until a view observes it.
fn label_element(
    sel: &PatchSelection,
    candidates: &[usize],
    angle: impl Fn(usize) -> f64,
    observes: impl Fn(usize) -> bool,
) -> Option<usize> {
    let mut best: Option<(f64, usize, usize)> = None;
    for &m in candidates {
        let view = sel.primary(m);
        let a = angle(view);
        if best.is_none_or(|(ba, bv, _)| a < ba || (a == ba && view < bv)) {
            best = Some((a, view, m));
        }
    }
    let (_, view, patch) = best?;
    if observes(view) {
        return Some(view);
    }
    sel.ranking[patch].iter().copied().find(|&k| observes(k))
}

/// Source view per face, `None` where no ranked view observes the face.
pub fn face_labels(
    mesh: &TriangleMesh,
    seg: &Segmentation,
    sel: &PatchSelection,
    obs: &[ViewObservation],
) -> Vec<Option<usize>> {
    let grown = seg.grown_masks();
    mesh.faces()
        .iter()
        .enumerate()
        .map(|(fi, f)| {
            let cand = candidate_patches(seg, &grown, f);
            label_element(sel, &cand, |k| obs[k].face_angle[fi], |k| obs[k].face_observed(f))
        })
        .collect()
}

/// Source view per vertex under the same rule.
pub fn vertex_labels(seg: &Segmentation, sel: &PatchSelection, obs: &[ViewObservation]) -> Vec<Option<usize>> {
    let grown = seg.grown_masks();
    (0..seg.num_vertices())
        .map(|v| {
            let cand = candidate_patches(seg, &grown, &[v]);
            label_element(sel, &cand, |k| obs[k].vertex_angle[v], |k| obs[k].observed[v])
        })
        .collect()
}

/// Per-patch safety report for grazing-angle selections.
#[derive(Debug, Clone, PartialEq)]
pub struct FresnelReport {
    /// Selected-view mean viewing angle per patch, degrees.
    pub angles_deg: Vec<f64>,
    pub threshold_deg: f64,
    pub flagged: Vec<usize>,
}

impl FresnelReport {
    pub fn is_safe(&self) -> bool {
        self.flagged.is_empty()
    }
}

pub const DEFAULT_FRESNEL_THRESHOLD_DEG: f64 = 60.0;

pub fn fresnel_safe_check(sel: &PatchSelection, threshold_deg: f64) -> FresnelReport {
    let angles_deg: Vec<f64> = (0..sel.ranking.len()).map(|m| sel.primary_angle(m).to_degrees()).collect();
    let flagged = angles_deg
        .iter()
        .enumerate()
        .filter(|(_, &a)| a > threshold_deg)
        .map(|(m, _)| m)
        .collect();
    FresnelReport {
        angles_deg,
        threshold_deg,
        flagged,
    }
}

/// Mean angle used for unobserved vertices.
pub const UNOBSERVED_ANGLE: f64 = FRAC_PI_2;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::meshkit::MeshGraph;
    use crate::patchwork::voronoi_segment;

    fn obs_with(angles: Vec<f64>) -> ViewObservation {
        let n = angles.len();
        ViewObservation {
            view: 0,
            observed: angles.iter().map(|&a| a < FRAC_PI_2).collect(),
            colors: vec![[0.0; 3]; n],
            normals: None,
            vertex_angle: angles,
            face_angle: vec![],
        }
    }

    fn two_patch_path() -> Segmentation {
        let g = MeshGraph::from_edges(4, &[(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0)]);
        voronoi_segment(&g, &[0, 3]).unwrap()
    }

    #[test]
    fn argmin_of_mean_angle() {
        let seg = two_patch_path();
        let a = obs_with(vec![10f64.to_radians(); 4]);
        let b = obs_with(vec![40f64.to_radians(); 4]);
        let sel = select_patch_views(&seg, &[b, a]);
        assert_eq!(sel.primary(0), 1);
        assert_eq!(sel.ranking[1], vec![1, 0]);
    }

    #[test]
    fn unobserved_vertices_are_penalized() {
        let seg = two_patch_path();
        let partial = obs_with(vec![0.0, FRAC_PI_2, 0.0, 0.0]);
        let full = obs_with(vec![0.9; 4]);
        let sel = select_patch_views(&seg, &[partial, full]);
        // patch 0 = {0, 1}: means pi/4 vs 0.9
        assert_eq!(sel.primary(0), 0);
        let hidden = obs_with(vec![FRAC_PI_2; 4]);
        let sel = select_patch_views(&seg, &[hidden]);
        assert_eq!(sel.unobserved, vec![0, 1]);
    }

    #[test]
    fn scaling_angles_keeps_rankings() {
        let seg = two_patch_path();
        let a = obs_with(vec![0.1, 0.5, 0.3, 0.2]);
        let b = obs_with(vec![0.2, 0.2, 0.6, 0.1]);
        let s1 = select_patch_views(&seg, &[a.clone(), b.clone()]);
        let scale = |mut o: ViewObservation| {
            o.vertex_angle.iter_mut().for_each(|x| *x *= 0.37);
            o
        };
        let s2 = select_patch_views(&seg, &[scale(a), scale(b)]);
        assert_eq!(s1.ranking, s2.ranking);
    }

    #[test]
    fn fresnel_flags_grazing_patches() {
        let sel = PatchSelection {
            ranking: vec![vec![0], vec![0]],
            mean_angle: vec![vec![5f64.to_radians()], vec![70f64.to_radians()]],
            unobserved: vec![],
        };
        let r = fresnel_safe_check(&sel, DEFAULT_FRESNEL_THRESHOLD_DEG);
        assert_eq!(r.flagged, vec![1]);
        assert!((r.angles_deg[0] - 5.0).abs() < 1e-12);
    }
}
