use super::observe::ViewObservation;
use super::select::{face_labels, select_patch_views, vertex_labels, PatchSelection};
use crate::error::{Error, Result};
use crate::linalg::{solve_refined, CholeskyFactor, CsrMatrix};
use crate::meshkit::{assemble_from_gradients, divergence_with, hat_gradients, FaceGradients, TriangleMesh, Vec3};
use crate::parallel;
use crate::patchwork::Segmentation;

/// Screening weight for texture stitching.
pub const DEFAULT_LAMBDA: f64 = 1e-6;

const MAX_REFINEMENTS: usize = 8;

/// Prefactored `(A^T A + lambda D)` for repeated solves with one `A`.
/// `D` is diagonal: 1 where a screening target exists, 0 elsewhere.
#[derive(Debug, Clone)]
pub struct ScreenedPoisson {
    a: CsrMatrix,
    normal: CsrMatrix,
    factor: CholeskyFactor,
    lambda: f64,
    weights: Vec<f64>,
}

impl ScreenedPoisson {
    pub fn new(a: &CsrMatrix, lambda: f64, weights: Option<&[f64]>) -> Result<Self> {
        if !(lambda >= 0.0) {
            return Err(Error::Argument(format!("screening weight must be non-negative, got {lambda}")));
        }
        let n = a.ncols();
        let weights = match weights {
            Some(w) if w.len() != n => {
                return Err(Error::Shape {
                    what: "screening weights",
                    expected: n,
                    found: w.len(),
                })
            }
            Some(w) => w.to_vec(),
            None => vec![1.0; n],
        };
        let ata = a.transpose().matmul(a);
        let diag: Vec<f64> = weights.iter().map(|w| lambda * w).collect();
        let normal = ata.add_diagonal(&diag);
        let factor = CholeskyFactor::factor(&normal)?;
        Ok(ScreenedPoisson {
            a: a.clone(),
            normal,
            factor,
            lambda,
            weights,
        })
    }

    /// Minimizes `|A x - y|^2 + lambda sum_i d_i (x_i - x'_i)^2`; returns
    /// the solution and the relative residual of the normal equations.
    pub fn solve(&self, y: &[f64], x_prime: &[f64]) -> Result<(Vec<f64>, f64)> {
        let n = self.a.ncols();
        if y.len() != self.a.nrows() || x_prime.len() != n {
            return Err(Error::Shape {
                what: "poisson right-hand side",
                expected: n,
                found: y.len().min(x_prime.len()),
            });
        }
        let mut rhs = self.a.transpose().mul_vec(y);
        for i in 0..n {
            rhs[i] += self.lambda * self.weights[i] * x_prime[i];
        }
        solve_refined(&self.normal, &self.factor, &rhs, MAX_REFINEMENTS)
    }
}

/// One-shot screened solve `(A^T A + lambda I) x = A^T y + lambda x'`.
pub fn solve_screened_poisson(a: &CsrMatrix, y: &[f64], lambda: f64, x_prime: &[f64]) -> Result<(Vec<f64>, f64)> {
    ScreenedPoisson::new(a, lambda, None)?.solve(y, x_prime)
}

/// Per-face texture gradients for one channel plus the screening guide.
#[derive(Debug, Clone)]
pub struct TextureGuidance {
    /// `gradients[c][f]`: gradient of channel `c` on face `f`.
    pub gradients: [Vec<Vec3>; 3],
    pub face_view: Vec<Option<usize>>,
    /// Per-vertex mean over observing views, with a has-data flag.
    pub guide: Vec<[f64; 3]>,
    pub guided: Vec<bool>,
}

pub fn build_texture_guidance(
    mesh: &TriangleMesh,
    grads: &[FaceGradients],
    seg: &Segmentation,
    obs: &[ViewObservation],
    sel: &PatchSelection,
) -> TextureGuidance {
    let face_view = face_labels(mesh, seg, sel, obs);
    let per_face = parallel::map_range(mesh.num_faces(), |fi| {
        let f = mesh.faces()[fi];
        let g = &grads[fi];
        let mut out = [Vec3::zeros(); 3];
        if let Some(k) = face_view[fi] {
            for (c, o) in out.iter_mut().enumerate() {
                *o = (0..3).map(|j| g.grads[j] * obs[k].colors[f[j]][c]).sum();
            }
        }
        out
    });
    let mut gradients = [Vec::new(), Vec::new(), Vec::new()];
    for (c, g) in gradients.iter_mut().enumerate() {
        *g = per_face.iter().map(|p| p[c]).collect();
    }
    let n = mesh.num_vertices();
    let mut guide = vec![[0.0; 3]; n];
    let mut guided = vec![false; n];
    for v in 0..n {
        let mut sum = [0.0; 3];
        let mut count = 0;
        for o in obs.iter().filter(|o| o.observed[v]) {
            for c in 0..3 {
                sum[c] += o.colors[v][c];
            }
            count += 1;
        }
        if count > 0 {
            guide[v] = sum.map(|s| s / count as f64);
            guided[v] = true;
        }
    }
    TextureGuidance {
        gradients,
        face_view,
        guide,
        guided,
    }
}

#[derive(Debug, Clone)]
pub struct StitchResult {
    pub colors: Vec<[f64; 3]>,
    pub residuals: [f64; 3],
    pub selection: PatchSelection,
    pub face_view: Vec<Option<usize>>,
}

/// Poisson-blended per-vertex colors; each channel is clamped to [0, 1].
pub fn stitch_texture(mesh: &TriangleMesh, seg: &Segmentation, obs: &[ViewObservation], lambda: f64) -> Result<StitchResult> {
    if obs.is_empty() {
        return Err(Error::Argument("stitching needs at least one view".into()));
    }
    let grads = hat_gradients(mesh)?;
    let a = assemble_from_gradients(mesh, &grads);
    let sel = select_patch_views(seg, obs);
    let guidance = build_texture_guidance(mesh, &grads, seg, obs, &sel);
    let weights: Vec<f64> = guidance.guided.iter().map(|&g| if g { 1.0 } else { 0.0 }).collect();
    let system = ScreenedPoisson::new(&a, lambda, Some(&weights))?;
    let solved = parallel::map_range(3, |c| -> Result<(Vec<f64>, f64)> {
        let y = divergence_with(mesh, &grads, &guidance.gradients[c])?;
        let xp: Vec<f64> = guidance.guide.iter().map(|g| g[c]).collect();
        system.solve(&y, &xp)
    });
    let mut colors = vec![[0.0; 3]; mesh.num_vertices()];
    let mut residuals = [0.0; 3];
    for (c, r) in solved.into_iter().enumerate() {
        let (x, res) = r?;
        residuals[c] = res;
        for (col, v) in colors.iter_mut().zip(x) {
            col[c] = v.clamp(0.0, 1.0);
        }
    }
    Ok(StitchResult {
        colors,
        residuals,
        selection: sel,
        face_view: guidance.face_view,
    })
}

/// Unblended baseline: each vertex copies its own patch's best observing view.
pub fn patch_texture(seg: &Segmentation, sel: &PatchSelection, obs: &[ViewObservation]) -> Vec<Option<[f64; 3]>> {
    (0..seg.num_vertices())
        .map(|v| {
            let m = seg.patch_of[v];
            sel.ranking[m].iter().find(|&&k| obs[k].observed[v]).map(|&k| obs[k].colors[v])
        })
        .collect()
}

/// Per-vertex source views for shape targets (same rule as faces).
pub fn select_vertex_normals(seg: &Segmentation, obs: &[ViewObservation]) -> Vec<Option<Vec3>> {
    let sel = select_patch_views(seg, obs);
    vertex_labels(seg, &sel, obs)
        .into_iter()
        .enumerate()
        .map(|(v, k)| k.and_then(|k| obs[k].normals.as_ref().map(|n| n[v])))
        .collect()
}
