//! View selection, screened Poisson texture stitching and normal-guided
//! mesh refinement.

mod observe;
mod refine;
mod select;
mod solve;

pub use observe::{sample_views, ViewInput, ViewObservation};
pub use refine::{cross_objective, default_lambda_screen, laplacian_normals, refine_mesh, refine_mesh_iterated, RefineResult, DEFAULT_REFINE_ROUNDS};
pub use select::{
    face_labels, fresnel_safe_check, select_patch_views, vertex_labels, FresnelReport, PatchSelection,
    DEFAULT_FRESNEL_THRESHOLD_DEG, UNOBSERVED_ANGLE,
};
pub use solve::{
    build_texture_guidance, patch_texture, select_vertex_normals, solve_screened_poisson, stitch_texture,
    ScreenedPoisson, StitchResult, TextureGuidance, DEFAULT_LAMBDA,
};
