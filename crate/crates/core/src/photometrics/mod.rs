//! Per-view photometric estimation: normals and albedo from gradient
//! images, sequence alignment, depth projection and bias removal.

pub mod align;
pub mod bias;
pub mod camera;
pub mod flow;
pub mod image;
pub mod invariant;
pub mod normals;
pub mod raster;

pub use align::{align_sequence, align_to_reference, complement_residual, Alignment};
pub use bias::{bias_correct, default_sigma_low, high_pass, to_world_normals};
pub use camera::{Camera, Projection};
pub use flow::{compute_flow, warp, FlowField, FlowParams};
pub use image::ImageGrid;
pub use invariant::illumination_invariant;
pub use normals::{
    angle_deg, complement_normals, lambertian_normals, mean_angular_error, reflect, specular_normals,
    GradientSet, Polarization, SpecularEstimate, CONDITION_NAMES,
};
pub use raster::{project_depth_normals, rasterize, DepthNormals, RasterBuffer};
