//! Synthetic light stage: analytic subjects rendered under spherical
//! gradient illumination, ground truth, and Cook-Torrance previews.

mod head;
mod preview;
mod render;
mod rig;
mod scene;

pub use head::{
    head_material, head_surface, make_rigged_scene, make_test_head, region_meshes, Pose, RigCamera, TestHead,
    DEFAULT_HEAD_RESOLUTION,
};
pub use preview::{
    cook_torrance, render_preview, schlick, specular_normals_of, PointLight, PreviewMaterial,
    SPECULAR_ALBEDO_CHANNEL, SPECULAR_NORMAL_CHANNELS,
};
pub use render::{
    beckmann, render_ground_truth, render_gradient_set, shift_image, trace, GroundTruth, Reflectance, SurfacePoint,
};
pub use rig::{led_dome, Condition, LightMode, LightRig, DOME_RADIUS};
pub use scene::{bump, Albedo, Hit, Material, Scene, Surface};
