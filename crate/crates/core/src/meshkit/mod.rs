//! Triangle meshes, mesh file IO, graph geodesics and the hat-function
//! differential operators (gradient, divergence, stiffness Laplacian).

mod geodesic;
mod io;
mod mesh;
mod operators;
pub mod shapes;

pub use geodesic::{geodesic_distances, MeshGraph};
pub use io::{load_mesh, save_mesh};
pub use mesh::{edge_key, Attribute, Edge, TriangleMesh, Vec3, COLOR, NORMAL, SCALAR_PREFIX};
pub use operators::{
    assemble_from_gradients, assemble_laplace, cotangent_weights, divergence, divergence_with, gradient,
    hat_gradients, CotanWeights, FaceGradients, SparseLinearSystem,
};
