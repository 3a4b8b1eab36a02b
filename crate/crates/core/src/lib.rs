//! Multigrid barrier path following for convex Euler-Lagrange problems of
//! p-Laplacian type on simplicial meshes.
//!
//! The geometric layers (`mesh`, `quadrature`, `barrier`) are generic over
//! the floating point type; the discretization and solvers run in `f64`.

pub mod assembly;
pub mod barrier;
pub mod config;
pub mod diagnostics;
pub mod femspace;
pub mod linalg;
pub mod mesh;
pub mod newton;
pub mod pathfollow;
pub mod problems;
pub mod quadrature;
pub mod scalar;

pub type Mesh = mesh::SimplicialMesh<f64>;
pub type Mesh32 = mesh::SimplicialMesh<f32>;
pub type Quadrature = quadrature::QuadratureRule<f64>;
pub type Barrier = barrier::PLapBarrier<f64>;
pub type Barrier32 = barrier::PLapBarrier<f32>;

pub use config::RunConfig;
pub use pathfollow::{run, Algorithm, PathConfig, PathTrace, RunStatus};
pub use problems::{build_problem, Problem, ProblemSpec};
