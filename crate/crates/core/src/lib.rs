//! Finite volume schemes for scalar conservation laws on stationary and
//! evolving triangulated surfaces.

pub mod diagnostics;
pub mod error;
pub mod exact;
pub mod experiments;
pub mod flux;
pub mod geometry;
pub mod initial;
pub mod mesh;
pub mod motion;
pub mod quadrature;
pub mod second_order;
pub mod solver;
pub mod sphere;
pub mod vec3;
pub mod vtk;

pub use diagnostics::{fit_order, OrderReport, PlaneOracle, SurfaceOracle};
pub use error::{Error, Result};
pub use experiments::{run_test_problem, ConvergenceTable, ProblemReport, RunConfig, TableRow, TorusReport};
pub use flux::{make_flux, FluxField, FluxKind};
pub use geometry::{FlatCellGeom, FlatEdgeGeom, FlatGeometry};
pub use initial::InitialData;
pub use mesh::{build_icosphere, build_torus, icosphere_family, mesh_quality, MeshQuality, TriMesh};
pub use motion::SurfaceMotion;
pub use quadrature::QuadratureSet;
pub use second_order::Reconstruction;
pub use solver::{
    run, run_from, CellField, CurvedScheme, Discretization, EdgeMoments, FlatScheme, RunOptions, RunOutput, StepContext,
};
pub use sphere::SphereSurface;
pub use vec3::Vec3;
