//! High-order boundary-integral solver for 3D sound-soft acoustic scattering.
//!
//! The scatterer surface is described by non-overlapping logically-quadrilateral
//! parametric patches. Smooth (non-adjacent) interactions are integrated with
//! Fejér's first quadrature rule; singular and near-singular interactions use
//! precomputed moments of the kernel against Chebyshev polynomials, evaluated
//! under a rectangular-polar change of variables whose derivatives vanish at
//! the (projected) singularity. Edge-singular densities on open surfaces and
//! surfaces with geometric edges are handled by graded changes of variables
//! along the affected parameter directions.
//!
//! The crate provides, bottom up:
//!
//! * [`quadrature`] — Fejér-1 rules, Chebyshev evaluation and 2D transforms,
//! * [`maps`] — the graded, edge and singular changes of variables,
//! * [`kernel`] — the Helmholtz Green function and combined-field kernel,
//! * [`geometry`] — patch atlases, built-in shapes, patch files, discretization,
//! * [`precompute`] — near-field classification, projection, moment weights,
//! * [`operator`] — the matrix-free discrete boundary integral operator,
//! * [`solver`] — restarted GMRES,
//! * [`problem`] — scattering problems, solve/far-field/near-field pipelines.

pub mod error;
pub mod geometry;
pub mod kernel;
pub mod maps;
pub mod operator;
pub mod precompute;
pub mod problem;
pub mod quadrature;
pub mod solver;
pub mod special;
pub mod vec3;

pub use error::Error;
pub use operator::{apply_far, apply_near, apply_operator, build_density, build_density_from_psi, Density};
pub use precompute::{build_plan, cache_load, cache_store, classify_near, compute_weights, fill_projections, project_point, CacheKey, NearFieldPlan, PrecomputedWeights};
pub use problem::{assemble, convergence_study, far_field, incident_plane_wave, lat_long_grid, near_field_grid, solve, solve_assembled, validate_sphere, Assembled, FarField, PlaneWave, ScatteringProblem};
pub use solver::{gmres, gmres_strict, GmresParams, SolveReport};
pub use geometry::{
    discretize, load_patch_file, make_cube_atlas, make_disk_atlas, make_sphere_atlas, split_atlas,
    Patch, PatchAtlas, SurfaceDiscretization,
};
pub use kernel::{green, green_dn, KernelKind, KernelVariant};
pub use maps::EdgeFlag;

pub use quadrature::{cheb_eval, cheb_eval_2d, cheb_transform_2d, ChebCoeffGrid, FejerRule};

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
