//! Incremental monocular surface reconstruction from Edge-Point clouds.
//!
//! Sparse points anchored on image edges are triangulated from known camera
//! poses, inserted into a 3D Delaunay triangulation, and carved by the
//! viewing rays that observed them. A manifold subset of the free-space
//! tetrahedra is grown and its boundary is extracted as a watertight mesh.

pub mod camera;
pub mod carver;
pub mod delaunay;
pub mod error;
pub mod eval;
pub mod estimator;
pub mod frontend;
pub mod io;
pub mod manifold;
pub mod mesh;
pub mod pipeline;
pub(crate) mod hash;
pub mod predicates;
pub mod scene;

pub use error::{Error, Result};

pub type Point2 = nalgebra::Point2<f64>;
pub type Point3 = nalgebra::Point3<f64>;
