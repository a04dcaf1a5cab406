//! A small complex homotopy-continuation engine, sized for the two systems
//! the pipeline needs: nodes of a quartic symmetroid (27 paths) and the
//! seven-pose sphere system (64 paths).

mod burmester;
mod cluster;
mod nodes;
mod poly;
mod track;

pub use burmester::{solve_burmester, BurmesterSolution};
pub use cluster::{canonical_unit, SolutionCluster};
pub use nodes::{solve_symmetroid_nodes, NodeSolution};
pub use poly::{Poly, PolySystem};
pub use track::{track_total_degree, TrackOptions, TrackReport};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("system must be square with polynomials of positive degree")]
    MalformedSystem,
    #[error("solution set appears positive-dimensional: endpoints follow the path constant")]
    PositiveDimensional,
    #[error("matrix space is degenerate: rank-deficient basis or a positive-dimensional rank-2 locus")]
    DegenerateSpace,
    #[error("poses do not span a six-dimensional projective subspace")]
    DegeneratePoses,
    #[error("path tracking kept failing after {0} restarts")]
    TrackingLost(usize),
}
