//! Mobile icosapods: 20-legged platform linkages whose legs stay at fixed
//! length along a one-parameter, line-symmetric self-motion.
//!
//! The construction runs through a compactified motion space. Half-turns
//! about lines sit inside it as an involution slice; sphere conditions on
//! that slice are linear, so a pod corresponds to a linear space of dual
//! points. Spaces of symmetric 4x4 matrices whose determinant surface has
//! 10 isolated rank-2 points, none of them semidefinite, give linear spaces
//! through 10 + 10 real leg duals: an icosapod with mobility one.
//!
//! Modules, bottom up:
//! - [`study`]: the compactified motion space, lines, half-turns.
//! - [`legspace`]: dual points, the bilinear sphere condition, rank-2
//!   factorization, subspace duality.
//! - [`solver`]: dense quartic determinant slices, homotopy tracking,
//!   rank-2 point location, Burmester-style leg recovery from poses.
//! - [`spectra`]: 4-dimensional symmetric matrix spaces, their (a, b)
//!   type, and adaptation so the identity-like matrix lies inside.
//! - [`pipeline`]: space -> pod, the duality chain, random surveys.
//! - [`tracer`]: numerical continuation of the one-parameter self-motion.
//! - [`fixture`]: an exact worked example with recorded leg data.
//! - [`io`]: canonical JSON/CSV readers and writers.

pub mod fixture;
pub mod io;
pub mod legspace;
pub mod pipeline;
pub mod solver;
pub mod spectra;
pub mod study;
pub mod tracer;
