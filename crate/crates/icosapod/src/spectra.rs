//! Four-dimensional spaces of real symmetric 4x4 matrices: their quartic
//! symmetroids, the type (a, b) of the associated spectrahedron (a real
//! rank-2 points, b of them positive semidefinite), congruence adaptation so
//! the space contains E = diag(0, 1, 1, 1), and the identification of such
//! spaces with linear subspaces on the dual side.

use nalgebra::{DMatrix, DVector, Matrix4, Vector4};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::legspace::{e_matrix, DualLegPoint, LegSpaceError, LinearSubspace, Side, Vec11};
use crate::solver::{solve_symmetroid_nodes, NodeSolution, SolverError, TrackOptions};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectraError {
    #[error("basis matrices are linearly dependent")]
    RankDeficientBasis,
    #[error("space does not contain E")]
    MissingE,
    #[error("subspace does not pass through the matrix class of p_e")]
    MissingPe,
    #[error("no rank-3 boundary point found in {0} starts")]
    NoBoundaryRank3Point(usize),
    #[error("nodes are not generic: {0}")]
    NonGeneric(String),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    LegSpace(#[from] LegSpaceError),
}

/// Isometric vectorization of a symmetric matrix (off-diagonals weighted by
/// sqrt 2), so Euclidean geometry downstairs is Frobenius geometry upstairs.
fn svec10(m: &Matrix4<f64>) -> [f64; 10] {
    let s = std::f64::consts::SQRT_2;
    [
        m[(0, 0)],
        m[(1, 1)],
        m[(2, 2)],
        m[(3, 3)],
        s * m[(0, 1)],
        s * m[(0, 2)],
        s * m[(0, 3)],
        s * m[(1, 2)],
        s * m[(1, 3)],
        s * m[(2, 3)],
    ]
}

/// A 4-dimensional space of symmetric matrices, with the coefficient vector
/// expressing E in the basis when E lies in the span.
#[derive(Debug, Clone)]
pub struct Sym4Space {
    basis: [Matrix4<f64>; 4],
    contains_e: Option<Vector4<f64>>,
}

impl Sym4Space {
    /// Symmetrizes the inputs, requires them independent, and detects E.
    pub fn new(basis: [Matrix4<f64>; 4]) -> Result<Sym4Space, SpectraError> {
        let basis = basis.map(|b| 0.5 * (b + b.transpose()));
        let rows = DMatrix::from_fn(4, 10, |i, j| svec10(&basis[i])[j]);
        let sv = rows.clone().svd(false, false).singular_values;
        let smax = sv.iter().fold(0.0_f64, |a, &s| a.max(s));
        let smin = sv.iter().fold(f64::INFINITY, |a, &s| a.min(s));
        if !(smin > 1e-8 * smax) {
            return Err(SpectraError::RankDeficientBasis);
        }
        // least-squares coefficients for E in the basis
        let target = DVector::from_row_slice(&svec10(&e_matrix()));
        let a = rows.transpose();
        let coeff = a.clone().svd(true, true).solve(&target, 1e-12).ok();
        let contains_e = coeff.and_then(|c| {
            let resid = (&a * &c - &target).norm();
            if resid <= 1e-12 * target.norm() {
                Some(Vector4::new(c[0], c[1], c[2], c[3]))
            } else {
                None
            }
        });
        Ok(Sym4Space { basis, contains_e })
    }

    pub fn basis(&self) -> &[Matrix4<f64>; 4] {
        &self.basis
    }

    /// Coefficients of E in the basis, when E lies in the span.
    pub fn e_coefficients(&self) -> Option<Vector4<f64>> {
        self.contains_e
    }

    pub fn matrix_at(&self, t: &Vector4<f64>) -> Matrix4<f64> {
        let mut m = Matrix4::zeros();
        for (ti, b) in t.iter().zip(self.basis.iter()) {
            m += b * *ti;
        }
        m
    }
}

/// det of the pencil at t; a quartic form in t.
pub fn symmetroid_det(space: &Sym4Space, t: &Vector4<f64>) -> f64 {
    space.matrix_at(t).determinant()
}

/// Counts of real rank-2 points (a) and positive semidefinite ones (b).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SpectraType {
    pub a: usize,
    pub b: usize,
}

/// Solves for the nodes and tallies the type. Refuses non-generic node
/// configurations (collided multiplicities, odd counts, missing nodes), for
/// which the pair (a, b) is not well defined.
pub fn compute_type(
    space: &Sym4Space,
    seed: u64,
    opts: &TrackOptions,
) -> Result<(SpectraType, Vec<NodeSolution>), SpectraError> {
    let nodes = solve_symmetroid_nodes(&space.basis, seed, opts)?;
    let mult: usize = nodes.iter().map(|n| n.multiplicity).sum();
    if mult != 10 {
        return Err(SpectraError::NonGeneric(format!(
            "node multiplicities sum to {mult}, expected 10"
        )));
    }
    if nodes.iter().any(|n| n.multiplicity > 1) {
        return Err(SpectraError::NonGeneric("node multiplicities collide".into()));
    }
    if nodes.iter().any(|n| n.condition > 1e10) {
        return Err(SpectraError::NonGeneric("node condition exceeds 1e10".into()));
    }
    let a = nodes.iter().filter(|n| n.real).count();
    let b = nodes.iter().filter(|n| n.psd == Some(true)).count();
    if a % 2 != 0 || b % 2 != 0 {
        return Err(SpectraError::NonGeneric(format!("odd type counts ({a}, {b})")));
    }
    Ok((SpectraType { a, b }, nodes))
}

fn min_eig(m: &Matrix4<f64>) -> (f64, Vector4<f64>) {
    let eig = nalgebra::SymmetricEigen::new(*m);
    let mut k = 0;
    for i in 1..4 {
        if eig.eigenvalues[i] < eig.eigenvalues[k] {
            k = i;
        }
    }
    (eig.eigenvalues[k], eig.eigenvectors.column(k).into_owned())
}

/// Projected gradient ascent of lambda_min over the unit sphere of the space,
/// then a boundary walk and bisection to a point with lambda_min = 0 and the
/// other three eigenvalues positive.
fn find_boundary_rank3(
    space: &Sym4Space,
    rng: &mut ChaCha8Rng,
    starts: usize,
) -> Option<Vector4<f64>> {
    let unit = |v: Vector4<f64>| v / v.norm();
    for _ in 0..starts {
        let mut c = unit(Vector4::from_fn(|_, _| rng.gen::<f64>() * 2.0 - 1.0));
        let mut step = 0.1;
        let (mut lam, mut vmin) = min_eig(&space.matrix_at(&c));
        let mut interior = false;
        for _ in 0..300 {
            if lam > 1e-4 * space.matrix_at(&c).norm() {
                interior = true;
                break;
            }
            let grad = Vector4::from_fn(|i, _| (vmin.transpose() * space.basis[i] * vmin)[0]);
            let g_perp = grad - c * grad.dot(&c);
            if g_perp.norm() < 1e-14 {
                break;
            }
            let cand = unit(c + g_perp * (step / g_perp.norm()));
            let (lam2, v2) = min_eig(&space.matrix_at(&cand));
            if lam2 > lam {
                c = cand;
                lam = lam2;
                vmin = v2;
                step = (step * 1.3).min(0.5);
            } else {
                step *= 0.5;
                if step < 1e-10 {
                    break;
                }
            }
        }
        if !interior {
            continue;
        }
        // walk outward until lambda_min changes sign, then bisect onto the boundary
        'dirs: for _ in 0..6 {
            let d = unit(Vector4::from_fn(|_, _| rng.gen::<f64>() * 2.0 - 1.0));
            let lam_at = |s: f64| min_eig(&space.matrix_at(&unit(c + d * s))).0;
            let mut lo = 0.0;
            let mut hi = None;
            let mut s = 0.1;
            while s < 30.0 {
                if lam_at(s) < 0.0 {
                    hi = Some(s);
                    break;
                }
                lo = s;
                s *= 2.0;
            }
            let Some(mut hi) = hi else { continue 'dirs };
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if lam_at(mid) < 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            let cb = unit(c + d * lo);
            let m = space.matrix_at(&cb);
            let mut eig: Vec<f64> = nalgebra::SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
            eig.sort_by(|x, y| x.partial_cmp(y).unwrap());
            let top = eig[3].abs().max(1e-300);
            // rank 3: exactly one vanishing eigenvalue, rest safely positive
            if eig[0].abs() < 1e-10 * top && eig[1] > 1e-6 * top {
                return Some(cb);
            }
        }
    }
    None
}

/// Congruence-transforms the space so it contains E, preserving ranks,
/// semidefiniteness, and hence the type. A space already containing E is
/// returned unchanged.
pub fn adapt_contain_e(space: &Sym4Space, seed: u64) -> Result<Sym4Space, SpectraError> {
    if space.contains_e.is_some() {
        return Ok(space.clone());
    }
    let starts = 100;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c = find_boundary_rank3(space, &mut rng, starts)
        .ok_or(SpectraError::NoBoundaryRank3Point(starts))?;
    let p = space.matrix_at(&c);
    let eig = nalgebra::SymmetricEigen::new(p);
    let mut idx: Vec<usize> = (0..4).collect();
    idx.sort_by(|&i, &j| eig.eigenvalues[j].partial_cmp(&eig.eigenvalues[i]).unwrap());
    // columns: kernel vector, then eigenvectors scaled to unit eigenvalue
    let mut g = Matrix4::zeros();
    g.set_column(0, &eig.eigenvectors.column(idx[3]));
    for k in 0..3 {
        let lam = eig.eigenvalues[idx[k]];
        debug_assert!(lam > 0.0);
        g.set_column(k + 1, &(eig.eigenvectors.column(idx[k]) / lam.sqrt()));
    }
    let new_basis = space.basis.map(|b| g.transpose() * b * g);
    let adapted = Sym4Space::new(new_basis)?;
    if adapted.contains_e.is_none() {
        return Err(SpectraError::NoBoundaryRank3Point(starts));
    }
    Ok(adapted)
}

/// The dual-side linear subspace carrying the space's matrices, with the
/// fiber coordinate set to zero.
pub fn borel_from_space(space: &Sym4Space) -> Result<LinearSubspace, SpectraError> {
    if space.contains_e.is_none() {
        return Err(SpectraError::MissingE);
    }
    let basis: Vec<Vec11> = space
        .basis
        .iter()
        .map(|b| DualLegPoint::new(0.0, b).coords())
        .collect();
    Ok(LinearSubspace::new(Side::Dual, basis)?)
}

/// Reads the matrices back off a dual subspace; requires the class of E
/// inside (the subspace must pass through the image of p_e).
pub fn space_from_borel(gamma: &LinearSubspace) -> Result<Sym4Space, SpectraError> {
    assert_eq!(gamma.side(), Side::Dual, "matrix spaces live on the dual side");
    if gamma.dim() != 4 {
        return Err(SpectraError::RankDeficientBasis);
    }
    let mats: Vec<Matrix4<f64>> = gamma
        .basis()
        .iter()
        .map(|v| DualLegPoint::from_coords(v).z_matrix())
        .collect();
    let space = Sym4Space::new([mats[0], mats[1], mats[2], mats[3]])
        .map_err(|_| SpectraError::MissingPe)?;
    if space.contains_e.is_none() {
        return Err(SpectraError::MissingPe);
    }
    Ok(space)
}
