//! The dual side of the construction: points (l, Z) pairing with symmetric
//! motion-variety points through the bilinear sphere condition, the rank-2
//! cone and its 2:1 factorization map, and linear-subspace duality.
//!
//! Coordinate layouts used throughout:
//!   primal (symmetric slice): (h, m11, m22, m33, m12, m13, m23, x1, x2, x3, r)
//!   dual:                     (l, z00, z11, z22, z33, s01, s02, s03, s12, s13, s23)
//! with z_ii = Z_ii / 2 and s_ij = Z_ij for i < j.

use nalgebra::{DMatrix, Matrix4, SMatrix, SVector, Vector3, Vector4};
use num_complex::Complex64;
use thiserror::Error;

use crate::study::StudyPoint;

pub type Vec11 = SVector<f64, 11>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LegSpaceError {
    #[error("point violates the symmetric-slice conditions (M = Mt, x = y)")]
    NotOnS,
    #[error("matrix has numerical rank {0}, expected exactly 2")]
    RankMismatch(usize),
    #[error("leg at infinity (Z00 vanishes)")]
    LegAtInfinity,
    #[error("dual point has no real factorization")]
    ComplexLeg,
    #[error("spanning set is rank-deficient")]
    DegenerateBasis,
    #[error("projection restricted to the subspace is not injective")]
    NonUniqueLift,
    #[error("matrix class does not lie in the projected subspace")]
    LiftOutsideImage,
}

/// A projective dual point (l, Z) with Z symmetric, stored as its upper
/// triangle so symmetry is exact: [Z00, Z01, Z02, Z03, Z11, Z12, Z13, Z22, Z23, Z33].
#[derive(Debug, Clone, PartialEq)]
pub struct DualLegPoint {
    pub l: f64,
    z: [f64; 10],
}

const UPPER: [(usize, usize); 10] =
    [(0, 0), (0, 1), (0, 2), (0, 3), (1, 1), (1, 2), (1, 3), (2, 2), (2, 3), (3, 3)];

impl DualLegPoint {
    /// Averages the off-diagonal pairs of `z`; exact symmetric input passes through.
    pub fn new(l: f64, z: &Matrix4<f64>) -> DualLegPoint {
        let mut tri = [0.0; 10];
        for (k, (i, j)) in UPPER.iter().enumerate() {
            tri[k] = if i == j { z[(*i, *j)] } else { 0.5 * (z[(*i, *j)] + z[(*j, *i)]) };
        }
        DualLegPoint { l, z: tri }
    }

    pub fn z_matrix(&self) -> Matrix4<f64> {
        let mut m = Matrix4::zeros();
        for (k, (i, j)) in UPPER.iter().enumerate() {
            m[(*i, *j)] = self.z[k];
            m[(*j, *i)] = self.z[k];
        }
        m
    }

    /// Pairing coordinates (l, z00..z33, s01..s23).
    pub fn coords(&self) -> Vec11 {
        let z = &self.z;
        Vec11::from([
            self.l,
            0.5 * z[0], // z00
            0.5 * z[4], // z11
            0.5 * z[7], // z22
            0.5 * z[9], // z33
            z[1], z[2], z[3], // s01 s02 s03
            z[5], z[6], // s12 s13
            z[8], // s23
        ])
    }

    pub fn from_coords(v: &Vec11) -> DualLegPoint {
        DualLegPoint {
            l: v[0],
            z: [
                2.0 * v[1], // Z00
                v[5], v[6], v[7], // Z01 Z02 Z03
                2.0 * v[2], // Z11
                v[8], v[9], // Z12 Z13
                2.0 * v[3], // Z22
                v[10], // Z23
                2.0 * v[4], // Z33
            ],
        }
    }

    pub fn scaled(&self, k: f64) -> DualLegPoint {
        let mut z = self.z;
        for e in &mut z {
            *e *= k;
        }
        DualLegPoint { l: k * self.l, z }
    }
}

/// The distinguished dual point (l = -2, Z = diag(0, 2, 2, 2)); it cuts out
/// the trace hyperplane h + m11 + m22 + m33 = 0 containing the involution slice.
pub fn p_e() -> DualLegPoint {
    DualLegPoint::new(-2.0, &Matrix4::from_diagonal(&Vector4::new(0.0, 2.0, 2.0, 2.0)))
}

/// E = diag(0, 1, 1, 1), the matrix class of `p_e`.
pub fn e_matrix() -> Matrix4<f64> {
    Matrix4::from_diagonal(&Vector4::new(0.0, 1.0, 1.0, 1.0))
}

/// A leg: platform point, base point, squared length.
#[derive(Debug, Clone, PartialEq)]
pub struct Leg {
    pub a: Vector3<f64>,
    pub b: Vector3<f64>,
    pub d2: f64,
}

impl Leg {
    /// The partner with platform and base roles exchanged; same length.
    pub fn swapped(&self) -> Leg {
        Leg { a: self.b, b: self.a, d2: self.d2 }
    }

    pub fn has_negative_length(&self, tol: f64) -> bool {
        self.d2 < -tol
    }
}

/// Coordinates of a symmetric-slice point, symmetrized after checking the
/// slice conditions to `tol`.
pub fn sym_coords(sigma: &StudyPoint, tol: f64) -> Result<Vec11, LegSpaceError> {
    let scale = sigma
        .coords()
        .iter()
        .fold(0.0_f64, |acc, c| acc.max(c.abs()))
        .max(1e-300);
    if (sigma.m - sigma.m.transpose()).norm() > tol * scale
        || (sigma.x - sigma.y).norm() > tol * scale
    {
        return Err(LegSpaceError::NotOnS);
    }
    let m = 0.5 * (sigma.m + sigma.m.transpose());
    let x = 0.5 * (sigma.x + sigma.y);
    Ok(Vec11::from([
        sigma.h,
        m[(0, 0)], m[(1, 1)], m[(2, 2)],
        m[(0, 1)], m[(0, 2)], m[(1, 2)],
        x[0], x[1], x[2],
        sigma.r,
    ]))
}

/// The pairing as an 11x11 matrix P: value = dual_coords . P . primal_coords.
fn pairing_matrix() -> SMatrix<f64, 11, 11> {
    let mut p = SMatrix::<f64, 11, 11>::zeros();
    p[(0, 0)] = 1.0; // l * h
    p[(1, 10)] = 1.0; // z00 * r
    p[(2, 1)] = -2.0; // z11 * m11
    p[(3, 2)] = -2.0;
    p[(4, 3)] = -2.0;
    p[(5, 7)] = -2.0; // s0i * xi
    p[(6, 8)] = -2.0;
    p[(7, 9)] = -2.0;
    p[(8, 4)] = -2.0; // sij * mij
    p[(9, 5)] = -2.0;
    p[(10, 6)] = -2.0;
    p
}

fn pair_vecs(dual: &Vec11, primal: &Vec11) -> f64 {
    // written out so no 11x11 product is formed in the hot paths
    dual[0] * primal[0] + dual[1] * primal[10]
        - 2.0 * (dual[2] * primal[1] + dual[3] * primal[2] + dual[4] * primal[3])
        - 2.0 * (dual[5] * primal[7] + dual[6] * primal[8] + dual[7] * primal[9])
        - 2.0 * (dual[8] * primal[4] + dual[9] * primal[5] + dual[10] * primal[6])
}

/// The symmetric bilinear sphere condition l*h + (1/2) <Z, Q(sigma)>_F with
/// Q00 = r, Q0i = -2 x_i, Qij = -2 m_ij. Bilinear: no normalization is applied.
pub fn sbsc_pair(sigma: &StudyPoint, dual: &DualLegPoint) -> Result<f64, LegSpaceError> {
    let p = sym_coords(sigma, 1e-10)?;
    Ok(pair_vecs(&dual.coords(), &p))
}

/// Z = a bt + b at, the rank <= 2 image of the point pair. The l coordinate
/// is not determined by the map; it is set to 0 until fixed by a lift.
pub fn alpha(a: &Vector4<f64>, b: &Vector4<f64>) -> DualLegPoint {
    let z = a * b.transpose() + b * a.transpose();
    DualLegPoint::new(0.0, &z)
}

/// A factorization Z ∝ a bt + b at; `real` is true when a, b can be chosen real.
#[derive(Debug, Clone)]
pub struct FactorPair {
    pub a: Vector4<Complex64>,
    pub b: Vector4<Complex64>,
    pub real: bool,
}

/// Inverts `alpha` on a real symmetric matrix of numerical rank exactly 2.
/// Real factorization exists iff the two dominant eigenvalues have opposite
/// signs; otherwise the pair is complex conjugate.
pub fn alpha_inverse(z: &Matrix4<f64>, tol: f64) -> Result<FactorPair, LegSpaceError> {
    let sym = 0.5 * (z + z.transpose());
    let eig = nalgebra::SymmetricEigen::new(sym);
    let mut idx = [0usize, 1, 2, 3];
    idx.sort_by(|&i, &j| {
        eig.eigenvalues[j].abs().partial_cmp(&eig.eigenvalues[i].abs()).unwrap()
    });
    let lam = [eig.eigenvalues[idx[0]], eig.eigenvalues[idx[1]]];
    let tail = eig.eigenvalues[idx[2]].abs();
    let top = lam[0].abs().max(1e-300);
    if tail > tol * top {
        let rank = idx.iter().filter(|&&i| eig.eigenvalues[i].abs() > tol * top).count();
        return Err(LegSpaceError::RankMismatch(rank));
    }
    if lam[1].abs() <= tol * top {
        return Err(LegSpaceError::RankMismatch(1));
    }
    let u = eig.eigenvectors.column(idx[0]).into_owned();
    let v = eig.eigenvectors.column(idx[1]).into_owned();
    let cvec = |w: &Vector4<f64>, s: Complex64| w.map(|e| s * e);
    if lam[0] * lam[1] < 0.0 {
        // signature (1,1): order the pair as (positive, negative)
        let (lp, up, lm, um) = if lam[0] > 0.0 { (lam[0], u, lam[1], v) } else { (lam[1], v, lam[0], u) };
        let su = Complex64::new(lp.sqrt(), 0.0);
        let sv = Complex64::new((-lm).sqrt(), 0.0);
        Ok(FactorPair {
            a: cvec(&up, su) + cvec(&um, sv),
            b: cvec(&up, su) - cvec(&um, sv),
            real: true,
        })
    } else {
        let su = Complex64::new(lam[0].abs().sqrt(), 0.0);
        let sv = Complex64::new(0.0, lam[1].abs().sqrt());
        let a = cvec(&u, su) + cvec(&v, sv);
        let b = a.map(|e| e.conj());
        Ok(FactorPair { a, b, real: false })
    }
}

/// Recovers the leg of a dual point carrying a meaningful l: scale so that
/// Z00 = 2, factor, normalize a0 = b0 = 1, and read off d2 = <a,a> + <b,b> - l.
pub fn leg_from_dual(dual: &DualLegPoint, tol: f64) -> Result<Leg, LegSpaceError> {
    let z = dual.z_matrix();
    let scale = z.norm().max(1e-300);
    if z[(0, 0)].abs() < tol * scale {
        return Err(LegSpaceError::LegAtInfinity);
    }
    let k = 2.0 / z[(0, 0)];
    let zn = k * z;
    let ln = k * dual.l;
    let f = alpha_inverse(&zn, tol)?;
    if !f.real {
        return Err(LegSpaceError::ComplexLeg);
    }
    let a = f.a.map(|e| e.re);
    let b = f.b.map(|e| e.re);
    // a0 b0 = Z00/2 = 1, so both are nonzero
    let a3 = Vector3::new(a[1], a[2], a[3]) / a[0];
    let b3 = Vector3::new(b[1], b[2], b[3]) / b[0];
    Ok(Leg { a: a3, b: b3, d2: a3.dot(&a3) + b3.dot(&b3) - ln })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Primal,
    Dual,
}

impl Side {
    pub fn opposite(self) -> Side {
        match self {
            Side::Primal => Side::Dual,
            Side::Dual => Side::Primal,
        }
    }
}

/// A linear subspace of either 11-coordinate projective space, held as an
/// orthonormal spanning set.
#[derive(Debug, Clone)]
pub struct LinearSubspace {
    side: Side,
    basis: Vec<Vec11>,
}

const RANK_TOL: f64 = 1e-8;

fn orthonormal_rows(rows: &[Vec11], rank_must_match: bool) -> Result<Vec<Vec11>, LegSpaceError> {
    let m = DMatrix::from_fn(rows.len().max(11), 11, |i, j| {
        if i < rows.len() { rows[i][j] } else { 0.0 }
    });
    let svd = m.svd(false, true);
    let vt = svd.v_t.as_ref().unwrap();
    let smax = svd.singular_values.iter().fold(0.0_f64, |a, &s| a.max(s));
    let mut out = Vec::new();
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s > RANK_TOL * smax {
            out.push(Vec11::from_fn(|j, _| vt[(k, j)]));
        }
    }
    if rank_must_match && out.len() != rows.len() {
        return Err(LegSpaceError::DegenerateBasis);
    }
    Ok(out)
}

impl LinearSubspace {
    /// Requires the given vectors to be linearly independent.
    pub fn new(side: Side, basis: Vec<Vec11>) -> Result<LinearSubspace, LegSpaceError> {
        if basis.is_empty() || basis.len() > 11 {
            return Err(LegSpaceError::DegenerateBasis);
        }
        Ok(LinearSubspace { side, basis: orthonormal_rows(&basis, true)? })
    }

    /// Span of an arbitrary set; rank deficiency just reduces the dimension.
    pub fn from_spanning(side: Side, vectors: &[Vec11]) -> Result<LinearSubspace, LegSpaceError> {
        let basis = orthonormal_rows(vectors, false)?;
        if basis.is_empty() {
            return Err(LegSpaceError::DegenerateBasis);
        }
        Ok(LinearSubspace { side, basis })
    }

    pub fn side(&self) -> Side {
        self.side
    }

    pub fn basis(&self) -> &[Vec11] {
        &self.basis
    }

    /// Linear (not projective) dimension.
    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn proj_dim(&self) -> usize {
        self.basis.len() - 1
    }

    pub fn contains(&self, v: &Vec11, tol: f64) -> bool {
        let mut resid = *v;
        for b in &self.basis {
            resid -= b * b.dot(v);
        }
        resid.norm() <= tol * v.norm().max(1e-300)
    }

    /// Span of self and one more vector.
    pub fn join(&self, v: &Vec11) -> Result<LinearSubspace, LegSpaceError> {
        let mut rows = self.basis.clone();
        rows.push(*v);
        LinearSubspace::from_spanning(self.side, &rows)
    }
}

/// The pairing-orthogonal complement on the opposite side. Projective
/// dimensions satisfy dim V + dim V_perp = 9; applying it twice returns V.
pub fn dual_complement(v: &LinearSubspace) -> Result<LinearSubspace, LegSpaceError> {
    let p = pairing_matrix();
    // rows of the annihilator system: each basis vector paired against the unknown
    let rows: Vec<Vec11> = v
        .basis
        .iter()
        .map(|b| match v.side {
            // unknown w is dual: w . P . b  ->  row = (P b)
            Side::Primal => p * b,
            // unknown s is primal: b . P . s  ->  row = (Pt b)
            Side::Dual => p.transpose() * b,
        })
        .collect();
    let m = DMatrix::from_fn(11, 11, |i, j| if i < rows.len() { rows[i][j] } else { 0.0 });
    let svd = m.svd(false, true);
    let vt = svd.v_t.as_ref().unwrap();
    let smax = svd.singular_values.iter().fold(0.0_f64, |a, &s| a.max(s));
    let mut basis = Vec::new();
    for k in 0..11 {
        let s = if k < svd.singular_values.len() { svd.singular_values[k] } else { 0.0 };
        if s <= RANK_TOL * smax {
            basis.push(Vec11::from_fn(|j, _| vt[(k, j)]));
        }
    }
    if basis.len() != 11 - v.basis.len() {
        return Err(LegSpaceError::DegenerateBasis);
    }
    LinearSubspace::new(v.side.opposite(), basis)
}

/// Drops the l coordinate (sets it to 0, the canonical fiber representative).
pub fn pi_project(dual: &DualLegPoint) -> DualLegPoint {
    DualLegPoint { l: 0.0, z: dual.z }
}

/// The unique point of `gamma_tilde` whose matrix class is `z`: solves for a
/// basis combination matching z up to scale on the (z, s) coordinates.
pub fn lift_into(
    gamma_tilde: &LinearSubspace,
    z: &Matrix4<f64>,
) -> Result<DualLegPoint, LegSpaceError> {
    assert_eq!(gamma_tilde.side(), Side::Dual, "lift target must be a dual subspace");
    let k = gamma_tilde.dim();
    let zv = DualLegPoint::new(0.0, z).coords();
    // unknowns (c_1..c_k, s): sum c_i basis_i has z-part equal to s * zv
    let mut m = DMatrix::zeros(10.max(k + 1), k + 1);
    for (col, b) in gamma_tilde.basis.iter().enumerate() {
        for row in 0..10 {
            m[(row, col)] = b[row + 1];
        }
    }
    for row in 0..10 {
        m[(row, k)] = -zv[row + 1];
    }
    let svd = m.clone().svd(false, true);
    let vt = svd.v_t.as_ref().unwrap();
    let sv = &svd.singular_values;
    let smax = sv.iter().fold(0.0_f64, |a, &s| a.max(s));
    let n = sv.len();
    if sv[n - 1] > 1e-8 * smax {
        return Err(LegSpaceError::LiftOutsideImage);
    }
    if n >= 2 && sv[n - 2] <= 1e-8 * smax {
        return Err(LegSpaceError::NonUniqueLift);
    }
    let sol = vt.row(n - 1);
    let s = sol[k];
    let combo_norm: f64 = (0..k).map(|i| sol[i] * sol[i]).sum::<f64>().sqrt();
    if s.abs() <= 1e-8 * combo_norm {
        // the matching direction has zero z-part, i.e. the projection center is hit
        return Err(LegSpaceError::NonUniqueLift);
    }
    let mut full = Vec11::zeros();
    for (i, b) in gamma_tilde.basis.iter().enumerate() {
        full += b * (sol[i] / s);
    }
    Ok(DualLegPoint::from_coords(&full))
}
